#include <doctest.h>

#include <zcantor/rohlin.hpp>

#include <random>

using namespace zcantor;

namespace {

SystemPoint cell_point(const SystemHandle& s, int K, uint64_t cell) {
    auto L = make_level(s, K);
    return make_point(s, K, L.decode(cell));
}

std::vector<LatticeVector> interval(Coord lo, Coord hi) {
    std::vector<LatticeVector> out;
    for (Coord v = lo; v <= hi; ++v) out.push_back(LatticeVector{v});
    return out;
}

size_t prototile_volume(const VoronoiRohlinPartition& P) {
    size_t total = 0;
    for (size_t k = 0; k < P.classes.size(); ++k)
        total += P.classes[k].cells.size() * P.prototiles[k].size();
    return total;
}

bool all_certified(const VoronoiRohlinPartition& P) {
    return P.classes_partition_centers && P.anchor_inside && P.cover_exact &&
           P.half_ball_inside && P.diameter_bound;
}

}  // namespace

TEST_CASE("classify_centers deepens a single-coset center set and splits it") {
    auto s = make_odometer({{2, 3, 5, 3}});
    auto D = make_clopen(3, {0});  // return set 30Z

    // the pattern window (4M = 64) outgrows Z/30, so the level deepens to
    // Z/90; the three occurrences of the coset all see the same pattern but
    // sit 30 apart, which forces the split into singleton cells
    auto classes = classify_centers(s, D, Rat(16));
    REQUIRE(classes.size() == 3);
    for (size_t k = 0; k < 3; ++k) {
        CHECK(classes[k].depth == 4);
        REQUIRE(classes[k].cells.size() == 1);
        CHECK(classes[k].cells[0] == 30 * k);
    }

    // before the separation split there is a single pattern class
    auto cc = detail::classify_cells(s, D, Rat(16), false);
    REQUIRE(cc.classes.size() == 1);
    CHECK(cc.classes[0] == std::vector<uint64_t>{0, 30, 60});
}

TEST_CASE("classify_centers separates cosets with different local geometry") {
    auto s = make_odometer({{2, 3, 5}});
    auto D = make_clopen(3, {0, 11});  // gaps 11 and 19 around the circle
    auto classes = classify_centers(s, D, Rat(5));
    REQUIRE(classes.size() == 2);
    CHECK(classes[0].depth == 3);  // modulus 30 > 4M = 20 already
    CHECK(classes[0].cells == std::vector<uint64_t>{0});
    CHECK(classes[1].cells == std::vector<uint64_t>{11});
}

TEST_CASE("classify_centers rejects irregular or empty center sets") {
    auto s = make_odometer({{2, 3}});
    CHECK_THROWS_AS(classify_centers(s, make_clopen(2, {0, 1}), Rat(4)),
                    std::invalid_argument);  // separation 1
    CHECK_THROWS_AS(classify_centers(s, make_clopen(2, std::vector<uint64_t>{}), Rat(4)),
                    std::invalid_argument);
}

TEST_CASE("integer prototile of a single class uses the lexicographic tie-break") {
    auto s = make_odometer({{2, 3}});
    auto D = make_clopen(2, {0});  // return set 6Z, one pattern class
    // boundary ties at +3 (centers 0 and 6) and -3 (centers -6 and 0) both go
    // to the lexicographically smaller center
    auto Z = integer_prototile(s, D, Rat(4), 0);
    CHECK(Z == interval(-2, 3));
    CHECK_THROWS_AS(integer_prototile(s, D, Rat(4), 1), std::out_of_range);
}

TEST_CASE("integer prototile awards cross-class ties to the smaller class index") {
    auto s = make_odometer({{4, 5}});
    auto D = make_clopen(2, {0, 8});  // gaps 8 and 12 modulo 20
    // two pattern classes: cells congruent to 0 and to 8; the boundary ties
    // at distance 4 (between them) and 6 (between them, shifted) both resolve
    // toward class 0
    auto Z0 = integer_prototile(s, D, Rat(7), 0);
    auto Z1 = integer_prototile(s, D, Rat(7), 1);
    CHECK(Z0 == interval(-6, 4));  // keeps both of its boundary ties
    CHECK(Z1 == interval(-3, 5));  // loses both of its boundary ties
    CHECK(Z0.size() + Z1.size() == 20);  // together they tile one period
}

TEST_CASE("build_partition: one-dimensional worked pipeline over Z/90") {
    auto s = make_odometer({{2, 3, 5, 3}});
    auto C = make_clopen(3, {0, 1});
    auto P = build_partition(s, C, cell_point(s, 3, 0), Rat(16));

    CHECK(P.depth == 4);
    CHECK(P.centers.cells == std::vector<uint64_t>{0, 30, 60});
    REQUIRE(P.classes.size() == 3);
    for (size_t k = 0; k < 3; ++k) {
        REQUIRE(P.classes[k].cells.size() == 1);
        CHECK(P.classes[k].cells[0] == 30 * k);
    }
    // the first class wins both of its boundary ties, the second wins one,
    // the third none: lengths 31, 30, 29 summing to the level size 90
    CHECK(P.prototiles[0] == interval(-15, 15));
    CHECK(P.prototiles[1] == interval(-14, 15));
    CHECK(P.prototiles[2] == interval(-14, 14));
    CHECK(prototile_volume(P) == 90);

    CHECK(all_certified(P));
    // interval prototiles shift by one with a symmetric difference of two
    CHECK(P.boundary_constant == doctest::Approx(2.0));
}

TEST_CASE("build_partition: two-coset centers keep their period structure") {
    auto s = make_odometer({{4, 5}});
    auto C = make_clopen(2, {0, 8});
    auto P = build_partition(s, C, cell_point(s, 2, 0), Rat(7));

    // C is already 7-regular, so the centers survive unchanged; the pattern
    // level is Z/100 and every class is a singleton cell
    CHECK(P.depth == 3);
    REQUIRE(P.classes.size() == 10);
    CHECK(P.centers.cells ==
          std::vector<uint64_t>{0, 8, 20, 28, 40, 48, 60, 68, 80, 88});

    // the cell at 0 wins both boundary ties, interior cells win one side,
    // and the cell at 88 loses both (its competitors wrap to class 0)
    CHECK(P.prototiles[0] == interval(-6, 4));
    CHECK(P.prototiles[1] == interval(-3, 6));
    CHECK(P.prototiles[9] == interval(-3, 5));
    CHECK(prototile_volume(P) == 100);
    CHECK(all_certified(P));
}

TEST_CASE("build_partition: tower system pipeline") {
    auto s = make_tower(make_odometer({{3}}), 2);  // moduli 2, 6, 18, ...
    auto C = whole_space(s, 1);
    auto P = build_partition(s, C, cell_point(s, 1, 0), Rat(3));

    // the greedy center construction keeps only the 6Z coset of 0; the
    // pattern window 4M = 12 deepens the level to Z/18 and splits the coset
    CHECK(P.depth == 3);
    CHECK(P.centers.cells == std::vector<uint64_t>{0, 6, 12});
    REQUIRE(P.classes.size() == 3);
    CHECK(P.prototiles[0] == interval(-3, 3));
    CHECK(P.prototiles[1] == interval(-2, 3));
    CHECK(P.prototiles[2] == interval(-2, 2));
    CHECK(prototile_volume(P) == 18);
    CHECK(all_certified(P));
}

TEST_CASE("build_partition: two-dimensional pipeline certifies") {
    auto s = make_odometer({{2, 2}, {3, 3}});
    auto C = whole_space(s, 1);
    auto P = build_partition(s, C, cell_point(s, 1, 0), Rat(4));

    auto L = make_level(s, P.depth);
    CHECK(prototile_volume(P) == L.size);
    CHECK(all_certified(P));
    CHECK(P.boundary_constant > 0.0);

    // every class sees a uniform return pattern out to the 4M ball
    auto ball = ball_points(2, Rat(16), true);
    for (const auto& Ck : P.classes) {
        auto ref = detail::local_pattern(L, P.centers, ball, Ck.cells.front());
        for (uint64_t c : Ck.cells)
            CHECK(detail::local_pattern(L, P.centers, ball, c) == ref);
    }

    // prototiles are sorted, duplicate-free and contain the origin
    LatticeVector zero(2);
    for (const auto& Z : P.prototiles) {
        CHECK(std::is_sorted(Z.begin(), Z.end()));
        CHECK(std::adjacent_find(Z.begin(), Z.end()) == Z.end());
        CHECK(std::binary_search(Z.begin(), Z.end(), zero));
    }
}

TEST_CASE("build_partition: random bases certify and rebuild identically") {
    std::mt19937 rng(511);
    std::vector<SystemHandle> systems = {
        make_odometer({{2, 3, 5, 3}}),
        make_odometer({{4, 5}}),
        make_tower(make_odometer({{3, 4}}), 2),
    };
    for (int trial = 0; trial < 12; ++trial) {
        const auto& s = systems[trial % systems.size()];
        int K = 2;
        auto L = make_level(s, K);
        std::uniform_int_distribution<uint64_t> pick(0, L.size - 1);
        std::vector<uint64_t> cells;
        for (int i = 0; i < 3; ++i) cells.push_back(pick(rng));
        std::sort(cells.begin(), cells.end());
        cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
        auto C = make_clopen(K, cells);
        auto x0 = cell_point(s, K, cells[0]);
        // smallest workable integer scale for this base (> 2 and beyond the
        // syndetic radius of C)
        auto r = syndetic_radius(s, C);
        long long m = 3;
        while (covering_cmp(r, Rat(m)) >= 0) ++m;
        Rat M(m);

        auto P = build_partition(s, C, x0, M);
        CHECK(all_certified(P));
        CHECK(prototile_volume(P) == make_level(s, P.depth).size);

        auto Q = build_partition(s, C, x0, M);
        REQUIRE(Q.classes.size() == P.classes.size());
        for (size_t k = 0; k < P.classes.size(); ++k) {
            CHECK(Q.classes[k].cells == P.classes[k].cells);
            CHECK(Q.prototiles[k] == P.prototiles[k]);
        }
    }
}

TEST_CASE("refine_against: trivial refinement leaves the partition unchanged") {
    auto s = make_odometer({{2, 3, 5, 3}});
    auto P = build_partition(s, make_clopen(3, {0, 1}), cell_point(s, 3, 0), Rat(16));
    auto R = refine_against(P, {whole_space(s, 1)});
    CHECK(R.depth == P.depth);
    REQUIRE(R.classes.size() == P.classes.size());
    for (size_t k = 0; k < P.classes.size(); ++k) {
        CHECK(R.classes[k].cells == P.classes[k].cells);
        CHECK(R.prototiles[k] == P.prototiles[k]);
    }
    CHECK(all_certified(R));
}

TEST_CASE("refine_against: a deeper clopen half splits the touched classes") {
    auto s = make_odometer({{2, 3, 5, 3}});
    auto P = build_partition(s, make_clopen(3, {0, 1}), cell_point(s, 3, 0), Rat(16));

    auto A = make_clopen(5, {0});  // a single cell of Z/270
    auto R = refine_against(P, {A, complement(s, A)});

    // only the class through 0 meets both sides: {0} and {90, 180}
    CHECK(R.depth == 5);
    REQUIRE(R.classes.size() == 4);
    CHECK(R.classes[0].cells == std::vector<uint64_t>{0});
    CHECK(R.classes[1].cells == std::vector<uint64_t>{90, 180});
    CHECK(R.classes[2].cells == std::vector<uint64_t>{30, 120, 210});
    CHECK(R.classes[3].cells == std::vector<uint64_t>{60, 150, 240});
    CHECK(R.prototiles[0] == R.prototiles[1]);  // pieces inherit the prototile
    CHECK(R.prototiles[0] == interval(-15, 15));
    CHECK(prototile_volume(R) == 270);
    CHECK(all_certified(R));
}

TEST_CASE("refine_against: accepts a partition of the centers") {
    auto s = make_odometer({{2, 3, 5, 3}});
    auto P = build_partition(s, make_clopen(3, {0, 1}), cell_point(s, 3, 0), Rat(16));
    auto R = refine_against(
        P, {make_clopen(4, {0}), make_clopen(4, std::vector<uint64_t>{30, 60})});
    REQUIRE(R.classes.size() == 3);
    CHECK(R.classes[0].cells == std::vector<uint64_t>{0});
    CHECK(R.classes[1].cells == std::vector<uint64_t>{30});
    CHECK(R.classes[2].cells == std::vector<uint64_t>{60});
    CHECK(all_certified(R));
}

TEST_CASE("refine_against rejects families that do not partition") {
    auto s = make_odometer({{2, 3, 5, 3}});
    auto P = build_partition(s, make_clopen(3, {0, 1}), cell_point(s, 3, 0), Rat(16));

    // covers neither the space nor exactly the centers
    CHECK_THROWS_AS(refine_against(P, {make_clopen(1, {0})}), std::invalid_argument);
    // overlapping family
    CHECK_THROWS_AS(refine_against(P, {whole_space(s, 1), make_clopen(1, {0})}),
                    std::invalid_argument);
    // empty family
    CHECK_THROWS_AS(refine_against(P, {}), std::invalid_argument);
}
