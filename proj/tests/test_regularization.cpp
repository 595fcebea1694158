#include <doctest.h>

#include <zcantor/regularization.hpp>

#include <random>

using namespace zcantor;

namespace {

SystemPoint cell_point(const SystemHandle& s, int K, uint64_t cell) {
    auto L = make_level(s, K);
    return make_point(s, K, L.decode(cell));
}

}  // namespace

TEST_CASE("syndetic radius of reference clopen sets") {
    auto S = make_odometer({{2, 3}});
    auto r1 = syndetic_radius(S, make_clopen(2, {0}));  // return set 6Z
    CHECK(r1.exact);
    CHECK(r1.sq == BigRat(9));
    auto r2 = syndetic_radius(S, make_clopen(2, {0, 1}));  // gaps 1 and 5
    CHECK(r2.sq == BigRat(25, 4));
    auto r3 = syndetic_radius(S, whole_space(S, 1));  // the full lattice
    CHECK(r3.sq == BigRat(1, 4));
    auto T = make_odometer({{2, 3, 5}});
    auto r4 = syndetic_radius(T, make_clopen(3, {0, 1}));  // gaps 1 and 29
    CHECK(r4.sq == BigRat(841, 4));
    CHECK_THROWS(syndetic_radius(S, make_clopen(1, {})));
}

TEST_CASE("separated partition splits close cosets and merges far ones") {
    auto S = make_odometer({{2, 3}});
    auto P1 = separate_partition(S, make_clopen(2, {0, 1}), Rat(4));
    REQUIRE(P1.size() == 2);
    CHECK(P1[0].cells == std::vector<uint64_t>{0});
    CHECK(P1[1].cells == std::vector<uint64_t>{1});
    auto P2 = separate_partition(S, make_clopen(2, {0, 3}), Rat(2));
    REQUIRE(P2.size() == 1);
    CHECK(P2[0].cells == std::vector<uint64_t>({0, 3}));
    auto P3 = separate_partition(S, make_clopen(2, {0}), Rat(4));
    REQUIRE(P3.size() == 1);
    CHECK(P3[0].cells == std::vector<uint64_t>{0});
}

TEST_CASE("separated partition deepens until the torus clears M") {
    auto S = make_odometer({{2, 3}});
    auto P = separate_partition(S, make_clopen(1, {0}), Rat(10));
    // the schedule extends as (2,3,3,...): modulus 6 at depth 2 fails
    // 6 > 10, modulus 18 at depth 3 clears it
    for (const auto& C : P) CHECK(C.depth == 3);
    uint64_t total = 0;
    for (const auto& C : P) total += C.cells.size();
    CHECK(total == 9);  // the depth-1 cell {0} has 9 fibers at depth 3
}

TEST_CASE("separated partition pieces have M-separated return sets") {
    std::mt19937_64 rng(5);
    std::vector<SystemHandle> systems = {make_odometer({{2, 3}}),
                                         make_odometer({{2, 2}, {3, 3}})};
    for (auto& S : systems) {
        auto L = make_level(S, 2);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<uint64_t> cells;
            for (uint64_t c = 0; c < L.size; ++c)
                if (rng() % 3 == 0) cells.push_back(c);
            if (cells.empty()) cells.push_back(rng() % L.size);
            auto C = make_clopen(2, cells);
            Rat M(3 + static_cast<long long>(trial % 3));
            auto P = separate_partition(S, C, M);
            // union reassembles C, pieces are disjoint
            ClopenSet U = P[0];
            for (size_t i = 1; i < P.size(); ++i) {
                CHECK(set_intersection(S, U, P[i]).cells.empty());
                U = set_union(S, U, P[i]);
            }
            CHECK(clopen_equal(S, U, C));
            auto x = cell_point(S, 2, cells[0]);
            for (const auto& piece : P) {
                auto R = return_set(S, piece, x);
                CHECK(cmp_sqrt(min_pairwise_distance_sq(R).dist_sq, M) > 0);
            }
        }
    }
}

TEST_CASE("anchored class comes first") {
    auto S = make_odometer({{2, 3}});
    auto C = make_clopen(2, {0, 1, 3});
    auto x0 = cell_point(S, 2, 3);
    auto P = separate_partition(S, C, Rat(4), x0);
    REQUIRE(!P.empty());
    CHECK(std::binary_search(P[0].cells.begin(), P[0].cells.end(), 3));
}

TEST_CASE("regular subset of the two-cell set in Z/30") {
    auto S = make_odometer({{2, 3, 5}});
    auto C = make_clopen(3, {0, 1});
    auto x0 = cell_point(S, 3, 0);
    auto D = build_regular_subset(S, C, x0, Rat(16));
    CHECK(D.depth == 3);
    CHECK(D.cells == std::vector<uint64_t>{0});
}

TEST_CASE("regular subset preconditions") {
    auto S = make_odometer({{2, 3, 5}});
    auto C = make_clopen(3, {0, 1});
    auto x0 = cell_point(S, 3, 0);
    CHECK_THROWS(build_regular_subset(S, C, x0, Rat(14)));       // below M_0 = 14.5
    CHECK_THROWS(build_regular_subset(S, C, x0, Rat(29, 2)));    // equal to M_0
    CHECK_THROWS(build_regular_subset(S, C, x0, Rat(2)));        // M too small outright
    CHECK_THROWS(build_regular_subset(S, C, cell_point(S, 3, 5), Rat(16)));  // anchor outside C
}

TEST_CASE("already-regular single cell is returned unchanged") {
    auto S = make_odometer({{2, 3}});
    auto C = make_clopen(2, {0});
    auto x0 = cell_point(S, 2, 0);
    auto D = build_regular_subset(S, C, x0, Rat(4));
    CHECK(clopen_equal(S, D, C));
}

TEST_CASE("regular subsets on random clopen sets") {
    std::mt19937_64 rng(11);
    std::vector<SystemHandle> systems = {make_odometer({{2, 3}}),
                                         make_odometer({{3, 2, 2}}),
                                         make_odometer({{2, 2}, {3, 3}})};
    int built = 0;
    for (auto& S : systems) {
        auto L = make_level(S, 2);
        for (int trial = 0; trial < 6; ++trial) {
            std::vector<uint64_t> cells;
            for (uint64_t c = 0; c < L.size; ++c)
                if (rng() % 2 == 0) cells.push_back(c);
            if (cells.empty()) cells.push_back(rng() % L.size);
            auto C = make_clopen(2, cells);
            auto x0 = cell_point(S, 2, cells[rng() % cells.size()]);
            auto M0 = syndetic_radius(S, C);
            long long M = static_cast<long long>(M0.value()) + 2;
            if (M < 3) M = 3;
            auto D = build_regular_subset(S, C, x0, Rat(M));
            ++built;
            // containment, anchoring, and regularity of the result
            CHECK(set_difference(S, D, refine(S, C, D.depth)).cells.empty());
            auto LD = make_level(S, D.depth);
            CHECK(D.contains(LD.encode(point_at_depth(S, x0, D.depth).residues)));
            auto rep = is_M_regular(return_set(S, D, x0), Rat(M));
            CHECK(rep.regular);
            // determinism
            auto D2 = build_regular_subset(S, C, x0, Rat(M));
            CHECK(D.depth == D2.depth);
            CHECK(D.cells == D2.cells);
        }
    }
    CHECK(built == 18);
}
