#include <doctest.h>

#include <zcantor/odometer.hpp>

#include <random>

using namespace zcantor;

namespace {

LatticeVector random_vec(std::mt19937_64& rng, size_t d, Coord lo, Coord hi) {
    LatticeVector v(d);
    for (size_t i = 0; i < d; ++i) v[i] = std::uniform_int_distribution<Coord>(lo, hi)(rng);
    return v;
}

}  // namespace

TEST_CASE("moduli products and implicit schedule extension") {
    auto S = make_odometer({{2, 3, 5}});
    CHECK(moduli(S, 0) == std::vector<Coord>{1});
    CHECK(moduli(S, 3) == std::vector<Coord>{30});
    CHECK(moduli(S, 4) == std::vector<Coord>{150});  // last entry repeats
    auto T = make_odometer({{2, 2}, {3, 3}});
    CHECK(moduli(T, 2) == std::vector<Coord>({4, 9}));
}

TEST_CASE("action wraps modulo the level") {
    auto S = make_odometer({{2, 3}});
    auto L = make_level(S, 2);
    CHECK(act_cell(L, LatticeVector{1}, 5) == 0);
    CHECK(act_cell(L, LatticeVector{-1}, 0) == 5);
    CHECK(act_cell(L, LatticeVector{13}, 0) == 1);
}

TEST_CASE("tower action runs the carry rule") {
    auto base = make_odometer({{3}});
    auto tw = make_tower(base, 2);
    CHECK(moduli(tw, 1) == std::vector<Coord>{2});
    CHECK(moduli(tw, 2) == std::vector<Coord>{6});
    auto L = make_level(tw, 2);
    // label = u + 2 x; x = 1, u = 1 -> label 3; moving by 1 carries: u -> 0, x -> 2
    CHECK(act_cell(L, LatticeVector{1}, 3) == 4);
    // x = 2, u = 1 -> label 5; carry wraps the inner odometer: x -> 0, u -> 0
    CHECK(act_cell(L, LatticeVector{1}, 5) == 0);
}

TEST_CASE("tower of a tower composes heights") {
    auto base = make_odometer({{5}});
    auto tt = make_tower(make_tower(base, 2), 3);
    CHECK(moduli(tt, 1) == std::vector<Coord>{3});
    CHECK(moduli(tt, 2) == std::vector<Coord>{6});
    CHECK(moduli(tt, 3) == std::vector<Coord>{30});
    CHECK(tower_conjugacy_check(tt, 3));
}

TEST_CASE("tower conjugacy with the prepended odometer") {
    auto tw = make_tower(make_odometer({{3}}), 2);
    CHECK(tower_conjugacy_check(tw, 3));
    auto tw2 = make_tower(make_odometer({{2, 3}, {3, 2}}), 2);
    CHECK(tower_conjugacy_check(tw2, 3));
}

TEST_CASE("action law act(v, act(w, x)) = act(v + w, x)") {
    std::mt19937_64 rng(101);
    std::vector<SystemHandle> systems = {
        make_odometer({{2, 3, 5}}),
        make_odometer({{2, 2}, {3, 3}}),
        make_tower(make_odometer({{3, 4}}), 2),
        make_tower(make_odometer({{2, 3}, {2, 2}}), 3),
    };
    for (auto& S : systems) {
        size_t d = dim(S);
        for (int K = 1; K <= 3; ++K) {
            auto L = make_level(S, K);
            for (int trial = 0; trial < 40; ++trial) {
                uint64_t cell = std::uniform_int_distribution<uint64_t>(0, L.size - 1)(rng);
                auto v = random_vec(rng, d, -20, 20);
                auto w = random_vec(rng, d, -20, 20);
                CHECK(act_cell(L, v, act_cell(L, w, cell)) == act_cell(L, v + w, cell));
            }
        }
    }
}

TEST_CASE("level action is transitive") {
    auto S = make_tower(make_odometer({{2, 3}, {3, 2}}), 2);
    auto L = make_level(S, 2);
    std::vector<char> seen(L.size, 0);
    std::vector<uint64_t> frontier = {0};
    seen[0] = 1;
    size_t count = 1;
    while (!frontier.empty()) {
        std::vector<uint64_t> next;
        for (uint64_t c : frontier) {
            for (size_t axis = 0; axis < dim(S); ++axis) {
                for (Coord sgn : {1, -1}) {
                    LatticeVector e(dim(S));
                    e[axis] = sgn;
                    uint64_t t = act_cell(L, e, c);
                    if (!seen[t]) {
                        seen[t] = 1;
                        ++count;
                        next.push_back(t);
                    }
                }
            }
        }
        frontier = std::move(next);
    }
    CHECK(count == L.size);
}

TEST_CASE("freeness inside the faithfulness window") {
    auto S = make_odometer({{2, 3}, {3, 2}});
    Rat R(2);
    int K = depth_for_radius(S, R);
    auto L = make_level(S, K);
    auto n = moduli(S, K);
    CHECK(Rat(*std::min_element(n.begin(), n.end())) > Rat(2) * R + Rat(1));
    for (uint64_t cell = 0; cell < L.size; ++cell) {
        for (auto& v : window_points(dim(S), 2)) {
            if (sup_norm(v) == 0) continue;
            CHECK(act_cell(L, v, cell) != cell);
        }
    }
}

TEST_CASE("return set of a clopen set") {
    auto S = make_odometer({{2, 3}});
    auto C = make_clopen(2, {0, 1});
    auto x = make_point(S, 2, {4});
    auto R = return_set(S, C, x);
    CHECK(R.periods == std::vector<Coord>{6});
    REQUIRE(R.base.size() == 2);
    CHECK(R.base[0] == LatticeVector{2});
    CHECK(R.base[1] == LatticeVector{3});
}

TEST_CASE("return set membership agrees with the action") {
    std::mt19937_64 rng(211);
    std::vector<SystemHandle> systems = {
        make_odometer({{2, 3, 5}}),
        make_tower(make_odometer({{3, 3}, {2, 2}}), 2),
    };
    for (auto& S : systems) {
        size_t d = dim(S);
        auto L = make_level(S, 2);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<uint64_t> cells;
            for (uint64_t c = 0; c < L.size; ++c)
                if (rng() % 3 == 0) cells.push_back(c);
            if (cells.empty()) cells.push_back(0);
            auto C = make_clopen(2, cells);
            auto x = make_point(S, 2, L.decode(std::uniform_int_distribution<uint64_t>(0, L.size - 1)(rng)));
            auto R = return_set(S, C, x);
            for (int probe = 0; probe < 50; ++probe) {
                auto v = random_vec(rng, d, -20, 20);
                auto y = act(S, v, x);
                CHECK(R.contains(v) == C.contains(L.encode(y.residues)));
            }
        }
    }
}

TEST_CASE("return set cocycle consistency under translation of the point") {
    auto S = make_odometer({{2, 3, 5}});
    auto C = make_clopen(2, {0, 2, 3});
    auto x = make_point(S, 2, {1});
    LatticeVector w{7};
    auto R1 = return_set(S, C, act(S, w, x));
    auto R2 = return_set(S, C, x);
    // R_C(act(w, x)) = R_C(x) - w
    for (auto& b : R1.base) CHECK(R2.contains(b + w));
    CHECK(R1.base.size() == R2.base.size());
}

TEST_CASE("refine expands cells into fibers") {
    auto S = make_odometer({{2, 3}});
    auto C = make_clopen(1, {0});
    auto R = refine(S, C, 2);
    CHECK(R.depth == 2);
    CHECK(R.cells == std::vector<uint64_t>({0, 2, 4}));
}

TEST_CASE("normalize reduces to minimal depth") {
    auto S = make_odometer({{2, 3}});
    auto C = make_clopen(2, {0, 2, 4});
    auto N = normalize(S, C);
    CHECK(N.depth == 1);
    CHECK(N.cells == std::vector<uint64_t>{0});
    // a set that is not a union of coarser cells stays put
    auto D = normalize(S, make_clopen(2, {0, 2}));
    CHECK(D.depth == 2);
}

TEST_CASE("normalize after refine is the identity") {
    std::mt19937_64 rng(307);
    auto S = make_tower(make_odometer({{2, 3}}), 2);
    auto L = make_level(S, 2);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<uint64_t> cells;
        for (uint64_t c = 0; c < L.size; ++c)
            if (rng() % 2) cells.push_back(c);
        if (cells.empty()) cells.push_back(rng() % L.size);
        auto C = normalize(S, make_clopen(2, cells));
        auto R = normalize(S, refine(S, C, 4));
        CHECK(R.depth == C.depth);
        CHECK(R.cells == C.cells);
    }
}

TEST_CASE("set algebra on clopen sets") {
    auto S = make_odometer({{2, 3}});
    auto A = make_clopen(1, {0});
    auto B = make_clopen(2, {1, 2});
    auto U = set_union(S, A, B);
    CHECK(U.cells == std::vector<uint64_t>({0, 1, 2, 4}));
    auto I = set_intersection(S, A, B);
    CHECK(I.cells == std::vector<uint64_t>({2}));
    auto D = set_difference(S, A, B);
    CHECK(D.cells == std::vector<uint64_t>({0, 4}));
    auto comp = complement(S, A);
    CHECK(comp.cells == std::vector<uint64_t>({1}));
    CHECK(clopen_equal(S, set_union(S, A, comp), whole_space(S, 1)));
}

TEST_CASE("depth_for_radius respects the 2R+1 bound") {
    auto S = make_odometer({{2, 2}, {3, 3}});
    int K = depth_for_radius(S, Rat(16));
    auto n = moduli(S, K);
    CHECK(Rat(*std::min_element(n.begin(), n.end())) > Rat(33));
    auto n_prev = moduli(S, K - 1);
    CHECK(Rat(*std::min_element(n_prev.begin(), n_prev.end())) <= Rat(33));
}
