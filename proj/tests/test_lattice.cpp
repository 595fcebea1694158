#include <doctest.h>

#include <zcantor/lattice.hpp>

#include <random>

using namespace zcantor;

namespace {

// Independent oracle: squared distance by direct accumulation.
long long naive_dist_sq(const LatticeVector& a, const LatticeVector& b) {
    long long s = 0;
    for (size_t i = 0; i < a.dim(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

// Independent oracle: reduce each coordinate into [0, n_i) by repeated
// subtraction, then scan offsets in [-2,2]^d around the reduced vector.
long long naive_coset_dist_sq(const LatticeVector& v, const std::vector<Coord>& periods) {
    size_t d = v.dim();
    LatticeVector r(d);
    for (size_t i = 0; i < d; ++i) {
        Coord x = v[i];
        while (x < 0) x += periods[i];
        while (x >= periods[i]) x -= periods[i];
        r[i] = x;
    }
    long long best = -1;
    std::vector<Coord> k(d, -2);
    while (true) {
        long long s = 0;
        for (size_t i = 0; i < d; ++i) {
            Coord x = r[i] + k[i] * periods[i];
            s += x * x;
        }
        if (best < 0 || s < best) best = s;
        size_t axis = d;
        bool done = true;
        while (axis > 0) {
            --axis;
            if (++k[axis] <= 2) { done = false; break; }
            k[axis] = -2;
        }
        if (done) break;
    }
    return best;
}

PeriodicLatticeSet random_set(std::mt19937_64& rng, size_t d, Coord period_lo, Coord period_hi, size_t npts) {
    std::uniform_int_distribution<Coord> per(period_lo, period_hi);
    std::vector<Coord> periods(d);
    for (auto& p : periods) p = per(rng);
    std::vector<LatticeVector> pts;
    for (size_t i = 0; i < npts; ++i) {
        LatticeVector v(d);
        for (size_t j = 0; j < d; ++j) v[j] = std::uniform_int_distribution<Coord>(0, periods[j] - 1)(rng);
        pts.push_back(v);
    }
    return PeriodicLatticeSet(periods, pts);
}

}  // namespace

TEST_CASE("euclidean distance pythagorean triple") {
    CHECK(dist_sq(LatticeVector{0, 0}, LatticeVector{3, 4}) == 25);
    CHECK(euclidean_distance(LatticeVector{0, 0}, LatticeVector{3, 4}) == doctest::Approx(5.0));
}

TEST_CASE("distance squared matches naive oracle bit-exactly") {
    std::mt19937_64 rng(2026);
    for (int trial = 0; trial < 200; ++trial) {
        size_t d = 1 + trial % 3;
        LatticeVector a(d), b(d);
        for (size_t i = 0; i < d; ++i) {
            a[i] = std::uniform_int_distribution<Coord>(-1000, 1000)(rng);
            b[i] = std::uniform_int_distribution<Coord>(-1000, 1000)(rng);
        }
        CHECK(dist_sq(a, b) == naive_dist_sq(a, b));
    }
}

TEST_CASE("coset distance matches block-scan oracle") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        size_t d = 1 + trial % 3;
        std::vector<Coord> periods(d);
        LatticeVector v(d);
        for (size_t i = 0; i < d; ++i) {
            periods[i] = std::uniform_int_distribution<Coord>(1, 30)(rng);
            v[i] = std::uniform_int_distribution<Coord>(-60, 60)(rng);
        }
        CHECK(coset_dist_sq(v, periods) == naive_coset_dist_sq(v, periods));
    }
}

TEST_CASE("min pairwise distance on reference sets") {
    SUBCASE("single coset 10Z") {
        PeriodicLatticeSet S({10}, {LatticeVector{0}});
        CHECK(min_pairwise_distance_sq(S).dist_sq == 100);
    }
    SUBCASE("two diagonal cosets in 10Z^2") {
        PeriodicLatticeSet S({10, 10}, {LatticeVector{0, 0}, LatticeVector{5, 5}});
        CHECK(min_pairwise_distance_sq(S).dist_sq == 50);
    }
    SUBCASE("adjacent pair in 6Z") {
        PeriodicLatticeSet S({6}, {LatticeVector{0}, LatticeVector{1}});
        CHECK(min_pairwise_distance_sq(S).dist_sq == 1);
    }
}

TEST_CASE("min pairwise witness is a realized pair at the reported distance") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        auto S = random_set(rng, 1 + trial % 3, 4, 15, 1 + trial % 4);
        auto mp = min_pairwise_distance_sq(S);
        CHECK(S.contains(mp.a));
        CHECK(S.contains(mp.b));
        CHECK(mp.a != mp.b);
        CHECK(dist_sq(mp.a, mp.b) == mp.dist_sq);
    }
}

TEST_CASE("covering radius on reference sets") {
    SUBCASE("10Z has covering radius 5") {
        auto cr = covering_radius(PeriodicLatticeSet({10}, {LatticeVector{0}}));
        REQUIRE(cr.exact);
        CHECK(cr.sq == BigRat(25));
    }
    SUBCASE("10Z^2 grid has covering radius 5 sqrt 2") {
        auto cr = covering_radius(PeriodicLatticeSet({10, 10}, {LatticeVector{0, 0}}));
        REQUIRE(cr.exact);
        CHECK(cr.sq == BigRat(50));
    }
    SUBCASE("6Z with base 0,3 has covering radius 3/2") {
        auto cr = covering_radius(PeriodicLatticeSet({6}, {LatticeVector{0}, LatticeVector{3}}));
        REQUIRE(cr.exact);
        CHECK(cr.sq == BigRat(9, 4));
    }
}

TEST_CASE("covering radius witness attains the maximum") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 40; ++trial) {
        auto S = random_set(rng, 1 + trial % 3, 3, 12, 1 + trial % 3);
        auto cr = covering_radius(S);
        REQUIRE(cr.exact);
        CHECK(min_dist_sq_to_set(cr.deep_hole, S) == cr.sq);
        // grid lower bound never exceeds the exact value
        CHECK(BigRat(cr.grid_max_sq) <= cr.sq);
    }
}

TEST_CASE("translation invariance of metric queries") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        size_t d = 1 + trial % 3;
        auto S = random_set(rng, d, 4, 12, 1 + trial % 3);
        LatticeVector v(d);
        for (size_t i = 0; i < d; ++i) v[i] = std::uniform_int_distribution<Coord>(-25, 25)(rng);
        auto T = S.translated(v);
        CHECK(min_pairwise_distance_sq(S).dist_sq == min_pairwise_distance_sq(T).dist_sq);
        CHECK(covering_radius(S).sq == covering_radius(T).sq);
    }
}

TEST_CASE("covering radius is at least half the pairwise separation") {
    std::mt19937_64 rng(47);
    for (int trial = 0; trial < 30; ++trial) {
        auto S = random_set(rng, 1 + trial % 3, 4, 12, 1 + trial % 3);
        auto cr = covering_radius(S);
        auto mp = min_pairwise_distance_sq(S);
        REQUIRE(cr.exact);
        CHECK(cr.sq >= BigRat(BigInt(mp.dist_sq), BigInt(4)));
    }
}

TEST_CASE("grid distance transform matches brute force") {
    std::mt19937_64 rng(59);
    for (int trial = 0; trial < 20; ++trial) {
        size_t d = 1 + trial % 2;
        auto S = random_set(rng, d, 3, 9, 1 + trial % 3);
        auto grid = grid_distance_sq(S);
        // brute force per grid point
        std::vector<Coord> p(d, 0);
        size_t idx = 0;
        while (true) {
            LatticeVector q(d);
            for (size_t i = 0; i < d; ++i) q[i] = p[i];
            long long best = -1;
            for (auto& b : S.base) {
                long long c = coset_dist_sq(q - b, S.periods);
                if (best < 0 || c < best) best = c;
            }
            CHECK(grid[idx] == best);
            ++idx;
            size_t axis = d;
            bool done = true;
            while (axis > 0) {
                --axis;
                if (++p[axis] < S.periods[axis]) { done = false; break; }
                p[axis] = 0;
            }
            if (done) break;
        }
    }
}

TEST_CASE("ball enumeration strictness") {
    auto closed = ball_points(2, Rat(5), true);
    auto open = ball_points(2, Rat(5), false);
    LatticeVector v{3, 4};
    CHECK(std::find(closed.begin(), closed.end(), v) != closed.end());
    CHECK(std::find(open.begin(), open.end(), v) == open.end());
    // norm exactly 5: (+-5,0),(0,+-5) and the eight (+-3,+-4)/(+-4,+-3) points
    CHECK(closed.size() == open.size() + 12);
}

TEST_CASE("circumcenter of right triangle") {
    auto cc = circumcenter({LatticeVector{0, 0}, LatticeVector{10, 0}, LatticeVector{0, 10}});
    REQUIRE(cc.has_value());
    CHECK((*cc)[0] == BigRat(5));
    CHECK((*cc)[1] == BigRat(5));
    CHECK(!circumcenter({LatticeVector{0, 0}, LatticeVector{1, 1}, LatticeVector{2, 2}}).has_value());
}

TEST_CASE("rational parsing and radical comparisons") {
    CHECK(parse_rat("5/2") == Rat(5, 2));
    CHECK(parse_rat("2.5") == Rat(5, 2));
    CHECK(parse_rat("16") == Rat(16));
    CHECK(parse_rat("-1.25") == Rat(-5, 4));
    CHECK(cmp_sqrt(25, Rat(5)) == 0);
    CHECK(cmp_sqrt(24, Rat(5)) < 0);
    CHECK(cmp_sqrt(26, Rat(5)) > 0);
    // sqrt(2) + sqrt(2) vs 3: 2 sqrt 2 = 2.828... < 3
    CHECK(cmp_sqrt_sum(BigRat(2), BigRat(2), BigRat(3)) < 0);
    // sqrt(4) + sqrt(9) == 5
    CHECK(cmp_sqrt_sum(BigRat(4), BigRat(9), BigRat(5)) == 0);
    CHECK(cmp_sqrt_sum(BigRat(4), BigRat(9), BigRat(5) - BigRat(1, 1000)) > 0);
}
