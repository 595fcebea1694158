#pragma once
/// The dynamical cohomology ordered group of an odometer system: integer
/// functions on quotient levels modulo coboundaries (sums of terms
/// 1_A - 1_{phi^v A}), its positive cone, and the order machinery built on
/// Rohlin tower partitions.
///
/// On a finite transitive quotient the coboundary lattice is exactly the
/// kernel of the total-sum functional (single-cell differences generate it),
/// and refining a level multiplies the sum by the index ratio.  A class is
/// therefore captured by the normal form (depth, sum over the level), with
/// equality and order decided by scaled sums at a common depth.  The ordered
/// group is the directed colimit of (Z, x index ratio) with positivity given
/// by positive sum, and the order unit maps to the level size.  This exact
/// oracle is cross-validated at micro scale by the test suite (for tiny
/// levels, the lattice spanned by single-cell differences is enumerated and
/// compared against the sum kernel).

#include <zcantor/lattice.hpp>
#include <zcantor/odometer.hpp>
#include <zcantor/rational.hpp>
#include <zcantor/rohlin.hpp>

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace zcantor {

/// An integer-valued continuous function realized at a quotient level: one
/// value per cell.  Refining the depth leaves the realized function
/// unchanged (children inherit the parent's value).
struct IntFunction {
    int depth = 0;
    std::vector<long long> values;
};

inline IntFunction make_function(const SystemHandle& s, int K, std::vector<long long> values) {
    auto L = make_level(s, K);
    if (values.size() != L.size)
        throw std::invalid_argument("make_function: one value per cell required");
    IntFunction f;
    f.depth = K;
    f.values = std::move(values);
    return f;
}

inline IntFunction zero_function(const SystemHandle& s, int K) {
    return make_function(s, K, std::vector<long long>(make_level(s, K).size, 0));
}

inline IntFunction indicator(const SystemHandle& s, const ClopenSet& C) {
    auto f = zero_function(s, C.depth);
    for (uint64_t c : C.cells) f.values[c] = 1;
    return f;
}

/// Realizes f at a deeper level; every child cell inherits its parent value.
inline IntFunction refine_function(const SystemHandle& s, const IntFunction& f, int K) {
    if (K < f.depth) throw std::invalid_argument("refine_function: target shallower than source");
    if (K == f.depth) return f;
    auto Lc = make_level(s, f.depth);
    auto Lf = make_level(s, K);
    IntFunction g;
    g.depth = K;
    g.values.resize(Lf.size);
    for (uint64_t c = 0; c < Lf.size; ++c) {
        auto r = Lf.decode(c);
        for (size_t i = 0; i < r.size(); ++i) r[i] %= Lc.mod[i];
        g.values[c] = f.values[Lc.encode(r)];
    }
    return g;
}

/// The composition f(phi^v .): the value at a cell is f at the v-translate.
inline IntFunction translate_function(const SystemHandle& s, const IntFunction& f,
                                      const LatticeVector& v) {
    auto L = make_level(s, f.depth);
    IntFunction g;
    g.depth = f.depth;
    g.values.resize(L.size);
    for (uint64_t c = 0; c < L.size; ++c) g.values[c] = f.values[act_cell(L, v, c)];
    return g;
}

inline IntFunction function_sum(const SystemHandle& s, const IntFunction& a,
                                const IntFunction& b) {
    int K = std::max(a.depth, b.depth);
    IntFunction x = refine_function(s, a, K);
    IntFunction y = refine_function(s, b, K);
    for (size_t i = 0; i < x.values.size(); ++i) x.values[i] += y.values[i];
    return x;
}

inline IntFunction function_diff(const SystemHandle& s, const IntFunction& a,
                                 const IntFunction& b) {
    int K = std::max(a.depth, b.depth);
    IntFunction x = refine_function(s, a, K);
    IntFunction y = refine_function(s, b, K);
    for (size_t i = 0; i < x.values.size(); ++i) x.values[i] -= y.values[i];
    return x;
}

inline IntFunction function_scale(IntFunction f, long long n) {
    for (auto& v : f.values) v *= n;
    return f;
}

inline long long value_at(const SystemHandle& s, const IntFunction& f, const SystemPoint& x) {
    auto L = make_level(s, f.depth);
    return f.values[L.encode(point_at_depth(s, x, f.depth).residues)];
}

inline long long total_sum(const IntFunction& f) {
    long long t = 0;
    for (long long v : f.values) t += v;
    return t;
}

/// A cohomology class in normal form: the representative together with
/// (depth, sum over the level).  Two classes agree exactly when their sums
/// agree after scaling to a common depth.
struct CohomologyClass {
    SystemHandle system;
    IntFunction representative;
    int depth = 0;
    long long sum = 0;

    /// Depth-independent value sum / |level|, the class as a rational.
    BigRat normal_value() const {
        return make_brat(BigInt(sum), BigInt(make_level(system, depth).size));
    }
};

inline CohomologyClass class_of(const SystemHandle& s, IntFunction f) {
    CohomologyClass c;
    c.system = s;
    c.depth = f.depth;
    c.sum = total_sum(f);
    c.representative = std::move(f);
    return c;
}

namespace detail {

/// The class sum realized at depth K >= the class's own depth.
inline __int128 scaled_sum(const CohomologyClass& c, int K) {
    auto ratio = make_level(c.system, K).size / make_level(c.system, c.depth).size;
    return static_cast<__int128>(c.sum) * static_cast<__int128>(ratio);
}

inline void require_same_system(const CohomologyClass& a, const CohomologyClass& b) {
    if (!same_system(a.system, b.system))
        throw std::invalid_argument("cohomology: classes live on different systems");
}

}  // namespace detail

inline bool class_equal(const CohomologyClass& a, const CohomologyClass& b) {
    detail::require_same_system(a, b);
    int K = std::max(a.depth, b.depth);
    return detail::scaled_sum(a, K) == detail::scaled_sum(b, K);
}

/// Order outcomes.  The odometer order is total, but "incomparable" stays in
/// the contract so other models can plug into the same interface.
enum class Ordering { less, equal, greater, incomparable };

inline Ordering compare(const CohomologyClass& a, const CohomologyClass& b) {
    detail::require_same_system(a, b);
    int K = std::max(a.depth, b.depth);
    __int128 sa = detail::scaled_sum(a, K);
    __int128 sb = detail::scaled_sum(b, K);
    if (sa < sb) return Ordering::less;
    if (sa > sb) return Ordering::greater;
    return Ordering::equal;
}

/// Infinitesimal elements: n g < h for every n and every h > 0.  The sum
/// oracle makes the odometer order archimedean, so only the zero class
/// qualifies; the operation exists for interface completeness.
inline bool is_infinitesimal(const CohomologyClass& g) { return g.sum == 0; }

/// Tower-column sum: hat(h)(x) = sum over the prototile of x's class of h at
/// the translates.  Supported on the union of the classes; cohomologous to h
/// (the difference telescopes into coboundary terms).
inline IntFunction hat(const IntFunction& h, const VoronoiRohlinPartition& P) {
    if (!(P.classes_partition_centers && P.cover_exact && P.half_ball_inside &&
          P.diameter_bound))
        throw std::invalid_argument("hat: partition is not certified");
    const SystemHandle& s = P.system;
    int K = std::max(h.depth, P.depth);
    auto L = make_level(s, K);
    IntFunction hk = refine_function(s, h, K);
    IntFunction out = zero_function(s, K);
    for (size_t k = 0; k < P.classes.size(); ++k) {
        ClopenSet Ck = refine(s, P.classes[k], K);
        for (uint64_t c : Ck.cells) {
            long long t = 0;
            for (const auto& w : P.prototiles[k]) t += hk.values[act_cell(L, w, c)];
            out.values[c] = t;
        }
    }
    return out;
}

enum class OrderTest { proved_geq, proved_gt, inconclusive };

/// One-sided order test: if the tower-column sums of g dominate those of f
/// over every class cell, then [g] >= [f] (strict somewhere gives strict
/// order).  A negative cell proves nothing -- a coarser partition may still
/// succeed, and a fine enough one always does when [f] < [g].
inline OrderTest order_test_sufficient(const IntFunction& f, const IntFunction& g,
                                       const VoronoiRohlinPartition& P) {
    IntFunction hd = hat(function_diff(P.system, g, f), P);
    bool strict = false;
    for (long long v : hd.values) {
        if (v < 0) return OrderTest::inconclusive;
        if (v > 0) strict = true;
    }
    return strict ? OrderTest::proved_gt : OrderTest::proved_geq;
}

/// Per-class minimum of the tower-column margin between g and f.  Requires
/// [f] < [g] (by the sum oracle); the margins grow like M^d in the scale of
/// the partition once M is large enough.
inline std::vector<long long> strict_margin(const IntFunction& f, const IntFunction& g,
                                            const VoronoiRohlinPartition& P) {
    const SystemHandle& s = P.system;
    if (compare(class_of(s, f), class_of(s, g)) != Ordering::less)
        throw std::invalid_argument("strict_margin: classes are not strictly ordered");
    IntFunction hd = hat(function_diff(s, g, f), P);
    auto L = make_level(s, hd.depth);
    std::vector<long long> margins;
    margins.reserve(P.classes.size());
    for (const auto& C : P.classes) {
        ClopenSet Ck = refine(s, C, hd.depth);
        long long m = 0;
        bool first = true;
        for (uint64_t c : Ck.cells) {
            long long v = hd.values[c];
            if (first || v < m) m = v;
            first = false;
        }
        margins.push_back(m);
    }
    return margins;
}

/// An explicit decomposition of a zero-class function into coboundary terms
/// (A, v), each contributing 1_A - 1_{phi^v A}.
struct CoboundaryWitness {
    std::vector<std::pair<ClopenSet, LatticeVector>> terms;
};

/// Re-sums a witness at the requested depth.
inline IntFunction reconstruct(const SystemHandle& s, const CoboundaryWitness& w, int K) {
    for (const auto& [A, v] : w.terms) K = std::max(K, A.depth);
    IntFunction out = zero_function(s, K);
    for (const auto& [A, v] : w.terms) {
        out = function_sum(s, out, indicator(s, refine(s, A, K)));
        out = function_diff(s, out, indicator(s, refine(s, translate(s, A, v), K)));
    }
    return out;
}

/// Greedy mass transport: repeatedly move one unit from a cell with positive
/// value to a cell with negative value, emitting a single-cell term each
/// time.  Terminates exactly when the total sum is zero, which the sum
/// oracle requires of the zero class.
inline CoboundaryWitness coboundary_witness(const SystemHandle& s, const IntFunction& f) {
    if (total_sum(f) != 0)
        throw std::invalid_argument("coboundary_witness: function has a nonzero class");
    auto L = make_level(s, f.depth);
    std::vector<long long> val = f.values;
    CoboundaryWitness w;
    size_t pos = 0, neg = 0;
    for (;;) {
        while (pos < val.size() && val[pos] <= 0) ++pos;
        if (pos == val.size()) break;
        while (neg < val.size() && val[neg] >= 0) ++neg;
        auto a = L.decode(pos);
        auto b = L.decode(neg);
        LatticeVector v(a.size());
        for (size_t i = 0; i < a.size(); ++i) v[i] = b[i] - a[i];
        w.terms.emplace_back(make_clopen(f.depth, {static_cast<uint64_t>(pos)}), v);
        --val[pos];
        ++val[neg];
    }
    return w;
}

/// Randomized verification of the ordered-group laws on sampled classes:
/// positivity scales (n[f] > 0 with n >= 1 forces [f] > 0), strict
/// interpolation (a class strictly between two strictly ordered pairs always
/// exists, deepening one level when the sum gap closes), and simplicity
/// (some multiple of any strictly positive class dominates any class).
struct GroupPropertyReport {
    int samples = 0;
    int unperforation_checked = 0;
    int interpolation_checked = 0;
    int simplicity_checked = 0;
    bool all_passed = false;
};

inline GroupPropertyReport group_property_suite(const SystemHandle& s, int samples,
                                                uint32_t seed = 2026) {
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> depth_pick(1, 3);
    std::uniform_int_distribution<long long> weight(-3, 3);
    std::uniform_int_distribution<int> n_pick(1, 5);

    auto random_class = [&]() {
        int K = depth_pick(rng);
        auto L = make_level(s, K);
        std::vector<long long> vals(L.size);
        for (auto& v : vals) v = weight(rng);
        return class_of(s, make_function(s, K, std::move(vals)));
    };
    auto class_with_sum = [&](int K, long long target) {
        auto L = make_level(s, K);
        std::vector<long long> vals(L.size, 0);
        vals[0] = target;
        return class_of(s, make_function(s, K, std::move(vals)));
    };

    GroupPropertyReport rep;
    rep.samples = samples;
    bool ok = true;

    for (int t = 0; t < samples && ok; ++t) {
        // weak unperforation: n[f] > 0 with n >= 1 implies [f] > 0
        auto fc = random_class();
        int n = n_pick(rng);
        auto nf = class_of(s, function_scale(fc.representative, n));
        auto zero = class_of(s, zero_function(s, 1));
        if (compare(nf, zero) == Ordering::greater) {
            ok = ok && compare(fc, zero) == Ordering::greater;
        }
        ++rep.unperforation_checked;

        // strict interpolation between pairs
        auto g1 = random_class();
        auto g2 = random_class();
        int K = std::max({g1.depth, g2.depth, 1});
        __int128 top = std::max(detail::scaled_sum(g1, K), detail::scaled_sum(g2, K));
        auto f1 = class_with_sum(K, static_cast<long long>(top) + n_pick(rng));
        auto f2 = class_with_sum(K, static_cast<long long>(top) + n_pick(rng));
        __int128 lo = top;
        __int128 hi = std::min(detail::scaled_sum(f1, K), detail::scaled_sum(f2, K));
        int Kh = K;
        while (hi - lo < 2) {  // deepen until an integer fits strictly between
            ++Kh;
            lo = std::max(detail::scaled_sum(g1, Kh), detail::scaled_sum(g2, Kh));
            hi = std::min(detail::scaled_sum(f1, Kh), detail::scaled_sum(f2, Kh));
        }
        auto h = class_with_sum(Kh, static_cast<long long>(lo + 1));
        ok = ok && compare(h, g1) == Ordering::greater && compare(h, g2) == Ordering::greater &&
             compare(f1, h) == Ordering::greater && compare(f2, h) == Ordering::greater;
        ++rep.interpolation_checked;

        // simplicity: some multiple of a strictly positive class dominates
        auto pos = class_with_sum(depth_pick(rng), 1 + n_pick(rng));
        auto any = random_class();
        int Kc = std::max(pos.depth, any.depth);
        __int128 ps = detail::scaled_sum(pos, Kc);
        __int128 as = detail::scaled_sum(any, Kc);
        long long mult = as <= 0 ? 1 : static_cast<long long>(as / ps) + 1;
        auto npos = class_of(s, function_scale(pos.representative, mult));
        ok = ok && compare(npos, any) == Ordering::greater;
        ++rep.simplicity_checked;
    }
    rep.all_passed = ok;
    return rep;
}

}  // namespace zcantor
