/// @file lattice.hpp
/// @brief Integer lattice vectors, periodic point sets, and exact metric queries.
///
/// A PeriodicLatticeSet describes the subset  base + diag(periods) Z^d  of Z^d.
/// All separation / covering queries on it are answered exactly: squared
/// distances are integers, covering radii are square roots of rationals, and
/// every comparison against a rational threshold is performed on squared
/// quantities in integer arithmetic.  Covering radii are exact for d <= 3
/// (Voronoi vertex enumeration over circumcenters); for d > 3 a certified
/// bracket from the integer grid is used and predicates consume its
/// conservative side.

#pragma once

#include "rational.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace zcantor {

using Coord = long long;

/// Element of Z^d.
struct LatticeVector {
    std::vector<Coord> c;

    LatticeVector() = default;
    explicit LatticeVector(size_t d) : c(d, 0) {}
    LatticeVector(std::initializer_list<Coord> init) : c(init) {}

    size_t dim() const { return c.size(); }
    Coord& operator[](size_t i) { return c[i]; }
    Coord operator[](size_t i) const { return c[i]; }

    bool operator==(const LatticeVector& o) const { return c == o.c; }
    bool operator!=(const LatticeVector& o) const { return c != o.c; }
    /// Lexicographic order; used wherever a deterministic choice is needed.
    bool operator<(const LatticeVector& o) const { return c < o.c; }
};

inline LatticeVector operator+(const LatticeVector& a, const LatticeVector& b) {
    LatticeVector r(a.dim());
    for (size_t i = 0; i < a.dim(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline LatticeVector operator-(const LatticeVector& a, const LatticeVector& b) {
    LatticeVector r(a.dim());
    for (size_t i = 0; i < a.dim(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline LatticeVector operator-(const LatticeVector& a) {
    LatticeVector r(a.dim());
    for (size_t i = 0; i < a.dim(); ++i) r[i] = -a[i];
    return r;
}

inline long long norm_sq(const LatticeVector& v) {
    long long s = 0;
    for (Coord x : v.c) s += x * x;
    return s;
}

inline long long dist_sq(const LatticeVector& a, const LatticeVector& b) {
    long long s = 0;
    for (size_t i = 0; i < a.dim(); ++i) {
        Coord d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline Coord sup_norm(const LatticeVector& v) {
    Coord m = 0;
    for (Coord x : v.c) m = std::max(m, x < 0 ? -x : x);
    return m;
}

/// Euclidean length of (0,0)->(3,4) is 5; exposed for convenience and tests.
inline double euclidean_distance(const LatticeVector& a, const LatticeVector& b) {
    return std::sqrt(static_cast<double>(dist_sq(a, b)));
}

/// Sup-norm box window of integer radius.
struct Window {
    Coord radius = 0;

    explicit Window(Coord r) : radius(r) {
        if (r < 0) throw std::invalid_argument("Window: negative radius");
    }
    bool contains(const LatticeVector& v) const { return sup_norm(v) <= radius; }
};

/// All integer vectors with sup norm <= radius, in lexicographic order.
inline std::vector<LatticeVector> window_points(size_t d, Coord radius) {
    std::vector<LatticeVector> out;
    LatticeVector v(d);
    for (size_t i = 0; i < d; ++i) v[i] = -radius;
    while (true) {
        out.push_back(v);
        size_t axis = d;
        while (axis > 0) {
            --axis;
            if (v[axis] < radius) {
                ++v[axis];
                for (size_t j = axis + 1; j < d; ++j) v[j] = -radius;
                break;
            }
            if (axis == 0) return out;
        }
    }
}

/// All integer vectors v with |v| <= R (closed=true) or |v| < R (closed=false),
/// compared exactly, in lexicographic order.
inline std::vector<LatticeVector> ball_points(size_t d, const Rat& R, bool closed) {
    std::vector<LatticeVector> out;
    if (R.num <= 0 && !(closed && R.num == 0)) return out;
    Coord box = static_cast<Coord>(R.num / R.den) + 1;
    for (auto& v : window_points(d, box)) {
        int c = cmp_sqrt(norm_sq(v), R);
        if (closed ? c <= 0 : c < 0) out.push_back(v);
    }
    return out;
}

inline Coord floor_mod(Coord a, Coord n) {
    Coord r = a % n;
    return r < 0 ? r + n : r;
}

/// Per-axis squared distance between the cosets a + nZ and 0.
inline long long coset_axis_dist_sq(Coord a, Coord n) {
    Coord r = floor_mod(a, n);
    Coord alt = n - r;
    Coord m = r < alt ? r : alt;
    return static_cast<long long>(m) * m;
}

/// Squared distance between v + diag(periods) Z^d and 0 (exact; the per-axis
/// minimizers are independent).
inline long long coset_dist_sq(const LatticeVector& v, const std::vector<Coord>& periods) {
    long long s = 0;
    for (size_t i = 0; i < v.dim(); ++i) s += coset_axis_dist_sq(v[i], periods[i]);
    return s;
}

/// The subset  base + diag(periods) Z^d  of Z^d.
/// Base points are stored reduced into the fundamental box and sorted.
struct PeriodicLatticeSet {
    std::vector<Coord> periods;
    std::vector<LatticeVector> base;

    PeriodicLatticeSet() = default;
    PeriodicLatticeSet(std::vector<Coord> per, std::vector<LatticeVector> pts)
        : periods(std::move(per)) {
        for (Coord n : periods)
            if (n < 1) throw std::invalid_argument("PeriodicLatticeSet: period < 1");
        for (auto& p : pts) base.push_back(reduce(p));
        std::sort(base.begin(), base.end());
        base.erase(std::unique(base.begin(), base.end()), base.end());
    }

    size_t dim() const { return periods.size(); }

    LatticeVector reduce(const LatticeVector& v) const {
        LatticeVector r(dim());
        for (size_t i = 0; i < dim(); ++i) r[i] = floor_mod(v[i], periods[i]);
        return r;
    }

    bool contains(const LatticeVector& v) const {
        LatticeVector r = reduce(v);
        return std::binary_search(base.begin(), base.end(), r);
    }

    PeriodicLatticeSet translated(const LatticeVector& v) const {
        std::vector<LatticeVector> pts;
        pts.reserve(base.size());
        for (auto& b : base) pts.push_back(b + v);
        return PeriodicLatticeSet(periods, pts);
    }

    /// Realized points p with lo[i] <= p[i] <= hi[i].
    std::vector<LatticeVector> points_in_box(const LatticeVector& lo, const LatticeVector& hi) const {
        std::vector<LatticeVector> out;
        size_t d = dim();
        for (auto& b : base) {
            // per-axis translate ranges
            std::vector<std::vector<Coord>> choices(d);
            for (size_t i = 0; i < d; ++i) {
                Coord n = periods[i];
                // b[i] + k n in [lo, hi]
                Coord kmin = (lo[i] - b[i] >= 0) ? (lo[i] - b[i] + n - 1) / n : -((b[i] - lo[i]) / n);
                Coord kmax = (hi[i] - b[i] >= 0) ? (hi[i] - b[i]) / n : -((b[i] - hi[i] + n - 1) / n);
                for (Coord k = kmin; k <= kmax; ++k) choices[i].push_back(b[i] + k * n);
            }
            std::vector<size_t> idx(d, 0);
            bool empty = false;
            for (size_t i = 0; i < d; ++i)
                if (choices[i].empty()) empty = true;
            if (empty) continue;
            while (true) {
                LatticeVector p(d);
                for (size_t i = 0; i < d; ++i) p[i] = choices[i][idx[i]];
                out.push_back(p);
                size_t axis = d;
                bool done = true;
                while (axis > 0) {
                    --axis;
                    if (++idx[axis] < choices[axis].size()) {
                        for (size_t j = axis + 1; j < d; ++j) idx[j] = 0;
                        done = false;
                        break;
                    }
                    idx[axis] = 0;
                }
                if (done) break;
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    /// Realized points within Euclidean distance <= R of center (exact filter).
    std::vector<LatticeVector> points_in_ball(const LatticeVector& center, const Rat& R) const {
        Coord box = R.num > 0 ? static_cast<Coord>(R.num / R.den) + 1 : 0;
        LatticeVector lo(dim()), hi(dim());
        for (size_t i = 0; i < dim(); ++i) {
            lo[i] = center[i] - box;
            hi[i] = center[i] + box;
        }
        std::vector<LatticeVector> out;
        for (auto& p : points_in_box(lo, hi))
            if (cmp_sqrt(dist_sq(p, center), R) <= 0) out.push_back(p);
        return out;
    }
};

/// Result of the exact minimal pairwise distance query.
struct MinPairwise {
    long long dist_sq = 0;
    LatticeVector a, b;  ///< witness pair of realized points
};

/// Minimal squared distance between distinct realized points.  Exact: for each
/// base pair the per-axis coset minimisation is closed-form, and the pure
/// period vectors cover the self-coset case.
inline MinPairwise min_pairwise_distance_sq(const PeriodicLatticeSet& S) {
    if (S.base.empty()) throw std::invalid_argument("min_pairwise: empty set");
    MinPairwise best;
    size_t d = S.dim();
    // self coset: nearest nonzero period vector is the smallest single period
    size_t axis = 0;
    for (size_t i = 1; i < d; ++i)
        if (S.periods[i] < S.periods[axis]) axis = i;
    best.dist_sq = static_cast<long long>(S.periods[axis]) * S.periods[axis];
    best.a = S.base[0];
    best.b = S.base[0];
    best.b[axis] += S.periods[axis];
    for (size_t i = 0; i < S.base.size(); ++i) {
        for (size_t j = i + 1; j < S.base.size(); ++j) {
            LatticeVector diff = S.base[j] - S.base[i];
            long long d2 = coset_dist_sq(diff, S.periods);
            if (d2 < best.dist_sq) {
                best.dist_sq = d2;
                best.a = S.base[i];
                // reconstruct the minimizing representative of base[j]'s coset
                best.b = S.base[i];
                for (size_t k = 0; k < d; ++k) {
                    Coord r = floor_mod(diff[k], S.periods[k]);
                    best.b[k] += (r <= S.periods[k] - r) ? r : r - S.periods[k];
                }
            }
        }
    }
    return best;
}

namespace detail {

/// Exact 1-d squared-distance lower envelope (integer parabolas).  f holds
/// current squared distances; writes the envelope min_y (x-y)^2 + f[y].
inline void edt_pass(std::vector<long long>& f) {
    const long long INF = (1LL << 62);
    size_t n = f.size();
    std::vector<size_t> v(n);
    // breakpoints as exact rationals num/den, den > 0
    std::vector<long long> znum(n + 1), zden(n + 1);
    std::vector<long long> out(n);
    int k = 0;
    v[0] = 0;
    znum[0] = -INF;
    zden[0] = 1;
    znum[1] = INF;
    zden[1] = 1;
    auto inter_num = [&](size_t p, size_t q) {
        // intersection of parabolas at p < q: (f q + q^2 - f p - p^2) / (2q - 2p)
        return f[q] + static_cast<long long>(q) * q - f[p] - static_cast<long long>(p) * p;
    };
    for (size_t q = 1; q < n; ++q) {
        if (f[q] >= INF) continue;
        while (true) {
            size_t p = v[k];
            if (f[p] >= INF) {
                if (k == 0) { v[0] = q; znum[0] = -INF; zden[0] = 1; znum[1] = INF; zden[1] = 1; break; }
                --k;
                continue;
            }
            long long sn = inter_num(p, q);
            long long sd = 2 * (static_cast<long long>(q) - static_cast<long long>(p));
            // s <= z[k] ?
            __int128 lhs = static_cast<__int128>(sn) * zden[k];
            __int128 rhs = static_cast<__int128>(znum[k]) * sd;
            if (k > 0 && lhs <= rhs) {
                --k;
                continue;
            }
            ++k;
            v[k] = q;
            znum[k] = sn;
            zden[k] = sd;
            znum[k + 1] = INF;
            zden[k + 1] = 1;
            break;
        }
    }
    int j = 0;
    for (size_t x = 0; x < n; ++x) {
        // advance while z[j+1] < x
        while (static_cast<__int128>(znum[j + 1]) < static_cast<__int128>(x) * zden[j + 1]) ++j;
        if (f[v[j]] >= INF) {
            out[x] = INF;
        } else {
            long long dx = static_cast<long long>(x) - static_cast<long long>(v[j]);
            out[x] = dx * dx + f[v[j]];
        }
    }
    f.swap(out);
}

}  // namespace detail

/// Exact squared distance to the nearest realized point, for every integer
/// point of the fundamental box.  Computed by a per-axis envelope transform on
/// a 3x tiling per axis (the torus wrap), read back from the central copy.
/// Index order: row-major in the periods.
inline std::vector<long long> grid_distance_sq(const PeriodicLatticeSet& S) {
    const long long INF = (1LL << 62);
    size_t d = S.dim();
    std::vector<Coord> ext(d);
    size_t total = 1;
    for (size_t i = 0; i < d; ++i) {
        ext[i] = 3 * S.periods[i];
        total *= static_cast<size_t>(ext[i]);
    }
    std::vector<long long> f(total, INF);
    // seed sites in all 3^d copies
    std::vector<Coord> rep(d, 0);
    for (auto& b : S.base) {
        std::vector<Coord> copy(d, 0);
        while (true) {
            size_t idx = 0;
            for (size_t i = 0; i < d; ++i) idx = idx * ext[i] + (b[i] + copy[i] * S.periods[i]);
            f[idx] = 0;
            size_t axis = d;
            bool done = true;
            while (axis > 0) {
                --axis;
                if (++copy[axis] < 3) {
                    for (size_t j = axis + 1; j < d; ++j) copy[j] = 0;
                    done = false;
                    break;
                }
                copy[axis] = 0;
            }
            if (done) break;
        }
    }
    // envelope per axis
    for (size_t axisIdx = 0; axisIdx < d; ++axisIdx) {
        size_t axis = d - 1 - axisIdx;  // innermost (stride 1) first
        size_t len = static_cast<size_t>(ext[axis]);
        size_t stride = 1;
        for (size_t i = axis + 1; i < d; ++i) stride *= static_cast<size_t>(ext[i]);
        size_t lines = total / len;
        std::vector<long long> line(len);
        for (size_t l = 0; l < lines; ++l) {
            // base offset of this line
            size_t outer = l / stride;
            size_t inner = l % stride;
            size_t off = outer * (len * stride) + inner;
            for (size_t x = 0; x < len; ++x) line[x] = f[off + x * stride];
            detail::edt_pass(line);
            for (size_t x = 0; x < len; ++x) f[off + x * stride] = line[x];
        }
    }
    // read back the central copy
    size_t cells = 1;
    for (size_t i = 0; i < d; ++i) cells *= static_cast<size_t>(S.periods[i]);
    std::vector<long long> out(cells);
    std::vector<Coord> p(d, 0);
    for (size_t c = 0; c < cells; ++c) {
        size_t idx = 0;
        for (size_t i = 0; i < d; ++i) idx = idx * ext[i] + (p[i] + S.periods[i]);
        out[c] = f[idx];
        size_t axis = d;
        while (axis > 0) {
            --axis;
            if (++p[axis] < S.periods[axis]) break;
            p[axis] = 0;
        }
    }
    return out;
}

/// Rational point in R^d.
using RationalPoint = std::vector<BigRat>;

/// Exact squared distance from a rational point to the nearest realized point.
inline BigRat min_dist_sq_to_set(const RationalPoint& p, const PeriodicLatticeSet& S) {
    size_t d = S.dim();
    std::optional<BigRat> best;
    for (auto& b : S.base) {
        BigRat total(0);
        for (size_t i = 0; i < d; ++i) {
            BigRat diff = p[i] - BigRat(BigInt(b[i]));
            BigInt n(S.periods[i]);
            // nearest integer multiple of n to diff: k = floor(diff/n + 1/2)
            BigRat q = diff / BigRat(n) + BigRat(1, 2);
            BigInt qn = boost::multiprecision::numerator(q), qd = boost::multiprecision::denominator(q);
            BigInt k;
            if (qn >= 0) {
                k = qn / qd;
            } else {
                k = -((-qn + qd - 1) / qd);
            }
            BigRat r = diff - BigRat(k * n);
            total += r * r;
        }
        if (!best || total < *best) best = total;
    }
    if (!best) throw std::invalid_argument("min_dist_sq_to_set: empty set");
    return *best;
}

/// Circumcenter of d+1 integer points (the point equidistant to all), if the
/// points are affinely independent.  Cramer's rule over big integers.
inline std::optional<RationalPoint> circumcenter(const std::vector<LatticeVector>& pts) {
    size_t d = pts[0].dim();
    if (pts.size() != d + 1) throw std::invalid_argument("circumcenter: need d+1 points");
    // rows: 2(p_j - p_0) . x = |p_j|^2 - |p_0|^2
    std::vector<std::vector<BigInt>> A(d, std::vector<BigInt>(d));
    std::vector<BigInt> rhs(d);
    for (size_t j = 0; j < d; ++j) {
        long long n0 = norm_sq(pts[0]), nj = norm_sq(pts[j + 1]);
        rhs[j] = BigInt(nj) - BigInt(n0);
        for (size_t i = 0; i < d; ++i) A[j][i] = BigInt(2 * (pts[j + 1][i] - pts[0][i]));
    }
    auto det = [&](const std::vector<std::vector<BigInt>>& M) -> BigInt {
        if (d == 1) return M[0][0];
        if (d == 2) return M[0][0] * M[1][1] - M[0][1] * M[1][0];
        return M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1]) -
               M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0]) +
               M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0]);
    };
    BigInt D = det(A);
    if (D == 0) return std::nullopt;
    RationalPoint x(d);
    for (size_t col = 0; col < d; ++col) {
        auto Ai = A;
        for (size_t j = 0; j < d; ++j) Ai[j][col] = rhs[j];
        x[col] = make_brat(det(Ai), D);
    }
    return x;
}

/// Covering radius answer.  grid_max_sq is the exact maximum over integer
/// points (a certified lower bound; the value is at most sqrt(grid_max_sq) +
/// sqrt(d)/2).  For d <= 3 the exact squared radius and a witness deep hole
/// are filled in.
struct CoveringRadius {
    size_t dim = 0;
    BigInt grid_max_sq = 0;
    bool exact = false;
    BigRat sq;               ///< exact squared covering radius (d <= 3)
    RationalPoint deep_hole; ///< witness attaining it (d <= 3)

    double value() const {
        if (exact) return std::sqrt(sq.convert_to<double>());
        double m = std::sqrt(static_cast<double>(grid_max_sq.convert_to<double>()));
        return m + std::sqrt(static_cast<double>(dim)) / 2.0;  // upper bound
    }
};

/// cmp(covering radius, t), conservative for d > 3: in the inexact case a
/// definite answer is returned only when the bracket decides it, otherwise the
/// upper bound stands in (so "covering < t" may be reported false although
/// true, never the reverse).
inline int covering_cmp(const CoveringRadius& cr, const Rat& t) {
    if (cr.exact) return cmp_sqrt(cr.sq, to_big(t));
    if (cmp_sqrt(BigRat(cr.grid_max_sq), to_big(t)) >= 0) return 1;  // lower bound already >= t
    return cmp_sqrt_sum(BigRat(cr.grid_max_sq), BigRat(BigInt(cr.dim), BigInt(4)), to_big(t));
}

/// Exact covering radius (max over R^d of the distance to the set) for d <= 3;
/// certified bracket for d > 3.  Candidates for d <= 3: circumcenters of
/// (d+1)-subsets of realized points near each base point (every Voronoi vertex
/// of a full-rank periodic set arises this way), fundamental-box corners, and
/// the integer grid maximum.
inline CoveringRadius covering_radius(const PeriodicLatticeSet& S) {
    CoveringRadius out;
    size_t d = S.dim();
    out.dim = d;
    auto grid = grid_distance_sq(S);
    long long m2 = 0;
    size_t argmax = 0;
    for (size_t i = 0; i < grid.size(); ++i)
        if (grid[i] > m2) { m2 = grid[i]; argmax = i; }
    out.grid_max_sq = BigInt(m2);
    if (d > 3) return out;

    // neighbor radius: vertices lie within U of their defining centers, with
    // U^2 <= m2 + d/4 + isqrt(m2 d) + 1 (rational upper bound of the bracket)
    BigInt m2d = BigInt(m2) * BigInt(static_cast<long long>(d));
    BigInt s = boost::multiprecision::sqrt(m2d);
    BigRat U2 = BigRat(BigInt(m2)) + BigRat(BigInt(static_cast<long long>(d)), BigInt(4)) + BigRat(s + 1);
    // pairwise neighbor distance bound (2U)^2 = 4 U2; box radius for the scan
    double ubox = 2.0 * std::sqrt(U2.convert_to<double>()) + 1.0;
    Rat search_r(static_cast<long long>(ubox) + 1);

    BigRat best_sq{BigInt(m2)};
    RationalPoint best_pt;
    {
        // integer witness
        std::vector<Coord> p(d);
        size_t idx = argmax;
        for (size_t i = d; i-- > 0;) {
            p[i] = static_cast<Coord>(idx % static_cast<size_t>(S.periods[i]));
            idx /= static_cast<size_t>(S.periods[i]);
        }
        best_pt.resize(d);
        for (size_t i = 0; i < d; ++i) best_pt[i] = BigRat(BigInt(p[i]));
    }

    auto consider = [&](const RationalPoint& p) {
        BigRat d2 = min_dist_sq_to_set(p, S);
        if (d2 > best_sq) {
            best_sq = d2;
            best_pt = p;
        }
    };

    // fundamental-box corners
    {
        std::vector<Coord> corner(d, 0);
        while (true) {
            RationalPoint p(d);
            for (size_t i = 0; i < d; ++i) p[i] = BigRat(BigInt(corner[i] ? S.periods[i] : 0));
            consider(p);
            size_t axis = d;
            bool done = true;
            while (axis > 0) {
                --axis;
                if (++corner[axis] < 2) { done = false; break; }
                corner[axis] = 0;
            }
            if (done) break;
        }
    }

    // circumcenters of (d+1)-subsets of neighbors around each base point.
    // Two prunes keep this tractable: defining centers of one Voronoi vertex
    // are pairwise within 2 R_cov (R_cov^2 <= U2), and a vertex only matters
    // if its circumradius beats the best value so far (f(cc) <= circumradius
    // always, with equality exactly when the subset is the nearest set).
    BigRat four_U2 = BigRat(4) * U2;
    auto close_pair = [&](const LatticeVector& a, const LatticeVector& b) {
        return BigRat(BigInt(dist_sq(a, b))) <= four_U2;
    };
    auto consider_vertex = [&](const RationalPoint& cc, const LatticeVector& w) {
        BigRat rc2(0);
        for (size_t i = 0; i < d; ++i) {
            BigRat diff = cc[i] - BigRat(BigInt(w[i]));
            rc2 += diff * diff;
        }
        if (rc2 > best_sq) consider(cc);
    };
    for (auto& w : S.base) {
        auto nb = S.points_in_ball(w, search_r);
        // keep w as the anchor of every subset; pool = 2U-neighbors of w
        std::vector<LatticeVector> others;
        for (auto& u : nb)
            if (!(u == w) && close_pair(u, w)) others.push_back(u);
        size_t n = others.size();
        std::vector<LatticeVector> pts(d + 1);
        pts[0] = w;
        if (d == 1) {
            for (size_t i = 0; i < n; ++i) {
                pts[1] = others[i];
                if (auto cc = circumcenter(pts)) consider_vertex(*cc, w);
            }
        } else if (d == 2) {
            for (size_t i = 0; i < n; ++i)
                for (size_t j = i + 1; j < n; ++j) {
                    if (!close_pair(others[i], others[j])) continue;
                    pts[1] = others[i];
                    pts[2] = others[j];
                    if (auto cc = circumcenter(pts)) consider_vertex(*cc, w);
                }
        } else {
            std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
            for (size_t i = 0; i < n; ++i)
                for (size_t j = i + 1; j < n; ++j)
                    adj[i][j] = adj[j][i] = close_pair(others[i], others[j]) ? 1 : 0;
            for (size_t i = 0; i < n; ++i)
                for (size_t j = i + 1; j < n; ++j) {
                    if (!adj[i][j]) continue;
                    for (size_t k = j + 1; k < n; ++k) {
                        if (!adj[i][k] || !adj[j][k]) continue;
                        pts[1] = others[i];
                        pts[2] = others[j];
                        pts[3] = others[k];
                        if (auto cc = circumcenter(pts)) consider_vertex(*cc, w);
                    }
                }
        }
    }

    out.exact = true;
    out.sq = best_sq;
    out.deep_hole = best_pt;
    return out;
}

}  // namespace zcantor
