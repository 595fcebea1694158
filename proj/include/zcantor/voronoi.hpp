/// @file voronoi.hpp
/// @brief Voronoi tilings of Z^d from periodic M-regular point sets.
///
/// A periodic set of centers induces a Voronoi tiling of the lattice: every
/// point joins the tile of each nearest center (ties are kept, not broken --
/// disambiguation is a later, priority-based step).  This header provides the
/// regularity predicate (separation > M and covering < 2M), tile construction
/// by exhaustive scan of the closed 2M-ball, prototile extraction, and exact
/// tile-adjacency counts for d <= 3 via Voronoi-vertex enumeration.

#pragma once

#include <zcantor/lattice.hpp>

#include <map>
#include <set>

namespace zcantor {

/// Outcome of the M-regularity test, with witnesses for both halves.
struct RegularityReport {
    bool regular = false;
    bool separated = false;  ///< min pairwise distance > M (strict)
    bool syndetic = false;   ///< covering radius < 2M (strict)
    MinPairwise closest;     ///< witness pair for the separation half
    CoveringRadius covering; ///< witness deep hole for the syndetic half
};

/// Tests separation > M and covering < 2M, both strict.  Requires M > 2.
/// For d > 3 the covering test is conservative: it may report non-syndetic
/// when the certified bracket cannot decide, never the reverse.
inline RegularityReport is_M_regular(const PeriodicLatticeSet& R, const Rat& M) {
    if (!(M > Rat(2))) throw std::invalid_argument("is_M_regular: requires M > 2");
    RegularityReport rep;
    rep.closest = min_pairwise_distance_sq(R);
    rep.separated = cmp_sqrt(rep.closest.dist_sq, M) > 0;
    rep.covering = covering_radius(R);
    rep.syndetic = covering_cmp(rep.covering, Rat(2) * M) < 0;
    rep.regular = rep.separated && rep.syndetic;
    return rep;
}

/// All centers achieving the minimum distance to p, as realized points in the
/// same coordinate frame as p.  Exact squared-distance comparison; the search
/// reduces p into the fundamental domain and scans the 3^d adjacent copies.
inline std::vector<LatticeVector> nearest_centers(const PeriodicLatticeSet& R,
                                                  const LatticeVector& p) {
    size_t d = R.dim();
    LatticeVector pr(d), shift(d);
    for (size_t i = 0; i < d; ++i) {
        pr[i] = floor_mod(p[i], R.periods[i]);
        shift[i] = p[i] - pr[i];
    }
    long long best = -1;
    std::vector<LatticeVector> out;
    std::vector<int> k(d, -1);
    for (const auto& b : R.base) {
        std::fill(k.begin(), k.end(), -1);
        while (true) {
            LatticeVector c(d);
            for (size_t i = 0; i < d; ++i) c[i] = b[i] + static_cast<Coord>(k[i]) * R.periods[i];
            long long ds = dist_sq(pr, c);
            if (best < 0 || ds < best) {
                best = ds;
                out.clear();
            }
            if (ds == best) out.push_back(c);
            size_t axis = d;
            bool done = true;
            while (axis > 0) {
                --axis;
                if (++k[axis] <= 1) { done = false; break; }
                k[axis] = -1;
            }
            if (done) break;
        }
    }
    for (auto& c : out) c = c + shift;
    std::sort(out.begin(), out.end());
    return out;
}

/// Voronoi tiling of the lattice induced by a periodic M-regular center set.
/// tiles[i] holds Z(base[i]) as absolute lattice points (ties included in
/// every owning tile); ties maps each multiply-owned point, reduced into the
/// fundamental domain, to all of its nearest centers.
struct VoronoiTiling {
    PeriodicLatticeSet centers;
    Rat M;
    std::vector<std::vector<LatticeVector>> tiles;
    std::map<std::vector<Coord>, std::vector<LatticeVector>> ties;
};

/// Builds the tiling by scanning the closed 2M-ball around each base center
/// (complete: every tile point is within the covering radius < 2M of its
/// center).  Throws if the centers are not M-regular.
inline VoronoiTiling build_tiling(const PeriodicLatticeSet& R, const Rat& M) {
    auto rep = is_M_regular(R, M);
    if (!rep.regular) throw std::invalid_argument("build_tiling: center set is not M-regular");
    size_t d = R.dim();
    VoronoiTiling T;
    T.centers = R;
    T.M = M;
    auto offsets = ball_points(d, Rat(2) * M, /*closed=*/true);
    for (const auto& w : R.base) {
        std::vector<LatticeVector> tile;
        for (const auto& v : offsets) {
            LatticeVector p = w + v;
            auto nc = nearest_centers(R, p);
            bool owned = std::binary_search(nc.begin(), nc.end(), w);
            if (!owned) continue;
            tile.push_back(p);
            if (nc.size() >= 2) {
                std::vector<Coord> key(d);
                for (size_t i = 0; i < d; ++i) key[i] = floor_mod(p[i], R.periods[i]);
                if (!T.ties.count(key)) {
                    LatticeVector pr(d);
                    pr.c = key;
                    T.ties.emplace(key, nearest_centers(R, pr));
                }
            }
        }
        std::sort(tile.begin(), tile.end());
        T.tiles.push_back(std::move(tile));
    }
    // coverage: every point of the fundamental window lies in some tile
    std::vector<Coord> idx(d, 0);
    while (true) {
        LatticeVector p(d);
        p.c = idx;
        auto nc = nearest_centers(R, p);
        const auto& c = nc.front();
        size_t bi = R.base.size();
        LatticeVector b(d);
        for (size_t i = 0; i < d; ++i) b[i] = floor_mod(c[i], R.periods[i]);
        for (size_t i = 0; i < R.base.size(); ++i)
            if (R.base[i] == b) { bi = i; break; }
        if (bi == R.base.size()) throw std::logic_error("build_tiling: nearest center not realized");
        LatticeVector q = p - (c - b);
        if (!std::binary_search(T.tiles[bi].begin(), T.tiles[bi].end(), q))
            throw std::logic_error("build_tiling: window point not covered by any tile");
        size_t axis = d;
        bool done = true;
        while (axis > 0) {
            --axis;
            if (++idx[axis] < R.periods[axis]) { done = false; break; }
            idx[axis] = 0;
        }
        if (done) break;
    }
    return T;
}

/// A tile shape up to translation, anchored so that it contains the origin.
struct Prototile {
    std::vector<LatticeVector> shape;  ///< sorted, contains 0
    int multiplicity = 0;              ///< base centers realizing this shape
};

/// Deduplicates tile shapes Z(w) - w over base centers.  Multiplicities sum
/// to the number of base centers; output is ordered by shape.
inline std::vector<Prototile> prototiles(const VoronoiTiling& T) {
    std::map<std::vector<std::vector<Coord>>, int> shapes;
    for (size_t i = 0; i < T.tiles.size(); ++i) {
        const auto& w = T.centers.base[i];
        std::vector<std::vector<Coord>> key;
        key.reserve(T.tiles[i].size());
        for (const auto& p : T.tiles[i]) key.push_back((p - w).c);
        shapes[key] += 1;
    }
    std::vector<Prototile> out;
    for (auto& [key, mult] : shapes) {
        Prototile pt;
        pt.multiplicity = mult;
        bool has_origin = false;
        for (const auto& c : key) {
            LatticeVector v;
            v.c = c;
            if (norm_sq(v) == 0) has_origin = true;
            pt.shape.push_back(std::move(v));
        }
        if (!has_origin) throw std::logic_error("prototiles: shape missing the origin");
        out.push_back(std::move(pt));
    }
    return out;
}

namespace detail {

/// All realized centers at exactly squared distance f from the rational
/// point p (argmin enumeration per base point and axis).
inline std::vector<LatticeVector> centers_at_exact_min(const PeriodicLatticeSet& S,
                                                       const RationalPoint& p, const BigRat& f) {
    size_t d = S.dim();
    std::vector<LatticeVector> out;
    for (const auto& b : S.base) {
        // per-axis minimum contribution and the offsets k achieving it
        std::vector<std::vector<Coord>> arg(d);
        BigRat total(0);
        for (size_t i = 0; i < d; ++i) {
            BigRat diff = p[i] - BigRat(BigInt(b[i]));
            BigInt n(S.periods[i]);
            BigRat q = diff / BigRat(n) + BigRat(1, 2);
            BigInt qn = boost::multiprecision::numerator(q), qd = boost::multiprecision::denominator(q);
            BigInt k0;
            if (qn >= 0) {
                k0 = qn / qd;
            } else {
                k0 = -((-qn + qd - 1) / qd);
            }
            std::optional<BigRat> m;
            for (int dk = -1; dk <= 1; ++dk) {
                BigInt k = k0 + dk;
                BigRat r = diff - BigRat(k * n);
                BigRat sq = r * r;
                if (!m || sq < *m) {
                    m = sq;
                    arg[i].clear();
                }
                if (sq == *m) arg[i].push_back(static_cast<Coord>(k));
            }
            total += *m;
        }
        if (total != f) continue;
        std::vector<size_t> pick(d, 0);
        while (true) {
            LatticeVector c(d);
            for (size_t i = 0; i < d; ++i) c[i] = b[i] + arg[i][pick[i]] * S.periods[i];
            out.push_back(c);
            size_t axis = d;
            bool done = true;
            while (axis > 0) {
                --axis;
                if (++pick[axis] < arg[axis].size()) { done = false; break; }
                pick[axis] = 0;
            }
            if (done) break;
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

/// Per-base-center counts of distinct other centers whose tiles share at
/// least one real point.  For d <= 3 this is exact: tiles are closed convex
/// polytopes of the Voronoi complex, so a nonempty intersection contains a
/// vertex of the complex, and every vertex is the circumcenter of d+1
/// affinely independent nearest centers -- all such circumcenters are
/// enumerated, verified (min distance equals circumradius), and their full
/// nearest-center sets collected.  For d > 3 only shared lattice tie points
/// are used and counts are lower bounds (exact = false).
struct AdjacencyReport {
    std::vector<int> counts;  ///< per base center
    bool exact = true;
    long long bound = 0;  ///< the packing bound 5^d that every count satisfies
};

inline AdjacencyReport adjacency_counts(const VoronoiTiling& T) {
    const auto& R = T.centers;
    size_t d = R.dim();
    size_t nb = R.base.size();
    AdjacencyReport out;
    out.exact = d <= 3;
    out.bound = 1;
    for (size_t i = 0; i < d; ++i) out.bound *= 5;
    std::vector<std::set<std::vector<Coord>>> nbrs(nb);

    if (d <= 3) {
        auto cov = covering_radius(R);
        BigRat four_cov = BigRat(4) * cov.sq;
        double pr = 2.0 * std::sqrt(cov.sq.convert_to<double>()) + 1.0;
        Rat pool_r(static_cast<long long>(pr) + 1);
        for (size_t bi = 0; bi < nb; ++bi) {
            const auto& w = R.base[bi];
            auto nbpts = R.points_in_ball(w, pool_r);
            std::vector<LatticeVector> pool;
            for (auto& u : nbpts)
                if (!(u == w) && BigRat(BigInt(dist_sq(u, w))) <= four_cov) pool.push_back(u);
            size_t n = pool.size();
            std::vector<LatticeVector> pts(d + 1);
            pts[0] = w;
            auto handle = [&](const RationalPoint& cc) {
                BigRat rc2(0);
                for (size_t i = 0; i < d; ++i) {
                    BigRat diff = cc[i] - BigRat(BigInt(w[i]));
                    rc2 += diff * diff;
                }
                if (rc2 > cov.sq) return;  // vertices sit no deeper than the covering radius
                BigRat f = min_dist_sq_to_set(cc, R);
                if (f != rc2) return;  // some center is strictly closer: not a complex point
                for (const auto& c : detail::centers_at_exact_min(R, cc, f))
                    if (!(c == w)) nbrs[bi].insert(c.c);
            };
            if (d == 1) {
                for (size_t i = 0; i < n; ++i) {
                    pts[1] = pool[i];
                    if (auto cc = circumcenter(pts)) handle(*cc);
                }
            } else if (d == 2) {
                for (size_t i = 0; i < n; ++i)
                    for (size_t j = i + 1; j < n; ++j) {
                        if (BigRat(BigInt(dist_sq(pool[i], pool[j]))) > four_cov) continue;
                        pts[1] = pool[i];
                        pts[2] = pool[j];
                        if (auto cc = circumcenter(pts)) handle(*cc);
                    }
            } else {
                std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
                for (size_t i = 0; i < n; ++i)
                    for (size_t j = i + 1; j < n; ++j)
                        adj[i][j] = adj[j][i] =
                            BigRat(BigInt(dist_sq(pool[i], pool[j]))) <= four_cov ? 1 : 0;
                for (size_t i = 0; i < n; ++i)
                    for (size_t j = i + 1; j < n; ++j) {
                        if (!adj[i][j]) continue;
                        for (size_t k = j + 1; k < n; ++k) {
                            if (!adj[i][k] || !adj[j][k]) continue;
                            pts[1] = pool[i];
                            pts[2] = pool[j];
                            pts[3] = pool[k];
                            if (auto cc = circumcenter(pts)) handle(*cc);
                        }
                    }
            }
        }
    } else {
        // sufficient criterion: a shared lattice tie point certifies adjacency
        for (const auto& [key, owners] : T.ties) {
            for (const auto& c : owners) {
                LatticeVector b(d);
                for (size_t i = 0; i < d; ++i) b[i] = floor_mod(c[i], R.periods[i]);
                size_t bi = nb;
                for (size_t i = 0; i < nb; ++i)
                    if (R.base[i] == b) { bi = i; break; }
                if (bi == nb) continue;
                LatticeVector delta = c - b;
                for (const auto& c2 : owners)
                    if (!(c2 == c)) nbrs[bi].insert((c2 - delta).c);
            }
        }
    }

    for (size_t i = 0; i < nb; ++i) {
        long long count = static_cast<long long>(nbrs[i].size());
        if (count > out.bound)
            throw std::logic_error("adjacency_counts: packing bound exceeded");
        out.counts.push_back(static_cast<int>(count));
    }
    return out;
}

}  // namespace zcantor
