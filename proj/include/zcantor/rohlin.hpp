#pragma once
/// Voronoi-Rohlin tower partitions over odometer systems.
///
/// Starting from an M-regular clopen center set D, cells of D are classified
/// by the pattern of return vectors they see inside the closed 4M-ball.  The
/// working level is deepened until every axis modulus exceeds 4M, and any
/// class whose members are not pairwise more than 4M apart is split into
/// singleton cells, so same-class centers are always separated by more than
/// 4M.  Each class then receives an integer prototile: the lattice points of
/// the Voronoi tile around an origin-placed center, with boundary ties
/// awarded to the competing center of smallest class index (lexicographically
/// smallest position as the secondary rule).  Translating each class along
/// its prototile partitions the space exactly; the construction carries
/// machine-checked certificates for that partition property, for the closed
/// M/2-ball sitting inside every prototile, for every prototile sitting
/// strictly inside the open 2M-ball, and an empirical bound on the boundary
/// growth |Z (+) (Z - v)| / (|v| M^(d-1)) over sampled displacements.

#include <zcantor/lattice.hpp>
#include <zcantor/odometer.hpp>
#include <zcantor/rational.hpp>
#include <zcantor/regularization.hpp>
#include <zcantor/voronoi.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

namespace zcantor {

namespace detail {

/// Smallest depth >= min_depth at which every axis modulus strictly exceeds
/// 4M.  At such a level two occurrences of the same cell are more than 4M
/// apart, so singleton classes automatically satisfy the separation rule.
inline int pattern_depth(const SystemHandle& s, int min_depth, const Rat& M) {
    Rat four_m = Rat(4) * M;
    for (int K = std::max(min_depth, 1);; ++K) {
        if (K > 64) throw std::runtime_error("pattern_depth: modulus growth stalled");
        auto mods = moduli(s, K);
        if (Rat(*std::min_element(mods.begin(), mods.end())) > four_m) return K;
    }
}

/// Which offsets of `ball` move `cell` back into D.  D must live at the
/// level's depth.  Cells with equal patterns see the same return-set
/// geometry out to the ball radius.
inline std::vector<char> local_pattern(const QuotientLevel& L, const ClopenSet& D,
                                       const std::vector<LatticeVector>& ball, uint64_t cell) {
    std::vector<char> pat(ball.size(), 0);
    for (size_t i = 0; i < ball.size(); ++i)
        if (D.contains(act_cell(L, ball[i], cell))) pat[i] = 1;
    return pat;
}

/// Shared classification core.  Groups the cells of D (refined to the
/// pattern depth) by their closed-4M-ball return pattern; classes are
/// ordered by smallest member cell.  With `split_close_classes` set, any
/// class containing two cells at coset distance <= 4M is broken into
/// singletons so that same-class separation > 4M always holds afterwards.
struct CenterClassification {
    int depth = 0;
    QuotientLevel level;
    ClopenSet centers;  ///< D refined to `depth`
    std::vector<std::vector<uint64_t>> classes;
};

inline CenterClassification classify_cells(const SystemHandle& s, const ClopenSet& D,
                                           const Rat& M, bool split_close_classes) {
    if (D.cells.empty()) throw std::invalid_argument("classify_centers: empty center set");
    {
        auto Ld = make_level(s, D.depth);
        auto x = make_point(s, D.depth, Ld.decode(D.cells.front()));
        auto rep = is_M_regular(return_set(s, D, x), M);
        if (!rep.regular)
            throw std::invalid_argument("classify_centers: center set is not M-regular");
    }

    CenterClassification out;
    out.depth = pattern_depth(s, D.depth, M);
    out.level = make_level(s, out.depth);
    out.centers = refine(s, D, out.depth);

    auto ball = ball_points(dim(s), Rat(4) * M, true);
    std::map<std::vector<char>, std::vector<uint64_t>> groups;
    for (uint64_t c : out.centers.cells)
        groups[local_pattern(out.level, out.centers, ball, c)].push_back(c);

    Rat four_m = Rat(4) * M;
    for (auto& [pat, cells] : groups) {
        bool separated = true;
        if (split_close_classes && cells.size() > 1) {
            for (size_t i = 0; i < cells.size() && separated; ++i)
                for (size_t j = i + 1; j < cells.size() && separated; ++j) {
                    auto a = out.level.decode(cells[i]);
                    auto b = out.level.decode(cells[j]);
                    LatticeVector diff(a.size());
                    for (size_t t = 0; t < a.size(); ++t) diff[t] = a[t] - b[t];
                    if (cmp_sqrt(coset_dist_sq(diff, out.level.mod), four_m) <= 0)
                        separated = false;
                }
        }
        if (separated)
            out.classes.push_back(cells);
        else
            for (uint64_t c : cells) out.classes.push_back({c});
    }
    std::sort(out.classes.begin(), out.classes.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return out;
}

/// Integer points of the origin-centered Voronoi tile of R, with boundary
/// ties resolved by priority: smallest class index first, lexicographically
/// smallest center position second.  `class_at` maps a return vector to the
/// class index of the cell it lands in.  With `forbid_same_class_ties` set,
/// a tie between two distinct centers of the same class throws: same-class
/// separation > 4M makes such ties geometrically impossible, so hitting one
/// signals a broken refinement.
template <typename ClassAt>
std::vector<LatticeVector> origin_tile(const PeriodicLatticeSet& R, const Rat& M,
                                       ClassAt&& class_at, bool forbid_same_class_ties) {
    size_t d = R.dim();
    LatticeVector zero(d);
    // Competing centers live within 4M of the origin: any center at least as
    // close as the origin to a candidate p (with |p| <= 2M) is within 4M.
    auto local = R.points_in_ball(zero, Rat(4) * M);
    std::vector<LatticeVector> tile;
    for (const auto& p : ball_points(d, Rat(2) * M, true)) {
        long long f0 = norm_sq(p);
        bool beaten = false;
        std::vector<const LatticeVector*> owners;
        for (const auto& u : local) {
            long long f = dist_sq(p, u);
            if (f < f0) {
                beaten = true;
                break;
            }
            if (f == f0) owners.push_back(&u);
        }
        if (beaten) continue;
        if (owners.size() > 1) {
            const LatticeVector* win = nullptr;
            int win_cls = 0;
            std::map<int, int> per_class;
            for (const LatticeVector* u : owners) {
                int cls = class_at(*u);
                ++per_class[cls];
                if (win == nullptr || cls < win_cls || (cls == win_cls && *u < *win)) {
                    win = u;
                    win_cls = cls;
                }
            }
            if (forbid_same_class_ties)
                for (auto& [cls, count] : per_class)
                    if (count > 1)
                        throw std::logic_error(
                            "origin_tile: boundary tie between same-class centers "
                            "(separation refinement failed)");
            if (!(*win == zero)) continue;
        }
        tile.push_back(p);
    }
    std::sort(tile.begin(), tile.end());
    return tile;
}

}  // namespace detail

/// Partitions an M-regular clopen center set D into classes of cells that
/// see identical return patterns inside the closed 4M-ball, splitting any
/// class that violates the > 4M same-class separation into singleton cells.
/// Classes are clopen at the (auto-deepened) working depth and ordered by
/// smallest member cell.  Throws if D is not M-regular.
inline std::vector<ClopenSet> classify_centers(const SystemHandle& s, const ClopenSet& D,
                                               const Rat& M) {
    auto cc = detail::classify_cells(s, D, M, true);
    std::vector<ClopenSet> out;
    out.reserve(cc.classes.size());
    for (auto& cells : cc.classes) out.push_back(make_clopen(cc.depth, cells));
    return out;
}

/// The integer prototile of pattern class k of D: lattice points of the
/// Voronoi tile around an origin-placed center of the class, boundary ties
/// resolved toward the smallest class index and then the lexicographically
/// smallest center position.  Classes here are the raw pattern classes
/// (no separation split), so a single-class center set exercises the
/// secondary rule.  The shape is computed from every member cell and must
/// agree across the class; the origin always belongs to the result.
inline std::vector<LatticeVector> integer_prototile(const SystemHandle& s, const ClopenSet& D,
                                                    const Rat& M, size_t k) {
    auto cc = detail::classify_cells(s, D, M, false);
    if (k >= cc.classes.size())
        throw std::out_of_range("integer_prototile: class index out of range");
    std::vector<int> class_of(cc.level.size, -1);
    for (size_t j = 0; j < cc.classes.size(); ++j)
        for (uint64_t c : cc.classes[j]) class_of[c] = static_cast<int>(j);

    std::vector<LatticeVector> shape;
    bool first = true;
    for (uint64_t a : cc.classes[k]) {
        auto x = make_point(s, cc.depth, cc.level.decode(a));
        auto R = return_set(s, cc.centers, x);
        auto class_at = [&](const LatticeVector& u) {
            int cls = class_of[act_cell(cc.level, u, a)];
            if (cls < 0) throw std::logic_error("integer_prototile: return vector left the centers");
            return cls;
        };
        auto tile = detail::origin_tile(R, M, class_at, false);
        if (first) {
            shape = std::move(tile);
            first = false;
        } else if (tile != shape) {
            throw std::logic_error("integer_prototile: tile shape varies within a class");
        }
    }
    return shape;
}

/// A certified Rohlin tower partition: translating each class C_k along its
/// integer prototile Z_k covers every cell of the working level exactly once.
struct VoronoiRohlinPartition {
    SystemHandle system;
    ClopenSet centers;  ///< the M-regular center set D, at the working depth
    Rat M;
    std::vector<ClopenSet> classes;                      ///< C_1..C_K, partition of D
    std::vector<std::vector<LatticeVector>> prototiles;  ///< Z_1..Z_K, sorted, each contains 0
    int depth = 0;                                       ///< working depth of the refinement

    // certificate
    bool classes_partition_centers = false;  ///< the C_k are disjoint with union D
    bool anchor_inside = false;              ///< the requested base point lies in some C_k
    bool cover_exact = false;                ///< every cell hit exactly once by {class + w}
    bool half_ball_inside = false;           ///< every Z_k contains the closed M/2 ball
    bool diameter_bound = false;             ///< every Z_k lies strictly inside the open 2M ball
    double boundary_constant = 0.0;          ///< sup |Z_k (+) (Z_k - v)| / (|v| M^(d-1)) sampled
};

namespace detail {

/// Sampled displacements for the boundary-growth ratio: the punctured
/// sup-norm-2 window plus axis vectors of length 4, 8 and floor(2M).
inline std::vector<LatticeVector> boundary_samples(size_t d, const Rat& M) {
    std::vector<LatticeVector> out;
    for (const auto& w : window_points(d, 2))
        if (norm_sq(w) != 0) out.push_back(w);
    long long two_m = (Rat(2) * M).num / (Rat(2) * M).den;
    for (long long r : {4LL, 8LL, two_m})
        for (size_t i = 0; i < d; ++i) {
            LatticeVector v(d);
            v[i] = r;
            out.push_back(v);
        }
    return out;
}

inline size_t symdiff_size(const std::vector<LatticeVector>& A, const LatticeVector& v) {
    // |A (+) (A - v)| = 2 (|A| - |A intersect (A - v)|)
    size_t common = 0;
    for (const auto& a : A)
        if (std::binary_search(A.begin(), A.end(), a + v)) ++common;
    return 2 * (A.size() - common);
}

/// Fills the certificate fields of P.  The partition, half-ball and diameter
/// properties are theorems of the construction, so any failure is a hard
/// logic error; the boundary constant is an empirical report.
inline void certify(VoronoiRohlinPartition& P) {
    auto L = make_level(P.system, P.depth);
    size_t d = dim(P.system);

    // classes partition the centers
    size_t total = 0;
    std::vector<char> in_class(L.size, 0);
    for (const auto& C : P.classes) {
        if (C.depth != P.depth) throw std::logic_error("certify: class depth mismatch");
        for (uint64_t c : C.cells) {
            if (in_class[c]) throw std::logic_error("certify: classes overlap");
            in_class[c] = 1;
            ++total;
        }
    }
    if (total != P.centers.cells.size())
        throw std::logic_error("certify: classes do not cover the centers");
    for (uint64_t c : P.centers.cells)
        if (!in_class[c]) throw std::logic_error("certify: classes do not cover the centers");
    P.classes_partition_centers = true;

    // exact cover by prototile translates
    std::vector<uint32_t> hits(L.size, 0);
    uint64_t placed = 0;
    for (size_t k = 0; k < P.classes.size(); ++k)
        for (uint64_t c : P.classes[k].cells)
            for (const auto& w : P.prototiles[k]) {
                ++hits[act_cell(L, w, c)];
                ++placed;
            }
    P.cover_exact = placed == L.size &&
                    std::all_of(hits.begin(), hits.end(), [](uint32_t h) { return h == 1; });
    if (!P.cover_exact)
        throw std::logic_error("certify: prototile translates do not partition the level");

    // closed M/2 ball inside every prototile
    auto half = ball_points(d, P.M / Rat(2), true);
    P.half_ball_inside = true;
    for (const auto& Z : P.prototiles)
        for (const auto& v : half)
            if (!std::binary_search(Z.begin(), Z.end(), v)) {
                P.half_ball_inside = false;
                break;
            }
    if (!P.half_ball_inside)
        throw std::logic_error("certify: a prototile misses part of the closed M/2 ball");

    // every prototile vector strictly shorter than 2M
    Rat two_m = Rat(2) * P.M;
    P.diameter_bound = true;
    for (const auto& Z : P.prototiles)
        for (const auto& v : Z)
            if (cmp_sqrt(norm_sq(v), two_m) >= 0) P.diameter_bound = false;
    if (!P.diameter_bound)
        throw std::logic_error("certify: a prototile reaches norm 2M");

    // empirical boundary growth
    double m_pow = std::pow(P.M.to_double(), static_cast<double>(d) - 1.0);
    double sup = 0.0;
    for (const auto& Z : P.prototiles)
        for (const auto& v : boundary_samples(d, P.M)) {
            double ratio = static_cast<double>(symdiff_size(Z, v)) /
                           (std::sqrt(static_cast<double>(norm_sq(v))) * m_pow);
            sup = std::max(sup, ratio);
        }
    P.boundary_constant = sup;
}

}  // namespace detail

/// Builds a certified Rohlin tower partition of the whole space from a clopen
/// set C, a base point x0 in C and a scale M: carves an M-regular center set
/// D out of C around x0, classifies its cells by 4M-patterns (with the > 4M
/// same-class separation enforced), computes one integer prototile per class
/// member and groups members by resulting shape.  Certification failures on
/// the partition, half-ball or diameter properties are hard errors.
inline VoronoiRohlinPartition build_partition(const SystemHandle& s, const ClopenSet& C,
                                              const SystemPoint& x0, const Rat& M) {
    ClopenSet D = build_regular_subset(s, C, x0, M);
    auto cc = detail::classify_cells(s, D, M, true);
    const QuotientLevel& L = cc.level;

    std::vector<int> class_of(L.size, -1);
    for (size_t j = 0; j < cc.classes.size(); ++j)
        for (uint64_t c : cc.classes[j]) class_of[c] = static_cast<int>(j);

    // shape per member cell; final classes grouped by (pattern class, shape)
    std::map<std::pair<int, std::vector<std::vector<Coord>>>, std::vector<uint64_t>> grouped;
    for (size_t j = 0; j < cc.classes.size(); ++j)
        for (uint64_t a : cc.classes[j]) {
            auto x = make_point(s, cc.depth, L.decode(a));
            auto R = return_set(s, cc.centers, x);
            auto class_at = [&](const LatticeVector& u) {
                int cls = class_of[act_cell(L, u, a)];
                if (cls < 0)
                    throw std::logic_error("build_partition: return vector left the centers");
                return cls;
            };
            auto tile = detail::origin_tile(R, M, class_at, true);
            std::vector<std::vector<Coord>> key;
            key.reserve(tile.size());
            for (const auto& p : tile) key.push_back(p.c);
            grouped[{static_cast<int>(j), std::move(key)}].push_back(a);
        }

    VoronoiRohlinPartition P;
    P.system = s;
    P.centers = cc.centers;
    P.M = M;
    P.depth = cc.depth;
    std::vector<std::pair<uint64_t, size_t>> order;  // (smallest member, slot)
    std::vector<std::pair<std::vector<uint64_t>, std::vector<LatticeVector>>> built;
    for (auto& [key, cells] : grouped) {
        std::vector<LatticeVector> shape;
        shape.reserve(key.second.size());
        for (const auto& c : key.second) {
            LatticeVector v;
            v.c = c;
            shape.push_back(std::move(v));
        }
        order.emplace_back(cells.front(), built.size());
        built.emplace_back(std::move(cells), std::move(shape));
    }
    std::sort(order.begin(), order.end());
    for (auto& [front, slot] : order) {
        P.classes.push_back(make_clopen(P.depth, built[slot].first));
        P.prototiles.push_back(std::move(built[slot].second));
    }

    detail::certify(P);

    // anchor containment: x0 sits in one of the classes, and every class
    // cell descends from C
    uint64_t cell0 = L.encode(point_at_depth(s, x0, P.depth).residues);
    ClopenSet refined_c = refine(s, C, P.depth);
    P.anchor_inside = P.centers.contains(cell0) &&
                      set_difference(s, P.centers, refined_c).cells.empty();
    if (!P.anchor_inside)
        throw std::logic_error("build_partition: anchor left the tower base");
    return P;
}

/// Splits every class of P along the clopen family Q, which must partition
/// either the whole space or the center set; pieces inherit their class's
/// prototile unchanged and the certificate is recomputed.  Class order is
/// preserved (pieces of an earlier class come first, ordered by Q).
inline VoronoiRohlinPartition refine_against(const VoronoiRohlinPartition& P,
                                             const std::vector<ClopenSet>& Q) {
    const SystemHandle& s = P.system;
    if (Q.empty()) throw std::invalid_argument("refine_against: empty refining family");
    int K = P.depth;
    for (const auto& q : Q) K = std::max(K, q.depth);

    // Q must be pairwise disjoint with union X or union D
    auto L = make_level(s, K);
    std::vector<ClopenSet> fine;
    fine.reserve(Q.size());
    size_t total = 0;
    for (const auto& q : Q) {
        fine.push_back(refine(s, q, K));
        total += fine.back().cells.size();
    }
    ClopenSet all = fine.front();
    for (size_t i = 1; i < fine.size(); ++i) all = set_union(s, all, fine[i]);
    bool disjoint = all.cells.size() == total;
    ClopenSet centers_fine = refine(s, P.centers, K);
    bool of_space = disjoint && all.cells.size() == L.size;
    bool of_centers = disjoint && all.cells == centers_fine.cells;
    if (!of_space && !of_centers)
        throw std::invalid_argument(
            "refine_against: family is not a partition of the space or of the centers");

    VoronoiRohlinPartition R;
    R.system = s;
    R.centers = centers_fine;
    R.M = P.M;
    R.depth = K;
    R.anchor_inside = P.anchor_inside;
    for (size_t j = 0; j < P.classes.size(); ++j) {
        ClopenSet Cj = refine(s, P.classes[j], K);
        for (const auto& q : fine) {
            ClopenSet piece = set_intersection(s, Cj, q);
            if (piece.cells.empty()) continue;
            R.classes.push_back(std::move(piece));
            R.prototiles.push_back(P.prototiles[j]);
        }
    }
    detail::certify(R);
    return R;
}

}  // namespace zcantor
