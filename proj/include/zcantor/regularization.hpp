/// @file regularization.hpp
/// @brief Construction of M-regular clopen sets inside a given clopen set.
///
/// Three steps: the syndetic radius of a clopen set (covering radius of its
/// return-time set, the threshold M_0 below which no M works), a clopen
/// partition into M-separated pieces (deepen until the torus is wider than M,
/// split into cells, greedily merge far-apart cells), and the greedy
/// recursion that keeps one separated class and adds later classes only
/// where they stay M-clear of what is already kept.  The result contains the
/// requested anchor point and has an M-regular return set, verified
/// exhaustively at the quotient level before it is returned.

#pragma once

#include <zcantor/odometer.hpp>
#include <zcantor/voronoi.hpp>

#include <optional>

namespace zcantor {

/// Covering radius of the return-time set of C: the exact threshold M_0 such
/// that every real point is within M_0 of a return time.  Invariance across
/// base points (translation of the return set) is asserted on a second point.
inline CoveringRadius syndetic_radius(const SystemHandle& s, const ClopenSet& C) {
    if (C.cells.empty()) throw std::invalid_argument("syndetic_radius: empty set");
    auto L = make_level(s, C.depth);
    SystemPoint x = make_point(s, C.depth, L.decode(0));
    auto cov = covering_radius(return_set(s, C, x));
    SystemPoint y = make_point(s, C.depth, L.decode(L.size > 1 ? 1 : 0));
    auto cov2 = covering_radius(return_set(s, C, y));
    bool same = cov.exact == cov2.exact && cov.grid_max_sq == cov2.grid_max_sq &&
                (!cov.exact || cov.sq == cov2.sq);
    if (!same) throw std::logic_error("syndetic_radius: radius varies across base points");
    return cov;
}

/// Partitions C into clopen pieces whose return sets are each M-separated.
/// C is refined to a depth where every torus modulus exceeds M (so each
/// single cell is already separated), then cells are greedily merged into
/// groups with all mutual coset distances > M, keeping the partition small.
/// If an anchor is given, the group containing its cell is listed first;
/// remaining groups are ordered by smallest member cell.
inline std::vector<ClopenSet> separate_partition(const SystemHandle& s, const ClopenSet& C,
                                                 const Rat& M,
                                                 std::optional<SystemPoint> anchor = {}) {
    if (C.cells.empty()) throw std::invalid_argument("separate_partition: empty set");
    int K = C.depth;
    while (true) {
        auto n = moduli(s, K);
        Coord mn = *std::min_element(n.begin(), n.end());
        if (Rat(mn) > M) break;
        if (++K > 64) throw std::runtime_error("separate_partition: depth runaway");
    }
    ClopenSet Cf = refine(s, C, K);
    auto L = make_level(s, K);
    size_t d = dim(s);
    auto diff_vec = [&](uint64_t a, uint64_t b) {
        auto ra = L.decode(a), rb = L.decode(b);
        LatticeVector v(d);
        for (size_t i = 0; i < d; ++i) v[i] = ra[i] - rb[i];
        return v;
    };
    std::vector<std::vector<uint64_t>> groups;
    for (uint64_t c : Cf.cells) {
        bool placed = false;
        for (auto& g : groups) {
            bool ok = true;
            for (uint64_t m : g)
                if (cmp_sqrt(coset_dist_sq(diff_vec(c, m), L.mod), M) <= 0) { ok = false; break; }
            if (ok) {
                g.push_back(c);
                placed = true;
                break;
            }
        }
        if (!placed) groups.push_back({c});
    }
    if (anchor) {
        uint64_t ac = L.encode(point_at_depth(s, *anchor, K).residues);
        for (size_t i = 0; i < groups.size(); ++i)
            if (std::binary_search(groups[i].begin(), groups[i].end(), ac)) {
                std::rotate(groups.begin(), groups.begin() + i, groups.begin() + i + 1);
                break;
            }
    }
    std::vector<ClopenSet> out;
    out.reserve(groups.size());
    for (auto& g : groups) out.push_back(make_clopen(K, std::move(g)));
    return out;
}

/// Greedy construction of an M-regular clopen subset D of C containing x0.
/// Writes D class by class: the anchor's separated class is kept whole, and
/// each later class contributes only cells farther than M (closed Euclidean
/// ball) from everything already kept.  Requires M > 2 and M strictly above
/// the syndetic radius of C; the M-regularity of the result's return set is
/// re-verified exhaustively and a failure is an internal defect, never a
/// silent return.
inline ClopenSet build_regular_subset(const SystemHandle& s, const ClopenSet& C,
                                      const SystemPoint& x0, const Rat& M) {
    if (!(M > Rat(2))) throw std::invalid_argument("build_regular_subset: requires M > 2");
    {
        auto Lc = make_level(s, C.depth);
        if (!C.contains(Lc.encode(point_at_depth(s, x0, C.depth).residues)))
            throw std::invalid_argument("build_regular_subset: anchor point not in C");
    }
    auto M0 = syndetic_radius(s, C);
    if (covering_cmp(M0, M) >= 0)
        throw std::invalid_argument("build_regular_subset: M must exceed the syndetic radius of C");

    auto classes = separate_partition(s, C, M, x0);
    int K = classes[0].depth;
    auto L = make_level(s, K);
    auto ball = ball_points(dim(s), M, /*closed=*/true);

    // cells within distance M of anything kept so far; grows incrementally
    std::vector<char> blocked(L.size, 0);
    auto block_around = [&](uint64_t c) {
        for (const auto& v : ball) blocked[act_cell(L, v, c)] = 1;
    };

    std::vector<uint64_t> cells = classes[0].cells;
    for (uint64_t c : cells) block_around(c);
    for (size_t n = 1; n < classes.size(); ++n) {
        std::vector<uint64_t> keep;
        for (uint64_t c : classes[n].cells)
            if (!blocked[c]) keep.push_back(c);
        for (uint64_t c : keep) block_around(c);
        std::vector<uint64_t> merged;
        merged.reserve(cells.size() + keep.size());
        std::merge(cells.begin(), cells.end(), keep.begin(), keep.end(),
                   std::back_inserter(merged));
        cells = std::move(merged);
    }
    ClopenSet D = make_clopen(K, std::move(cells));

    if (!D.contains(L.encode(point_at_depth(s, x0, K).residues)))
        throw std::logic_error("build_regular_subset: anchor lost during construction");
    auto rep = is_M_regular(return_set(s, D, x0), M);
    if (!rep.regular)
        throw std::logic_error("build_regular_subset: output failed the regularity check");
    return D;
}

}  // namespace zcantor
