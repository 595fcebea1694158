/// @file odometer.hpp
/// @brief Z^d odometers, towers over them, quotient levels and clopen sets.
///
/// A system is either an odometer with one scale schedule per axis, or a tower
/// of height m over an inner system.  Depth-K data: per-axis moduli N_{K,i}
/// (products of the first K entries; schedules extend implicitly by repeating
/// their last entry), cells of the finite quotient indexed row-major, and the
/// translation action.  Tower cells carry the label r = u + m x (offset u in
/// {0..m-1}^d, inner cell x); acting decomposes the label, runs the carry rule
/// v + u = m w + r', translates the inner system by w and recombines, which is
/// exactly the tower action and agrees with label addition (the canonical
/// conjugacy to the prepended odometer; tower_conjugacy_check certifies it).
///
/// Points are finite-depth truncations, i.e. cells; extending a point to a
/// deeper level keeps its residues (zero higher digits), the canonical section.

#pragma once

#include "lattice.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <set>

namespace zcantor {

/// Per-axis scale entries, each >= 2; entry(axis, k) beyond the stored prefix
/// repeats the last entry (on-demand extension, handles stay immutable).
struct ScaleSchedule {
    std::vector<std::vector<int>> axes;

    ScaleSchedule() = default;
    explicit ScaleSchedule(std::vector<std::vector<int>> a) : axes(std::move(a)) {
        if (axes.empty()) throw std::invalid_argument("ScaleSchedule: no axes");
        for (auto& ax : axes) {
            if (ax.empty()) throw std::invalid_argument("ScaleSchedule: empty axis");
            for (int e : ax)
                if (e < 2) throw std::invalid_argument("ScaleSchedule: entry < 2");
        }
    }

    size_t dim() const { return axes.size(); }
    int entry(size_t axis, int k) const {
        const auto& ax = axes[axis];
        return k < static_cast<int>(ax.size()) ? ax[k] : ax.back();
    }
};

struct SystemNode;
using SystemHandle = std::shared_ptr<const SystemNode>;

struct SystemNode {
    enum class Kind { odometer, tower } kind = Kind::odometer;
    ScaleSchedule sched;  // odometer
    SystemHandle inner;   // tower
    Coord height = 0;     // tower
};

inline SystemHandle make_odometer(std::vector<std::vector<int>> axes) {
    auto n = std::make_shared<SystemNode>();
    n->kind = SystemNode::Kind::odometer;
    n->sched = ScaleSchedule(std::move(axes));
    return n;
}

inline SystemHandle make_tower(SystemHandle inner, Coord m) {
    if (m < 2) throw std::invalid_argument("make_tower: height < 2");
    auto n = std::make_shared<SystemNode>();
    n->kind = SystemNode::Kind::tower;
    n->inner = std::move(inner);
    n->height = m;
    return n;
}

inline size_t dim(const SystemHandle& s) {
    return s->kind == SystemNode::Kind::odometer ? s->sched.dim() : dim(s->inner);
}

/// Per-axis moduli of the depth-K quotient.
inline std::vector<Coord> moduli(const SystemHandle& s, int K) {
    if (K < 0) throw std::invalid_argument("moduli: negative depth");
    if (s->kind == SystemNode::Kind::odometer) {
        std::vector<Coord> n(s->sched.dim(), 1);
        for (size_t i = 0; i < n.size(); ++i)
            for (int k = 0; k < K; ++k) n[i] *= s->sched.entry(i, k);
        return n;
    }
    if (K == 0) return std::vector<Coord>(dim(s), 1);
    auto n = moduli(s->inner, K - 1);
    for (auto& x : n) x *= s->height;
    return n;
}

/// Structural equality of system descriptions.
inline bool same_system(const SystemHandle& a, const SystemHandle& b) {
    if (a->kind != b->kind) return false;
    if (a->kind == SystemNode::Kind::odometer) return a->sched.axes == b->sched.axes;
    return a->height == b->height && same_system(a->inner, b->inner);
}

/// Geometry of one quotient level: moduli, row-major strides, cell codec.
struct QuotientLevel {
    SystemHandle sys;
    int depth = 0;
    std::vector<Coord> mod;
    std::vector<unsigned long long> strides;
    unsigned long long size = 1;

    uint64_t encode(const std::vector<Coord>& r) const {
        uint64_t idx = 0;
        for (size_t i = 0; i < mod.size(); ++i) idx += static_cast<uint64_t>(r[i]) * strides[i];
        return idx;
    }
    std::vector<Coord> decode(uint64_t cell) const {
        std::vector<Coord> r(mod.size());
        for (size_t i = 0; i < mod.size(); ++i) {
            r[i] = static_cast<Coord>(cell / strides[i]);
            cell %= strides[i];
        }
        return r;
    }
};

inline QuotientLevel make_level(const SystemHandle& s, int K) {
    QuotientLevel L;
    L.sys = s;
    L.depth = K;
    L.mod = moduli(s, K);
    L.strides.assign(L.mod.size(), 1);
    for (size_t i = L.mod.size(); i-- > 0;) {
        if (i + 1 < L.mod.size()) L.strides[i] = L.strides[i + 1] * static_cast<unsigned long long>(L.mod[i + 1]);
    }
    L.size = 1;
    for (Coord m : L.mod) {
        if (L.size > (1ULL << 40) / static_cast<unsigned long long>(m))
            throw std::overflow_error("make_level: quotient too large");
        L.size *= static_cast<unsigned long long>(m);
    }
    return L;
}

inline Coord floor_div(Coord a, Coord b) {
    Coord q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

/// Translation action on depth-K residues.  Odometer: per-axis addition mod N.
/// Tower: label decomposition + carry rule + inner action.
inline void act_residues(const SystemHandle& s, int K, const LatticeVector& v, std::vector<Coord>& r) {
    if (s->kind == SystemNode::Kind::odometer || K == 0) {
        auto n = moduli(s, K);
        for (size_t i = 0; i < r.size(); ++i) r[i] = floor_mod(r[i] + v[i], n[i]);
        return;
    }
    Coord m = s->height;
    size_t d = r.size();
    LatticeVector w(d);
    std::vector<Coord> x(d), rr(d);
    for (size_t i = 0; i < d; ++i) {
        Coord u = r[i] % m;
        x[i] = r[i] / m;
        Coord t = v[i] + u;
        w[i] = floor_div(t, m);
        rr[i] = t - m * w[i];
    }
    act_residues(s->inner, K - 1, w, x);
    for (size_t i = 0; i < d; ++i) r[i] = rr[i] + m * x[i];
}

inline uint64_t act_cell(const QuotientLevel& L, const LatticeVector& v, uint64_t cell) {
    auto r = L.decode(cell);
    act_residues(L.sys, L.depth, v, r);
    return L.encode(r);
}

/// A point is a finite-depth truncation: depth + residues.
struct SystemPoint {
    int depth = 0;
    std::vector<Coord> residues;
};

inline SystemPoint make_point(const SystemHandle& s, int K, std::vector<Coord> residues) {
    auto n = moduli(s, K);
    if (residues.size() != n.size()) throw std::invalid_argument("make_point: dimension mismatch");
    for (size_t i = 0; i < n.size(); ++i) residues[i] = floor_mod(residues[i], n[i]);
    SystemPoint p;
    p.depth = K;
    p.residues = std::move(residues);
    return p;
}

inline SystemPoint act(const SystemHandle& s, const LatticeVector& v, SystemPoint p) {
    act_residues(s, p.depth, v, p.residues);
    return p;
}

/// Truncate or zero-extend a point to another depth (canonical section).
inline SystemPoint point_at_depth(const SystemHandle& s, const SystemPoint& p, int K) {
    if (K == p.depth) return p;
    auto n = moduli(s, K);
    SystemPoint q;
    q.depth = K;
    q.residues = p.residues;
    for (size_t i = 0; i < n.size(); ++i) q.residues[i] = floor_mod(q.residues[i], n[i]);
    return q;
}

/// Clopen set: union of depth-K cells, sorted unique.
struct ClopenSet {
    int depth = 0;
    std::vector<uint64_t> cells;

    bool contains(uint64_t cell) const {
        return std::binary_search(cells.begin(), cells.end(), cell);
    }
    size_t count() const { return cells.size(); }
};

inline ClopenSet make_clopen(int depth, std::vector<uint64_t> cells) {
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    ClopenSet c;
    c.depth = depth;
    c.cells = std::move(cells);
    return c;
}

inline ClopenSet whole_space(const SystemHandle& s, int K) {
    auto L = make_level(s, K);
    std::vector<uint64_t> cells(L.size);
    for (uint64_t i = 0; i < L.size; ++i) cells[i] = i;
    ClopenSet c;
    c.depth = K;
    c.cells = std::move(cells);
    return c;
}

/// Refine a clopen set to a deeper level: each cell is replaced by its fiber.
inline ClopenSet refine(const SystemHandle& s, const ClopenSet& C, int K) {
    if (K < C.depth) throw std::invalid_argument("refine: target shallower than source");
    if (K == C.depth) return C;
    auto Lc = make_level(s, C.depth);
    auto Lf = make_level(s, K);
    size_t d = dim(s);
    std::vector<Coord> ratio(d);
    for (size_t i = 0; i < d; ++i) {
        if (Lf.mod[i] % Lc.mod[i] != 0) throw std::logic_error("refine: non-nested levels");
        ratio[i] = Lf.mod[i] / Lc.mod[i];
    }
    std::vector<uint64_t> cells;
    cells.reserve(C.cells.size() * static_cast<size_t>(Lf.size / Lc.size));
    for (uint64_t cell : C.cells) {
        auto r = Lc.decode(cell);
        std::vector<Coord> t(d, 0);
        while (true) {
            std::vector<Coord> rr(d);
            for (size_t i = 0; i < d; ++i) rr[i] = r[i] + Lc.mod[i] * t[i];
            cells.push_back(Lf.encode(rr));
            size_t axis = d;
            bool done = true;
            while (axis > 0) {
                --axis;
                if (++t[axis] < ratio[axis]) {
                    for (size_t j = axis + 1; j < d; ++j) t[j] = 0;
                    done = false;
                    break;
                }
                t[axis] = 0;
            }
            if (done) break;
        }
    }
    return make_clopen(K, std::move(cells));
}

/// Reduce to the minimal depth at which the set is a union of cells
/// (the canonical form).
inline ClopenSet normalize(const SystemHandle& s, ClopenSet C) {
    while (C.depth > 0) {
        auto Lc = make_level(s, C.depth);
        auto Lp = make_level(s, C.depth - 1);
        size_t d = dim(s);
        uint64_t fiber = Lc.size / Lp.size;
        if (C.cells.size() % fiber != 0) break;
        std::map<uint64_t, uint64_t> groups;  // parent cell -> count
        for (uint64_t cell : C.cells) {
            auto r = Lc.decode(cell);
            std::vector<Coord> rp(d);
            for (size_t i = 0; i < d; ++i) rp[i] = r[i] % Lp.mod[i];
            ++groups[Lp.encode(rp)];
        }
        bool full = true;
        for (auto& [p, n] : groups)
            if (n != fiber) { full = false; break; }
        if (!full) break;
        std::vector<uint64_t> parents;
        parents.reserve(groups.size());
        for (auto& [p, n] : groups) parents.push_back(p);
        C = make_clopen(C.depth - 1, std::move(parents));
    }
    return C;
}

inline ClopenSet translate(const SystemHandle& s, const ClopenSet& C, const LatticeVector& v) {
    auto L = make_level(s, C.depth);
    std::vector<uint64_t> cells;
    cells.reserve(C.cells.size());
    for (uint64_t cell : C.cells) cells.push_back(act_cell(L, v, cell));
    return make_clopen(C.depth, std::move(cells));
}

inline ClopenSet complement(const SystemHandle& s, const ClopenSet& C) {
    auto L = make_level(s, C.depth);
    std::vector<uint64_t> cells;
    cells.reserve(static_cast<size_t>(L.size) - C.cells.size());
    size_t j = 0;
    for (uint64_t i = 0; i < L.size; ++i) {
        if (j < C.cells.size() && C.cells[j] == i) {
            ++j;
        } else {
            cells.push_back(i);
        }
    }
    ClopenSet out;
    out.depth = C.depth;
    out.cells = std::move(cells);
    return out;
}

inline int common_depth(const ClopenSet& A, const ClopenSet& B) { return std::max(A.depth, B.depth); }

inline ClopenSet set_union(const SystemHandle& s, ClopenSet A, ClopenSet B) {
    int K = common_depth(A, B);
    A = refine(s, A, K);
    B = refine(s, B, K);
    std::vector<uint64_t> cells;
    std::set_union(A.cells.begin(), A.cells.end(), B.cells.begin(), B.cells.end(), std::back_inserter(cells));
    ClopenSet out;
    out.depth = K;
    out.cells = std::move(cells);
    return out;
}

inline ClopenSet set_intersection(const SystemHandle& s, ClopenSet A, ClopenSet B) {
    int K = common_depth(A, B);
    A = refine(s, A, K);
    B = refine(s, B, K);
    std::vector<uint64_t> cells;
    std::set_intersection(A.cells.begin(), A.cells.end(), B.cells.begin(), B.cells.end(), std::back_inserter(cells));
    ClopenSet out;
    out.depth = K;
    out.cells = std::move(cells);
    return out;
}

inline ClopenSet set_difference(const SystemHandle& s, ClopenSet A, ClopenSet B) {
    int K = common_depth(A, B);
    A = refine(s, A, K);
    B = refine(s, B, K);
    std::vector<uint64_t> cells;
    std::set_difference(A.cells.begin(), A.cells.end(), B.cells.begin(), B.cells.end(), std::back_inserter(cells));
    ClopenSet out;
    out.depth = K;
    out.cells = std::move(cells);
    return out;
}

inline bool clopen_equal(const SystemHandle& s, const ClopenSet& A, const ClopenSet& B) {
    int K = common_depth(A, B);
    return refine(s, A, K).cells == refine(s, B, K).cells;
}

/// Return-time set R_C(x) = { v : act(v, x) in C } as a periodic lattice set.
/// The quotient at the common depth is a group under label addition (towers
/// included, via the canonical conjugacy), so the set is base + moduli Z^d
/// with base = { c - x mod N : c in C }.
inline PeriodicLatticeSet return_set(const SystemHandle& s, const ClopenSet& C, const SystemPoint& x) {
    int K = std::max(C.depth, x.depth);
    ClopenSet Cf = refine(s, C, K);
    SystemPoint xf = point_at_depth(s, x, K);
    auto L = make_level(s, K);
    size_t d = dim(s);
    std::vector<LatticeVector> base;
    base.reserve(Cf.cells.size());
    for (uint64_t cell : Cf.cells) {
        auto r = L.decode(cell);
        LatticeVector b(d);
        for (size_t i = 0; i < d; ++i) b[i] = floor_mod(r[i] - xf.residues[i], L.mod[i]);
        base.push_back(b);
    }
    return PeriodicLatticeSet(L.mod, std::move(base));
}

/// Smallest depth whose moduli all exceed 2R+1 (window-faithfulness bound for
/// radius-R computations).
inline int depth_for_radius(const SystemHandle& s, const Rat& R) {
    Rat bound = Rat(2) * R + Rat(1);
    for (int K = 0;; ++K) {
        auto n = moduli(s, K);
        Coord mn = *std::min_element(n.begin(), n.end());
        if (Rat(mn) > bound) return K;
        if (K > 64) throw std::logic_error("depth_for_radius: runaway depth");
    }
}

/// The odometer canonically conjugate to a tower: the tower height prepended
/// to every axis of the (recursively flattened) inner system.
inline SystemHandle prepended_odometer(const SystemHandle& s) {
    if (s->kind == SystemNode::Kind::odometer) return s;
    SystemHandle inner = prepended_odometer(s->inner);
    auto axes = inner->sched.axes;
    for (auto& ax : axes) ax.insert(ax.begin(), static_cast<int>(s->height));
    return make_odometer(axes);
}

/// Exhaustive cell-level check that the tower action with carries equals the
/// prepended odometer's plain label addition, at depths 1..depth_max, for all
/// generators and their inverses.
inline bool tower_conjugacy_check(const SystemHandle& tower, int depth_max) {
    if (tower->kind != SystemNode::Kind::tower)
        throw std::invalid_argument("tower_conjugacy_check: not a tower");
    SystemHandle flat = prepended_odometer(tower);
    size_t d = dim(tower);
    for (int K = 1; K <= depth_max; ++K) {
        auto Lt = make_level(tower, K);
        auto Lo = make_level(flat, K);
        if (Lt.mod != Lo.mod) return false;
        for (uint64_t cell = 0; cell < Lt.size; ++cell) {
            for (size_t axis = 0; axis < d; ++axis) {
                for (Coord sgn : {1, -1}) {
                    LatticeVector e(d);
                    e[axis] = sgn;
                    if (act_cell(Lt, e, cell) != act_cell(Lo, e, cell)) return false;
                }
            }
        }
    }
    return true;
}

}  // namespace zcantor
