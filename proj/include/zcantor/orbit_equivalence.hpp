#pragma once
// Orbit equivalences between systems embedded in a common host.
//
// The objects here upgrade bounded orbit injections (orbit_maps.hpp) to
// bijections.  The working pieces are:
//
//   * FullGroupElement -- a bijection of the host that moves every point by a
//     locally constant lattice displacement, stored as one vector per cell of
//     a quotient level.  Composing an injection with such an element and the
//     inverse of a second injection yields an orbit equivalence.
//
//   * full_group_exchange -- given two equal-class clopen sets A and B and
//     designated points x0 in A, y0 in B, carves A' = A minus an epsilon
//     cylinder at x0 and produces an involution moving the part of A' that
//     lies outside B into B away from y0's cell.  The per-class slot
//     injections come from a Voronoi-Rohlin partition whose centers sit
//     inside A, swept over scales until every class has room.
//
//   * back_and_forth -- alternates the exchange between the two sets for a
//     finite schedule of shrinking radii, accumulating disjoint carved
//     pieces; the uncovered residuals are certified to lie inside the final
//     cylinders.  The designated cells are swapped outright and the residual
//     remainder is paired off cell by cell; those assignments are truncation
//     data, recorded as irregular, not claims about the ideal limit.
//
//   * build_bounded_equivalence -- for injections with equal-class images,
//     transports the image difference by single-cell coboundary moves,
//     relocates the moves that cross prototile boundaries into unused slots
//     (the r/s selection), checks the per-class cancellation identity
//     exactly, and reads off a bijective orbit equivalence.
//
//   * build_orbit_equivalence_inf -- composes a truncated back-and-forth
//     between the two images with the injections.  The resulting cocycle is
//     locally constant away from the designated cell and its generator
//     shifts; the continuity report lists, per axis, every source cell whose
//     entry is not backed by the exchange machinery.
//
// All constructions are exact: displacements are true lattice vectors,
// cocycle entries are verified against the staircase evaluation, and the
// cancellation identity is asserted rather than assumed.

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <zcantor/orbit_maps.hpp>

namespace zcantor {

// ---------------------------------------------------------------------------
// Cylinder balls for the standard ultrametric d(x, y) = 2^-(first depth at
// which the truncations differ).  The open ball of radius eps around a point
// is exactly its cylinder cell at the smallest depth D with 2^-(D+1) < eps.
// ---------------------------------------------------------------------------

inline int cylinder_depth(const Rat& eps) {
    if (!(Rat(0) < eps)) throw std::invalid_argument("cylinder_depth: radius must be positive");
    int D = 0;
    while (!(Rat(1, 1LL << (D + 1)) < eps)) {
        ++D;
        if (D > 60) throw std::invalid_argument("cylinder_depth: radius too small to resolve");
    }
    return D;
}

/// The open eps-ball around x: the cylinder cell of x's canonical section at
/// the depth determined by eps.  Depth 0 (huge radius) gives the whole space.
inline ClopenSet cylinder_ball(const SystemHandle& s, const SystemPoint& x, const Rat& eps) {
    int D = cylinder_depth(eps);
    auto L = make_level(s, D);
    auto p = point_at_depth(s, x, D);
    return make_clopen(D, {L.encode(p.residues)});
}

// ---------------------------------------------------------------------------
// Full-group elements.
// ---------------------------------------------------------------------------

/// A bijection pi of the host moving each point by a displacement constant on
/// the cells of one quotient level: pi(x) = phi^{zeta[cell(x)]}(x).  The
/// `exceptional` list marks cells whose stored displacement is a designated
/// or truncation-level assignment rather than a locally constant limit; an
/// element with an empty exceptional list is an honest topological
/// full-group element.
struct FullGroupElement {
    SystemHandle system;
    int depth = 0;
    std::vector<LatticeVector> zeta;
    std::vector<uint64_t> exceptional;
};

namespace detail {

inline bool vec_is_zero(const LatticeVector& v) {
    for (size_t i = 0; i < v.dim(); ++i)
        if (v[i] != 0) return false;
    return true;
}

/// Per-axis centered representative of (to - from) at a level: the unique
/// vector with entries in (-n/2, n/2] realizing the move between the cells.
inline LatticeVector centered_diff(const QuotientLevel& L, uint64_t from, uint64_t to) {
    auto a = L.decode(from);
    auto b = L.decode(to);
    LatticeVector v(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        Coord d = floor_mod(b[i] - a[i], L.mod[i]);
        if (2 * d > L.mod[i]) d -= L.mod[i];
        v[i] = d;
    }
    return v;
}

/// The depth-Kc cell containing a depth-Kf cell (Kf >= Kc).
inline uint64_t parent_cell(const QuotientLevel& Lf, const QuotientLevel& Lc, uint64_t cell) {
    auto r = Lf.decode(cell);
    std::vector<Coord> q(r.size());
    for (size_t i = 0; i < r.size(); ++i) q[i] = floor_mod(r[i], Lc.mod[i]);
    return Lc.encode(q);
}

}  // namespace detail

inline FullGroupElement identity_full_group(const SystemHandle& s, int K) {
    FullGroupElement g;
    g.system = s;
    g.depth = K;
    auto L = make_level(s, K);
    g.zeta.assign(L.size, LatticeVector(L.mod.size()));
    return g;
}

inline uint64_t fg_apply(const FullGroupElement& g, const QuotientLevel& L, uint64_t cell) {
    return act_cell(L, g.zeta[cell], cell);
}

inline uint64_t fg_apply(const FullGroupElement& g, uint64_t cell) {
    return fg_apply(g, make_level(g.system, g.depth), cell);
}

/// Re-express the element at a deeper level.  The displacement table is
/// constant on subcells, so the action is unchanged; exceptional cells
/// refine to all their subcells.
inline FullGroupElement refine_full_group(const FullGroupElement& g, int K) {
    if (K < g.depth) throw std::invalid_argument("refine_full_group: cannot coarsen");
    if (K == g.depth) return g;
    auto Lc = make_level(g.system, g.depth);
    auto Lf = make_level(g.system, K);
    FullGroupElement out;
    out.system = g.system;
    out.depth = K;
    out.zeta.resize(Lf.size);
    for (uint64_t c = 0; c < Lf.size; ++c) out.zeta[c] = g.zeta[detail::parent_cell(Lf, Lc, c)];
    if (!g.exceptional.empty()) {
        ClopenSet e = refine(g.system, make_clopen(g.depth, g.exceptional), K);
        out.exceptional = e.cells;
    }
    return out;
}

struct FullGroupCheck {
    bool bijective = false;
    bool involution = false;
    size_t moved = 0;
    std::string violation;
    bool ok() const { return bijective && involution; }
};

/// Cellwise verification: the displacement table must permute the level, and
/// for an involution the image cell must carry the exact negated vector.
inline FullGroupCheck verify_full_group(const FullGroupElement& g) {
    FullGroupCheck r;
    auto L = make_level(g.system, g.depth);
    if (g.zeta.size() != L.size) {
        r.violation = "displacement table does not match the level size";
        return r;
    }
    std::vector<char> hit(L.size, 0);
    r.bijective = true;
    r.involution = true;
    for (uint64_t c = 0; c < L.size; ++c) {
        uint64_t img = fg_apply(g, L, c);
        if (hit[img]) {
            r.bijective = false;
            r.violation = "cell " + std::to_string(img) + " is hit twice";
            return r;
        }
        hit[img] = 1;
        if (!detail::vec_is_zero(g.zeta[c])) ++r.moved;
        LatticeVector back = g.zeta[img];
        bool neg = back.dim() == g.zeta[c].dim();
        for (size_t i = 0; neg && i < back.dim(); ++i) neg = (back[i] == -g.zeta[c][i]);
        if (!neg) {
            r.involution = false;
            if (r.violation.empty())
                r.violation = "displacement at the image of cell " + std::to_string(c) + " is not the exact negation";
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Exchange of equal-class clopen sets.
// ---------------------------------------------------------------------------

struct ExchangeResult {
    ClopenSet a_prime;   ///< A minus the eps-cylinder at x0, at the working depth
    FullGroupElement pi; ///< involution moving `moved` onto `image`, identity elsewhere
    ClopenSet moved;     ///< the exchanged part: a_prime minus B
    ClopenSet image;     ///< pi(moved), inside B minus A and avoiding y0's cell
    int working_depth = 0;
    Rat partition_scale; ///< the scale whose per-class slots had room (0 when nothing moved)
};

namespace detail {

/// One uniform block of a refined partition: center cells sharing a
/// prototile and, per membership table, identical slot membership.
struct SlotClass {
    std::vector<uint64_t> centers;
    const std::vector<LatticeVector>* tile = nullptr;
    std::vector<std::vector<LatticeVector>> slots;  ///< per table: slots fully inside
};

/// Refine a partition's classes to depth KW and split them so that every
/// element column is entirely inside or outside each membership table.
inline std::vector<SlotClass> signature_split(const SystemHandle& s, const VoronoiRohlinPartition& P,
                                              int KW, const QuotientLevel& LW,
                                              const std::vector<const std::vector<char>*>& tables) {
    std::vector<SlotClass> out;
    for (size_t k = 0; k < P.classes.size(); ++k) {
        ClopenSet cent = refine(s, P.classes[k], KW);
        const auto& tile = P.prototiles[k];
        std::map<std::vector<char>, std::vector<uint64_t>> groups;
        std::vector<char> sig(tile.size() * tables.size());
        for (uint64_t u : cent.cells) {
            size_t at = 0;
            for (const auto& w : tile) {
                uint64_t cell = act_cell(LW, w, u);
                for (const auto* t : tables) sig[at++] = (*t)[cell];
            }
            groups[sig].push_back(u);
        }
        for (auto& [key, centers] : groups) {
            SlotClass sc;
            sc.centers = std::move(centers);
            sc.tile = &P.prototiles[k];
            sc.slots.resize(tables.size());
            for (size_t j = 0; j < tile.size(); ++j)
                for (size_t t = 0; t < tables.size(); ++t)
                    if (key[j * tables.size() + t]) sc.slots[t].push_back(tile[j]);
            out.push_back(std::move(sc));
        }
    }
    return out;
}

inline std::vector<char> membership(const QuotientLevel& L, const ClopenSet& C) {
    std::vector<char> t(L.size, 0);
    for (uint64_t c : C.cells) t[c] = 1;
    return t;
}

inline uint64_t point_cell(const SystemHandle& s, const QuotientLevel& L, const SystemPoint& p) {
    return L.encode(point_at_depth(s, p, L.depth).residues);
}

}  // namespace detail

inline std::vector<Rat> exchange_scale_sweep() {
    return {Rat(8), Rat(16), Rat(32), Rat(64), Rat(128), Rat(256)};
}

/// Carve A' = A minus the eps-cylinder at x0 and build an involution pi that
/// moves A' minus B into (B minus A) away from y0's cell, fixing everything
/// else.  Preconditions: [1_A] = [1_B]; x0 in A; y0 in B; when A and B
/// overlap, the overlap is fixed pointwise, so both designated points must
/// sit in the symmetric difference (or the sets must coincide, in which case
/// pi is the identity).
///
/// The landing room is B minus A minus the cell of y0 at a depth chosen so
/// that the removed cell is strictly smaller than the part of A the cylinder
/// swallowed; a scale sweep then looks for a partition with centers inside A
/// whose signature-split classes give every carved slot column a free
/// landing column.  `depth_cap`, when positive, bounds every internal
/// refinement so the result stays expressible at a caller's resolution.
inline ExchangeResult full_group_exchange(const SystemHandle& s, const ClopenSet& A, const ClopenSet& B,
                                          const SystemPoint& x0, const SystemPoint& y0, const Rat& eps,
                                          std::vector<Rat> sweep = exchange_scale_sweep(), int depth_cap = 0) {
    if (!class_equal(class_of(s, indicator(s, A)), class_of(s, indicator(s, B))))
        throw std::invalid_argument("full_group_exchange: the two sets carry different classes");
    if (value_at(s, indicator(s, A), x0) != 1)
        throw std::invalid_argument("full_group_exchange: x0 does not lie in A");
    if (value_at(s, indicator(s, B), y0) != 1)
        throw std::invalid_argument("full_group_exchange: y0 does not lie in B");

    ClopenSet ball = cylinder_ball(s, x0, eps);
    if (depth_cap > 0 && ball.depth > depth_cap)
        throw std::invalid_argument("full_group_exchange: radius finer than the working resolution");
    int K0 = std::max({A.depth, B.depth, ball.depth, 1});
    auto L0 = make_level(s, K0);
    size_t d = L0.mod.size();
    ClopenSet Ar = refine(s, A, K0), Br = refine(s, B, K0);
    ClopenSet ball0 = refine(s, ball, K0);
    uint64_t x0c = detail::point_cell(s, L0, x0);
    uint64_t y0c = detail::point_cell(s, L0, y0);
    ClopenSet Ad = set_difference(s, Ar, Br), Bd = set_difference(s, Br, Ar);

    ExchangeResult out;
    out.working_depth = K0;
    out.a_prime = set_difference(s, Ar, ball0);
    out.pi = identity_full_group(s, K0);
    out.moved = make_clopen(K0, {});
    out.image = make_clopen(K0, {});
    out.partition_scale = Rat(0);
    if (Ad.cells.empty()) return out;  // A = B: the identity already does it

    if (!Ad.contains(x0c))
        throw std::invalid_argument(
            "full_group_exchange: x0 sits in the overlap of A and B, which stays fixed; pick it in A minus B");
    if (!Bd.contains(y0c))
        throw std::invalid_argument(
            "full_group_exchange: y0 sits in the overlap of A and B, which stays fixed; pick it in B minus A");

    ClopenSet carved = set_difference(s, Ad, ball0);
    if (carved.cells.empty()) return out;  // the cylinder swallowed the whole disjoint part

    // Depth for the removed landing cell: deep enough that one cell weighs
    // less than what the cylinder removed from A minus B, so the room stays
    // strictly larger than the carve.  A resolution cap may freeze it early.
    uint64_t swallowed = set_intersection(s, Ad, ball0).cells.size();
    int KB = K0;
    while (true) {
        if (depth_cap > 0 && KB >= depth_cap) break;
        unsigned long long sz;
        try {
            sz = make_level(s, KB).size;
        } catch (const std::overflow_error&) {
            break;
        }
        if (sz > L0.size / (swallowed ? swallowed : 1)) break;
        ++KB;
    }

    std::string last_fail = "no scale attempted";
    for (const Rat& M : sweep) {
        VoronoiRohlinPartition P;
        try {
            P = build_partition(s, Ar, x0, M);
        } catch (const std::exception& e) {
            last_fail = e.what();
            continue;
        }
        int KW = std::max({K0, KB, P.depth});
        if (depth_cap > 0 && KW > depth_cap) {
            // larger scales only deepen the partition, so the sweep is done
            last_fail = "partition depth exceeds the resolution cap";
            break;
        }
        QuotientLevel LW;
        try {
            LW = make_level(s, KW);
        } catch (const std::overflow_error& e) {
            last_fail = e.what();
            break;
        }
        ClopenSet a_ex = refine(s, carved, KW);
        auto Ly = make_level(s, KB);
        ClopenSet y0cell = refine(s, make_clopen(KB, {detail::point_cell(s, Ly, y0)}), KW);
        ClopenSet b_room = set_difference(s, refine(s, Bd, KW), y0cell);
        auto in_t = detail::membership(LW, a_ex);
        auto out_t = detail::membership(LW, b_room);
        auto classes = detail::signature_split(s, P, KW, LW, {&in_t, &out_t});
        bool fits = true;
        for (const auto& sc : classes)
            if (sc.slots[0].size() > sc.slots[1].size()) {
                fits = false;
                break;
            }
        if (!fits) {
            last_fail = "a class has more carved columns than free landing columns at scale " +
                        std::to_string(M.num) + "/" + std::to_string(M.den);
            continue;
        }

        FullGroupElement pi = identity_full_group(s, KW);
        std::vector<char> claimed(LW.size, 0);
        std::vector<uint64_t> moved, image;
        for (const auto& sc : classes) {
            const auto& from = sc.slots[0];
            const auto& to = sc.slots[1];
            for (size_t j = 0; j < from.size(); ++j) {
                LatticeVector delta(d), ndelta(d);
                for (size_t i = 0; i < d; ++i) {
                    delta[i] = to[j][i] - from[j][i];
                    ndelta[i] = -delta[i];
                }
                for (uint64_t u : sc.centers) {
                    uint64_t src = act_cell(LW, from[j], u);
                    uint64_t dst = act_cell(LW, to[j], u);
                    if (claimed[src] || claimed[dst])
                        throw std::logic_error("full_group_exchange: slot columns collided");
                    claimed[src] = claimed[dst] = 1;
                    pi.zeta[src] = delta;
                    pi.zeta[dst] = ndelta;
                    moved.push_back(src);
                    image.push_back(dst);
                }
            }
        }
        auto check = verify_full_group(pi);
        if (!check.ok()) throw std::logic_error("full_group_exchange: built element failed verification: " + check.violation);

        out.working_depth = KW;
        out.a_prime = set_difference(s, refine(s, Ar, KW), refine(s, ball0, KW));
        out.pi = std::move(pi);
        out.moved = make_clopen(KW, std::move(moved));
        out.image = make_clopen(KW, std::move(image));
        out.partition_scale = M;
        if (!clopen_equal(s, out.moved, a_ex))
            throw std::logic_error("full_group_exchange: the exchanged part does not exhaust the carve");
        return out;
    }
    throw std::runtime_error(
        "full_group_exchange: no partition scale in the sweep gave every class room for the swap (last: " + last_fail +
        "); enlarge the sweep, widen the radius, or raise the resolution cap");
}

// ---------------------------------------------------------------------------
// Truncated back-and-forth exhaustion.
// ---------------------------------------------------------------------------

/// Radii for the alternating exhaustion: steps t = 1..2N+1 use epsilons[t-1].
/// N = 0 is the degenerate schedule running no steps at all.
struct ExchangeSchedule {
    std::vector<Rat> epsilons;
    int rounds = 1;
};

inline ExchangeSchedule geometric_schedule(int rounds, Rat first = Rat(1, 2)) {
    ExchangeSchedule sch;
    sch.rounds = rounds;
    int steps = rounds <= 0 ? 1 : 2 * rounds + 1;
    Rat e = first;
    for (int t = 0; t < steps; ++t) {
        sch.epsilons.push_back(e);
        e = Rat(e.num, 2 * e.den);
    }
    return sch;
}

inline void require_schedule(const ExchangeSchedule& sch) {
    if (sch.rounds < 0) throw std::invalid_argument("exchange schedule: negative round count");
    if (sch.rounds == 0) return;
    size_t need = static_cast<size_t>(2 * sch.rounds + 1);
    if (sch.epsilons.size() < need)
        throw std::invalid_argument("exchange schedule: " + std::to_string(need) + " radii needed for " +
                                    std::to_string(sch.rounds) + " rounds");
    for (size_t i = 0; i < need; ++i) {
        if (!(Rat(0) < sch.epsilons[i])) throw std::invalid_argument("exchange schedule: radii must be positive");
        if (i > 0 && !(sch.epsilons[i] < sch.epsilons[i - 1]))
            throw std::invalid_argument("exchange schedule: radii must strictly decrease");
    }
}

struct BackAndForthResult {
    FullGroupElement pi;             ///< involution with exceptional = {x0's cell, y0's cell}
    LatticeVector designated_move;   ///< w with pi(x0 cell) = y0 cell
    std::vector<ClopenSet> a_pieces; ///< carved parts of A, in step order
    std::vector<ClopenSet> b_pieces; ///< their partners in B
    ClopenSet residual_a;            ///< A minus B minus all carved pieces, final depth
    ClopenSet residual_b;
    std::vector<uint64_t> irregular; ///< cells whose assignment is truncation data
    bool residual_a_in_ball = false; ///< residual_a inside the eps_{2N+1} cylinder at x0
    bool residual_b_in_ball = false; ///< residual_b inside the eps_{2N} cylinder at y0
    std::vector<Rat> shrink;         ///< measure of the A-side remainder after each step
};

/// Alternately exchange the two equal-class sets along the schedule: odd
/// steps carve A minus the shrinking cylinder at x0 into B, even steps the
/// reverse.  The designated cells are swapped outright; whatever the steps
/// left uncovered is paired off in cell order and reported as irregular.
/// With at least one round the residuals are certified inside the final
/// cylinders.  Overlapping parts of A and B stay fixed, so designated points
/// must sit in the symmetric difference unless the sets coincide.
inline BackAndForthResult back_and_forth(const SystemHandle& s, const ClopenSet& A, const ClopenSet& B,
                                         const SystemPoint& x0, const SystemPoint& y0, const ExchangeSchedule& sch,
                                         std::vector<Rat> sweep = exchange_scale_sweep(), int depth_cap = 0) {
    require_schedule(sch);
    if (!class_equal(class_of(s, indicator(s, A)), class_of(s, indicator(s, B))))
        throw std::invalid_argument("back_and_forth: the two sets carry different classes");
    if (value_at(s, indicator(s, A), x0) != 1) throw std::invalid_argument("back_and_forth: x0 does not lie in A");
    if (value_at(s, indicator(s, B), y0) != 1) throw std::invalid_argument("back_and_forth: y0 does not lie in B");

    int K0 = std::max({A.depth, B.depth, x0.depth, y0.depth, 1});
    auto L0 = make_level(s, K0);
    size_t d = L0.mod.size();
    BackAndForthResult out;
    out.designated_move = detail::centered_diff(L0, detail::point_cell(s, L0, x0), detail::point_cell(s, L0, y0));

    ClopenSet Ar = refine(s, A, K0), Br = refine(s, B, K0);
    ClopenSet Ad = set_difference(s, Ar, Br), Bd = set_difference(s, Br, Ar);

    if (Ad.cells.empty()) {
        // Coinciding sets: swap the two designated cells, fix the rest.
        uint64_t xc = detail::point_cell(s, L0, x0), yc = detail::point_cell(s, L0, y0);
        out.pi = identity_full_group(s, K0);
        if (xc != yc) {
            out.pi.zeta[xc] = out.designated_move;
            LatticeVector back(d);
            for (size_t i = 0; i < d; ++i) back[i] = -out.designated_move[i];
            out.pi.zeta[yc] = back;
            out.pi.exceptional = {std::min(xc, yc), std::max(xc, yc)};
            out.irregular = out.pi.exceptional;
        }
        out.residual_a = make_clopen(K0, {});
        out.residual_b = make_clopen(K0, {});
        out.residual_a_in_ball = out.residual_b_in_ball = true;
        auto check = verify_full_group(out.pi);
        if (!check.ok()) throw std::logic_error("back_and_forth: designated swap failed verification: " + check.violation);
        return out;
    }
    {
        uint64_t xc = detail::point_cell(s, L0, x0), yc = detail::point_cell(s, L0, y0);
        if (!Ad.contains(xc))
            throw std::invalid_argument("back_and_forth: x0 sits in the overlap of A and B; pick it in A minus B");
        if (!Bd.contains(yc))
            throw std::invalid_argument("back_and_forth: y0 sits in the overlap of A and B; pick it in B minus A");
    }

    ClopenSet restA = Ad, restB = Bd;
    std::vector<FullGroupElement> steps_pi;
    int steps = sch.rounds == 0 ? 0 : 2 * sch.rounds + 1;
    for (int t = 1; t <= steps; ++t) {
        const Rat& eps = sch.epsilons[static_cast<size_t>(t - 1)];
        if (t % 2 == 1) {
            ExchangeResult r = full_group_exchange(s, restA, restB, x0, y0, eps, sweep, depth_cap);
            restA = set_difference(s, refine(s, restA, r.working_depth), r.moved);
            restB = set_difference(s, refine(s, restB, r.working_depth), r.image);
            out.a_pieces.push_back(r.moved);
            out.b_pieces.push_back(r.image);
            steps_pi.push_back(std::move(r.pi));
        } else {
            ExchangeResult r = full_group_exchange(s, restB, restA, y0, x0, eps, sweep, depth_cap);
            restB = set_difference(s, refine(s, restB, r.working_depth), r.moved);
            restA = set_difference(s, refine(s, restA, r.working_depth), r.image);
            out.b_pieces.push_back(r.moved);
            out.a_pieces.push_back(r.image);
            steps_pi.push_back(std::move(r.pi));
        }
        auto Lr = make_level(s, restA.depth);
        out.shrink.push_back(Rat(static_cast<long long>(restA.cells.size()), static_cast<long long>(Lr.size)));
    }

    int KF = K0;
    for (const auto& g : steps_pi) KF = std::max(KF, g.depth);
    KF = std::max({KF, restA.depth, restB.depth});
    auto LF = make_level(s, KF);
    out.pi = identity_full_group(s, KF);
    for (const auto& g : steps_pi) {
        FullGroupElement gf = refine_full_group(g, KF);
        for (uint64_t c = 0; c < LF.size; ++c)
            if (!detail::vec_is_zero(gf.zeta[c])) {
                if (!detail::vec_is_zero(out.pi.zeta[c]))
                    throw std::logic_error("back_and_forth: carved pieces overlap");
                out.pi.zeta[c] = gf.zeta[c];
            }
    }

    uint64_t xcF = detail::point_cell(s, LF, x0), ycF = detail::point_cell(s, LF, y0);
    out.pi.zeta[xcF] = out.designated_move;
    {
        LatticeVector back(d);
        for (size_t i = 0; i < d; ++i) back[i] = -out.designated_move[i];
        out.pi.zeta[ycF] = back;
    }
    out.pi.exceptional = {std::min(xcF, ycF), std::max(xcF, ycF)};

    out.residual_a = refine(s, restA, KF);
    out.residual_b = refine(s, restB, KF);
    ClopenSet RA = set_difference(s, out.residual_a, make_clopen(KF, {xcF}));
    ClopenSet RB = set_difference(s, out.residual_b, make_clopen(KF, {ycF}));
    if (RA.cells.size() != RB.cells.size())
        throw std::logic_error("back_and_forth: residual remainders have different sizes");
    out.irregular = {xcF, ycF};
    for (size_t i = 0; i < RA.cells.size(); ++i) {
        uint64_t a = RA.cells[i], b = RB.cells[i];
        LatticeVector v = detail::centered_diff(LF, a, b), back(d);
        for (size_t j = 0; j < d; ++j) back[j] = -v[j];
        out.pi.zeta[a] = v;
        out.pi.zeta[b] = back;
        out.irregular.push_back(a);
        out.irregular.push_back(b);
    }
    std::sort(out.irregular.begin(), out.irregular.end());

    if (steps >= 1) {
        ClopenSet ball_a = refine(s, cylinder_ball(s, x0, sch.epsilons[static_cast<size_t>(steps - 1)]), KF);
        out.residual_a_in_ball = set_difference(s, out.residual_a, ball_a).cells.empty();
        ClopenSet ball_b = refine(s, cylinder_ball(s, y0, sch.epsilons[static_cast<size_t>(steps - 2)]), KF);
        out.residual_b_in_ball = set_difference(s, out.residual_b, ball_b).cells.empty();
        if (!out.residual_a_in_ball || !out.residual_b_in_ball)
            throw std::logic_error("back_and_forth: a residual escaped its certifying cylinder");
    }

    auto check = verify_full_group(out.pi);
    if (!check.ok()) throw std::logic_error("back_and_forth: assembled element failed verification: " + check.violation);
    return out;
}

// ---------------------------------------------------------------------------
// Bounded orbit equivalence for equal-class images.
// ---------------------------------------------------------------------------

/// Invert a bijective map (image = the whole target level).  The inverse
/// cocycle entry at each cell solves the forward cocycle for one generator
/// step, verified exactly against the staircase evaluation.
inline OrbitInjection invert_equivalence(const OrbitInjection& th) {
    detail::require_valid(th);
    auto LT = make_level(th.target, th.depth_tgt);
    auto LS = make_level(th.source, th.depth_src);
    if (th.image.cells.size() != LT.size)
        throw std::invalid_argument("invert_equivalence: the map is not onto its target level");
    size_t d = LT.mod.size();
    OrbitInjection inv;
    inv.source = th.target;
    inv.target = th.source;
    inv.depth_src = th.depth_tgt;
    inv.depth_tgt = th.depth_src;
    inv.cell_map.assign(LT.size, 0);
    for (uint64_t c = 0; c < LS.size; ++c) inv.cell_map[th.cell_map[c]] = c;
    inv.eta.assign(d, std::vector<LatticeVector>(LT.size));
    for (size_t i = 0; i < d; ++i) {
        LatticeVector e(d);
        e[i] = 1;
        for (uint64_t y = 0; y < LT.size; ++y) {
            uint64_t x = inv.cell_map[y];
            uint64_t xn = inv.cell_map[act_cell(LT, e, y)];
            inv.eta[i][y] = detail::solve_cocycle(th, x, xn, e);
        }
    }
    std::vector<uint64_t> all(LS.size);
    for (uint64_t c = 0; c < LS.size; ++c) all[c] = c;
    inv.image = make_clopen(th.depth_src, std::move(all));
    detail::require_valid(inv);
    return inv;
}

struct BoundedEquivalenceResult {
    OrbitInjection map;            ///< bijective: the source level onto the second source level
    FullGroupElement pi;           ///< host-side relocation (identity when the images coincide)
    size_t witness_terms = 0;      ///< single-cell moves transporting image1 onto image2
    size_t defects = 0;            ///< moves that crossed a prototile boundary (relocated pairs)
    Rat partition_scale;           ///< scale whose slots accommodated every relocation
    bool cancellation_ok = false;  ///< per-class slot counts of image1 and pi(image2) agree exactly
};

/// Turn two equal-class injections into a common host into an orbit
/// equivalence between their sources.  When the images coincide the second
/// map is inverted directly.  Otherwise the image difference is written as
/// single-cell transport moves; each move crossing its prototile boundary
/// consumes one free slot outside the second image (r) and one slot inside
/// it (s), both chosen first-available and never reused; the involution pi
/// swapping the chosen pairs makes the per-class slot counts of image1 and
/// pi(image2) agree -- an identity this function asserts exactly -- and the
/// class-by-class pairing of those slots yields the equivalence.
inline BoundedEquivalenceResult build_bounded_equivalence(const OrbitInjection& th1, const OrbitInjection& th2,
                                                          std::vector<Rat> sweep = exchange_scale_sweep()) {
    detail::require_valid(th1);
    detail::require_valid(th2);
    if (!same_system(th1.target, th2.target))
        throw std::invalid_argument("build_bounded_equivalence: the injections land in different systems");
    if (th1.depth_tgt != th2.depth_tgt)
        throw std::invalid_argument("build_bounded_equivalence: rebuild the injections at a common target depth");
    if (th1.image.cells.size() != th2.image.cells.size())
        throw std::invalid_argument(
            "build_bounded_equivalence: the images carry different classes; strictly ordered images are the job of "
            "construct_small");
    const SystemHandle& Z = th1.target;
    int KT = th1.depth_tgt;
    auto LT = make_level(Z, KT);
    auto LS1 = make_level(th1.source, th1.depth_src);
    size_t d = LT.mod.size();

    std::vector<uint64_t> inv2(LT.size, 0);
    std::vector<char> img2t(LT.size, 0);
    for (uint64_t c = 0; c < th2.cell_map.size(); ++c) {
        inv2[th2.cell_map[c]] = c;
        img2t[th2.cell_map[c]] = 1;
    }

    BoundedEquivalenceResult res;
    res.partition_scale = Rat(0);

    auto finish = [&](const std::vector<uint64_t>& zprime, const std::vector<LatticeVector>& disp) {
        // zprime[c]: where the class pairing and relocation send Theta1(c);
        // disp[c]: the exact lattice displacement realizing it.
        OrbitInjection out;
        out.source = th1.source;
        out.target = th2.source;
        out.depth_src = th1.depth_src;
        out.depth_tgt = th2.depth_src;
        out.cell_map.assign(LS1.size, 0);
        for (uint64_t c = 0; c < LS1.size; ++c) out.cell_map[c] = inv2[zprime[c]];
        out.eta.assign(d, std::vector<LatticeVector>(LS1.size));
        for (size_t i = 0; i < d; ++i) {
            LatticeVector e(d);
            e[i] = 1;
            for (uint64_t c = 0; c < LS1.size; ++c) {
                uint64_t cn = act_cell(LS1, e, c);
                LatticeVector g(d);
                for (size_t j = 0; j < d; ++j) g[j] = th1.eta[i][c][j] + disp[cn][j] - disp[c][j];
                out.eta[i][c] = detail::solve_cocycle(th2, out.cell_map[c], out.cell_map[cn], g);
            }
        }
        std::vector<uint64_t> img(out.cell_map.begin(), out.cell_map.end());
        std::sort(img.begin(), img.end());
        out.image = make_clopen(th2.depth_src, std::move(img));
        detail::require_valid(out);
        if (out.image.cells.size() != out.cell_map.size())
            throw std::logic_error("build_bounded_equivalence: the assembled map is not a bijection");
        res.map = std::move(out);
    };

    if (clopen_equal(Z, th1.image, th2.image)) {
        res.pi = identity_full_group(Z, KT);
        res.cancellation_ok = true;
        std::vector<uint64_t> zp(LS1.size);
        std::vector<LatticeVector> disp(LS1.size, LatticeVector(d));
        for (uint64_t c = 0; c < LS1.size; ++c) zp[c] = th1.cell_map[c];
        finish(zp, disp);
        return res;
    }

    IntFunction f = function_diff(Z, indicator(Z, refine(Z, th1.image, KT)), indicator(Z, refine(Z, th2.image, KT)));
    CoboundaryWitness wit = coboundary_witness(Z, f);
    res.witness_terms = wit.terms.size();

    std::vector<char> img1t(LT.size, 0);
    for (uint64_t z : th1.image.cells)
        for (uint64_t q : refine(Z, make_clopen(th1.image.depth, {z}), KT).cells) img1t[q] = 1;

    std::string last_fail = "no scale attempted";
    SystemPoint anchor = make_point(Z, 1, std::vector<Coord>(d, 0));
    for (const Rat& M : sweep) {
        VoronoiRohlinPartition P;
        try {
            P = build_partition(Z, whole_space(Z, 1), anchor, M);
        } catch (const std::exception& e) {
            last_fail = e.what();
            continue;
        }
        if (P.depth > KT) {
            last_fail = "partition depth exceeds the target resolution";
            break;
        }
        // Flatten to single-cell classes at depth KT: every center cell owns
        // its translated prototile, so the partition refines every witness
        // cell and both images simultaneously.
        std::vector<uint64_t> owner_center(LT.size, 0);
        std::vector<uint32_t> owner_slot(LT.size, 0);
        std::vector<uint64_t> centers;
        std::vector<uint32_t> tile_of(LT.size, 0);  // prototile id per center cell
        std::vector<const std::vector<LatticeVector>*> tiles;
        for (size_t k = 0; k < P.classes.size(); ++k) {
            ClopenSet cent = refine(Z, P.classes[k], KT);
            tiles.push_back(&P.prototiles[k]);
            for (uint64_t u : cent.cells) {
                centers.push_back(u);
                tile_of[u] = static_cast<uint32_t>(k);
                for (size_t j = 0; j < P.prototiles[k].size(); ++j) {
                    uint64_t cell = act_cell(LT, P.prototiles[k][j], u);
                    owner_center[cell] = u;
                    owner_slot[cell] = static_cast<uint32_t>(j);
                }
            }
        }

        FullGroupElement pi = identity_full_group(Z, KT);
        std::vector<char> claimedR(LT.size, 0), claimedS(LT.size, 0);
        size_t defects = 0;
        bool ok = true;
        for (const auto& [Acell, v] : wit.terms) {
            uint64_t a = refine(Z, Acell, KT).cells.at(0);
            uint64_t b = act_cell(LT, v, a);
            uint64_t ck = owner_center[a];
            const auto& tk = *tiles[tile_of[ck]];
            const LatticeVector& w = tk[owner_slot[a]];
            LatticeVector wv(d);
            for (size_t i = 0; i < d; ++i) wv[i] = w[i] + v[i];
            if (std::binary_search(tk.begin(), tk.end(), wv)) continue;  // interior move
            ++defects;
            uint64_t cl = owner_center[b];
            const auto& tl = *tiles[tile_of[cl]];
            const LatticeVector& u = tl[owner_slot[b]];
            uint64_t q = LT.size, p = LT.size;
            LatticeVector rslot(d), sslot(d);
            for (const auto& r : tk) {
                uint64_t cand = act_cell(LT, r, ck);
                if (!img2t[cand] && !claimedR[cand]) {
                    q = cand;
                    rslot = r;
                    break;
                }
            }
            for (const auto& sv : tl) {
                uint64_t cand = act_cell(LT, sv, cl);
                if (img2t[cand] && !claimedS[cand]) {
                    p = cand;
                    sslot = sv;
                    break;
                }
            }
            if (q == LT.size || p == LT.size) {
                ok = false;
                last_fail = "relocation slots exhausted at scale " + std::to_string(M.num);
                break;
            }
            claimedR[q] = 1;
            claimedS[p] = 1;
            LatticeVector delta(d), ndelta(d);
            for (size_t i = 0; i < d; ++i) {
                delta[i] = rslot[i] - w[i] - v[i] + u[i] - sslot[i];
                ndelta[i] = -delta[i];
            }
            pi.zeta[p] = delta;
            pi.zeta[q] = ndelta;
        }
        if (!ok) continue;

        auto check = verify_full_group(pi);
        if (!check.ok())
            throw std::logic_error("build_bounded_equivalence: relocation element failed verification: " + check.violation);

        std::vector<char> pi2t(img2t);
        for (uint64_t c = 0; c < LT.size; ++c)
            if (!detail::vec_is_zero(pi.zeta[c])) pi2t[c] = img2t[c] ? 0 : 1;

        // The per-class cancellation identity: after the relocation, each
        // center's tile holds exactly as many image1 columns as relocated
        // image2 columns.
        std::vector<std::vector<LatticeVector>> s1(centers.size()), s2(centers.size());
        {
            std::map<uint64_t, size_t> cidx;
            for (size_t i = 0; i < centers.size(); ++i) cidx[centers[i]] = i;
            for (size_t i = 0; i < centers.size(); ++i) {
                uint64_t u0 = centers[i];
                for (const auto& w : *tiles[tile_of[u0]]) {
                    uint64_t cell = act_cell(LT, w, u0);
                    if (img1t[cell]) s1[i].push_back(w);
                    if (pi2t[cell]) s2[i].push_back(w);
                }
                if (s1[i].size() != s2[i].size())
                    throw std::logic_error("build_bounded_equivalence: per-class cancellation identity failed");
            }
        }
        res.cancellation_ok = true;
        res.defects = defects;
        res.partition_scale = M;
        res.pi = pi;

        std::vector<uint64_t> zp(LS1.size);
        std::vector<LatticeVector> disp(LS1.size, LatticeVector(d));
        std::map<uint64_t, size_t> cidx;
        for (size_t i = 0; i < centers.size(); ++i) cidx[centers[i]] = i;
        for (uint64_t c = 0; c < LS1.size; ++c) {
            uint64_t z = th1.cell_map[c];
            size_t ki = cidx.at(owner_center[z]);
            const auto& tk = *tiles[tile_of[owner_center[z]]];
            const LatticeVector& v = tk[owner_slot[z]];
            const auto& ins = s1[ki];
            size_t pos = static_cast<size_t>(std::lower_bound(ins.begin(), ins.end(), v) - ins.begin());
            const LatticeVector& vp = s2[ki][pos];
            LatticeVector move(d);
            for (size_t i = 0; i < d; ++i) move[i] = vp[i] - v[i];
            uint64_t z1 = act_cell(LT, move, z);
            uint64_t z2 = fg_apply(pi, LT, z1);  // pi is an involution: this is pi^{-1}
            zp[c] = z2;
            for (size_t i = 0; i < d; ++i) disp[c][i] = move[i] + pi.zeta[z1][i];
        }
        finish(zp, disp);
        return res;
    }
    throw std::runtime_error(
        "build_bounded_equivalence: every partition scale in the sweep left a relocation without room inside the "
        "target resolution (last: " + last_fail + "); rebuild the injections at deeper levels");
}

// ---------------------------------------------------------------------------
// Orbit equivalence through a truncated back-and-forth.
// ---------------------------------------------------------------------------

struct ComposedEquivalence {
    OrbitInjection map;                          ///< bijective; entries at flagged cells are truncation data
    std::vector<std::vector<uint64_t>> flagged;  ///< per axis: source cells without a lemma-backed cocycle entry
};

/// Compose th2^{-1} . pi . th1 at the common target level.  A source cell is
/// flagged on an axis when its entry touches an irregular host cell or when
/// no exact cocycle solution exists; flagged entries fall back to the
/// centered cell displacement so the table stays total.
inline ComposedEquivalence compose_through_host(const OrbitInjection& th1, const OrbitInjection& th2,
                                                const FullGroupElement& pi,
                                                const std::vector<uint64_t>& irregular) {
    detail::require_valid(th1);
    detail::require_valid(th2);
    if (!same_system(th1.target, th2.target) || th1.depth_tgt != th2.depth_tgt)
        throw std::invalid_argument("compose_through_host: the injections must share a target level");
    if (pi.depth != th1.depth_tgt)
        throw std::invalid_argument("compose_through_host: the full-group element lives at a different level");
    const SystemHandle& Z = th1.target;
    int KT = th1.depth_tgt;
    auto LT = make_level(Z, KT);
    auto LS1 = make_level(th1.source, th1.depth_src);
    auto LS2 = make_level(th2.source, th2.depth_src);
    size_t d = LT.mod.size();

    std::vector<uint64_t> inv2(LT.size, 0);
    std::vector<char> img2t(LT.size, 0);
    for (uint64_t c = 0; c < th2.cell_map.size(); ++c) {
        inv2[th2.cell_map[c]] = c;
        img2t[th2.cell_map[c]] = 1;
    }
    std::vector<char> irr(LT.size, 0);
    for (uint64_t c : irregular) irr[c] = 1;

    ComposedEquivalence out;
    out.flagged.assign(d, {});
    OrbitInjection& th = out.map;
    th.source = th1.source;
    th.target = th2.source;
    th.depth_src = th1.depth_src;
    th.depth_tgt = th2.depth_src;
    th.cell_map.assign(LS1.size, 0);
    std::vector<std::vector<char>> flag(d, std::vector<char>(LS1.size, 0));
    std::vector<char> landed(LS1.size, 1);
    for (uint64_t c = 0; c < LS1.size; ++c) {
        uint64_t z1 = fg_apply(pi, LT, th1.cell_map[c]);
        if (!img2t[z1]) {
            // The element routed this cell outside the second image; take the
            // next image cell as a placeholder and flag every axis at c.
            landed[c] = 0;
            uint64_t probe = z1;
            do probe = (probe + 1) % LT.size;
            while (!img2t[probe]);
            z1 = probe;
        }
        th.cell_map[c] = inv2[z1];
    }
    th.eta.assign(d, std::vector<LatticeVector>(LS1.size));
    for (size_t i = 0; i < d; ++i) {
        LatticeVector e(d);
        e[i] = 1;
        for (uint64_t c = 0; c < LS1.size; ++c) {
            uint64_t cn = act_cell(LS1, e, c);
            uint64_t z = th1.cell_map[c], zn = th1.cell_map[cn];
            bool bad = !landed[c] || !landed[cn] || irr[z] || irr[zn];
            LatticeVector g(d);
            for (size_t j = 0; j < d; ++j) g[j] = th1.eta[i][c][j] + pi.zeta[zn][j] - pi.zeta[z][j];
            try {
                th.eta[i][c] = detail::solve_cocycle(th2, th.cell_map[c], th.cell_map[cn], g);
            } catch (const std::exception&) {
                bad = true;
                th.eta[i][c] = detail::centered_diff(LS2, th.cell_map[c], th.cell_map[cn]);
            }
            if (bad) flag[i][c] = 1;
        }
    }
    std::vector<uint64_t> img(th.cell_map.begin(), th.cell_map.end());
    std::sort(img.begin(), img.end());
    img.erase(std::unique(img.begin(), img.end()), img.end());
    th.image = make_clopen(th2.depth_src, std::move(img));
    for (size_t i = 0; i < d; ++i)
        for (uint64_t c = 0; c < LS1.size; ++c)
            if (flag[i][c]) out.flagged[i].push_back(c);
    return out;
}

struct InfEquivalenceResult {
    OrbitInjection map;                          ///< bijective source-to-source map
    FullGroupElement pi;                         ///< the host-side exchange element
    BackAndForthResult exhaustion;               ///< pieces, residuals, certificates
    std::vector<std::vector<uint64_t>> flagged;  ///< per axis: cells whose cocycle entry is truncation data
    LatticeVector designated_move;               ///< host displacement from theta1(x0)'s cell into image2
    uint64_t x0_cell = 0;                        ///< the designated source cell
};

/// Build an orbit equivalence between the sources of two equal-class
/// injections by running a truncated back-and-forth between their images,
/// anchored at theta1(x0).  Away from the designated cell and its generator
/// shifts every cocycle entry is exact and lemma-backed; the flagged lists
/// name precisely the cells where it is not.  When the images coincide the
/// exchange is empty and the composition is flagless.
inline InfEquivalenceResult build_orbit_equivalence_inf(const OrbitInjection& th1, const OrbitInjection& th2,
                                                        const SystemPoint& x0, const ExchangeSchedule& sch,
                                                        std::vector<Rat> sweep = exchange_scale_sweep()) {
    detail::require_valid(th1);
    detail::require_valid(th2);
    if (!same_system(th1.target, th2.target))
        throw std::invalid_argument("build_orbit_equivalence_inf: the injections land in different systems");
    if (th1.depth_tgt != th2.depth_tgt)
        throw std::invalid_argument("build_orbit_equivalence_inf: rebuild the injections at a common target depth");
    if (th1.image.cells.size() != th2.image.cells.size())
        throw std::invalid_argument(
            "build_orbit_equivalence_inf: the images carry different classes, so no correction by an exchange exists; "
            "strictly ordered images are the job of construct_small");
    const SystemHandle& Z = th1.target;
    int KT = th1.depth_tgt;
    auto LT = make_level(Z, KT);
    auto LS1 = make_level(th1.source, th1.depth_src);
    size_t d = LT.mod.size();

    ClopenSet A = refine(Z, th1.image, KT), B = refine(Z, th2.image, KT);
    uint64_t x0c = detail::point_cell(th1.source, LS1, x0);
    uint64_t z0 = th1.cell_map[x0c];

    InfEquivalenceResult res;
    res.x0_cell = x0c;
    res.designated_move = LatticeVector(d);

    if (clopen_equal(Z, A, B)) {
        res.pi = identity_full_group(Z, KT);
        res.exhaustion.pi = res.pi;
        res.exhaustion.designated_move = LatticeVector(d);
        res.exhaustion.residual_a = make_clopen(KT, {});
        res.exhaustion.residual_b = make_clopen(KT, {});
        res.exhaustion.residual_a_in_ball = res.exhaustion.residual_b_in_ball = true;
        ComposedEquivalence comp = compose_through_host(th1, th2, res.pi, {});
        res.map = std::move(comp.map);
        res.flagged = std::move(comp.flagged);
    } else {
        if (B.contains(z0))
            throw std::invalid_argument(
                "build_orbit_equivalence_inf: theta1(x0) lands in the image overlap, which the exchange fixes; choose "
                "x0 with theta1(x0) outside the second image");
        LatticeVector wz;
        bool found = false;
        Coord maxmod = 0;
        for (Coord m : LT.mod) maxmod = std::max(maxmod, m);
        for (Coord R = 1; R <= maxmod && !found; ++R) {
            for (const auto& w : window_points(d, R)) {
                Coord norm = 0;
                for (size_t i = 0; i < d; ++i) norm = std::max(norm, w[i] < 0 ? -w[i] : w[i]);
                if (norm != R) continue;  // only the new shell
                if (B.contains(act_cell(LT, w, z0))) {
                    wz = w;
                    found = true;
                    break;
                }
            }
        }
        if (!found) throw std::logic_error("build_orbit_equivalence_inf: no image cell within the level window");
        res.designated_move = wz;
        SystemPoint z0p = make_point(Z, KT, LT.decode(z0));
        SystemPoint y0p = act(Z, wz, z0p);
        res.exhaustion = back_and_forth(Z, A, B, z0p, y0p, sch, sweep, KT);
        if (res.exhaustion.pi.depth != KT)
            throw std::logic_error("build_orbit_equivalence_inf: the exchange escaped the target resolution");
        res.pi = res.exhaustion.pi;
        ComposedEquivalence comp = compose_through_host(th1, th2, res.pi, res.exhaustion.irregular);
        res.map = std::move(comp.map);
        res.flagged = std::move(comp.flagged);
    }

    auto LS2 = make_level(th2.source, th2.depth_src);
    if (res.map.image.cells.size() != LS2.size || res.map.cell_map.size() != LS1.size)
        throw std::logic_error("build_orbit_equivalence_inf: the composition is not a bijection of the source levels");
    return res;
}

}  // namespace zcantor
