#pragma once
/// Bounded orbit injections between odometer systems, modeled at a pair of
/// quotient depths: an injective cell map together with the generator table
/// of its displacement cocycle.  The table determines the cocycle at every
/// lattice vector through a canonical staircase path, with path-independence
/// certified rather than assumed.  Because every ingredient is locally
/// constant at the stored depths and the quotient actions are transitive,
/// verifying the defining relations on generators over one level propagates
/// them to all of Z^d by induction along paths; that is why a finite
/// certificate suffices for these systems.
///
/// On top of the representation: canonical tower-floor embeddings, column
/// embeddings between towers of different heights, lifts of an injection to
/// equal-height towers, composition, the image projection family with its
/// convolution calculus, the induced maps on the cohomology groups in both
/// directions, and the constructive comparison pipeline that turns a strict
/// image-class inequality into an injection between the sources.

#include <zcantor/cohomology.hpp>
#include <zcantor/lattice.hpp>
#include <zcantor/odometer.hpp>
#include <zcantor/rohlin.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace zcantor {

/// A bounded orbit injection at finite resolution: source cells at depth_src
/// map injectively onto target cells at depth_tgt, and eta[i][c] records the
/// target displacement realizing one source step along axis i from cell c.
struct OrbitInjection {
    SystemHandle source;
    SystemHandle target;
    int depth_src = 0;
    int depth_tgt = 0;
    std::vector<uint64_t> cell_map;               ///< source cell -> target cell
    std::vector<std::vector<LatticeVector>> eta;  ///< eta[axis][source cell]
    ClopenSet image;                              ///< union of mapped cells, at depth_tgt
};

namespace detail {

inline void add_to(LatticeVector& a, const LatticeVector& b, Coord sign) {
    for (size_t j = 0; j < a.dim(); ++j) a[j] += sign * b[j];
}

}  // namespace detail

/// The cocycle at an arbitrary vector, accumulated along the canonical
/// staircase path (axis 0 first, then axis 1, ...).
inline LatticeVector eta_of(const OrbitInjection& th, uint64_t cell, const LatticeVector& v) {
    auto L = make_level(th.source, th.depth_src);
    size_t d = L.mod.size();
    LatticeVector acc(d);
    uint64_t cur = cell;
    for (size_t i = 0; i < d; ++i) {
        LatticeVector step(d);
        step[i] = 1;
        for (Coord t = 0; t < v[i]; ++t) {
            detail::add_to(acc, th.eta[i][cur], 1);
            cur = act_cell(L, step, cur);
        }
        step[i] = -1;
        for (Coord t = 0; t > v[i]; --t) {
            cur = act_cell(L, step, cur);
            detail::add_to(acc, th.eta[i][cur], -1);
        }
    }
    return acc;
}

namespace detail {

/// Structural and generator-level validity: shapes, injectivity, the cocycle
/// relation on generators, and path-independence.  Cheap enough to gate
/// every operation that requires a trustworthy injection.
inline void require_valid(const OrbitInjection& th) {
    size_t d = dim(th.source);
    if (dim(th.target) != d)
        throw std::invalid_argument("orbit injection: dimension mismatch");
    auto Ls = make_level(th.source, th.depth_src);
    auto Lt = make_level(th.target, th.depth_tgt);
    if (th.cell_map.size() != Ls.size || th.eta.size() != d)
        throw std::invalid_argument("orbit injection: table shape mismatch");
    for (const auto& col : th.eta)
        if (col.size() != Ls.size)
            throw std::invalid_argument("orbit injection: cocycle table shape mismatch");
    std::vector<uint64_t> img = th.cell_map;
    std::sort(img.begin(), img.end());
    if (std::adjacent_find(img.begin(), img.end()) != img.end())
        throw std::invalid_argument("orbit injection: cell map is not injective");
    if (img.back() >= Lt.size)
        throw std::invalid_argument("orbit injection: cell map exceeds the target level");
    if (th.image.depth != th.depth_tgt || th.image.cells != img)
        throw std::invalid_argument("orbit injection: image does not match the cell map");
    for (size_t i = 0; i < d; ++i) {
        LatticeVector ei(d);
        ei[i] = 1;
        for (uint64_t c = 0; c < Ls.size; ++c) {
            if (act_cell(Lt, th.eta[i][c], th.cell_map[c]) !=
                th.cell_map[act_cell(Ls, ei, c)])
                throw std::invalid_argument(
                    "orbit injection: generator cocycle relation fails");
        }
    }
    for (size_t i = 0; i < d; ++i) {
        for (size_t j = i + 1; j < d; ++j) {
            LatticeVector ei(d), ej(d);
            ei[i] = 1;
            ej[j] = 1;
            for (uint64_t c = 0; c < Ls.size; ++c) {
                LatticeVector lhs = th.eta[i][c];
                detail::add_to(lhs, th.eta[j][act_cell(Ls, ei, c)], 1);
                LatticeVector rhs = th.eta[j][c];
                detail::add_to(rhs, th.eta[i][act_cell(Ls, ej, c)], 1);
                if (!(lhs == rhs))
                    throw std::invalid_argument(
                        "orbit injection: cocycle is path-dependent");
            }
        }
    }
}

inline std::string cell_label(const QuotientLevel& L, uint64_t c) {
    auto r = L.decode(c);
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << ")@" << L.depth;
    return os.str();
}

}  // namespace detail

/// Verification certificate: which clauses held over the window, with a
/// witness description for the first violation found.
struct InjectionCertificate {
    int window = 0;
    int extended_window = 0;
    bool injective = false;
    bool cocycle_ok = false;
    bool path_independent = false;
    bool orbit_biconditional = false;
    std::string violation;

    bool certified() const {
        return injective && cocycle_ok && path_independent && orbit_biconditional;
    }
};

/// Checks the full contract over a finite window: injectivity, the cocycle
/// relation for every vector with sup-norm <= window, path-independence on
/// generator pairs, and the orbit condition in the nontrivial direction
/// (target cells related within the window come from source cells related
/// within the extended window, with matching cocycle value).  The window
/// must stay below half the smallest modulus of both levels, where the
/// quotient actions are still free.
inline InjectionCertificate verify_injection(const OrbitInjection& th, int window) {
    auto Ls = make_level(th.source, th.depth_src);
    auto Lt = make_level(th.target, th.depth_tgt);
    Coord min_mod = *std::min_element(Ls.mod.begin(), Ls.mod.end());
    min_mod = std::min(min_mod, *std::min_element(Lt.mod.begin(), Lt.mod.end()));
    if (window < 1 || 2 * window >= min_mod)
        throw std::invalid_argument(
            "verify_injection: window must stay below half the smallest modulus");
    size_t d = dim(th.source);
    InjectionCertificate cert;
    cert.window = window;

    // shapes and injectivity
    if (dim(th.target) != d || th.cell_map.size() != Ls.size || th.eta.size() != d)
        throw std::invalid_argument("verify_injection: table shape mismatch");
    for (const auto& col : th.eta)
        if (col.size() != Ls.size)
            throw std::invalid_argument("verify_injection: cocycle table shape mismatch");
    {
        std::vector<uint64_t> img = th.cell_map;
        std::sort(img.begin(), img.end());
        bool dup = std::adjacent_find(img.begin(), img.end()) != img.end();
        bool range = img.empty() || img.back() < Lt.size;
        cert.injective = !dup && range && th.image.depth == th.depth_tgt &&
                         th.image.cells == img;
        if (!cert.injective) {
            cert.violation = "cell map is not an injection onto the declared image";
            return cert;
        }
    }

    // cocycle relation over the whole window
    cert.cocycle_ok = true;
    for (const auto& v : window_points(d, window)) {
        for (uint64_t c = 0; c < Ls.size && cert.cocycle_ok; ++c) {
            if (act_cell(Lt, eta_of(th, c, v), th.cell_map[c]) !=
                th.cell_map[act_cell(Ls, v, c)]) {
                cert.cocycle_ok = false;
                cert.violation = "cocycle relation fails at source cell " +
                                 detail::cell_label(Ls, c);
            }
        }
        if (!cert.cocycle_ok) break;
    }
    if (!cert.cocycle_ok) return cert;

    // path-independence on generator pairs
    cert.path_independent = true;
    for (size_t i = 0; i < d && cert.path_independent; ++i) {
        for (size_t j = i + 1; j < d && cert.path_independent; ++j) {
            LatticeVector ei(d), ej(d);
            ei[i] = 1;
            ej[j] = 1;
            for (uint64_t c = 0; c < Ls.size; ++c) {
                LatticeVector lhs = th.eta[i][c];
                detail::add_to(lhs, th.eta[j][act_cell(Ls, ei, c)], 1);
                LatticeVector rhs = th.eta[j][c];
                detail::add_to(rhs, th.eta[i][act_cell(Ls, ej, c)], 1);
                if (!(lhs == rhs)) {
                    cert.path_independent = false;
                    cert.violation = "cocycle is path-dependent at source cell " +
                                     detail::cell_label(Ls, c);
                    break;
                }
            }
        }
    }
    if (!cert.path_independent) return cert;

    // orbit condition: a target-window relation between image cells must be
    // realized by a source vector in the extended window with the same
    // cocycle value
    Coord step_bound = 1;
    for (const auto& col : th.eta)
        for (const auto& e : col)
            for (size_t j = 0; j < e.dim(); ++j)
                step_bound = std::max(step_bound, std::abs(e[j]));
    int ext = static_cast<int>(std::min<Coord>(window * step_bound, 64));
    cert.extended_window = ext;
    std::map<uint64_t, uint64_t> where;  // image cell -> source cell
    for (uint64_t c = 0; c < Ls.size; ++c) where[th.cell_map[c]] = c;
    auto ext_window = window_points(d, ext);
    cert.orbit_biconditional = true;
    for (uint64_t c = 0; c < Ls.size && cert.orbit_biconditional; ++c) {
        for (const auto& u : window_points(d, window)) {
            auto it = where.find(act_cell(Lt, u, th.cell_map[c]));
            if (it == where.end()) continue;
            bool found = false;
            for (const auto& w : ext_window) {
                if (act_cell(Ls, w, c) == it->second && eta_of(th, c, w) == u) {
                    found = true;
                    break;
                }
            }
            if (!found) {
                cert.orbit_biconditional = false;
                cert.violation =
                    "target window relation at image of source cell " +
                    detail::cell_label(Ls, c) +
                    " is not matched by any source vector in the extended window";
                break;
            }
        }
    }
    return cert;
}

/// The identity self-injection at one depth.
inline OrbitInjection identity_injection(const SystemHandle& s, int K) {
    auto L = make_level(s, K);
    size_t d = dim(s);
    OrbitInjection th;
    th.source = s;
    th.target = s;
    th.depth_src = K;
    th.depth_tgt = K;
    th.cell_map.resize(L.size);
    for (uint64_t c = 0; c < L.size; ++c) th.cell_map[c] = c;
    th.eta.assign(d, std::vector<LatticeVector>(L.size));
    for (size_t i = 0; i < d; ++i) {
        LatticeVector ei(d);
        ei[i] = 1;
        th.eta[i].assign(L.size, ei);
    }
    th.image = whole_space(s, K);
    return th;
}

/// The canonical floor embedding x -> (x, 0) into the height-m box tower,
/// with constant cocycle m e_i; m = 1 degenerates to the identity.
inline OrbitInjection tower_embed(const SystemHandle& s, Coord m, int K_src = 2) {
    if (m < 1) throw std::invalid_argument("tower_embed: height must be positive");
    if (m == 1) return identity_injection(s, K_src);
    SystemHandle tw = make_tower(s, m);
    auto Ls = make_level(s, K_src);
    auto Lt = make_level(tw, K_src + 1);
    size_t d = dim(s);
    OrbitInjection th;
    th.source = s;
    th.target = tw;
    th.depth_src = K_src;
    th.depth_tgt = K_src + 1;
    th.cell_map.resize(Ls.size);
    std::vector<uint64_t> img;
    img.reserve(Ls.size);
    for (uint64_t c = 0; c < Ls.size; ++c) {
        auto r = Ls.decode(c);
        for (auto& x : r) x *= m;
        th.cell_map[c] = Lt.encode(r);
        img.push_back(th.cell_map[c]);
    }
    th.eta.assign(d, {});
    for (size_t i = 0; i < d; ++i) {
        LatticeVector step(d);
        step[i] = m;
        th.eta[i].assign(Ls.size, step);
    }
    std::sort(img.begin(), img.end());
    th.image = make_clopen(K_src + 1, img);
    return th;
}

/// The floor embedding at a fixed height offset, x -> (x, u0): cells map to
/// label m*r + u0 per axis and the cocycle is the constant m e_i, exactly as
/// for the ground floor -- the offset shifts cancel in every difference.
/// The image is the set of labels congruent to u0 on every axis.
inline OrbitInjection tower_embed_at(const SystemHandle& s, Coord m, Coord u0, int K_src = 2) {
    if (m < 2) throw std::invalid_argument("tower_embed_at: height must be at least 2");
    if (u0 < 0 || u0 >= m) throw std::invalid_argument("tower_embed_at: offset must lie in [0, m)");
    OrbitInjection th = tower_embed(s, m, K_src);
    if (u0 == 0) return th;
    auto Lt = make_level(th.target, th.depth_tgt);
    std::vector<uint64_t> img;
    img.reserve(th.cell_map.size());
    for (uint64_t c = 0; c < th.cell_map.size(); ++c) {
        auto r = Lt.decode(th.cell_map[c]);
        for (auto& x : r) x += u0;
        th.cell_map[c] = Lt.encode(r);
        img.push_back(th.cell_map[c]);
    }
    std::sort(img.begin(), img.end());
    th.image = make_clopen(th.depth_tgt, img);
    return th;
}

/// The column embedding of a height-a tower into the height-b tower over the
/// same base, (x, u) -> (x, u) on the box {0..a-1}^d: per axis, the cocycle
/// is e_i inside the box and (b - a + 1) e_i at the top floor.
inline OrbitInjection tower_columns_embed(const SystemHandle& base, Coord a, Coord b,
                                          int K) {
    if (a < 2 || b < a)
        throw std::invalid_argument("tower_columns_embed: heights must satisfy 2 <= a <= b");
    SystemHandle A = make_tower(base, a);
    SystemHandle B = make_tower(base, b);
    auto La = make_level(A, K);
    auto Lb = make_level(B, K);
    size_t d = dim(base);
    OrbitInjection th;
    th.source = A;
    th.target = B;
    th.depth_src = K;
    th.depth_tgt = K;
    th.cell_map.resize(La.size);
    th.eta.assign(d, std::vector<LatticeVector>(La.size));
    std::vector<uint64_t> img;
    img.reserve(La.size);
    for (uint64_t c = 0; c < La.size; ++c) {
        auto r = La.decode(c);  // label u + a * inner
        std::vector<Coord> t(r.size());
        std::vector<Coord> u(r.size());
        for (size_t i = 0; i < r.size(); ++i) {
            u[i] = r[i] % a;
            t[i] = u[i] + b * (r[i] / a);
        }
        th.cell_map[c] = Lb.encode(t);
        img.push_back(th.cell_map[c]);
        for (size_t i = 0; i < d; ++i) {
            LatticeVector e(d);
            e[i] = (u[i] + 1 < a) ? 1 : (b - a + 1);
            th.eta[i][c] = e;
        }
    }
    std::sort(img.begin(), img.end());
    th.image = make_clopen(K, img);
    return th;
}

/// Lifts an injection to the height-m towers on both sides, floorwise:
/// (y, u) -> (theta y, u).  Inside the box the cocycle is e_i; crossing the
/// top floor scales the base cocycle by m and rewinds the box coordinate.
inline OrbitInjection lift_to_tower(const OrbitInjection& th, Coord m) {
    detail::require_valid(th);
    if (m < 2) throw std::invalid_argument("lift_to_tower: height must be at least 2");
    SystemHandle S = make_tower(th.source, m);
    SystemHandle T = make_tower(th.target, m);
    auto Ls = make_level(th.source, th.depth_src);
    auto Lt = make_level(th.target, th.depth_tgt);
    auto LS = make_level(S, th.depth_src + 1);
    auto LT = make_level(T, th.depth_tgt + 1);
    size_t d = dim(th.source);
    OrbitInjection out;
    out.source = S;
    out.target = T;
    out.depth_src = th.depth_src + 1;
    out.depth_tgt = th.depth_tgt + 1;
    out.cell_map.resize(LS.size);
    out.eta.assign(d, std::vector<LatticeVector>(LS.size));
    std::vector<uint64_t> img;
    img.reserve(LS.size);
    for (uint64_t c = 0; c < LS.size; ++c) {
        auto r = LS.decode(c);  // label u + m * inner
        std::vector<Coord> inner(r.size());
        std::vector<Coord> u(r.size());
        for (size_t i = 0; i < r.size(); ++i) {
            u[i] = r[i] % m;
            inner[i] = r[i] / m;
        }
        uint64_t base_cell = Ls.encode(inner);
        auto t = Lt.decode(th.cell_map[base_cell]);
        std::vector<Coord> lab(t.size());
        for (size_t i = 0; i < t.size(); ++i) lab[i] = u[i] + m * t[i];
        out.cell_map[c] = LT.encode(lab);
        img.push_back(out.cell_map[c]);
        for (size_t i = 0; i < d; ++i) {
            LatticeVector e(d);
            if (u[i] + 1 < m) {
                e[i] = 1;
            } else {
                const LatticeVector& be = th.eta[i][base_cell];
                for (size_t j = 0; j < d; ++j) e[j] = m * be[j];
                e[i] -= (m - 1);
            }
            out.eta[i][c] = e;
        }
    }
    std::sort(img.begin(), img.end());
    out.image = make_clopen(out.depth_tgt, img);
    return out;
}

/// Composition of injections sharing the middle system and depth; the
/// cocycle composes through the staircase extension of the outer table.
inline OrbitInjection compose(const OrbitInjection& first, const OrbitInjection& second) {
    detail::require_valid(first);
    detail::require_valid(second);
    if (!same_system(first.target, second.source) || first.depth_tgt != second.depth_src)
        throw std::invalid_argument("compose: middle system or depth mismatch");
    auto Ls = make_level(first.source, first.depth_src);
    size_t d = dim(first.source);
    OrbitInjection out;
    out.source = first.source;
    out.target = second.target;
    out.depth_src = first.depth_src;
    out.depth_tgt = second.depth_tgt;
    out.cell_map.resize(Ls.size);
    out.eta.assign(d, std::vector<LatticeVector>(Ls.size));
    std::vector<uint64_t> img;
    img.reserve(Ls.size);
    for (uint64_t c = 0; c < Ls.size; ++c) {
        uint64_t mid = first.cell_map[c];
        out.cell_map[c] = second.cell_map[mid];
        img.push_back(out.cell_map[c]);
        for (size_t i = 0; i < d; ++i)
            out.eta[i][c] = eta_of(second, mid, first.eta[i][c]);
    }
    std::sort(img.begin(), img.end());
    out.image = make_clopen(out.depth_tgt, img);
    return out;
}

/// The family of projections carried by an injection at one vector z: the
/// support at h collects the image points whose column shift under z equals
/// h.  Supports are pairwise disjoint, finitely many are nonempty, and they
/// resolve the image exactly.
struct ProjectionFamily {
    LatticeVector z;
    std::map<LatticeVector, ClopenSet> supports;
    ClopenSet image;
};

inline ProjectionFamily projection_family(const OrbitInjection& th, const LatticeVector& z) {
    detail::require_valid(th);
    auto Ls = make_level(th.source, th.depth_src);
    auto Lt = make_level(th.target, th.depth_tgt);
    std::map<LatticeVector, std::vector<uint64_t>> cells;
    for (uint64_t c = 0; c < Ls.size; ++c) {
        LatticeVector h = eta_of(th, c, z);
        cells[h].push_back(act_cell(Lt, h, th.cell_map[c]));
    }
    ProjectionFamily fam;
    fam.z = z;
    fam.image = th.image;
    size_t total = 0;
    std::vector<uint64_t> all;
    for (auto& [h, cs] : cells) {
        std::sort(cs.begin(), cs.end());
        if (std::adjacent_find(cs.begin(), cs.end()) != cs.end())
            throw std::logic_error("projection_family: support has repeated cells");
        total += cs.size();
        all.insert(all.end(), cs.begin(), cs.end());
        fam.supports.emplace(h, make_clopen(th.depth_tgt, cs));
    }
    std::sort(all.begin(), all.end());
    if (total != th.image.cells.size() || all != th.image.cells)
        throw std::logic_error("projection_family: supports do not resolve the image");
    return fam;
}

/// Exact cellwise verification of the projection calculus at a pair of
/// vectors: (a) orthogonality of supports, (b) resolution of the image,
/// (c) the convolution identity with at most one nonzero summand per cell,
/// (d) the symbolic group law including the trivial family at 0, and
/// (e) commutation of the family with the image projection.
struct ProjectionLawReport {
    bool orthogonal = false;
    bool resolution = false;
    bool convolution = false;
    bool group_law = false;
    bool commute = false;
    std::string violation;

    bool all() const {
        return orthogonal && resolution && convolution && group_law && commute;
    }
};

inline ProjectionLawReport check_projection_laws(const OrbitInjection& th,
                                                 const LatticeVector& z,
                                                 const LatticeVector& zp) {
    auto Lt = make_level(th.target, th.depth_tgt);
    ProjectionFamily F = projection_family(th, z);
    ProjectionFamily G = projection_family(th, zp);
    LatticeVector zs(z.dim());
    for (size_t j = 0; j < z.dim(); ++j) zs[j] = z[j] + zp[j];
    ProjectionFamily H = projection_family(th, zs);
    ProjectionLawReport rep;

    // dense indicator tables per family
    auto table = [&](const ProjectionFamily& fam) {
        std::map<LatticeVector, std::vector<char>> t;
        for (const auto& [h, s] : fam.supports) {
            std::vector<char> ind(Lt.size, 0);
            for (uint64_t c : s.cells) ind[c] = 1;
            t.emplace(h, std::move(ind));
        }
        return t;
    };
    auto Ft = table(F), Gt = table(G), Ht = table(H);
    std::vector<char> img(Lt.size, 0);
    for (uint64_t c : th.image.cells) img[c] = 1;

    // (a) orthogonality within each family
    rep.orthogonal = true;
    for (const auto* t : {&Ft, &Gt, &Ht}) {
        std::vector<char> seen(Lt.size, 0);
        for (const auto& [h, ind] : *t) {
            for (uint64_t c = 0; c < Lt.size; ++c) {
                if (ind[c] && seen[c]) {
                    rep.orthogonal = false;
                    rep.violation = "supports overlap at target cell " +
                                    detail::cell_label(Lt, c);
                }
                seen[c] = static_cast<char>(seen[c] | ind[c]);
            }
        }
    }
    if (!rep.orthogonal) return rep;

    // (b) resolution of the image
    rep.resolution = true;
    for (const auto* t : {&Ft, &Gt, &Ht}) {
        std::vector<char> sum(Lt.size, 0);
        for (const auto& [h, ind] : *t)
            for (uint64_t c = 0; c < Lt.size; ++c) sum[c] = static_cast<char>(sum[c] + ind[c]);
        if (sum != img) {
            rep.resolution = false;
            rep.violation = "supports do not sum to the image projection";
            return rep;
        }
    }

    // (c) convolution: H at h equals the sum over h' of F at h' times G at
    // h - h' pulled back by -h', with at most one nonzero summand per cell
    rep.convolution = true;
    std::set<LatticeVector> keys;
    for (const auto& [h, ind] : Ht) keys.insert(h);
    for (const auto& [h1, i1] : Ft)
        for (const auto& [h2, i2] : Gt) {
            LatticeVector h(h1.dim());
            for (size_t j = 0; j < h.dim(); ++j) h[j] = h1[j] + h2[j];
            keys.insert(h);
        }
    for (const auto& h : keys) {
        for (uint64_t c = 0; c < Lt.size && rep.convolution; ++c) {
            int total = 0;
            for (const auto& [h1, i1] : Ft) {
                if (!i1[c]) continue;
                LatticeVector diff(h.dim()), back(h.dim());
                for (size_t j = 0; j < h.dim(); ++j) {
                    diff[j] = h[j] - h1[j];
                    back[j] = -h1[j];
                }
                auto it = Gt.find(diff);
                if (it != Gt.end() && it->second[act_cell(Lt, back, c)]) ++total;
            }
            auto ih = Ht.find(h);
            int lhs = (ih != Ht.end() && ih->second[c]) ? 1 : 0;
            if (total > 1 || lhs != total) {
                rep.convolution = false;
                rep.violation = "convolution identity fails at target cell " +
                                detail::cell_label(Lt, c);
            }
        }
        if (!rep.convolution) return rep;
    }

    // (d) symbolic group law: the product of the (support, shift) data of
    // the two families is exactly the data of the combined family, cross
    // terms with the image complement vanish, and the family at 0 is the
    // identity on the image
    rep.group_law = true;
    for (const auto& [h1, i1] : Ft) {
        LatticeVector back(h1.dim());
        for (size_t j = 0; j < h1.dim(); ++j) back[j] = -h1[j];
        for (uint64_t c = 0; c < Lt.size; ++c) {
            if (i1[c] && !img[act_cell(Lt, back, c)]) {
                rep.group_law = false;
                rep.violation = "cross term with the complement survives at " +
                                detail::cell_label(Lt, c);
            }
        }
    }
    ProjectionFamily Z0 = projection_family(th, LatticeVector(z.dim()));
    if (!(Z0.supports.size() == 1 &&
          Z0.supports.begin()->first == LatticeVector(z.dim()) &&
          Z0.supports.begin()->second.cells == th.image.cells)) {
        rep.group_law = false;
        rep.violation = "family at the zero vector is not the image identity";
    }
    if (!rep.group_law) return rep;

    // (e) commutation with the image projection: each support lies in the
    // image and lands back inside it under its own shift
    rep.commute = true;
    for (const auto& [h, ind] : Ft) {
        LatticeVector back(h.dim());
        for (size_t j = 0; j < h.dim(); ++j) back[j] = -h[j];
        for (uint64_t c = 0; c < Lt.size && rep.commute; ++c) {
            if (!ind[c]) continue;
            if (!img[c] || !img[act_cell(Lt, back, c)]) {
                rep.commute = false;
                rep.violation = "support escapes the image near " +
                                detail::cell_label(Lt, c);
            }
        }
    }
    return rep;
}

/// Pushforward of an integer function through the cell map: values move to
/// the image cells, zero elsewhere.  The function must live at or above the
/// injection's source resolution.
inline IntFunction push_forward(const OrbitInjection& th, const IntFunction& f) {
    if (f.depth > th.depth_src)
        throw std::invalid_argument("push_forward: function is finer than the injection");
    IntFunction fs = refine_function(th.source, f, th.depth_src);
    IntFunction out = zero_function(th.target, th.depth_tgt);
    for (uint64_t c = 0; c < fs.values.size(); ++c) out.values[th.cell_map[c]] = fs.values[c];
    return out;
}

/// The induced map on cohomology classes, forward direction.
inline CohomologyClass induced_class(const OrbitInjection& th, const IntFunction& f) {
    detail::require_valid(th);
    return class_of(th.target, push_forward(th, f));
}

/// The inverse direction: a column-collapse of target functions onto the
/// image, built from a tower partition of the target that splits cleanly
/// along the image boundary and keeps its centers inside the image.  The
/// collapse sends f to 0 off the image, keeps f on the image away from the
/// centers, and adds the off-image column values at the centers; pulling
/// back along the cell map then lands in the source group.
struct CondenseMap {
    OrbitInjection theta;
    VoronoiRohlinPartition partition;
    std::vector<std::vector<LatticeVector>> complement_w;  ///< per class: off-image slots
};

inline CondenseMap build_inverse_hom(OrbitInjection th, VoronoiRohlinPartition P) {
    detail::require_valid(th);
    if (!(P.classes_partition_centers && P.cover_exact && P.half_ball_inside &&
          P.diameter_bound))
        throw std::invalid_argument("build_inverse_hom: partition is not certified");
    if (!same_system(P.system, th.target))
        throw std::invalid_argument("build_inverse_hom: partition lives off the target");
    if (P.depth > th.depth_tgt)
        throw std::invalid_argument(
            "build_inverse_hom: partition is finer than the injection's resolution");
    auto L = make_level(th.target, P.depth);
    ClopenSet img = refine(th.target, th.image, P.depth);
    std::vector<char> in_img(L.size, 0);
    for (uint64_t c : img.cells) in_img[c] = 1;
    CondenseMap cm;
    cm.complement_w.resize(P.classes.size());
    for (size_t k = 0; k < P.classes.size(); ++k) {
        for (uint64_t c : P.classes[k].cells)
            if (!in_img[c])
                throw std::invalid_argument(
                    "build_inverse_hom: a partition center lies off the image");
        for (const auto& w : P.prototiles[k]) {
            size_t inside = 0;
            for (uint64_t c : P.classes[k].cells)
                inside += in_img[act_cell(L, w, c)] ? 1u : 0u;
            if (inside != 0 && inside != P.classes[k].cells.size())
                throw std::invalid_argument(
                    "build_inverse_hom: partition does not refine the image boundary");
            if (inside == 0) cm.complement_w[k].push_back(w);
        }
    }
    cm.theta = std::move(th);
    cm.partition = std::move(P);
    return cm;
}

/// The column collapse f-hat of a target function, at the working depth.
inline IntFunction condense(const CondenseMap& cm, const IntFunction& f) {
    const auto& th = cm.theta;
    const auto& P = cm.partition;
    if (f.depth > th.depth_tgt)
        throw std::invalid_argument("condense: function is finer than the injection");
    int K = std::max(f.depth, P.depth);
    auto L = make_level(th.target, K);
    IntFunction fk = refine_function(th.target, f, K);
    ClopenSet img = refine(th.target, th.image, K);
    IntFunction out = zero_function(th.target, K);
    for (uint64_t c : img.cells) out.values[c] = fk.values[c];
    for (size_t k = 0; k < P.classes.size(); ++k) {
        ClopenSet Ck = refine(th.target, P.classes[k], K);
        for (uint64_t c : Ck.cells)
            for (const auto& w : cm.complement_w[k])
                out.values[c] += fk.values[act_cell(L, w, c)];
    }
    return out;
}

/// The pullback of the collapsed function along the cell map, as a source
/// function.
inline IntFunction pull_back(const CondenseMap& cm, const IntFunction& f) {
    const auto& th = cm.theta;
    IntFunction fh = refine_function(th.target, condense(cm, f), th.depth_tgt);
    IntFunction out = zero_function(th.source, th.depth_src);
    for (uint64_t c = 0; c < th.cell_map.size(); ++c)
        out.values[c] = fh.values[th.cell_map[c]];
    return out;
}

/// The induced map on cohomology classes, inverse direction.
inline CohomologyClass pulled_class(const CondenseMap& cm, const IntFunction& f) {
    return class_of(cm.theta.source, pull_back(cm, f));
}

namespace detail {

/// Solves eta(y, h) = g for the unique h, seeding the search with the
/// centered cell difference and widening by whole periods if needed.
inline LatticeVector solve_cocycle(const OrbitInjection& th, uint64_t y_cell,
                                   uint64_t y_next, const LatticeVector& g) {
    auto L = make_level(th.source, th.depth_src);
    size_t d = L.mod.size();
    LatticeVector base(d);
    auto a = L.decode(y_cell);
    auto b = L.decode(y_next);
    for (size_t j = 0; j < d; ++j) {
        Coord diff = (b[j] - a[j]) % L.mod[j];
        if (diff < 0) diff += L.mod[j];
        if (2 * diff > L.mod[j]) diff -= L.mod[j];
        base[j] = diff;
    }
    for (int shell = 0; shell <= 2; ++shell) {
        for (const auto& k : window_points(d, shell)) {
            bool on_shell = false;
            for (size_t j = 0; j < d; ++j)
                if (std::abs(k[j]) == shell) on_shell = true;
            if (shell > 0 && !on_shell) continue;
            LatticeVector h(d);
            for (size_t j = 0; j < d; ++j) h[j] = base[j] + k[j] * L.mod[j];
            if (eta_of(th, y_cell, h) == g) return h;
        }
    }
    throw std::logic_error("solve_cocycle: no displacement matches the cocycle value");
}

}  // namespace detail

/// Builds an injection between the sources out of a strict comparison of the
/// images inside a common target: sweeps the partition scale upward until
/// every tower class shows strictly more free slots over the second image
/// than slots used by the first, then moves columns into free slots (both
/// sides split so every partition element sits cleanly inside or outside
/// each image, and slots pair lexicographically).  The sweep is bounded by
/// the resolution of the given tables; a failed sweep asks for deeper input.
inline OrbitInjection construct_small(const OrbitInjection& th1, const OrbitInjection& th2,
                                      const std::vector<Rat>& sweep = {Rat(8), Rat(16),
                                                                       Rat(32), Rat(64)}) {
    detail::require_valid(th1);
    detail::require_valid(th2);
    if (!same_system(th1.target, th2.target) || th1.depth_tgt != th2.depth_tgt)
        throw std::invalid_argument("construct_small: injections need a common target level");
    if (th1.image.cells.size() >= th2.image.cells.size())
        throw std::invalid_argument(
            "construct_small: image classes are not strictly ordered; for equal images "
            "use the orbit-equivalence pipeline");
    const SystemHandle& Z = th1.target;
    const int KT = th1.depth_tgt;
    auto L = make_level(Z, KT);
    std::vector<char> in1(L.size, 0), in2(L.size, 0);
    for (uint64_t c : th1.image.cells) in1[c] = 1;
    for (uint64_t c : th2.image.cells) in2[c] = 1;

    // sweep for a partition scale whose every class strictly favors the
    // second image
    struct SplitClass {
        std::vector<uint64_t> centers;
        std::vector<LatticeVector> tile;
        std::vector<LatticeVector> slots_in, slots_out;
    };
    std::vector<SplitClass> classes;
    bool found = false;
    for (const Rat& M : sweep) {
        VoronoiRohlinPartition P;
        try {
            P = build_partition(Z, whole_space(Z, 1),
                                make_point(Z, 1, std::vector<Coord>(dim(Z), 0)), M);
        } catch (const std::exception&) {
            continue;
        }
        if (P.depth > KT) break;  // resolution of the inputs exhausted
        classes.clear();
        bool strict = true;
        for (size_t k = 0; k < P.classes.size() && strict; ++k) {
            ClopenSet Ck = refine(Z, P.classes[k], KT);
            // signature of a center: which slots land in which image
            std::map<std::vector<char>, SplitClass> split;
            for (uint64_t c : Ck.cells) {
                std::vector<char> sig;
                sig.reserve(2 * P.prototiles[k].size());
                for (const auto& w : P.prototiles[k]) {
                    uint64_t t = act_cell(L, w, c);
                    sig.push_back(in1[t]);
                    sig.push_back(in2[t]);
                }
                split[sig].centers.push_back(c);
            }
            for (auto& [sig, sc] : split) {
                sc.tile = P.prototiles[k];
                for (size_t wi = 0; wi < sc.tile.size(); ++wi) {
                    if (sig[2 * wi]) sc.slots_in.push_back(sc.tile[wi]);
                    if (sig[2 * wi + 1]) sc.slots_out.push_back(sc.tile[wi]);
                }
                if (sc.slots_in.size() >= sc.slots_out.size()) {
                    strict = false;
                    break;
                }
                classes.push_back(std::move(sc));
            }
        }
        if (strict) {
            found = true;
            break;
        }
    }
    if (!found)
        throw std::runtime_error(
            "construct_small: no partition scale within the input resolution gave "
            "strictly favorable columns; rebuild the injections at deeper levels");

    // lexicographic-greedy slot assignment and the column move
    std::vector<LatticeVector> move(L.size, LatticeVector(dim(Z)));
    std::vector<char> moved(L.size, 0);
    for (auto& sc : classes) {
        std::sort(sc.slots_in.begin(), sc.slots_in.end());
        std::sort(sc.slots_out.begin(), sc.slots_out.end());
        for (size_t i = 0; i < sc.slots_in.size(); ++i) {
            const auto& v = sc.slots_in[i];
            const auto& rv = sc.slots_out[i];
            LatticeVector delta(v.dim());
            for (size_t j = 0; j < v.dim(); ++j) delta[j] = rv[j] - v[j];
            for (uint64_t c : sc.centers) {
                uint64_t cell = act_cell(L, v, c);
                move[cell] = delta;
                moved[cell] = 1;
            }
        }
    }
    for (uint64_t c : th1.image.cells)
        if (!moved[c])
            throw std::logic_error("construct_small: a first-image cell missed its slot");

    // carries the first image into the second along the slot moves
    std::map<uint64_t, uint64_t> inv2;
    for (uint64_t c = 0; c < th2.cell_map.size(); ++c) inv2[th2.cell_map[c]] = c;
    auto pi_cell = [&](uint64_t z) { return act_cell(L, move[z], z); };
    auto sigma = [&](uint64_t z) { return move[z]; };

    auto Ls = make_level(th1.source, th1.depth_src);
    size_t d = dim(th1.source);
    OrbitInjection out;
    out.source = th1.source;
    out.target = th2.source;
    out.depth_src = th1.depth_src;
    out.depth_tgt = th2.depth_src;
    out.cell_map.resize(Ls.size);
    out.eta.assign(d, std::vector<LatticeVector>(Ls.size));
    std::vector<uint64_t> img;
    img.reserve(Ls.size);
    for (uint64_t c = 0; c < Ls.size; ++c) {
        uint64_t z = th1.cell_map[c];
        uint64_t pz = pi_cell(z);
        auto it = inv2.find(pz);
        if (it == inv2.end())
            throw std::logic_error("construct_small: a moved column left the second image");
        out.cell_map[c] = it->second;
        img.push_back(it->second);
    }
    for (uint64_t c = 0; c < Ls.size; ++c) {
        for (size_t i = 0; i < d; ++i) {
            LatticeVector ei(d);
            ei[i] = 1;
            uint64_t cn = act_cell(Ls, ei, c);
            uint64_t z = th1.cell_map[c];
            uint64_t zn = th1.cell_map[cn];
            // displacement between the moved columns in the common target
            LatticeVector g = th1.eta[i][c];
            detail::add_to(g, sigma(zn), 1);
            detail::add_to(g, sigma(z), -1);
            out.eta[i][c] = detail::solve_cocycle(th2, out.cell_map[c], out.cell_map[cn], g);
        }
    }
    std::sort(img.begin(), img.end());
    out.image = make_clopen(out.depth_tgt, img);
    detail::require_valid(out);
    return out;
}

/// The common-tower construction: given injections of two systems into one
/// target, produces a height m with m^d columns outgrowing the image ratio,
/// then hosts the first source inside the height-m tower over the second,
/// alongside the canonical floor embedding of the second.
struct CommonTower {
    Coord m = 0;
    SystemHandle tower;          ///< height-m tower over the second source
    OrbitInjection first_into;   ///< first source -> tower
    OrbitInjection second_into;  ///< second source -> tower (floor embedding)
};

inline CommonTower ensure_common_tower(const OrbitInjection& th1, const OrbitInjection& th2,
                                       const std::vector<Rat>& sweep = {Rat(8), Rat(16),
                                                                        Rat(32), Rat(64)}) {
    detail::require_valid(th1);
    detail::require_valid(th2);
    if (!same_system(th1.target, th2.target) || th1.depth_tgt != th2.depth_tgt)
        throw std::invalid_argument(
            "ensure_common_tower: injections need a common target level");
    size_t d = dim(th1.source);
    // the least multiple of the second image class strictly above the first
    uint64_t n = th1.image.cells.size() / th2.image.cells.size() + 1;
    Coord m = 2;
    while (true) {
        uint64_t md = 1;
        for (size_t j = 0; j < d; ++j) md *= static_cast<uint64_t>(m);
        if (md > n) break;
        ++m;
    }
    CommonTower out;
    out.m = m;
    out.tower = make_tower(th2.source, m);
    OrbitInjection lifted1 = compose(th1, tower_embed(th1.target, m, th1.depth_tgt));
    OrbitInjection lifted2 = lift_to_tower(th2, m);
    out.first_into = construct_small(lifted1, lifted2, sweep);
    out.second_into = tower_embed(th2.source, m, th2.depth_src);
    if (!same_system(out.first_into.target, out.tower) ||
        !same_system(out.second_into.target, out.tower))
        throw std::logic_error("ensure_common_tower: hosts disagree");
    return out;
}

}  // namespace zcantor
