/// Command-line front-end: define odometer systems, run the constructions,
/// and emit JSON certificates (plus SVG tiling renders in two dimensions).
///
/// Subcommands: partition, group, inject, equiv, convolution, selftest.
/// Every command writes its report under --out (default: $ZCANTOR_OUT, else
/// the working directory) and exits 0 exactly when all requested
/// certificates pass; construction errors exit 2 with the module diagnostic.

#include <zcantor/cohomology.hpp>
#include <zcantor/odometer.hpp>
#include <zcantor/orbit_equivalence.hpp>
#include <zcantor/orbit_maps.hpp>
#include <zcantor/rohlin.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using json = nlohmann::ordered_json;
using namespace zcantor;

namespace {

// ---------------------------------------------------------------- parsing

/// System descriptors: "odo-2-3-5" is the one-axis schedule (2,3,5);
/// axes are joined with 'x', so "odo-2-2x3-3" is (2,2) x (3,3).
SystemHandle parse_descriptor(const std::string& text) {
    const std::string prefix = "odo-";
    if (text.rfind(prefix, 0) != 0)
        throw std::invalid_argument("system descriptor must look like odo-2-3-5 or odo-2-2x3-3");
    std::vector<std::vector<int>> axes;
    std::stringstream body(text.substr(prefix.size()));
    std::string axis;
    while (std::getline(body, axis, 'x')) {
        std::vector<int> entries;
        std::stringstream parts(axis);
        std::string tok;
        while (std::getline(parts, tok, '-')) {
            size_t used = 0;
            int v = std::stoi(tok, &used);
            if (used != tok.size()) throw std::invalid_argument("bad schedule entry '" + tok + "'");
            entries.push_back(v);
        }
        axes.push_back(std::move(entries));
    }
    return make_odometer(std::move(axes));
}

/// Resolves a --system argument: a raw descriptor, or a name introduced by
/// --define name=odo-...; every referenced name must be defined.
SystemHandle resolve_system(const std::string& arg,
                            const std::map<std::string, std::string>& defs) {
    if (arg.rfind("odo-", 0) == 0) return parse_descriptor(arg);
    auto it = defs.find(arg);
    if (it == defs.end())
        throw std::invalid_argument("system '" + arg +
                                    "' is not defined; pass --define " + arg +
                                    "=odo-... or use a descriptor directly");
    return parse_descriptor(it->second);
}

/// Clopen sets are written "{0,1}@3": cell indices at a depth.
ClopenSet parse_clopen(const std::string& text) {
    auto at = text.find('@');
    auto open = text.find('{');
    auto close = text.find('}');
    if (open == std::string::npos || close == std::string::npos || at == std::string::npos ||
        !(open < close && close < at))
        throw std::invalid_argument("clopen sets are written like \"{0,1}@3\"");
    std::vector<uint64_t> cells;
    std::stringstream inner(text.substr(open + 1, close - open - 1));
    std::string tok;
    while (std::getline(inner, tok, ','))
        if (!tok.empty()) cells.push_back(std::stoull(tok));
    int depth = std::stoi(text.substr(at + 1));
    std::sort(cells.begin(), cells.end());
    return make_clopen(depth, std::move(cells));
}

/// Points are written "1,0@2": per-axis residues at a depth.
SystemPoint parse_point(const SystemHandle& s, const std::string& text) {
    auto at = text.find('@');
    if (at == std::string::npos)
        throw std::invalid_argument("points are written like \"1,0@2\"");
    std::vector<Coord> residues;
    std::stringstream inner(text.substr(0, at));
    std::string tok;
    while (std::getline(inner, tok, ','))
        if (!tok.empty()) residues.push_back(std::stoll(tok));
    int depth = std::stoi(text.substr(at + 1));
    return make_point(s, depth, std::move(residues));
}

Rat parse_rat(const std::string& text) {
    auto slash = text.find('/');
    if (slash == std::string::npos) return Rat(std::stoll(text));
    return Rat(std::stoll(text.substr(0, slash)), std::stoll(text.substr(slash + 1)));
}

std::pair<long long, long long> parse_fraction(const std::string& text) {
    auto slash = text.find('/');
    if (slash == std::string::npos)
        throw std::invalid_argument("densities are written like \"1/3\"");
    return {std::stoll(text.substr(0, slash)), std::stoll(text.substr(slash + 1))};
}

// ------------------------------------------------------------ serialization

std::string rat_str(const Rat& r) {
    if (r.den == 1) return std::to_string(r.num);
    return std::to_string(r.num) + "/" + std::to_string(r.den);
}

json vec_json(const LatticeVector& v) {
    json a = json::array();
    for (size_t i = 0; i < v.dim(); ++i) a.push_back(v[i]);
    return a;
}

json clopen_json(const ClopenSet& C) {
    return json{{"depth", C.depth}, {"cells", C.cells}};
}

json system_json(const SystemHandle& s) {
    if (s->kind == SystemNode::Kind::odometer)
        return json{{"kind", "odometer"}, {"axes", s->sched.axes}};
    return json{{"kind", "tower"}, {"height", s->height}, {"inner", system_json(s->inner)}};
}

json injection_json(const OrbitInjection& th, const InjectionCertificate& cert) {
    json eta = json::array();
    for (const auto& axis : th.eta) {
        json col = json::array();
        for (const auto& v : axis) col.push_back(vec_json(v));
        eta.push_back(std::move(col));
    }
    return json{{"source", system_json(th.source)},
                {"target", system_json(th.target)},
                {"depth_src", th.depth_src},
                {"depth_tgt", th.depth_tgt},
                {"cell_map", th.cell_map},
                {"eta", std::move(eta)},
                {"image", clopen_json(th.image)},
                {"certificate",
                 {{"window", cert.window},
                  {"extended_window", cert.extended_window},
                  {"injective", cert.injective},
                  {"cocycle_ok", cert.cocycle_ok},
                  {"path_independent", cert.path_independent},
                  {"orbit_biconditional", cert.orbit_biconditional},
                  {"violation", cert.violation}}}};
}

json full_group_json(const FullGroupElement& g, const FullGroupCheck& check) {
    json moves = json::array();
    for (uint64_t c = 0; c < g.zeta.size(); ++c) {
        bool zero = true;
        for (size_t i = 0; i < g.zeta[c].dim(); ++i) zero = zero && g.zeta[c][i] == 0;
        if (!zero) moves.push_back(json{{"cell", c}, {"move", vec_json(g.zeta[c])}});
    }
    return json{{"depth", g.depth},
                {"moves", std::move(moves)},
                {"exceptional", g.exceptional},
                {"bijective", check.bijective},
                {"involution", check.involution},
                {"moved", check.moved}};
}

void write_file(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << body;
    std::printf("wrote %s\n", path.string().c_str());
}

void write_json(const std::filesystem::path& path, const json& j) {
    write_file(path, j.dump(2) + "\n");
}

std::filesystem::path out_dir(const std::string& flag) {
    std::string dir = flag;
    if (dir.empty()) {
        const char* env = std::getenv("ZCANTOR_OUT");
        dir = env && *env ? env : ".";
    }
    std::filesystem::create_directories(dir);
    return dir;
}

// ------------------------------------------------------------------- SVG

const char* kPalette[16] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
                            "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#1f77b4", "#2ca02c",
                            "#d62728", "#9467bd", "#8c564b", "#17becf"};

/// One fundamental domain of a two-dimensional partition: a rectangle per
/// lattice cell, grouped by class (one <g> per class), hue by class index,
/// opacity stepped by the cell's position inside its prototile; center cells
/// are outlined.
std::string partition_svg(const VoronoiRohlinPartition& P) {
    auto L = make_level(P.system, P.depth);
    long long n0 = L.mod[0], n1 = L.mod[1];
    const int px = 12;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << n0 * px << "\" height=\""
        << n1 * px << "\" viewBox=\"0 0 " << n0 * px << " " << n1 * px << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    for (size_t k = 0; k < P.classes.size(); ++k) {
        svg << "<g fill=\"" << kPalette[k % 16] << "\">\n";
        size_t tile = P.prototiles[k].size();
        for (uint64_t c : P.classes[k].cells) {
            auto r = L.decode(c);
            for (size_t wi = 0; wi < tile; ++wi) {
                const auto& w = P.prototiles[k][wi];
                long long x = ((r[0] + w[0]) % n0 + n0) % n0;
                long long y = ((r[1] + w[1]) % n1 + n1) % n1;
                double opacity = 0.40 + 0.55 * double(wi + 1) / double(tile);
                svg << "<rect x=\"" << x * px << "\" y=\"" << y * px << "\" width=\"" << px
                    << "\" height=\"" << px << "\" fill-opacity=\"" << opacity << "\"/>\n";
            }
        }
        svg << "</g>\n";
    }
    svg << "<g fill=\"none\" stroke=\"#000000\" stroke-width=\"1.5\">\n";
    for (const auto& C : P.classes)
        for (uint64_t c : C.cells) {
            auto r = L.decode(c);
            svg << "<rect x=\"" << r[0] * px << "\" y=\"" << r[1] * px << "\" width=\"" << px
                << "\" height=\"" << px << "\"/>\n";
        }
    svg << "</g>\n</svg>\n";
    return svg.str();
}

// ------------------------------------------------------------- commands

struct PartitionConfig {
    std::string system;
    std::string center;
    std::string M = "8";
    std::string anchor;  // optional "r0,r1@K"
    std::string out;
    std::map<std::string, std::string> defs;
};

int run_partition(const PartitionConfig& cfg) {
    SystemHandle s = resolve_system(cfg.system, cfg.defs);
    ClopenSet C = parse_clopen(cfg.center);
    Rat M = parse_rat(cfg.M);
    SystemPoint x0 = cfg.anchor.empty()
                         ? make_point(s, C.depth, make_level(s, C.depth).decode(C.cells.at(0)))
                         : parse_point(s, cfg.anchor);

    VoronoiRohlinPartition P = build_partition(s, C, x0, M);
    bool pass = P.classes_partition_centers && P.anchor_inside && P.cover_exact &&
                P.half_ball_inside && P.diameter_bound;

    json classes = json::array();
    json prototiles = json::array();
    for (size_t k = 0; k < P.classes.size(); ++k) {
        classes.push_back(clopen_json(P.classes[k]));
        json tile = json::array();
        for (const auto& w : P.prototiles[k]) tile.push_back(vec_json(w));
        prototiles.push_back(std::move(tile));
    }
    json j{{"schema", 1},
           {"command", "partition"},
           {"system", system_json(s)},
           {"M", rat_str(P.M)},
           {"depth", P.depth},
           {"K", P.classes.size()},
           {"centers", clopen_json(P.centers)},
           {"classes", std::move(classes)},
           {"prototiles", std::move(prototiles)},
           {"certificate",
            {{"classes_partition_centers", P.classes_partition_centers},
             {"anchor_inside", P.anchor_inside},
             {"cover_exact", P.cover_exact},
             {"half_ball_inside", P.half_ball_inside},
             {"diameter_bound", P.diameter_bound},
             {"boundary_constant", P.boundary_constant}}}};

    auto dir = out_dir(cfg.out);
    write_json(dir / "partition.json", j);
    if (dim(s) == 2) write_file(dir / "partition.svg", partition_svg(P));
    std::printf("partition: %zu classes at depth %d, certificate %s\n", P.classes.size(), P.depth,
                pass ? "pass" : "FAIL");
    return pass ? 0 : 1;
}

struct GroupConfig {
    std::string system;
    int depth = 2;
    std::vector<std::string> sweep;  // M values, default 8 16 32
    uint32_t seed = 2026;
    int pairs = 20;
    int samples = 50;
    std::string out;
    std::map<std::string, std::string> defs;
};

const char* ordering_str(Ordering o) {
    switch (o) {
        case Ordering::less: return "less";
        case Ordering::equal: return "equal";
        case Ordering::greater: return "greater";
        default: return "incomparable";
    }
}

const char* order_test_str(OrderTest t) {
    switch (t) {
        case OrderTest::proved_geq: return "proved_geq";
        case OrderTest::proved_gt: return "proved_gt";
        default: return "inconclusive";
    }
}

/// The one-sided test may stay inconclusive, but a proof must agree with the
/// exact comparison.
bool test_sound(OrderTest t, Ordering o) {
    if (t == OrderTest::proved_gt) return o == Ordering::less;  // tested f < g
    if (t == OrderTest::proved_geq) return o == Ordering::less || o == Ordering::equal;
    return true;
}

json group_report(const GroupConfig& cfg, bool& pass) {
    SystemHandle s = resolve_system(cfg.system, cfg.defs);
    std::vector<Rat> Ms;
    for (const auto& m : cfg.sweep) Ms.push_back(parse_rat(m));
    if (Ms.empty()) Ms = {Rat(8), Rat(16), Rat(32)};

    // one partition per scale, centered on the whole depth-1 level
    auto L1 = make_level(s, 1);
    std::vector<uint64_t> all(L1.size);
    for (uint64_t c = 0; c < L1.size; ++c) all[c] = c;
    ClopenSet full = make_clopen(1, std::move(all));
    SystemPoint origin = make_point(s, 1, std::vector<Coord>(L1.mod.size(), 0));
    std::vector<VoronoiRohlinPartition> parts;
    for (const Rat& M : Ms) parts.push_back(build_partition(s, full, origin, M));

    auto run_tests = [&](const IntFunction& f, const IntFunction& g) {
        json tests = json::object();
        for (size_t i = 0; i < Ms.size(); ++i)
            tests[rat_str(Ms[i])] = order_test_str(order_test_sufficient(f, g, parts[i]));
        return tests;
    };

    bool sound = true;
    auto sound_against = [&](const json& tests, Ordering oracle) {
        for (const auto& [m, t] : tests.items()) {
            OrderTest tt = t == "proved_gt"    ? OrderTest::proved_gt
                           : t == "proved_geq" ? OrderTest::proved_geq
                                               : OrderTest::inconclusive;
            sound = sound && test_sound(tt, oracle);
        }
    };

    // canned pair 1: two single-cell indicators, equal by the exact comparison
    auto Ld = make_level(s, cfg.depth);
    IntFunction f0 = indicator(s, make_clopen(cfg.depth, {0}));
    LatticeVector e0(L1.mod.size());
    e0[0] = 1;
    IntFunction f1 = indicator(s, make_clopen(cfg.depth, {act_cell(Ld, e0, 0)}));
    Ordering canned_eq_oracle = compare(class_of(s, f0), class_of(s, f1));
    json canned_eq_tests = run_tests(f0, f1);
    sound_against(canned_eq_tests, canned_eq_oracle);

    // canned pair 2: zero against the constant one (reported as "one vs zero")
    IntFunction zf = zero_function(s, 1);
    IntFunction one = indicator(s, full);
    Ordering canned_gt_oracle = compare(class_of(s, one), class_of(s, zf));
    json canned_gt_tests = run_tests(zf, one);
    sound_against(canned_gt_tests, compare(class_of(s, zf), class_of(s, one)));
    bool canned_gt_all = true;
    for (const auto& [m, t] : canned_gt_tests.items()) canned_gt_all = canned_gt_all && t == "proved_gt";

    // seeded random pairs
    std::mt19937 rng(cfg.seed);
    std::uniform_int_distribution<int> depth_pick(1, cfg.depth);
    std::uniform_int_distribution<long long> weight(-3, 3);
    json pair_reports = json::array();
    for (int p = 0; p < cfg.pairs; ++p) {
        int K = depth_pick(rng);
        auto L = make_level(s, K);
        std::vector<long long> av(L.size), bv(L.size);
        for (auto& v : av) v = weight(rng);
        for (auto& v : bv) v = weight(rng);
        IntFunction fa = make_function(s, K, std::move(av));
        IntFunction fb = make_function(s, K, std::move(bv));
        Ordering oracle = compare(class_of(s, fa), class_of(s, fb));
        json tests = run_tests(fa, fb);
        sound_against(tests, oracle);
        pair_reports.push_back(json{{"depth", K}, {"oracle", ordering_str(oracle)}, {"tests", std::move(tests)}});
    }

    GroupPropertyReport suite = group_property_suite(s, cfg.samples, cfg.seed);
    pass = sound && suite.all_passed && canned_gt_oracle == Ordering::greater && canned_gt_all;

    return json{{"schema", 1},
                {"command", "group"},
                {"system", system_json(s)},
                {"depth", cfg.depth},
                {"sweep", [&] {
                     json a = json::array();
                     for (const Rat& M : Ms) a.push_back(rat_str(M));
                     return a;
                 }()},
                {"seed", cfg.seed},
                {"canned",
                 {{"equal_pair", {{"oracle", ordering_str(canned_eq_oracle)}, {"tests", canned_eq_tests}}},
                  {"unit_vs_zero", {{"oracle", ordering_str(canned_gt_oracle)}, {"tests", canned_gt_tests}}}}},
                {"pairs", std::move(pair_reports)},
                {"suite",
                 {{"samples", suite.samples},
                  {"unperforation_checked", suite.unperforation_checked},
                  {"interpolation_checked", suite.interpolation_checked},
                  {"simplicity_checked", suite.simplicity_checked},
                  {"all_passed", suite.all_passed}}},
                {"sound", sound}};
}

int run_group(const GroupConfig& cfg) {
    bool pass = false;
    json j = group_report(cfg, pass);
    write_json(out_dir(cfg.out) / "group.json", j);
    std::printf("group: soundness %s, law suite %s\n", j["sound"].get<bool>() ? "pass" : "FAIL",
                j["suite"]["all_passed"].get<bool>() ? "pass" : "FAIL");
    return pass ? 0 : 1;
}

struct InjectConfig {
    std::string system;
    std::string from = "1/3";
    std::string to = "2/3";
    int depth = 3;
    int window = 2;
    std::string out;
    std::map<std::string, std::string> defs;
};

int run_inject(const InjectConfig& cfg) {
    SystemHandle s = resolve_system(cfg.system, cfg.defs);
    auto [a, b] = parse_fraction(cfg.from);
    auto [c, b2] = parse_fraction(cfg.to);
    if (b != b2)
        throw std::invalid_argument(
            "densities must share a denominator: both images live among the columns of one tower");
    if (!(1 <= a && a < c && c <= b))
        throw std::invalid_argument("densities must satisfy 1/b <= from < to <= b/b");

    // density k/b = k columns of the height-b tower over the system
    OrbitInjection th1 = a == 1 ? tower_embed(s, b, cfg.depth)
                                : tower_columns_embed(s, a, b, cfg.depth + 1);
    OrbitInjection th2 = c == b ? identity_injection(make_tower(s, b), cfg.depth + 1)
                                : tower_columns_embed(s, c, b, cfg.depth + 1);
    OrbitInjection outmap = construct_small(th1, th2);
    InjectionCertificate cert = verify_injection(outmap, cfg.window);

    auto Lt = make_level(outmap.target, outmap.depth_tgt);
    json j{{"schema", 1},
           {"command", "inject"},
           {"system", system_json(s)},
           {"from", cfg.from},
           {"to", cfg.to},
           {"host_level_cells", make_level(th1.target, th1.depth_tgt).size},
           {"source_cells", outmap.cell_map.size()},
           {"result_image_cells", outmap.image.cells.size()},
           {"result_level_cells", Lt.size},
           {"injection", injection_json(outmap, cert)}};
    write_json(out_dir(cfg.out) / "inject.json", j);
    std::printf("inject: %s -> %s, image %zu of %llu cells, certificate %s\n", cfg.from.c_str(),
                cfg.to.c_str(), outmap.image.cells.size(),
                static_cast<unsigned long long>(Lt.size), cert.certified() ? "pass" : "FAIL");
    return cert.certified() ? 0 : 1;
}

struct EquivConfig {
    std::string system;
    long long m = 2;
    int depth = 3;
    long long offset = 1;
    std::string partner = "offset";  // offset | pair
    int window = 2;
    int rounds = 0;                 // > 0 switches to the exhaustion pipeline
    std::vector<std::string> eps;   // schedule scales for the exhaustion
    std::vector<std::string> sweep; // partition scales for the exchanges
    std::string designate;          // "r0,..@K" point for the exhaustion
    std::string out;
    std::map<std::string, std::string> defs;
};

/// A partner embed whose image pairs adjacent target labels on axis 0
/// (r -> 2r - (r mod 2)) and doubles every other axis; together with the
/// plain doubling embed its image difference is a shifted copy of itself.
OrbitInjection pair_partner(const OrbitInjection& th1) {
    OrbitInjection m;
    m.source = th1.source;
    m.target = th1.target;
    m.depth_src = th1.depth_src;
    m.depth_tgt = th1.depth_tgt;
    auto LS = make_level(th1.source, th1.depth_src);
    auto LT = make_level(th1.target, th1.depth_tgt);
    size_t d = LS.mod.size();
    m.cell_map.resize(LS.size);
    m.eta.assign(d, std::vector<LatticeVector>(LS.size));
    std::vector<uint64_t> img;
    for (uint64_t c = 0; c < LS.size; ++c) {
        auto r = LS.decode(c);
        std::vector<Coord> t(d);
        t[0] = (2 * r[0] - (r[0] % 2)) % LT.mod[0];
        for (size_t i = 1; i < d; ++i) t[i] = (2 * r[i]) % LT.mod[i];
        m.cell_map[c] = LT.encode(t);
        for (size_t i = 0; i < d; ++i) {
            LatticeVector e(d);
            e[i] = i == 0 ? (r[0] + 1 == LS.mod[0] ? (LS.mod[0] % 2 ? 2 : 3) : (r[0] % 2 ? 3 : 1))
                          : 2;
            m.eta[i][c] = e;
        }
        img.push_back(m.cell_map[c]);
    }
    std::sort(img.begin(), img.end());
    m.image = make_clopen(m.depth_tgt, img);
    return m;
}

int run_equiv(const EquivConfig& cfg) {
    SystemHandle s = resolve_system(cfg.system, cfg.defs);
    OrbitInjection th1 = tower_embed(s, cfg.m, cfg.depth);
    OrbitInjection th2 = cfg.partner == "pair" ? pair_partner(th1)
                                               : tower_embed_at(s, cfg.m, cfg.offset, cfg.depth);

    auto dir = out_dir(cfg.out);
    if (cfg.rounds <= 0) {
        BoundedEquivalenceResult r = build_bounded_equivalence(th1, th2);
        FullGroupCheck fg = verify_full_group(r.pi);
        InjectionCertificate cert = verify_injection(r.map, cfg.window);
        size_t d = dim(th1.source);
        json empty_flags = json::array();
        for (size_t i = 0; i < d; ++i) empty_flags.push_back(json::array());
        bool pass = r.cancellation_ok && fg.ok() && cert.certified();
        json j{{"schema", 1},
               {"command", "equiv"},
               {"mode", "bounded"},
               {"system", system_json(s)},
               {"witness_terms", r.witness_terms},
               {"defects", r.defects},
               {"partition_scale", rat_str(r.partition_scale)},
               {"cancellation_ok", r.cancellation_ok},
               {"relocation", full_group_json(r.pi, fg)},
               {"map", injection_json(r.map, cert)},
               {"discontinuities", std::move(empty_flags)}};
        write_json(dir / "equiv.json", j);
        std::printf("equiv: bounded, %zu witness terms, %zu defects, certificate %s\n",
                    r.witness_terms, r.defects, pass ? "pass" : "FAIL");
        return pass ? 0 : 1;
    }

    ExchangeSchedule sch;
    sch.rounds = cfg.rounds;
    if (cfg.eps.empty()) {
        sch = geometric_schedule(cfg.rounds);
    } else {
        for (const auto& e : cfg.eps) sch.epsilons.push_back(parse_rat(e));
    }
    if (cfg.designate.empty())
        throw std::invalid_argument("the exhaustion needs --designate \"r0,..@K\"");
    SystemPoint x0 = parse_point(s, cfg.designate);
    std::vector<Rat> sweep;
    for (const auto& m : cfg.sweep) sweep.push_back(parse_rat(m));

    InfEquivalenceResult r = sweep.empty()
                                 ? build_orbit_equivalence_inf(th1, th2, x0, sch)
                                 : build_orbit_equivalence_inf(th1, th2, x0, sch, sweep);
    FullGroupCheck fg = verify_full_group(r.pi);
    InjectionCertificate cert = verify_injection(r.map, cfg.window);
    bool pass = fg.bijective && fg.involution && cert.certified() &&
                r.exhaustion.residual_a_in_ball && r.exhaustion.residual_b_in_ball;

    json pieces = json::array();
    for (const auto& p : r.exhaustion.a_pieces) pieces.push_back(p.cells.size());
    json shrink = json::array();
    for (const Rat& v : r.exhaustion.shrink) shrink.push_back(rat_str(v));
    json j{{"schema", 1},
           {"command", "equiv"},
           {"mode", "exhaustion"},
           {"system", system_json(s)},
           {"rounds", cfg.rounds},
           {"designated_cell", r.x0_cell},
           {"designated_move", vec_json(r.designated_move)},
           {"exhaustion",
            {{"piece_sizes", std::move(pieces)},
             {"residual_a", clopen_json(r.exhaustion.residual_a)},
             {"residual_b", clopen_json(r.exhaustion.residual_b)},
             {"irregular", r.exhaustion.irregular},
             {"residual_a_in_ball", r.exhaustion.residual_a_in_ball},
             {"residual_b_in_ball", r.exhaustion.residual_b_in_ball},
             {"shrink", std::move(shrink)}}},
           {"relocation", full_group_json(r.pi, fg)},
           {"map", injection_json(r.map, cert)},
           {"discontinuities", r.flagged}};
    write_json(dir / "equiv.json", j);
    size_t flag_total = 0;
    for (const auto& f : r.flagged) flag_total += f.size();
    std::printf("equiv: exhaustion over %d rounds, %zu flagged cells, certificate %s\n",
                cfg.rounds, flag_total, pass ? "pass" : "FAIL");
    return pass ? 0 : 1;
}

struct ConvolutionConfig {
    std::string system;
    long long m = 2;
    int depth = 3;
    long long radius = 1;
    std::string out;
    std::map<std::string, std::string> defs;
};

int run_convolution(const ConvolutionConfig& cfg) {
    SystemHandle s = resolve_system(cfg.system, cfg.defs);
    OrbitInjection th = tower_embed(s, cfg.m, cfg.depth);
    size_t d = dim(s);
    auto win = window_points(d, cfg.radius);
    size_t pairs = 0, failures = 0;
    json violations = json::array();
    for (const auto& z : win)
        for (const auto& zp : win) {
            ProjectionLawReport rep = check_projection_laws(th, z, zp);
            ++pairs;
            if (!rep.all()) {
                ++failures;
                if (violations.size() < 10)
                    violations.push_back(json{{"z", vec_json(z)},
                                              {"z_prime", vec_json(zp)},
                                              {"orthogonal", rep.orthogonal},
                                              {"resolution", rep.resolution},
                                              {"convolution", rep.convolution},
                                              {"group_law", rep.group_law},
                                              {"commute", rep.commute},
                                              {"violation", rep.violation}});
            }
        }
    bool pass = failures == 0;
    json j{{"schema", 1},
           {"command", "convolution"},
           {"system", system_json(s)},
           {"tower_height", cfg.m},
           {"depth", cfg.depth},
           {"radius", cfg.radius},
           {"pairs_checked", pairs},
           {"failures", failures},
           {"violations", std::move(violations)},
           {"all_laws_pass", pass}};
    write_json(out_dir(cfg.out) / "convolution.json", j);
    std::printf("convolution: %zu displacement pairs, laws %s\n", pairs, pass ? "pass" : "FAIL");
    return pass ? 0 : 1;
}

// ------------------------------------------------------------- selftest

int run_selftest(const std::string& out_flag) {
    namespace fs = std::filesystem;
    fs::path dir = out_flag.empty() ? fs::temp_directory_path() / "zcantor-selftest"
                                    : fs::path(out_flag);
    fs::create_directories(dir);
    int failed = 0;
    auto report = [&](const char* name, bool ok) {
        std::printf("selftest %-24s %s\n", name, ok ? "PASS" : "FAIL");
        if (!ok) ++failed;
    };

    try {
        PartitionConfig p1{"odo-2-3-5", "{0,1}@3", "16", "", (dir / "p1").string(), {}};
        report("partition-1d", run_partition(p1) == 0);
    } catch (const std::exception& e) {
        std::printf("  error: %s\n", e.what());
        report("partition-1d", false);
    }

    try {
        PartitionConfig p2{"odo-2-2x3-3", "{0,1,2,3,4,5}@1", "4", "", (dir / "p2").string(), {}};
        bool ok = run_partition(p2) == 0;
        // the render must hold one polygon group per class plus the outline group
        std::ifstream svg(dir / "p2" / "partition.svg");
        std::string body((std::istreambuf_iterator<char>(svg)), std::istreambuf_iterator<char>());
        std::ifstream jf(dir / "p2" / "partition.json");
        json pj = json::parse(jf);
        size_t groups = 0;
        for (size_t pos = 0; (pos = body.find("<g ", pos)) != std::string::npos; ++pos) ++groups;
        ok = ok && groups == pj["K"].get<size_t>() + 1;
        report("partition-2d-svg", ok);
    } catch (const std::exception& e) {
        std::printf("  error: %s\n", e.what());
        report("partition-2d-svg", false);
    }

    try {
        GroupConfig g{"odo-2-3", 2, {"8", "16"}, 2026, 10, 10, (dir / "g").string(), {}};
        bool pass1 = false, pass2 = false;
        std::string dump1 = group_report(g, pass1).dump(2);
        std::string dump2 = group_report(g, pass2).dump(2);
        report("group-soundness", pass1);
        report("group-determinism", dump1 == dump2);
    } catch (const std::exception& e) {
        std::printf("  error: %s\n", e.what());
        report("group-soundness", false);
        report("group-determinism", false);
    }

    try {
        InjectConfig i{"odo-2-3", "1/3", "2/3", 3, 2, (dir / "i").string(), {}};
        report("inject-third-to-half", run_inject(i) == 0);
    } catch (const std::exception& e) {
        std::printf("  error: %s\n", e.what());
        report("inject-third-to-half", false);
    }

    try {
        OrbitInjection th1 = tower_embed(parse_descriptor("odo-2-3"), 2, 3);
        OrbitInjection th2 = tower_embed_at(parse_descriptor("odo-2-3"), 2, 1, 3);
        BoundedEquivalenceResult r = build_bounded_equivalence(th1, th2);
        bool ok = r.witness_terms == 18 && r.defects == 2 && r.cancellation_ok &&
                  verify_injection(r.map, 2).certified();
        report("equiv-bounded", ok);
    } catch (const std::exception& e) {
        std::printf("  error: %s\n", e.what());
        report("equiv-bounded", false);
    }

    try {
        EquivConfig e{"odo-2-3", 2, 5, 1, "pair", 2, 3,
                      {"1/12", "1/13", "1/24", "1/25", "1/48", "1/49", "1/96"},
                      {"8", "16", "32", "64", "80"},
                      "1@5", (dir / "e").string(), {}};
        bool ok = run_equiv(e) == 0;
        std::ifstream jf(dir / "e" / "equiv.json");
        json ej = json::parse(jf);
        ok = ok && ej["discontinuities"] == json::array({{0, 1}});
        report("equiv-exhaustion", ok);
    } catch (const std::exception& e) {
        std::printf("  error: %s\n", e.what());
        report("equiv-exhaustion", false);
    }

    try {
        ConvolutionConfig c{"odo-2-3", 2, 3, 1, (dir / "c").string(), {}};
        report("convolution-laws", run_convolution(c) == 0);
    } catch (const std::exception& e) {
        std::printf("  error: %s\n", e.what());
        report("convolution-laws", false);
    }

    std::printf("selftest: %s\n", failed == 0 ? "all pass" : "FAILURES");
    return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"exact constructions over odometer systems: tilings, ordered cohomology, "
                 "orbit injections and equivalences"};
    app.require_subcommand(1);

    std::map<std::string, std::string> defs;
    app.add_option("--define", [&defs](const std::vector<std::string>& vals) {
           for (const auto& v : vals) {
               auto eq = v.find('=');
               if (eq == std::string::npos) return false;
               defs[v.substr(0, eq)] = v.substr(eq + 1);
           }
           return true;
       },
       "name a system: --define pair=odo-2-3")
        ->take_all()
        ->expected(-1);

    PartitionConfig pc;
    auto* partition = app.add_subcommand("partition", "build a certified tiling partition");
    partition->add_option("--system", pc.system, "system descriptor or defined name")->required();
    partition->add_option("--center", pc.center, "clopen center set, e.g. \"{0,1}@3\"")->required();
    partition->add_option("--M", pc.M, "partition scale")->required();
    partition->add_option("--anchor", pc.anchor, "anchor point \"r0,..@K\" (default: first center cell)");
    partition->add_option("--out", pc.out, "output directory (default $ZCANTOR_OUT or .)");

    GroupConfig gc;
    auto* group = app.add_subcommand("group", "order tests against the exact comparison, plus the group-law suite");
    group->add_option("--system", gc.system)->required();
    group->add_option("--depth", gc.depth, "depth for sampled functions");
    group->add_option("--M", gc.sweep, "partition scales to sweep (default 8 16 32)");
    group->add_option("--seed", gc.seed, "rng seed; fixed seed makes the report byte-identical");
    group->add_option("--pairs", gc.pairs, "random pairs to test");
    group->add_option("--samples", gc.samples, "samples for the law suite");
    group->add_option("--out", gc.out);

    InjectConfig ic;
    auto* inject = app.add_subcommand("inject", "build an injection from a strict density comparison");
    inject->add_option("--system", ic.system)->required();
    inject->add_option("--from", ic.from, "source density a/b (columns of the height-b tower)");
    inject->add_option("--to", ic.to, "receiving density c/b, a < c");
    inject->add_option("--depth", ic.depth, "source depth");
    inject->add_option("--window", ic.window, "verification window");
    inject->add_option("--out", ic.out);

    EquivConfig ec;
    auto* equiv = app.add_subcommand("equiv", "orbit equivalence between two equal-density tower embeds");
    equiv->add_option("--system", ec.system)->required();
    equiv->add_option("--m", ec.m, "tower height");
    equiv->add_option("--depth", ec.depth, "source depth");
    equiv->add_option("--offset", ec.offset, "label offset of the partner embed");
    equiv->add_option("--partner", ec.partner, "partner image: offset | pair")
        ->check(CLI::IsMember({"offset", "pair"}));
    equiv->add_option("--window", ec.window, "verification window");
    equiv->add_option("--rounds", ec.rounds, "exhaustion rounds (0 = bounded pipeline)");
    equiv->add_option("--eps", ec.eps, "schedule scales, 2*rounds+1 of them");
    equiv->add_option("--sweep", ec.sweep, "partition scales for the exchanges");
    equiv->add_option("--designate", ec.designate, "designated point \"r0,..@K\" for the exhaustion");
    equiv->add_option("--out", ec.out);

    ConvolutionConfig cc;
    auto* convolution = app.add_subcommand("convolution", "projection-family laws over a displacement window");
    convolution->add_option("--system", cc.system)->required();
    convolution->add_option("--m", cc.m, "tower height");
    convolution->add_option("--depth", cc.depth, "source depth");
    convolution->add_option("--radius", cc.radius, "sup-norm radius of the displacement window");
    convolution->add_option("--out", cc.out);

    std::string st_out;
    auto* selftest = app.add_subcommand("selftest", "run the built-in verification suite");
    selftest->add_option("--out", st_out, "directory for the produced artifacts");

    CLI11_PARSE(app, argc, argv);

    try {
        if (partition->parsed()) {
            pc.defs = defs;
            return run_partition(pc);
        }
        if (group->parsed()) {
            gc.defs = defs;
            return run_group(gc);
        }
        if (inject->parsed()) {
            ic.defs = defs;
            return run_inject(ic);
        }
        if (equiv->parsed()) {
            ec.defs = defs;
            return run_equiv(ec);
        }
        if (convolution->parsed()) {
            cc.defs = defs;
            return run_convolution(cc);
        }
        if (selftest->parsed()) return run_selftest(st_out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "zcantor: %s\n", e.what());
        return 2;
    }
    return 2;
}
