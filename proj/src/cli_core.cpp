// SPDX-License-Identifier: Apache-2.0
#include "osclab/cli_core.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <json.hpp>
#include <sstream>

#include "osclab/flat_sharp.hpp"
#include "osclab/stationary.hpp"

namespace osclab::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// config

namespace {

struct Reader {
    std::string origin;

    [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const {
        const auto m = at.Mark();
        throw ConfigError(origin + ":" + (m.is_null() ? std::string("?") : std::to_string(m.line + 1)) + ": " + msg);
    }

    template <class T>
    T get(const YAML::Node& n, const std::string& key) const {
        if (!n.IsScalar()) fail(n, "'" + key + "' must be a scalar");
        try {
            return n.as<T>();
        } catch (const YAML::Exception&) {
            fail(n, "'" + key + "' has an invalid value '" + n.Scalar() + "'");
        }
    }

    template <class T>
    std::vector<T> list(const YAML::Node& n, const std::string& key) const {
        if (!n.IsSequence()) fail(n, "'" + key + "' must be a list");
        std::vector<T> out;
        for (const auto& e : n) out.push_back(get<T>(e, key));
        return out;
    }

    using Handler = std::function<void(const YAML::Node&)>;

    void section(const YAML::Node& n, const std::string& name, const std::map<std::string, Handler>& keys) const {
        if (!n.IsMap()) fail(n, "section '" + name + "' must be a map of keys");
        for (auto it = n.begin(); it != n.end(); ++it) {
            const auto key = it->first.as<std::string>();
            auto h = keys.find(key);
            if (h == keys.end()) fail(it->first, "unknown key '" + name + "." + key + "'");
            h->second(it->second);
        }
    }
};

PhaseSystem preset_system(const std::string& name) {
    if (name == "linear") return linear_system();
    if (name == "curved") return curved_system();
    if (name == "linear-skew") return exact_solution_system();
    throw ConfigError("unknown system preset '" + name + "'");
}

InputFamily parse_input_family(const Reader& r, const YAML::Node& n) {
    const auto s = r.get<std::string>(n, "decay.family");
    for (auto f : {InputFamily::BandlimitedRandom, InputFamily::Resonant, InputFamily::Chirp})
        if (s == family_name(f)) return f;
    r.fail(n, "'decay.family' must be bandlimited_random, resonant or chirp");
}

}  // namespace

LabConfig parse_config(const std::string& text, const std::string& origin) {
    LabConfig c;
    c.text = text;
    c.origin = origin;
    c.system = curved_system();
    Reader r{origin};
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(origin + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    if (root.IsNull()) return c;
    if (!root.IsMap()) r.fail(root, "top level must be a map of sections");

    std::string preset = "curved";
    std::optional<YAML::Node> phases, ball, ladder_node;
    YAML::Node preset_node;
    for (auto it = root.begin(); it != root.end(); ++it) {
        const auto sec = it->first.as<std::string>();
        const YAML::Node n = it->second;
        if (sec == "system") {
            r.section(n, sec, {{"preset", [&](const YAML::Node& v) {
                                   preset = r.get<std::string>(v, "system.preset");
                                   preset_node = v;
                               }},
                               {"phases", [&](const YAML::Node& v) { phases = v; }},
                               {"ball", [&](const YAML::Node& v) { ball = v; }}});
        } else if (sec == "ladder") {
            ladder_node = n;
            auto& L = c.ladder;
            auto num = [&](double& dst, const char* key) { return std::pair<const std::string, Reader::Handler>{key, [&, key](const YAML::Node& v) { dst = r.get<double>(v, std::string("ladder.") + key); }}; };
            r.section(n, sec,
                      {num(L.gamma, "gamma"), num(L.tau0, "tau0"), num(L.rho0, "rho0"), num(L.rho, "rho"), num(L.delta0, "delta0"),
                       num(L.delta1, "delta1"), num(L.delta3, "delta3"), num(L.delta4, "delta4"), num(L.c_delta3, "c_delta3"),
                       {"delta_star", [&](const YAML::Node& v) {
                            const auto d = r.list<double>(v, "ladder.delta_star");
                            if (d.size() != 4) r.fail(v, "'ladder.delta_star' needs 4 entries");
                            std::copy(d.begin(), d.end(), L.delta_star.begin());
                        }},
                       {"delta2", [&](const YAML::Node& v) { L.delta2 = r.get<double>(v, "ladder.delta2"); }},
                       {"delta5", [&](const YAML::Node& v) { L.delta5 = r.get<double>(v, "ladder.delta5"); }}});
        } else if (sec == "hypotheses") {
            auto& H = c.hypotheses;
            r.section(n, sec,
                      {{"grid_resolution", [&](const YAML::Node& v) { H.grid_resolution = r.get<int>(v, "hypotheses.grid_resolution"); }},
                       {"tolerance", [&](const YAML::Node& v) { H.tolerance = r.get<double>(v, "hypotheses.tolerance"); }},
                       {"max_degree", [&](const YAML::Node& v) { H.max_degree = r.get<int>(v, "hypotheses.max_degree"); }},
                       {"aux1_max_degree", [&](const YAML::Node& v) { H.aux1_max_degree = r.get<int>(v, "hypotheses.aux1_max_degree"); }},
                       {"aux3_degree", [&](const YAML::Node& v) { H.aux3_degree = r.get<int>(v, "hypotheses.aux3_degree"); }},
                       {"tau_grid", [&](const YAML::Node& v) { H.tau_grid = r.list<double>(v, "hypotheses.tau_grid"); }}});
        } else if (sec == "decay") {
            auto& D = c.decay;
            r.section(n, sec,
                      {{"family", [&](const YAML::Node& v) { D.family = parse_input_family(r, v); }},
                       {"lambdas", [&](const YAML::Node& v) { D.lambdas = r.list<double>(v, "decay.lambdas"); }},
                       {"oversampling", [&](const YAML::Node& v) { D.oversampling = r.get<double>(v, "decay.oversampling"); }},
                       {"refine", [&](const YAML::Node& v) { D.refine = r.get<bool>(v, "decay.refine"); }}});
        } else if (sec == "decompose") {
            auto& D = c.decompose;
            r.section(n, sec,
                      {{"lambda", [&](const YAML::Node& v) { D.lambda = r.get<double>(v, "decompose.lambda"); }},
                       {"R", [&](const YAML::Node& v) { D.R = r.get<double>(v, "decompose.R"); }},
                       {"delta", [&](const YAML::Node& v) { D.delta = r.get<double>(v, "decompose.delta"); }},
                       {"band", [&](const YAML::Node& v) {
                            const auto b = r.get<std::string>(v, "decompose.band");
                            if (b == "lowpass") D.band = Band::Lowpass;
                            else if (b == "annulus") D.band = Band::Annulus;
                            else r.fail(v, "'decompose.band' must be lowpass or annulus");
                        }},
                       {"support", [&](const YAML::Node& v) {
                            const auto s = r.list<double>(v, "decompose.support");
                            if (s.size() != 2 || !(s[1] > s[0])) r.fail(v, "'decompose.support' must be [lo, hi] with lo < hi");
                            D.support = {s[0], s[1]};
                        }}});
        } else if (sec == "sublevel") {
            auto& S = c.sublevel;
            r.section(n, sec,
                      {{"expr", [&](const YAML::Node& v) {
                            const auto e = r.get<std::string>(v, "sublevel.expr");
                            bool ok = false;
                            for (auto x : {SublevelExpr::VectorSum, SublevelExpr::CoeffSum, SublevelExpr::QuadSum})
                                if (e == expr_name(x)) {
                                    S.expr = x;
                                    ok = true;
                                }
                            if (!ok) r.fail(v, "'sublevel.expr' is not a known expression");
                        }},
                       {"k_lo", [&](const YAML::Node& v) { S.k_lo = r.get<int>(v, "sublevel.k_lo"); }},
                       {"k_hi", [&](const YAML::Node& v) { S.k_hi = r.get<int>(v, "sublevel.k_hi"); }},
                       {"grid", [&](const YAML::Node& v) { S.grid = r.get<int>(v, "sublevel.grid"); }},
                       {"bandwidth", [&](const YAML::Node& v) { S.bandwidth = r.get<double>(v, "sublevel.bandwidth"); }}});
        } else if (sec == "stationary") {
            auto& S = c.stationary;
            r.section(n, sec,
                      {{"lambdas", [&](const YAML::Node& v) { S.lambdas = r.list<double>(v, "stationary.lambdas"); }},
                       {"resolution", [&](const YAML::Node& v) { S.resolution = r.get<int>(v, "stationary.resolution"); }}});
        } else if (sec == "trilinear") {
            auto& T = c.trilinear;
            r.section(n, sec,
                      {{"sigmas", [&](const YAML::Node& v) { T.sigmas = r.list<double>(v, "trilinear.sigmas"); }},
                       {"r", [&](const YAML::Node& v) { T.r = r.list<double>(v, "trilinear.r"); }},
                       {"family", [&](const YAML::Node& v) {
                            T.family = r.get<std::string>(v, "trilinear.family");
                            if (T.family != "auto" && T.family != "worst_random" && T.family != "chirp_pair" && T.family != "witness")
                                r.fail(v, "'trilinear.family' must be auto, worst_random, chirp_pair or witness");
                        }}});
        } else if (sec == "feq") {
            auto& F = c.feq;
            r.section(n, sec,
                      {{"points", [&](const YAML::Node& v) {
                            if (!v.IsSequence()) r.fail(v, "'feq.points' must be a list of [x1, x2, s]");
                            F.points.clear();
                            for (const auto& p : v) {
                                const auto q = r.list<double>(p, "feq.points");
                                if (q.size() != 3) r.fail(p, "'feq.points' entries must be [x1, x2, s]");
                                F.points.push_back({q[0], q[1], q[2]});
                            }
                        }},
                       {"loop_scale", [&](const YAML::Node& v) { F.loop_scale = r.get<double>(v, "feq.loop_scale"); }},
                       {"step", [&](const YAML::Node& v) { F.step = r.get<double>(v, "feq.step"); }},
                       {"tolerance", [&](const YAML::Node& v) { F.tolerance = r.get<double>(v, "feq.tolerance"); }}});
        } else if (sec == "run") {
            r.section(n, sec,
                      {{"seeds", [&](const YAML::Node& v) {
                            c.seeds.clear();
                            for (auto s : r.list<long long>(v, "run.seeds")) {
                                if (s < 0) r.fail(v, "'run.seeds' must be nonnegative");
                                c.seeds.push_back(static_cast<std::uint64_t>(s));
                            }
                        }},
                       {"threads", [&](const YAML::Node& v) {
                            const int t = r.get<int>(v, "run.threads");
                            if (t < 1) r.fail(v, "'run.threads' must be at least 1");
                            c.threads = static_cast<unsigned>(t);
                        }}});
        } else {
            r.fail(it->first, "unknown section '" + sec + "'");
        }
    }

    // assemble the phase system
    try {
        c.system = preset_system(preset);
    } catch (const ConfigError& e) {
        r.fail(preset_node, e.what());
    }
    if (phases) {
        const YAML::Node& ph = *phases;
        if (!ph.IsSequence() || ph.size() != 4) r.fail(ph, "'system.phases' needs 4 entries");
        std::array<BivariatePolynomial, 4> polys;
        for (std::size_t j = 0; j < 4; ++j) {
            if (!ph[j].IsSequence()) r.fail(ph[j], "'system.phases' entries are lists of [i, j, coefficient]");
            for (const auto& term : ph[j]) {
                if (!term.IsSequence() || term.size() != 3) r.fail(term, "'system.phases' terms must be [i, j, coefficient]");
                const int a = r.get<int>(term[0], "system.phases"), b = r.get<int>(term[1], "system.phases");
                if (a < 0 || b < 0) r.fail(term, "'system.phases' exponents must be nonnegative");
                polys[j].add_term(a, b, r.get<double>(term[2], "system.phases"));
            }
        }
        c.system = make_system(polys, c.system.ball, "custom");
    }
    if (ball) {
        Ball b = c.system.ball;
        r.section(*ball, "system.ball",
                  {{"center", [&](const YAML::Node& v) {
                        const auto q = r.list<double>(v, "system.ball.center");
                        if (q.size() != 2) r.fail(v, "'system.ball.center' must be [x1, x2]");
                        b.center = {q[0], q[1]};
                    }},
                   {"radius", [&](const YAML::Node& v) { b.radius = r.get<double>(v, "system.ball.radius"); }},
                   {"outer_radius", [&](const YAML::Node& v) { b.outer_radius = r.get<double>(v, "system.ball.outer_radius"); }}});
        try {
            b.validate();
        } catch (const ConfigError& e) {
            r.fail(*ball, e.what());
        }
        std::array<BivariatePolynomial, 4> polys;
        for (int j = 0; j < 4; ++j) polys[static_cast<std::size_t>(j)] = c.system.phases[static_cast<std::size_t>(j)].poly();
        c.system = make_system(polys, b, c.system.name);
    }
    try {
        c.ladder.validate();
    } catch (const ConfigError& e) {
        if (ladder_node) r.fail(*ladder_node, e.what());
        throw;
    }
    return c;
}

LabConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw GuardError("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    std::string item;
    auto num = [&](const std::string& t) {
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(t, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != t.size() || t.empty() || t[0] == '-') throw ConfigError("--seeds: '" + t + "' is not a seed");
        return static_cast<std::uint64_t>(v);
    };
    while (std::getline(ss, item, ',')) {
        const auto dash = item.find('-');
        if (dash == std::string::npos) {
            out.push_back(num(item));
        } else {
            const auto a = num(item.substr(0, dash)), b = num(item.substr(dash + 1));
            if (b < a) throw ConfigError("--seeds: empty range '" + item + "'");
            for (auto v = a; v <= b; ++v) out.push_back(v);
        }
    }
    if (out.empty()) throw ConfigError("--seeds: empty list");
    return out;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

fs::path default_out(const std::string& command) {
    const char* root = std::getenv(kOutRootVariable);
    return (root && *root ? fs::path(root) : fs::path("runs")) / command;
}

// ---------------------------------------------------------------------------
// experiments

namespace {

class Csv {
public:
    Csv(const fs::path& p, const std::vector<std::string>& header) : out_(p, std::ios::binary) {
        if (!out_) throw GuardError("cannot write " + p.string());
        row(header);
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

std::string num(double v) { return format_double(v); }
std::string num(long long v) { return std::to_string(v); }
std::string num(std::size_t v) { return std::to_string(v); }

void write_json(const fs::path& p, const json& j) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw GuardError("cannot write " + p.string());
    out << j.dump(2) << '\n';
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct Outcome {
    std::string csv;
    json summary;
    int exit_code = 0;
};

json ladder_json(const ParameterLadder& p) {
    json j{{"gamma", p.gamma}, {"tau0", p.tau0}, {"rho0", p.rho0}, {"rho", p.rho}, {"delta0", p.delta0},
           {"delta1", p.delta1}, {"delta3", p.delta3}, {"delta4", p.delta4}, {"delta_star", p.delta_star}, {"c_delta3", p.c_delta3}};
    j["delta2"] = p.delta2 ? json(*p.delta2) : json("determined, not chosen");
    j["delta5"] = p.delta5 ? json(*p.delta5) : json("determined, not chosen");
    return j;
}

Outcome cmd_check_hypotheses(const LabConfig& c, const fs::path& out) {
    const auto rep = check_hypotheses(c.system, c.hypotheses);
    Csv csv(out / "hypotheses.csv", {"check", "value", "pass"});
    csv.row({"transversality_margin", num(rep.transversality_margin), rep.transversal() ? "1" : "0"});
    csv.row({"aux2_margin", num(rep.aux2_margin), rep.aux2_ok() ? "1" : "0"});
    for (std::size_t d = 0; d < rep.resonance_sigma_min.size(); ++d)
        csv.row({"resonance_sigma_min_degree_" + std::to_string(d + 1), num(rep.resonance_sigma_min[d]), rep.resonance_sigma_min[d] > rep.tolerance ? "1" : "0"});
    csv.row({"aux1_sigma_min", num(rep.aux1_sigma_min), rep.aux1_ok() ? "1" : "0"});
    for (const auto& [tau, res] : rep.aux3_residuals) csv.row({"aux3_residual_tau_" + num(tau), num(res), res > rep.tolerance ? "1" : "0"});
    json s{{"system", c.system.name},
           {"tolerance", rep.tolerance},
           {"transversality_margin", rep.transversality_margin},
           {"aux2_margin", rep.aux2_margin},
           {"resonance_sigma_min", rep.resonance_sigma_min},
           {"aux1_sigma_min", rep.aux1_sigma_min},
           {"resonant", rep.resonant()},
           {"all_margins_positive", rep.transversal() && rep.aux2_ok() && !rep.resonant() && rep.aux1_ok() && rep.aux3_ok()}};
    json aux3 = json::array();
    for (const auto& [tau, res] : rep.aux3_residuals) aux3.push_back({{"tau", tau}, {"residual", res}});
    s["aux3_residuals"] = aux3;
    return {"hypotheses.csv", s, 0};
}

Outcome cmd_decay_sweep(const LabConfig& c, const fs::path& out) {
    SweepOptions o;
    o.oversampling = c.decay.oversampling;
    o.refine = c.decay.refine;
    const auto sw = decay_sweep(c.system, c.decay.family, c.decay.lambdas, c.seeds, o);
    Csv csv(out / "decay.csv", {"lambda", "seed", "re_T", "im_T", "abs_T", "grid_n", "refinement_delta"});
    for (const auto& r : sw.rows)
        csv.row({num(r.lambda), num(r.seed), num(r.value.real()), num(r.value.imag()), num(std::abs(r.value)), num(static_cast<long long>(r.grid_n)),
                 num(r.refinement_delta)});
    json s{{"system", c.system.name}, {"family", family_name(c.decay.family)}, {"rows", sw.rows.size()}};
    if (sw.fit_error.empty()) {
        s["exponent"] = sw.fit.exponent;
        s["prefactor"] = sw.fit.prefactor;
        s["r2"] = sw.fit.r2;
    } else {
        s["fit_error"] = sw.fit_error;
    }
    return {"decay.csv", s, sw.fit_error.empty() ? 0 : 3};
}

Outcome cmd_decompose(const LabConfig& c, const fs::path& out) {
    const auto& d = c.decompose;
    Csv csv(out / "decompose.csv", {"seed", "piece", "alpha", "shift", "energy"});
    json per = json::array();
    for (auto seed : c.seeds) {
        const auto f = synth_bandlimited(d.lambda, d.band, seed, d.support);
        const auto parts = decompose(f, d.R, d.delta);
        for (std::size_t i = 0; i < parts.sharp.size(); ++i)
            csv.row({num(seed), num(i), num(parts.sharp[i].alpha), num(static_cast<long long>(parts.sharp[i].shift)), num(parts.sharp[i].energy)});
        double err = 0.0;
        for (int i = 0; i < 2048; ++i) {
            const double y = d.support.lo + d.support.length() * (i + 0.5) / 2048.0;
            err = std::max(err, std::abs(f(y) - parts.sharp_at(y) - parts.flat(y)));
        }
        per.push_back({{"seed", seed}, {"M", parts.M()}, {"budget", parts.budget()}, {"flat_norm", parts.flat_norm()}, {"reconstruction_error", err}});
    }
    json s{{"lambda", d.lambda}, {"R", d.R}, {"delta", d.delta}, {"band", band_name(d.band)}, {"seeds", per}};
    return {"decompose.csv", s, 0};
}

Outcome cmd_sublevel(const LabConfig& c, const fs::path& out) {
    const auto& S = c.sublevel;
    const auto eps = default_eps_grid(S.k_lo, S.k_hi);
    const auto region = Region2D::of(c.system);
    Csv csv(out / "sublevel.csv", {"eps", "fraction", "grid_n", "region"});
    json fits = json::array();
    int code = 0;
    for (auto seed : c.seeds) {
        ProfileTuple F;
        for (int j = 0; j < 4; ++j) {
            auto f = std::make_shared<FourierFunction1D>(
                synth_bandlimited(S.bandwidth, Band::Lowpass, derive_seed(seed, static_cast<std::uint64_t>(j)), phase_image(c.system, j)));
            F[static_cast<std::size_t>(j)] = [f](double y) { return (*f)(y); };
        }
        const auto est = sublevel_series_2d(c.system, S.expr, F, eps, region, S.grid);
        const std::string tag = est.region + "#seed" + std::to_string(seed);
        for (std::size_t i = 0; i < est.eps.size(); ++i) csv.row({num(est.eps[i]), num(est.fraction[i]), num(static_cast<long long>(est.grid_n)), tag});
        json fj{{"seed", seed}, {"region", tag}};
        try {
            const auto fit = fit_power_law(est);
            fj["tau"] = fit.tau;
            fj["prefactor"] = fit.prefactor;
            fj["r_squared"] = fit.r_squared;
        } catch (const FitRefused& e) {
            fj["fit_error"] = e.what();
            code = 3;
        }
        fits.push_back(fj);
    }
    json s{{"system", c.system.name}, {"expr", expr_name(S.expr)}, {"grid_n", S.grid}, {"fits", fits}};
    return {"sublevel.csv", s, code};
}

Outcome cmd_stationary(const LabConfig& c, const fs::path& out) {
    const auto& p = c.ladder;
    Csv csv(out / "census.csv", {"lambda", "gamma", "tau0", "rho", "n_interacting", "n_stationary", "bigM", "trivial_bound", "ratio"});
    // frequency functions tracking a chirp in phase 1, weighted by the kernel at the ball centre
    // so that sum k_j grad phi_j vanishes there
    const auto k = kernel_field(c.system, c.system.ball.center);
    json rows = json::array();
    for (double lam : c.stationary.lambdas) {
        const auto t = enumerate_interacting(c.system, lam, p.gamma, c.stationary.resolution);
        const auto alpha = random_alpha(t, c.seeds.front());
        const auto stat = stationary_subset(t, alpha, p);
        const double lg = std::pow(lam, p.gamma);
        const double beta = 4.0 * std::pow(lam, 2.0 * p.gamma + 0.1);
        FrequencyFunction kf = [=](int j, long, double s) {
            const double k1 = 2.0 * beta * s / (kPi * lg);
            return k1 * k[static_cast<std::size_t>(j)] / k[0];
        };
        BigMOptions o;
        o.floor = FloorPolicy::Exclude;
        const auto census = bigM_measure(c.system, t, kf, chirp(beta, phase_image(c.system, 0)), p, o);
        csv.row({num(lam), num(p.gamma), num(p.tau0), num(p.rho), num(strict_tuples(t).size()), num(stat.size()), num(census.measure),
                 num(census.trivial_bound), num(census.ratio)});
        rows.push_back({{"lambda", lam}, {"strict", t.strict_count}, {"slack", t.slack_count}, {"ambiguity", t.ambiguity}, {"stationary", stat.size()},
                        {"bigM", census.measure}, {"ratio", census.ratio}});
    }
    json s{{"system", c.system.name}, {"ladder", ladder_json(p)}, {"seed", c.seeds.front()}, {"lambdas", rows}};
    return {"census.csv", s, 0};
}

Outcome cmd_trilinear(const LabConfig& c, const fs::path& out) {
    Csv csv(out / "trilinear.csv", {"sigma", "r", "seed", "value"});
    json per = json::array();
    int code = 0;
    for (double sigma : c.trilinear.sigmas) {
        TrilinearFamily fam = TrilinearFamily::WorstRandom;
        const auto& name = c.trilinear.family;
        if (name == "witness" || (name == "auto" && (sigma == 0.0 || sigma == 1.0))) fam = TrilinearFamily::Witness;
        else if (name == "chirp_pair") fam = TrilinearFamily::ChirpPair;
        const auto seeds = fam == TrilinearFamily::Witness ? std::vector<std::uint64_t>{c.seeds.front()} : c.seeds;
        json sj{{"sigma", sigma}, {"family", family_name(fam)}};
        try {
            const auto sw = sigma_decay_sweep(sigma, c.trilinear.r, fam, seeds);
            for (const auto& row : sw.rows) csv.row({num(row.sigma), num(row.r), num(row.seed), num(row.value)});
            sj["delta2"] = sw.delta2;
            sj["r2"] = sw.r2;
            sj["refinement"] = sw.refinement;
            sj["worst"] = sw.worst;
        } catch (const FitRefused& e) {
            sj["fit_error"] = e.what();
            code = 3;
        }
        per.push_back(sj);
    }
    json s{{"r", c.trilinear.r}, {"sweeps", per}};
    return {"trilinear.csv", s, code};
}

Outcome cmd_feq(const LabConfig& c, const fs::path& out) {
    const auto& F = c.feq;
    Csv csv(out / "feq.csv", {"x1", "x2", "s", "loop_scale", "step", "holonomy", "closure"});
    double worst = 0.0;
    for (const auto& p : F.points) {
        const auto h = holonomy_residual(c.system, p, F.loop_scale, F.step);
        csv.row({num(p.x1), num(p.x2), num(p.s), num(F.loop_scale), num(F.step), num(h.residual), num(h.closure)});
        worst = std::max(worst, h.residual);
    }
    json s{{"system", c.system.name},
           {"kernel_margin", kernel_component_margin(c.system, c.system.ball.center, c.system.ball.radius, 21)},
           {"max_holonomy", worst},
           {"tolerance", F.tolerance},
           {"existence_regime", worst <= F.tolerance}};
    return {"feq.csv", s, 0};
}

Outcome cmd_report(const fs::path& out) {
    json all = json::object();
    std::vector<fs::path> dirs;
    if (fs::exists(out))
        for (const auto& e : fs::directory_iterator(out))
            if (e.is_directory() && fs::exists(e.path() / "summary.json")) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    Csv csv(out / "report.csv", {"experiment", "key", "value"});
    for (const auto& d : dirs) {
        std::ifstream in(d / "summary.json");
        json j = json::parse(in, nullptr, false);
        if (j.is_discarded()) throw GuardError("unreadable summary in " + d.string());
        const auto name = d.filename().string();
        for (auto it = j.begin(); it != j.end(); ++it)
            if (it->is_primitive()) csv.row({name, it.key(), it->is_string() ? it->get<std::string>() : it->dump()});
        all[name] = j;
    }
    return {"report.csv", json{{"experiments", all}}, 0};
}

}  // namespace

RunResult run_command(const RunRequest& req) {
    const auto& names = command_names();
    if (std::find(names.begin(), names.end(), req.command) == names.end()) throw ConfigError("unknown subcommand '" + req.command + "'");
    fs::create_directories(req.out);
    set_worker_threads(req.config.threads);
    const std::string started = utc_now();
    Outcome o;
    const auto& c = req.config;
    if (req.command == "check-hypotheses") o = cmd_check_hypotheses(c, req.out);
    else if (req.command == "decay-sweep") o = cmd_decay_sweep(c, req.out);
    else if (req.command == "decompose") o = cmd_decompose(c, req.out);
    else if (req.command == "sublevel") o = cmd_sublevel(c, req.out);
    else if (req.command == "stationary") o = cmd_stationary(c, req.out);
    else if (req.command == "trilinear") o = cmd_trilinear(c, req.out);
    else if (req.command == "feq") o = cmd_feq(c, req.out);
    else o = cmd_report(req.out);
    o.summary["command"] = req.command;
    write_json(req.out / "summary.json", o.summary);
    json m{{"artifact_version", kArtifactVersion},
           {"command", req.command},
           {"config_digest", sha256_hex(c.text)},
           {"config", c.text},
           {"config_origin", c.origin},
           {"seeds", c.seeds},
           {"threads", c.threads},
           {"started", started},
           {"finished", utc_now()},
           {"exit_code", o.exit_code},
           {"outputs", {{"csv", o.csv}, {"summary", "summary.json"}}}};
    write_json(req.out / "manifest.json", m);
    return {o.exit_code, {o.csv, "summary.json", "manifest.json"}, o.exit_code == 3 ? "a fit was refused; see summary.json" : ""};
}

RunRequest request_from_manifest(const fs::path& manifest, const fs::path& out) {
    std::ifstream in(manifest, std::ios::binary);
    if (!in) throw ConfigError("cannot read manifest " + manifest.string());
    json m = json::parse(in, nullptr, false);
    if (m.is_discarded() || !m.contains("config") || !m.contains("command") || !m.contains("seeds"))
        throw ConfigError("manifest " + manifest.string() + " is missing config, command or seeds");
    const auto text = m["config"].get<std::string>();
    if (m.contains("config_digest") && m["config_digest"].get<std::string>() != sha256_hex(text))
        throw ConfigError("manifest " + manifest.string() + ": config digest does not match the embedded config");
    RunRequest r;
    r.command = m["command"].get<std::string>();
    r.config = parse_config(text, m.value("config_origin", std::string("<manifest>")));
    r.config.seeds = m["seeds"].get<std::vector<std::uint64_t>>();
    r.config.threads = m.value("threads", 1u);
    r.out = out;
    return r;
}

}  // namespace osclab::cli
