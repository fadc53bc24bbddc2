#pragma once
// Experiment configs, dispatch, reports and replay.

#include "clab/census.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace clab {

inline constexpr const char* kVersion = "clab 1.0.0";

/// Process exit code for an error category.
inline int exit_code_for(Errc c) {
    switch (c) {
        case Errc::BudgetExceeded:
        case Errc::EnumerationTooLarge:
        case Errc::GenerationStalled:
        case Errc::Undetermined:
        case Errc::ResidueFieldTooSmall: return 3;
        case Errc::MismatchDetected: return 4;
        default: return 2;
    }
}

struct ExperimentConfig {
    std::string experiment;  // sample, moments, exact, gsp-exact, identities, invert-moments, census
    nlohmann::json raw;      // the config as given, echoed into the report
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

namespace detail {

inline const nlohmann::json& field(const nlohmann::json& j, const std::string& path, const std::string& key) {
    if (!j.contains(key)) throw Error(Errc::ConfigError, "missing field '" + path + key + "'");
    return j.at(key);
}

template <class T>
T get_as(const nlohmann::json& j, const std::string& path, const std::string& key) {
    const auto& v = field(j, path, key);
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(Errc::ConfigError, "field '" + path + key + "' has the wrong type: " + v.dump());
    }
}

template <class T>
T get_or(const nlohmann::json& j, const std::string& path, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    return get_as<T>(j, path, key);
}

inline const nlohmann::json& params_of(const nlohmann::json& raw) {
    static const nlohmann::json empty = nlohmann::json::object();
    if (!raw.contains("params")) return empty;
    if (!raw.at("params").is_object()) throw Error(Errc::ConfigError, "field 'params' must be an object");
    return raw.at("params");
}

inline std::string rational_json(const Rational& r) { return to_string(r); }

}  // namespace detail

/// Parses config text. JSON syntax errors carry line and column.
inline nlohmann::json parse_config_text(const std::string& text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i < std::min(e.byte > 0 ? e.byte - 1 : 0, text.size()); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw Error(Errc::ConfigError, "config parse error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + e.what());
    }
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ConfigError, "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

inline ExperimentConfig make_config(nlohmann::json raw, const std::string& experiment_override = "") {
    if (!raw.is_object()) throw Error(Errc::ConfigError, "config must be a JSON object");
    ExperimentConfig cfg;
    if (!experiment_override.empty()) raw["experiment"] = experiment_override;
    cfg.experiment = detail::get_as<std::string>(raw, "", "experiment");
    static const std::set<std::string> known = {"sample", "moments", "exact", "gsp-exact", "identities", "invert-moments", "census"};
    if (!known.count(cfg.experiment)) throw Error(Errc::ConfigError, "field 'experiment': unknown kind '" + cfg.experiment + "'");
    cfg.seed = detail::get_as<std::uint64_t>(raw, "", "seed");
    cfg.workers = detail::get_or<unsigned>(raw, "", "workers", 1u);
    if (cfg.workers == 0) throw Error(Errc::ConfigError, "field 'workers' must be positive");
    raw.erase("workers");
    cfg.raw = std::move(raw);
    return cfg;
}

/// A finished experiment. `payload` is everything that must be reproducible;
/// runtime and worker count live outside it.
struct Report {
    nlohmann::json payload;
    double runtime_ms = 0;
    unsigned workers = 1;

    nlohmann::json to_json() const {
        nlohmann::json j = payload;
        j["runtime_ms"] = runtime_ms;
        j["execution"] = {{"workers", workers}};
        return j;
    }
};

struct CsvRow {
    std::string label;
    std::string count;
    double mass = 0, predicted = 0, abs_error = 0;
    bool has_predicted = false;
};

inline std::string format_double(double x) { return nlohmann::json(x).dump(); }

inline std::vector<CsvRow> csv_rows(const nlohmann::json& payload) {
    std::vector<CsvRow> rows;
    auto num = [](const nlohmann::json& v) { return v.is_number() ? v.get<double>() : 0.0; };
    if (payload.contains("bins"))
        for (const auto& b : payload["bins"]) {
            CsvRow r;
            r.label = b["label"].get<std::string>();
            r.count = b["count"].is_string() ? b["count"].get<std::string>() : b["count"].dump();
            r.mass = num(b["mass"]);
            r.has_predicted = b.contains("predicted") && b["predicted"].is_number();
            r.predicted = num(b.value("predicted", nlohmann::json()));
            r.abs_error = r.has_predicted ? std::abs(r.mass - r.predicted) : 0.0;
            rows.push_back(r);
        }
    if (payload.contains("moments"))
        for (const auto& m : payload["moments"]) {
            CsvRow r;
            r.label = "moment:" + m["target"].get<std::string>();
            r.count = m.contains("trials") ? m["trials"].dump() : "";
            r.mass = num(m["estimate"]);
            r.has_predicted = m.contains("exact_value");
            r.predicted = num(m.value("exact_value", nlohmann::json()));
            r.abs_error = r.has_predicted ? std::abs(r.mass - r.predicted) : 0.0;
            rows.push_back(r);
        }
    return rows;
}

inline std::string render_csv(const Report& rep) {
    std::ostringstream os;
    os << "label,count,mass,predicted,abs_error\n";
    for (const auto& r : csv_rows(rep.payload)) {
        std::string label = r.label;
        if (label.find_first_of(",\"") != std::string::npos) {
            std::string q = "\"";
            for (char c : label) q += c == '"' ? std::string("\"\"") : std::string(1, c);
            label = q + "\"";
        }
        os << label << ',' << r.count << ',' << format_double(r.mass) << ',' << (r.has_predicted ? format_double(r.predicted) : "") << ','
           << (r.has_predicted ? format_double(r.abs_error) : "") << '\n';
    }
    return os.str();
}

inline std::string render_json(const Report& rep) { return rep.to_json().dump(2) + "\n"; }

/// Writes through a temporary file so a failed run never leaves partial output.
inline void write_atomically(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error(Errc::ConfigError, "cannot write '" + path + "'");
        out << content;
        if (!out) throw Error(Errc::ConfigError, "write failed for '" + path + "'");
    }
    fs::rename(tmp, target);
}

namespace detail {

inline std::vector<std::string> target_texts(const nlohmann::json& raw) {
    if (!raw.contains("targets")) return {};
    const auto& t = raw.at("targets");
    if (!t.is_array()) throw Error(Errc::ConfigError, "field 'targets' must be an array of labels");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!t[i].is_string()) throw Error(Errc::ConfigError, "field 'targets[" + std::to_string(i) + "]' must be a string");
        out.push_back(t[i].get<std::string>());
    }
    return out;
}

inline RingPtr ring_of(const nlohmann::json& raw) { return share_ring(parse_ring_spec(get_as<std::string>(raw, "", "ring"))); }

inline nlohmann::json moment_json(const MomentReport& m) {
    nlohmann::json j = {{"target", m.target}, {"decorated", m.decorated}, {"estimate", m.estimate}, {"stderr", m.stderr_},
                        {"trials", m.trials}, {"overflow_included", m.overflow_included}};
    if (m.exact) {
        j["exact"] = rational_json(*m.exact);
        j["exact_value"] = to_double(*m.exact);
        j["within_5_stderr"] = m.within(5.0);
    }
    return j;
}

inline nlohmann::json dist_bins(const EmpiricalDistribution& d, const std::map<std::string, FiniteModule>& reps, const std::function<std::optional<double>(const FiniteModule&)>& predict) {
    nlohmann::json bins = nlohmann::json::array();
    for (const auto& [label, count] : d.bins) {
        nlohmann::json b = {{"label", label}, {"count", count}, {"mass", d.mass(label)}, {"stderr", d.mass_stderr(label)}};
        auto it = reps.find(label);
        std::optional<double> p;
        if (it != reps.end()) p = predict(it->second);
        b["predicted"] = p ? nlohmann::json(*p) : nlohmann::json();
        bins.push_back(b);
    }
    return bins;
}

inline std::vector<std::string> ambiguity_flags(const std::string& experiment, const nlohmann::json& raw) {
    const std::string model = raw.value("model", std::string());
    const auto& params = params_of(raw);
    const bool rect = model == "rect" || (experiment == "identities" && params.value("identity", std::string("rect")) == "rect");
    if (rect) return {"i=j"};
    return {};
}

/// Shared driver for the sample and moments experiments.
inline nlohmann::json run_sampling(const ExperimentConfig& cfg, bool require_targets) {
    const auto& raw = cfg.raw;
    const auto& params = params_of(raw);
    RingPtr R = ring_of(raw);
    const ModelKind kind = parse_model(get_as<std::string>(raw, "", "model"));
    const auto texts = target_texts(raw);
    if (require_targets && texts.empty()) throw Error(Errc::ConfigError, "field 'targets' must list at least one module");
    std::vector<ModuleTarget> targets;
    for (const auto& t : texts) targets.push_back(parse_target(R, t));

    RunOptions opt;
    opt.trials = get_as<std::uint64_t>(raw, "", "trials");
    opt.seed = cfg.seed;
    opt.workers = cfg.workers;
    opt.enumeration_limit = get_or<std::size_t>(params, "params.", "enumeration_limit", kDefaultEnumerationLimit);
    const double max_overflow = get_or<double>(params, "params.", "max_overflow", 0.01);

    int parameter = 0, extra = 0;
    switch (kind) {
        case ModelKind::Linear: parameter = get_as<int>(params, "params.", "ndim"); break;
        case ModelKind::Rectangular:
            parameter = get_as<int>(params, "params.", "ndim");
            extra = get_or<int>(params, "params.", "d", 0);
            break;
        case ModelKind::Matrix: parameter = get_as<int>(params, "params.", "d"); break;
        case ModelKind::Symplectic: parameter = get_as<int>(params, "params.", "genus"); break;
    }
    if (parameter < 0 || extra < 0) throw Error(Errc::ConfigError, "model dimensions must be non-negative");
    if (kind == ModelKind::Symplectic && R->kind == RingKind::Monogenic) {
        const bool ell_divides = mod(R->modulus_poly.eval(R->frobenius_scalar), R->ell()) == 0;
        for (const auto& t : targets)
            if (t.omega && !ell_divides) throw Error(Errc::PreconditionViolated, "decorated targets need ell | P(q)");
    }

    auto run = run_sampler(R, make_sampler(R, kind, parameter, extra), targets, opt, model_name(kind));
    if (run.dist.overflow_rate() > max_overflow)
        throw Error(Errc::BudgetExceeded, "overflow rate " + format_double(run.dist.overflow_rate()) + " exceeds the configured maximum " + format_double(max_overflow) +
                                              "; raise the ring level");

    nlohmann::json out;
    out["bins"] = dist_bins(run.dist, run.representatives, [&](const FiniteModule& M) -> std::optional<double> {
        switch (kind) {
            case ModelKind::Linear: return predicted_mass(M);
            case ModelKind::Rectangular: return rect_predicted_mass(M, extra);
            default: return std::nullopt;
        }
    });
    out["overflow_rate"] = run.dist.overflow_rate();
    out["overflow_count"] = run.dist.overflow_count;
    out["trials"] = run.dist.total;
    nlohmann::json moments = nlohmann::json::array();
    for (std::size_t t = 0; t < targets.size(); ++t) {
        MomentReport m = summarize_moment(targets[t].text, targets[t].omega.has_value(), run.moments[t]);
        if (!targets[t].omega && (kind == ModelKind::Linear || kind == ModelKind::Rectangular))
            m.exact = exact_moment_finite_N(*R, parameter, targets[t].module, extra);
        moments.push_back(moment_json(m));
    }
    out["moments"] = moments;
    return out;
}

inline nlohmann::json run_exact(const ExperimentConfig& cfg) {
    const auto& params = params_of(cfg.raw);
    RingPtr R = ring_of(cfg.raw);
    const int ndim = get_as<int>(params, "params.", "ndim");
    const std::size_t limit = get_or<std::size_t>(params, "params.", "enumeration_limit", kDefaultEnumerationLimit);
    auto ex = enumerate_exact(R, static_cast<std::size_t>(ndim), limit);
    nlohmann::json bins = nlohmann::json::array();
    std::map<std::string, FiniteModule> reps;
    for (const auto& [label, count] : ex.bins) {
        nlohmann::json b = {{"label", label}, {"count", count.str()}, {"mass", to_double(ex.mass(label))}, {"mass_exact", rational_json(ex.mass(label))}, {"stderr", 0.0}};
        b["predicted"] = R->is_maximal_order() ? nlohmann::json(predicted_mass(module_from_label(R, label))) : nlohmann::json();
        bins.push_back(b);
    }
    nlohmann::json out;
    out["bins"] = bins;
    out["matrices"] = ex.total.str();
    out["overflow_count"] = ex.overflow.str();
    out["overflow_rate"] = ex.total == 0 ? 0.0 : to_double(Rational(ex.overflow, ex.total));
    nlohmann::json moments = nlohmann::json::array();
    for (const auto& t : target_texts(cfg.raw)) {
        auto target = parse_target(R, t);
        Rational exact = exact_moment_finite_N(*R, ndim, target.module);
        moments.push_back({{"target", t}, {"exact", rational_json(exact)}, {"exact_value", to_double(exact)}, {"estimate", to_double(exact)}, {"stderr", 0.0}});
    }
    out["moments"] = moments;
    return out;
}

inline nlohmann::json run_gsp_exact(const ExperimentConfig& cfg) {
    const auto& params = params_of(cfg.raw);
    RingPtr R = ring_of(cfg.raw);
    const int genus = get_as<int>(params, "params.", "genus");
    const std::size_t limit = get_or<std::size_t>(params, "params.", "enumeration_limit", 100'000'000);
    const auto texts = target_texts(cfg.raw);
    if (texts.empty()) throw Error(Errc::ConfigError, "field 'targets' must list at least one decorated module");
    nlohmann::json moments = nlohmann::json::array();
    for (const auto& t : texts) {
        auto target = parse_target(R, t);
        if (!target.omega) target.omega = Vec(wedge_basis(target.module.group).pairs.size(), 0);
        auto res = enumerate_gsp_exact(R, genus, make_decorated(target.module, *target.omega), limit);
        moments.push_back({{"target", t}, {"exact", rational_json(res.moment)}, {"exact_value", to_double(res.moment)}, {"estimate", to_double(res.moment)},
                           {"stderr", 0.0}, {"coset_size", res.coset_size.str()}, {"weighted_count", res.weighted_count.str()}, {"genus", genus}});
    }
    return {{"moments", moments}};
}

inline nlohmann::json run_identities(const ExperimentConfig& cfg) {
    const auto& params = params_of(cfg.raw);
    const std::string which = get_or<std::string>(params, "params.", "identity", "rect");
    if (which == "torsion") {
        const Int p = get_as<Int>(params, "params.", "p");
        const auto A = parse_group_partition(get_as<std::string>(params, "params.", "A"));
        const int bound = get_as<int>(params, "params.", "order_bound");
        auto rep = torsion_ring_identity(p, A, bound, get_or<std::size_t>(params, "params.", "enumeration_limit", kDefaultEnumerationLimit));
        nlohmann::json classes = nlohmann::json::array();
        for (const auto& c : rep.classes) classes.push_back({{"module", c.description}, {"aut", c.aut.str()}, {"weight", rational_json(Rational(BigInt(1), c.aut))}});
        return {{"identity", "torsion"}, {"classes", classes}, {"sum", rational_json(rep.sum)}, {"target", rational_json(rep.target)}, {"holds", rep.sum == rep.target}};
    }
    if (which != "rect") throw Error(Errc::ConfigError, "field 'params.identity' must be 'rect' or 'torsion'");
    RingPtr R = ring_of(cfg.raw);
    RunOptions opt;
    opt.trials = get_as<std::uint64_t>(cfg.raw, "", "trials");
    opt.seed = cfg.seed;
    opt.workers = cfg.workers;
    const int d = get_or<int>(params, "params.", "d", 0);
    const int ndim = get_as<int>(params, "params.", "ndim");
    auto rep = verify_rect_identity(R, d, static_cast<std::size_t>(ndim), opt, get_or<int>(params, "params.", "enumerate_order_exp", 4));
    nlohmann::json bins = nlohmann::json::array();
    for (const auto& r : rep.rows)
        bins.push_back({{"label", r.label}, {"count", ""}, {"mass", r.empirical}, {"predicted", r.predicted}, {"stderr", r.stderr_}});
    nlohmann::json out = {{"identity", "rect"},       {"reading", rep.reading},       {"d", d},
                          {"ndim", ndim},             {"partial_sum", rep.partial_sum}, {"target", rep.target},
                          {"max_z", rep.max_z},       {"overflow_rate", rep.overflow_rate}};
    out["bins"] = bins;
    return out;
}

inline nlohmann::json run_invert(const ExperimentConfig& cfg) {
    const auto& params = params_of(cfg.raw);
    RingPtr R = ring_of(cfg.raw);
    const int bound = get_as<int>(params, "params.", "order_bound");
    const std::size_t limit = get_or<std::size_t>(params, "params.", "enumeration_limit", kDefaultEnumerationLimit);
    auto rep = invert_moment_operator(R, bound, all_ones_moments(R, bound, limit), limit);
    nlohmann::json bins = nlohmann::json::array();
    for (std::size_t i = 0; i < rep.labels.size(); ++i)
        bins.push_back({{"label", rep.labels[i]}, {"count", ""}, {"mass", rep.neumann_masses[i]}, {"mass_exact", rational_json(rep.exact_masses[i])},
                        {"predicted", rep.predicted[i]}, {"stderr", 0.0}});
    return {{"bins", bins}, {"residual", rep.residual}, {"neumann_terms", rep.neumann_terms}, {"sup_error_bottom4", rep.sup_error_bottom4}, {"order_bound", bound}};
}

inline CensusConfig census_config_from(const ExperimentConfig& cfg) {
    const auto& params = params_of(cfg.raw);
    CensusConfig c;
    c.q = get_as<Int>(params, "params.", "q");
    c.genus = get_as<int>(params, "params.", "genus");
    c.ell = get_as<Int>(params, "params.", "ell");
    c.mode = parse_census_mode(get_or<std::string>(params, "params.", "mode", "plain"));
    c.m = get_or<int>(params, "params.", "m", 2);
    c.targets = target_texts(cfg.raw);
    c.seed = cfg.seed;
    c.workers = cfg.workers;
    if (c.mode == CensusMode::SurjAvg && c.targets.empty()) throw Error(Errc::ConfigError, "surjavg mode needs at least one target partition");
    return c;
}

inline nlohmann::json run_census(const ExperimentConfig& cfg) {
    auto rep = census_statistics(census_config_from(cfg));
    nlohmann::json bins = nlohmann::json::array();
    for (const auto& r : rep.rows)
        bins.push_back({{"label", r.label}, {"count", r.count}, {"mass", r.mass}, {"predicted", r.predicted}, {"abs_error", r.abs_error},
                        {"stderr", rep.config.mode == CensusMode::SurjAvg ? 0.0 : std::sqrt(r.mass * (1 - r.mass) / static_cast<double>(std::max<std::uint64_t>(rep.curves, 1)))}});
    return {{"bins", bins},
            {"curves", rep.curves},
            {"mode", census_mode_name(rep.config.mode)},
            {"agreement", rep.agreement},
            {"cohen_lenstra_regime", rep.cl_regime},
            {"exhaustive_fallbacks", rep.exhaustive_fallbacks},
            {"sup_error", rep.sup_error},
            {"overflow_rate", 0.0}};
}

inline int truncation_level(const ExperimentConfig& cfg) {
    if (cfg.experiment == "census") return census_ring(census_config_from(cfg))->level();
    if (cfg.experiment == "identities" && params_of(cfg.raw).value("identity", std::string("rect")) == "torsion") return params_of(cfg.raw).value("order_bound", 0) + 1;
    return ring_of(cfg.raw)->level();
}

}  // namespace detail

/// Runs an experiment. Throws clab::Error on failure.
inline Report run(const ExperimentConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    nlohmann::json results;
    if (cfg.experiment == "sample")
        results = detail::run_sampling(cfg, false);
    else if (cfg.experiment == "moments")
        results = detail::run_sampling(cfg, true);
    else if (cfg.experiment == "exact")
        results = detail::run_exact(cfg);
    else if (cfg.experiment == "gsp-exact")
        results = detail::run_gsp_exact(cfg);
    else if (cfg.experiment == "identities")
        results = detail::run_identities(cfg);
    else if (cfg.experiment == "invert-moments")
        results = detail::run_invert(cfg);
    else
        results = detail::run_census(cfg);

    Report rep;
    rep.workers = cfg.workers;
    rep.payload = results;
    rep.payload["version"] = kVersion;
    rep.payload["experiment"] = cfg.experiment;
    rep.payload["config"] = cfg.raw;
    rep.payload["truncation_level"] = detail::truncation_level(cfg);
    rep.payload["ambiguity_flags"] = detail::ambiguity_flags(cfg.experiment, cfg.raw);
    if (!rep.payload.contains("overflow_rate")) rep.payload["overflow_rate"] = 0.0;
    if (!rep.payload.contains("bins")) rep.payload["bins"] = nlohmann::json::array();
    if (!rep.payload.contains("moments")) rep.payload["moments"] = nlohmann::json::array();
    rep.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

/// Strips the fields that legitimately vary between runs.
inline nlohmann::json replay_payload(nlohmann::json report) {
    report.erase("runtime_ms");
    report.erase("execution");
    return report;
}

/// Reruns the experiment recorded in `report` and compares payloads byte for byte.
/// Throws MismatchDetected naming the first differing field.
inline bool replay_check(const nlohmann::json& report, unsigned workers = 1) {
    if (!report.is_object() || !report.contains("config")) throw Error(Errc::ConfigError, "report has no config echo");
    nlohmann::json raw = report.at("config");
    raw["workers"] = workers;
    const std::string experiment = report.value("experiment", raw.value("experiment", std::string()));
    auto cfg = make_config(raw, experiment);
    const nlohmann::json fresh = replay_payload(run(cfg).to_json());
    const nlohmann::json stored = replay_payload(report);
    if (fresh.dump() == stored.dump()) return true;
    auto patch = nlohmann::json::diff(stored, fresh);
    std::string where = patch.empty() ? std::string("<formatting>") : patch[0].value("path", std::string("?"));
    throw Error(Errc::MismatchDetected, "replay mismatch at " + where);
}

inline bool replay_check_file(const std::string& path, unsigned workers = 1) { return replay_check(read_json_file(path), workers); }

}  // namespace clab
