// Command-line front end for the clab experiment library.

#include "clab/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct GlobalFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;
    std::string out;
    std::string format;
};

struct CensusFlags {
    std::optional<clab::Int> q, ell;
    std::optional<int> genus, m;
    std::string mode = "plain";
    std::vector<std::string> targets;
};

std::string choose_format(const GlobalFlags& g) {
    if (!g.format.empty()) return g.format;
    if (g.out.size() >= 4 && g.out.substr(g.out.size() - 4) == ".csv") return "csv";
    return "json";
}

nlohmann::json census_raw_from_flags(const CensusFlags& c) {
    nlohmann::json params = nlohmann::json::object();
    if (c.q) params["q"] = *c.q;
    if (c.genus) params["genus"] = *c.genus;
    if (c.ell) params["ell"] = *c.ell;
    params["mode"] = c.mode;
    if (c.m) params["m"] = *c.m;
    nlohmann::json raw = {{"experiment", "census"}, {"params", params}};
    if (!c.targets.empty()) raw["targets"] = c.targets;
    return raw;
}

int run_experiment(const std::string& kind, const GlobalFlags& g, const CensusFlags* census) {
    nlohmann::json raw;
    if (!g.config.empty()) {
        raw = clab::read_json_file(g.config);
        if (!raw.is_object()) throw clab::Error(clab::Errc::ConfigError, "config must be a JSON object");
        if (census) {
            auto flags = census_raw_from_flags(*census);
            for (auto& [k, v] : flags["params"].items())
                if (k != "mode" || census->mode != "plain") raw["params"][k] = v;
            if (flags.contains("targets")) raw["targets"] = flags["targets"];
        }
    } else if (census) {
        raw = census_raw_from_flags(*census);
    } else {
        throw clab::Error(clab::Errc::ConfigError, kind + " needs --config <path>");
    }
    if (g.seed) raw["seed"] = *g.seed;
    raw["workers"] = g.workers;
    const std::string format = choose_format(g);
    if (format != "json" && format != "csv") throw clab::Error(clab::Errc::ConfigError, "--format must be json or csv");

    auto cfg = clab::make_config(raw, kind);
    auto report = clab::run(cfg);
    const std::string text = format == "csv" ? clab::render_csv(report) : clab::render_json(report);
    if (g.out.empty())
        std::cout << text;
    else
        clab::write_atomically(g.out, text);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"clab: random module and class-group experiments"};
    app.require_subcommand(1);
    GlobalFlags g;
    CensusFlags census;
    std::string replay_path;

    auto add_globals = [&](CLI::App* sub) {
        sub->add_option("--config", g.config, "experiment config (JSON)");
        sub->add_option("--seed", g.seed, "master seed (overrides the config)");
        sub->add_option("--workers", g.workers, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--out", g.out, "output path");
        sub->add_option("--format", g.format, "json or csv");
    };

    const std::vector<std::pair<std::string, std::string>> kinds = {
        {"sample", "sample cokernels from a random matrix model"},
        {"moments", "estimate surjection moments from a random matrix model"},
        {"exact", "enumerate all matrices and tabulate exact cokernel masses"},
        {"gsp-exact", "exact symplectic-coset surjection moments"},
        {"identities", "rectangular-model or torsion-ring mass identities"},
        {"invert-moments", "recover masses from moments by operator inversion"},
    };
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, help] : kinds) {
        subs[name] = app.add_subcommand(name, help);
        add_globals(subs[name]);
    }
    auto* census_cmd = app.add_subcommand("census", "hyperelliptic class-group census");
    add_globals(census_cmd);
    census_cmd->add_option("--q", census.q, "field size (odd prime power)");
    census_cmd->add_option("--genus", census.genus, "curve genus (1 or 2)");
    census_cmd->add_option("--ell", census.ell, "odd prime not dividing q");
    census_cmd->add_option("--mode", census.mode, "plain, twist, module or surjavg")->check(CLI::IsMember({"plain", "twist", "module", "surjavg"}));
    census_cmd->add_option("--m", census.m, "extension degree for module mode");
    census_cmd->add_option("--targets", census.targets, "target partitions such as (1,1)")->delimiter(';');
    auto* replay_cmd = app.add_subcommand("replay", "rerun a report and compare payloads");
    replay_cmd->add_option("report", replay_path, "report JSON")->required();
    replay_cmd->add_option("--workers", g.workers, "worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (replay_cmd->parsed()) {
            clab::replay_check_file(replay_path, g.workers);
            std::cout << "replay ok: " << replay_path << "\n";
            return 0;
        }
        if (census_cmd->parsed()) return run_experiment("census", g, &census);
        for (const auto& [name, sub] : subs)
            if (sub->parsed()) return run_experiment(name, g, nullptr);
    } catch (const clab::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return clab::exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
