#include "clab/experiment.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

using namespace clab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json moments_config() {
    return json::parse(R"cfg({"experiment": "moments", "ring": "ell=3;level=5;P=-1,1;q=2", "model": "linear",
                           "params": {"ndim": 2}, "targets": ["(1)"], "trials": 4000, "seed": 11})cfg");
}

std::optional<Errc> error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

fs::path scratch(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "clab_cli_tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

int run_cli(const std::string& args) {
    const std::string cmd = std::string(CLAB_BINARY) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, MissingAndMistypedFieldsAreNamed) {
    json raw = moments_config();
    raw.erase("seed");
    EXPECT_EQ(error_of([&] { make_config(raw); }), Errc::ConfigError);
    EXPECT_NE(message_of([&] { make_config(raw); }).find("seed"), std::string::npos);

    raw = moments_config();
    raw["trials"] = "many";
    EXPECT_NE(message_of([&] { run(make_config(raw)); }).find("trials"), std::string::npos);

    raw = moments_config();
    raw["params"].erase("ndim");
    EXPECT_NE(message_of([&] { run(make_config(raw)); }).find("params.ndim"), std::string::npos);

    raw = moments_config();
    raw["experiment"] = "bogus";
    EXPECT_EQ(error_of([&] { make_config(raw); }), Errc::ConfigError);

    raw = moments_config();
    raw["ring"] = "ell=3;level=;P=1";
    EXPECT_EQ(error_of([&] { run(make_config(raw)); }), Errc::ConfigError);

    EXPECT_EQ(error_of([] { parse_config_text("{\"seed\": 1,"); }), Errc::ConfigError);
    EXPECT_NE(message_of([] { parse_config_text("{\n  \"seed\": 1,\n  oops\n}"); }).find("line 3"), std::string::npos);
}

TEST(ExitCodes, Mapping) {
    EXPECT_EQ(exit_code_for(Errc::ConfigError), 2);
    EXPECT_EQ(exit_code_for(Errc::BudgetExceeded), 3);
    EXPECT_EQ(exit_code_for(Errc::EnumerationTooLarge), 3);
    EXPECT_EQ(exit_code_for(Errc::MismatchDetected), 4);
}

TEST(Report, HasVersionTruncationAndFlags) {
    auto rep = run(make_config(moments_config()));
    const json j = rep.to_json();
    EXPECT_EQ(j.at("version"), kVersion);
    EXPECT_EQ(j.at("truncation_level"), 5);
    EXPECT_TRUE(j.at("ambiguity_flags").empty());
    EXPECT_TRUE(j.contains("runtime_ms"));
    ASSERT_EQ(j.at("moments").size(), 1u);
    const auto& m = j.at("moments")[0];
    EXPECT_EQ(m.at("exact"), "8/9");
    EXPECT_LT(std::abs(m.at("estimate").get<double>() - 8.0 / 9.0), 5 * m.at("stderr").get<double>());
    double total = j.at("overflow_rate").get<double>();
    for (const auto& b : j.at("bins")) total += b.at("mass").get<double>();
    EXPECT_NEAR(total, 1.0, 1e-9);

    json rect = moments_config();
    rect["model"] = "rect";
    rect["params"]["d"] = 1;
    EXPECT_EQ(run(make_config(rect)).payload.at("ambiguity_flags"), json::array({"i=j"}));
}

TEST(Report, CsvHeaderAndRows) {
    auto rep = run(make_config(moments_config()));
    const std::string csv = render_csv(rep);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "label,count,mass,predicted,abs_error");
    const auto lines = std::count(csv.begin(), csv.end(), '\n');
    EXPECT_EQ(static_cast<std::size_t>(lines), rep.payload.at("bins").size() + rep.payload.at("moments").size() + 1);
}

TEST(Replay, ReproducesAcrossWorkerCounts) {
    json raw = moments_config();
    raw["workers"] = 1;
    const json one = run(make_config(raw)).to_json();
    raw["workers"] = 4;
    const json four = run(make_config(raw)).to_json();
    EXPECT_EQ(replay_payload(one).dump(), replay_payload(four).dump());
    EXPECT_TRUE(replay_check(one, 3));

    json tampered = one;
    tampered["bins"][0]["count"] = tampered["bins"][0]["count"].get<std::uint64_t>() + 1;
    EXPECT_EQ(error_of([&] { replay_check(tampered); }), Errc::MismatchDetected);
    EXPECT_NE(message_of([&] { replay_check(tampered); }).find("/bins/0/count"), std::string::npos);
}

TEST(Experiments, TorsionIdentityReport) {
    json raw = json::parse(R"cfg({"experiment": "identities", "seed": 1,
                               "params": {"identity": "torsion", "p": 3, "A": "(1)", "order_bound": 3}})cfg");
    auto rep = run(make_config(raw));
    EXPECT_EQ(rep.payload.at("classes").size(), 3u);
    EXPECT_EQ(rep.payload.at("sum"), "1/2");
    EXPECT_EQ(rep.payload.at("holds"), true);
}

TEST(Experiments, ExactEnumerationReport) {
    json raw = json::parse(R"cfg({"experiment": "exact", "ring": "ell=3;level=2;P=-1,1;q=2", "seed": 1,
                               "params": {"ndim": 1}, "targets": ["(1)"]})cfg");
    auto rep = run(make_config(raw));
    EXPECT_EQ(rep.payload.at("matrices"), "9");
    EXPECT_EQ(rep.payload.at("overflow_count"), "1");
    EXPECT_EQ(rep.payload.at("moments")[0].at("exact"), "2/3");
}

TEST(Experiments, OverflowAbortIsABudgetError) {
    json raw = moments_config();
    raw["ring"] = "ell=3;level=1;P=-1,1;q=2";
    raw["params"]["ndim"] = 3;
    EXPECT_EQ(error_of([&] { run(make_config(raw)); }), Errc::BudgetExceeded);
}

TEST(Cli, MalformedRingLeavesNoOutput) {
    json raw = moments_config();
    raw["ring"] = "ell=3;level=5;P=-1,x;q=2";
    const fs::path cfg = scratch("bad_ring.json"), out = scratch("bad_ring_out.json");
    fs::remove(out);
    write_text(cfg, raw.dump());
    EXPECT_EQ(run_cli("moments --config " + cfg.string() + " --out " + out.string()), 2);
    EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, RunReplayAndTamper) {
    const fs::path cfg = scratch("good.json"), out = scratch("good_out.json"), csv = scratch("good_out.csv");
    write_text(cfg, moments_config().dump());
    ASSERT_EQ(run_cli("moments --config " + cfg.string() + " --workers 2 --out " + out.string()), 0);
    EXPECT_EQ(run_cli("replay " + out.string() + " --workers 3"), 0);
    ASSERT_EQ(run_cli("sample --config " + cfg.string() + " --seed 5 --format csv --out " + csv.string()), 0);
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "label,count,mass,predicted,abs_error");

    json report = read_json_file(out.string());
    report["moments"][0]["estimate"] = 0.5;
    const fs::path bad = scratch("tampered.json");
    write_text(bad, report.dump());
    EXPECT_EQ(run_cli("replay " + bad.string()), 4);
    EXPECT_EQ(run_cli("moments"), 2);
    EXPECT_EQ(run_cli("census --q 13 --genus 2 --ell 3 --seed 1"), 3);
    EXPECT_EQ(run_cli("census --q 5 --genus 1 --ell 3 --seed 2 --out " + scratch("census.json").string()), 0);
}
