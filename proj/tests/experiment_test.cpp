#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "offrec/experiment.hpp"
#include "offrec/synthetic.hpp"

using namespace offrec;
using namespace offrec::cli;

namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
    auto dir = fs::temp_directory_path() / "offrec_exp_test";
    fs::create_directories(dir);
    return dir;
}

std::string toy_csv() {
    static std::string path;
    if (path.empty()) {
        data::SyntheticConfig cfg;
        cfg.n_sessions = 40;
        cfg.catalog = 15;
        auto sessions = data::generate_synthetic_sessions(cfg, 3);
        path = (tmp_dir() / "toy.csv").string();
        data::write_sessions_csv(sessions, path);
    }
    return path;
}

std::string base_config(const std::string& kind, const std::string& out,
                        const std::string& extra = "") {
    return "[data]\ncsv = " + toy_csv() +
           "\nwindow = 5\n"
           "[encoder]\nbackbone = gru\nembedding_dim = 8\nhidden_dim = 8\n"
           "[learner]\nkind = " +
           kind + "\nbatch_size = 32\n" + extra +
           "[train]\nsteps = 40\neval_every = 20\nseeds = 1\n"
           "[output]\ndir = " +
           out + "\n";
}

}  // namespace

TEST_CASE("key-value config parsing") {
    auto kv = KeyValueConfig::parse_string(
        "# comment\n[data]\ncsv = a.csv\nwindow = 7\n\n[learner]\nkind = sdac\nalpha = 0.5\n"
        "flags = a, b,c\n");
    CHECK(kv.get_string("data.csv") == "a.csv");
    CHECK(kv.get_int("data.window") == 7);
    CHECK(kv.get_double("learner.alpha") == doctest::Approx(0.5));
    CHECK(kv.get_list_or("learner.flags") == std::vector<std::string>{"a", "b", "c"});
    CHECK(kv.get_int_or("missing.key", 3) == 3);
    CHECK_THROWS_AS(kv.get_string("missing.key"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse_string("novalue\n"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse_string("[broken\n"), ConfigError);
}

TEST_CASE("config snapshot round trips") {
    auto out = (tmp_dir() / "rt").string();
    auto kv = KeyValueConfig::parse_string(base_config("sdac", out));
    auto cfg = ExperimentConfig::from_kv(kv);
    auto kv2 = KeyValueConfig::parse_string(cfg.to_kv().serialize());
    auto cfg2 = ExperimentConfig::from_kv(kv2);
    CHECK(cfg2.window == cfg.window);
    CHECK(cfg2.learner.alpha == cfg.learner.alpha);
    CHECK(cfg2.kind == cfg.kind);
    CHECK(cfg2.seeds == cfg.seeds);
}

TEST_CASE("learner-specific required fields") {
    auto out = (tmp_dir() / "req").string();
    CHECK_THROWS_WITH_AS(
        ExperimentConfig::from_kv(KeyValueConfig::parse_string(base_config("sc", out))),
        "config: learner.delta is required for learner kind 'sc'", ConfigError);
    CHECK_THROWS_WITH_AS(
        ExperimentConfig::from_kv(KeyValueConfig::parse_string(base_config("pc", out))),
        "config: learner.beta is required for learner kind 'pc'", ConfigError);
    CHECK_THROWS_WITH_AS(
        ExperimentConfig::from_kv(KeyValueConfig::parse_string(base_config("sr", out))),
        "config: learner.epsilon is required for learner kind 'sr'", ConfigError);
    CHECK_NOTHROW(ExperimentConfig::from_kv(
        KeyValueConfig::parse_string(base_config("sc", out, "delta = 0.1\n"))));
}

TEST_CASE("missing csv path is a config error") {
    auto kv = KeyValueConfig::parse_string(
        "[data]\ncsv = /nonexistent/file.csv\n[learner]\nkind = sl\n");
    CHECK_THROWS_AS(ExperimentConfig::from_kv(kv), ConfigError);
}

TEST_CASE("run_train writes the full run directory layout") {
    auto out = tmp_dir() / "train_sl";
    fs::remove_all(out);
    auto cfg = ExperimentConfig::from_kv(
        KeyValueConfig::parse_string(base_config("sl", out.string())));
    auto dir = run_train(cfg);
    CHECK(fs::exists(fs::path(dir) / "seed_1" / "checkpoint.orec"));
    CHECK(fs::exists(fs::path(dir) / "seed_1" / "model.json"));
    CHECK(fs::exists(fs::path(dir) / "seed_1" / "metrics.csv"));
    CHECK(fs::exists(fs::path(dir) / "seed_1" / "config.resolved"));
    CHECK(fs::exists(fs::path(dir) / "aggregate.csv"));
    CHECK(fs::exists(fs::path(dir) / "item_mapping.csv"));

    // aggregate has mean and std columns
    std::ifstream agg(fs::path(dir) / "aggregate.csv");
    std::string header;
    std::getline(agg, header);
    CHECK(header == "metric,mean,std");

    // eval on the checkpoint reproduces the aggregate numbers (1 seed)
    auto report = run_eval((fs::path(dir) / "seed_1").string(), "", eval::Scope::All);
    std::string line;
    std::getline(agg, line);  // hr5 row
    auto second_comma = line.find(',', line.find(',') + 1);
    double hr5_mean = std::stod(line.substr(line.find(',') + 1, second_comma));
    CHECK(report.hr.at(5) == doctest::Approx(hr5_mean).epsilon(1e-6));
}

TEST_CASE("run_eval detects catalog mismatch") {
    auto out = tmp_dir() / "train_mismatch";
    fs::remove_all(out);
    auto cfg = ExperimentConfig::from_kv(
        KeyValueConfig::parse_string(base_config("sl", out.string())));
    auto dir = run_train(cfg);

    // tamper with the sidecar catalog
    auto sidecar_path = fs::path(dir) / "seed_1" / "model.json";
    std::ifstream in(sidecar_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    auto pos = text.find("\"catalog\"");
    REQUIRE(pos != std::string::npos);
    text.replace(text.find(':', pos) + 1, text.find(',', pos) - text.find(':', pos) - 1, " 999");
    std::ofstream(sidecar_path) << text;

    CHECK_THROWS_AS(run_eval((fs::path(dir) / "seed_1").string(), "", eval::Scope::All),
                    ConfigError);
}

TEST_CASE("purchase scope on click-only data reports no evaluable events") {
    // click-only csv
    auto path = tmp_dir() / "clicks.csv";
    {
        std::ofstream out(path);
        out << "session_id,item_id,timestamp,behavior\n";
        for (int s = 0; s < 12; ++s)
            for (int t = 0; t < 4; ++t)
                out << "s" << s << "," << (s + t) % 7 << "," << t << ",click\n";
    }
    auto out = tmp_dir() / "train_clicks";
    fs::remove_all(out);
    std::string cfg_text = "[data]\ncsv = " + path.string() +
                           "\nwindow = 4\n[encoder]\nbackbone = gru\nembedding_dim = 8\n"
                           "hidden_dim = 8\n[learner]\nkind = sl\nbatch_size = 16\n"
                           "[train]\nsteps = 20\neval_every = 10\nseeds = 1\n[output]\ndir = " +
                           out.string() + "\n";
    auto cfg = ExperimentConfig::from_kv(KeyValueConfig::parse_string(cfg_text));
    auto dir = run_train(cfg);
    CHECK_THROWS_AS(
        run_eval((fs::path(dir) / "seed_1").string(), "", eval::Scope::PurchaseOnly), DataError);
}

TEST_CASE("sweep validates the parameter and writes long-format rows") {
    auto out = tmp_dir() / "sweep_pc";
    fs::remove_all(out);
    SweepSpec spec;
    spec.base = ExperimentConfig::from_kv(KeyValueConfig::parse_string(
        base_config("pc", out.string(), "beta = 1.0\n")));
    spec.parameter = "beta";
    spec.values = {"0.5", "2"};
    CHECK(run_sweep(spec) == 0);

    std::ifstream in(out / "sweep.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "param,value,seed,metric,metric_value");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 8);  // 2 values x 1 seed x 4 metrics

    // idempotent re-run adds nothing
    CHECK(run_sweep(spec) == 0);
    std::ifstream in2(out / "sweep.csv");
    int rows2 = -1;  // minus header
    while (std::getline(in2, line)) ++rows2;
    CHECK(rows2 == 8);

    SweepSpec bad = spec;
    bad.parameter = "window";
    CHECK_THROWS_AS(run_sweep(bad), ConfigError);

    // delta sweeps require the sc learner
    SweepSpec delta = spec;
    delta.parameter = "delta";
    CHECK_THROWS_AS(run_sweep(delta), ConfigError);
}

TEST_CASE("sr sweep accepts the adaptive label") {
    auto out = tmp_dir() / "sweep_sr";
    fs::remove_all(out);
    SweepSpec spec;
    spec.base = ExperimentConfig::from_kv(KeyValueConfig::parse_string(
        base_config("sr", out.string(), "epsilon = 2.0\nlr_dual = 0.01\n")));
    spec.parameter = "beta";
    spec.values = {"0.1", "adaptive"};
    CHECK(run_sweep(spec) == 0);
    std::ifstream in(out / "sweep.csv");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.find("beta,adaptive,1,") != std::string::npos);
}
