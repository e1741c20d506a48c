#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "offrec/experiment.hpp"
#include "offrec/synthetic.hpp"

using namespace offrec;

namespace {

cli::ExperimentConfig load_config(const std::string& path, const std::string& learner_override,
                                  const std::string& seeds_override,
                                  const std::string& out_override) {
    auto kv = cli::KeyValueConfig::parse_file(path);
    if (!learner_override.empty()) kv.set("learner.kind", learner_override);
    if (!seeds_override.empty()) kv.set("train.seeds", seeds_override);
    if (!out_override.empty()) kv.set("output.dir", out_override);
    return cli::ExperimentConfig::from_kv(kv);
}

int dispatch(int argc, char** argv) {
    CLI::App app{"offline reinforcement learning for session-based recommendation"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "train a learner per config, one run per seed");
    std::string config_path, learner, seeds, out_dir;
    long long seed_flag = -1;
    train->add_option("--config", config_path, "experiment config file")->required();
    train->add_option("--learner", learner, "override learner kind");
    train->add_option("--seed", seed_flag, "train a single seed");
    train->add_option("--seeds", seeds, "comma-separated seed list");
    train->add_option("--out", out_dir, "output directory override");

    // eval
    auto* evalc = app.add_subcommand("eval", "evaluate a trained checkpoint on the test split");
    std::string run_dir, eval_config, scope = "all";
    evalc->add_option("--checkpoint", run_dir, "per-seed run directory")->required();
    evalc->add_option("--config", eval_config, "config override (default: run snapshot)");
    evalc->add_option("--scope", scope, "all | purchase")
        ->check(CLI::IsMember({"all", "purchase"}));

    // sweep
    auto* sweep = app.add_subcommand("sweep", "train+eval over a hyperparameter grid");
    std::string sweep_param, sweep_values;
    int jobs = 1;
    sweep->add_option("--config", config_path, "experiment config file")->required();
    sweep->add_option("--param", sweep_param, "delta | beta | alpha | epsilon")->required();
    sweep->add_option("--values", sweep_values,
                      "comma-separated values; 'adaptive' allowed for sr beta")
        ->required();
    sweep->add_option("--learner", learner, "override learner kind");
    sweep->add_option("--seeds", seeds, "comma-separated seed list");
    sweep->add_option("--out", out_dir, "output directory override");
    sweep->add_option("--jobs", jobs, "parallel cells");

    // verify
    auto* verify = app.add_subcommand("verify", "oracle verification suites");
    std::string fixtures = "chain5,twosupport6", learners = "sdac,dc,sr", report_path;
    int episodes = 0, steps = 0;
    verify->add_option("--fixtures", fixtures, "comma-separated fixture names");
    verify->add_option("--learners", learners, "comma-separated learner kinds");
    verify->add_option("--episodes", episodes, "logged episodes per fixture");
    verify->add_option("--steps", steps, "training steps per case");
    verify->add_option("--out", report_path, "JSON report path");

    // gen-synthetic
    auto* gen = app.add_subcommand("gen-synthetic", "write synthetic session logs as CSV");
    std::string gen_kind = "recsys", gen_out, fixture_name = "chain5";
    int n_sessions = 5000, catalog = 200, gen_episodes = 1000;
    long long gen_seed = 1;
    gen->add_option("--kind", gen_kind, "recsys | fixture")
        ->check(CLI::IsMember({"recsys", "fixture"}));
    gen->add_option("--out", gen_out, "output CSV path")->required();
    gen->add_option("--sessions", n_sessions, "session count (recsys)");
    gen->add_option("--catalog", catalog, "catalog size (recsys)");
    gen->add_option("--fixture", fixture_name, "fixture name (fixture kind)");
    gen->add_option("--episodes", gen_episodes, "episode count (fixture kind)");
    gen->add_option("--seed", gen_seed, "generator seed");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "parse a session CSV and report stats");
    std::string ingest_csv, ingest_out;
    int min_length = 3;
    ingest->add_option("--csv", ingest_csv, "input CSV")->required();
    ingest->add_option("--out", ingest_out, "directory for the item mapping");
    ingest->add_option("--min-length", min_length, "drop sessions shorter than this");

    CLI11_PARSE(app, argc, argv);

    if (*train) {
        if (seed_flag >= 0) seeds = std::to_string(seed_flag);
        auto cfg = load_config(config_path, learner, seeds, out_dir);
        std::string dir = cli::run_train(cfg);
        std::cout << "run directory: " << dir << "\n";
        return 0;
    }
    if (*evalc) {
        auto scope_e = scope == "purchase" ? eval::Scope::PurchaseOnly : eval::Scope::All;
        auto report = cli::run_eval(run_dir, eval_config, scope_e);
        for (const auto& [k, v] : report.hr) std::cout << "hr" << k << " " << v << "\n";
        for (const auto& [k, v] : report.ndcg) std::cout << "ndcg" << k << " " << v << "\n";
        std::cout << "events " << report.n_events << "\n";
        return 0;
    }
    if (*sweep) {
        cli::SweepSpec spec;
        spec.base = load_config(config_path, learner, seeds, out_dir);
        spec.parameter = sweep_param;
        spec.jobs = jobs;
        for (const auto& v : cli::KeyValueConfig::parse_string("v = " + sweep_values)
                                 .get_list_or("v"))
            spec.values.push_back(v);
        int failures = cli::run_sweep(spec);
        return failures == 0 ? 0 : 1;
    }
    if (*verify) {
        cli::VerifyRequest request;
        request.fixtures = cli::KeyValueConfig::parse_string("v = " + fixtures).get_list_or("v");
        request.learners = cli::KeyValueConfig::parse_string("v = " + learners).get_list_or("v");
        if (episodes > 0) request.config.n_episodes = episodes;
        if (steps > 0) {
            request.config.steps = steps;
            request.config.train.steps = steps;
        }
        request.report_path = report_path;
        int failures = cli::run_verify(request);
        return failures == 0 ? 0 : 1;
    }
    if (*gen) {
        if (gen_kind == "recsys") {
            data::SyntheticConfig scfg;
            scfg.n_sessions = n_sessions;
            scfg.catalog = catalog;
            auto sessions =
                data::generate_synthetic_sessions(scfg, static_cast<std::uint64_t>(gen_seed));
            data::write_sessions_csv(sessions, gen_out);
            std::cout << "wrote " << sessions.size() << " sessions to " << gen_out << "\n";
        } else {
            auto mdp = oracle::fixture_by_name(fixture_name);
            auto logs = oracle::generate_logs(mdp, oracle::uniform_logging_policy(mdp),
                                              gen_episodes, static_cast<std::uint64_t>(gen_seed));
            data::write_sessions_csv(logs.sessions, gen_out);
            std::cout << "wrote " << logs.sessions.size() << " episodes to " << gen_out << "\n";
        }
        return 0;
    }
    if (*ingest) {
        data::IngestConfig icfg;
        icfg.min_length = min_length;
        auto result = data::ingest_csv(ingest_csv, icfg);
        std::cout << "sessions " << result.sessions.size() << "\n"
                  << "catalog " << result.catalog << "\n"
                  << "malformed_rows " << result.malformed_rows << "\n"
                  << "dropped_short_sessions " << result.dropped_short_sessions << "\n";
        if (!ingest_out.empty()) {
            std::filesystem::create_directories(ingest_out);
            data::save_item_mapping(
                result, (std::filesystem::path(ingest_out) / "item_mapping.csv").string());
        }
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
