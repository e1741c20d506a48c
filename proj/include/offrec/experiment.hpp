#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "offrec/trainer.hpp"
#include "offrec/verify.hpp"

namespace offrec::cli {

// Flat key-value config with [section] headers; keys are stored as
// "section.key". Values stay strings until typed access.
class KeyValueConfig {
 public:
    static KeyValueConfig parse_file(const std::string& path);
    static KeyValueConfig parse_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key) const;
    std::string get_string_or(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double fallback) const;
    int get_int(const std::string& key) const;
    int get_int_or(const std::string& key, int fallback) const;
    bool get_bool_or(const std::string& key, bool fallback) const;
    std::vector<std::string> get_list_or(const std::string& key) const;  // comma separated

    // resolved snapshot, sections sorted, keys sorted
    std::string serialize() const;

 private:
    std::map<std::string, std::string> values_;
};

struct ExperimentConfig {
    // data
    std::string csv_path;
    int window = 10;
    int min_length = 3;
    double click_reward = 0.2;
    double purchase_reward = 1.0;
    std::uint64_t split_seed = 42;

    models::EncoderConfig encoder;
    learn::LearnerConfig learner;
    learn::LearnerKind kind = learn::LearnerKind::SL;
    learn::TrainOptions train;

    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::vector<int> eval_ks = {5, 10};
    std::string out_dir = "runs/default";

    // Parses and validates; throws ConfigError naming the offending field.
    static ExperimentConfig from_kv(const KeyValueConfig& kv);
    KeyValueConfig to_kv() const;
};

// train: per-seed subdirectories under out_dir with checkpoint, sidecar,
// metrics CSV and resolved-config snapshot, plus aggregate.csv (mean/std of
// final test metrics over seeds). Returns the run directory.
std::string run_train(const ExperimentConfig& cfg);

// eval: loads a per-seed run directory (checkpoint + sidecar + snapshot),
// re-evaluates on the configured test split, writes report.csv/report.json
// into the directory. Returns the report.
eval::MetricReport run_eval(const std::string& run_dir, const std::string& config_override,
                            eval::Scope scope);

struct SweepSpec {
    std::string parameter;  // delta | beta | alpha | epsilon
    std::vector<std::string> values;  // numeric literals, or "adaptive" for sr
    ExperimentConfig base;
    int jobs = 1;
};

// sweep: one train+eval per (value, seed); appends long-format rows
//   param,value,seed,metric,metric_value
// to <out_dir>/sweep.csv under a file lock, skipping completed cells.
// Returns the number of failed cells.
int run_sweep(const SweepSpec& spec);

struct VerifyRequest {
    std::vector<std::string> fixtures = {"chain5", "twosupport6"};
    std::vector<std::string> learners = {"sdac", "dc", "sr"};
    oracle::VerifyConfig config = oracle::default_verify_config();
    oracle::VerifyTolerances tolerances;
    std::string report_path;  // optional JSON output
};

// verify: runs the (fixture, learner) matrix with the documented
// expectations, prints one line per case, writes a JSON report. Returns the
// number of failed cases.
int run_verify(const VerifyRequest& request);

}  // namespace offrec::cli
