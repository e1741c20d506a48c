#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "offrec/learners.hpp"
#include "offrec/metrics.hpp"

namespace offrec::learn {

struct TrainOptions {
    int steps = 3000;
    int eval_every = 500;
    bool anneal_gumbel = true;
    // behavior pre-training
    int behavior_max_epochs = 20;
    int behavior_steps_per_epoch = 200;
    int behavior_patience = 3;
    double behavior_lr = 1e-3;
    int behavior_batch = 256;
};

struct MetricsRow {
    int step = 0;
    std::string learner;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double beta = 0.0;
    double residual = 0.0;
    double hr5 = 0.0, hr10 = 0.0, ndcg5 = 0.0, ndcg10 = 0.0;
};

struct TrainData {
    data::ReplayBuffer train_buffer;
    std::vector<data::Session> validation_sessions;  // empty disables eval rows
    std::vector<data::Session> test_sessions;        // optional, reported at the end
};

struct TrainResult {
    std::unique_ptr<Learner> learner;  // with best-validation parameters restored
    std::vector<MetricsRow> log;
    double best_ndcg10 = 0.0;
    int best_step = 0;
    std::optional<eval::MetricReport> test_report;
};

// Supervised pre-training of the logging-policy estimate with early stopping
// on validation cross-entropy.
std::shared_ptr<models::BehaviorModel> train_behavior(const models::EncoderConfig& enc_cfg,
                                                      const data::ReplayBuffer& train_buffer,
                                                      const data::ReplayBuffer& val_buffer,
                                                      const TrainOptions& opts,
                                                      std::uint64_t seed);

// Full training run: behavior pre-training when the learner needs it, then
// one critic + actor update per minibatch, periodic validation evaluation,
// best-NDCG@10 checkpointing.
TrainResult train(LearnerKind kind, const models::EncoderConfig& enc_cfg,
                  const LearnerConfig& lcfg, const TrainData& tdata, const TrainOptions& opts,
                  std::uint64_t seed);

// mean cross-entropy of a policy on a buffer (behavior early stopping)
double buffer_cross_entropy(const models::PolicyModel& policy, const data::ReplayBuffer& buffer,
                            std::size_t max_rows = 4096);

// Metrics CSV with the fixed column contract:
//   step,learner,critic_loss,actor_loss,beta,residual,hr5,hr10,ndcg5,ndcg10
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);
std::string format_metrics_row(const MetricsRow& row);

}  // namespace offrec::learn
