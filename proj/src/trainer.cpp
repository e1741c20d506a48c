#include "offrec/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace offrec::learn {

namespace {

std::vector<std::size_t> sample_indices(Rng& rng, std::size_t buffer_size, int batch_size) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(batch_size));
    for (auto& i : idx) i = static_cast<std::size_t>(rng.index(buffer_size));
    return idx;
}

eval::ScoreFn make_score_fn(const Learner& learner) {
    return [&learner](const data::StateBatch& states) { return learner.scores(states); };
}

}  // namespace

double buffer_cross_entropy(const models::PolicyModel& policy, const data::ReplayBuffer& buffer,
                            std::size_t max_rows) {
    if (buffer.empty()) throw UsageError("buffer_cross_entropy: empty buffer");
    std::size_t n = std::min(buffer.size(), max_rows);
    std::vector<std::size_t> idx(n);
    // deterministic stride over the buffer
    std::size_t stride = std::max<std::size_t>(1, buffer.size() / n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = (i * stride) % buffer.size();
    auto batch = data::make_batch(buffer, idx);
    nn::Tensor logp = policy.log_probs(batch.states);
    double ce = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        ce -= logp(i, static_cast<std::size_t>(batch.actions[i]));
    return ce / static_cast<double>(n);
}

std::shared_ptr<models::BehaviorModel> train_behavior(const models::EncoderConfig& enc_cfg,
                                                      const data::ReplayBuffer& train_buffer,
                                                      const data::ReplayBuffer& val_buffer,
                                                      const TrainOptions& opts,
                                                      std::uint64_t seed) {
    if (train_buffer.empty()) throw UsageError("train_behavior: empty training buffer");
    Rng init = Rng::stream(seed, "init.behavior");
    auto behavior = std::make_shared<models::BehaviorModel>(enc_cfg, train_buffer.catalog, init);
    Rng batch_rng = Rng::stream(seed, "behavior.batch");

    LearnerConfig cfg;
    cfg.lr_actor = opts.behavior_lr;
    cfg.batch_size = opts.behavior_batch;

    const data::ReplayBuffer& probe = val_buffer.empty() ? train_buffer : val_buffer;
    double best_ce = buffer_cross_entropy(behavior->policy(), probe);
    nn::ParamStore best = behavior->policy().params().clone_values();
    int bad_epochs = 0;
    for (int epoch = 0; epoch < opts.behavior_max_epochs; ++epoch) {
        for (int s = 0; s < opts.behavior_steps_per_epoch; ++s) {
            auto idx = sample_indices(batch_rng, train_buffer.size(), opts.behavior_batch);
            auto batch = data::make_batch(train_buffer, idx);
            sl_update(behavior->policy(), batch, cfg);
        }
        double ce = buffer_cross_entropy(behavior->policy(), probe);
        if (ce < best_ce - 1e-4) {
            best_ce = ce;
            best = behavior->policy().params().clone_values();
            bad_epochs = 0;
        } else if (++bad_epochs >= opts.behavior_patience) {
            break;
        }
    }
    behavior->policy().params().copy_values_from(best);
    behavior->freeze();
    return behavior;
}

TrainResult train(LearnerKind kind, const models::EncoderConfig& enc_cfg,
                  const LearnerConfig& lcfg, const TrainData& tdata, const TrainOptions& opts,
                  std::uint64_t seed) {
    const data::ReplayBuffer& buffer = tdata.train_buffer;
    if (buffer.empty()) throw UsageError("train: empty buffer");
    lcfg.validate(kind);

    TrainResult result;
    result.learner = std::make_unique<Learner>(kind, enc_cfg, buffer.catalog, lcfg, seed);
    if (learner_needs_behavior(kind)) {
        data::ReplayBuffer val_buffer;
        if (!tdata.validation_sessions.empty()) {
            // behavior early stopping probes validation transitions
            val_buffer = data::build_buffer(tdata.validation_sessions, buffer.catalog,
                                            data::RewardMap{}, buffer.window);
        }
        result.learner->set_behavior(train_behavior(enc_cfg, buffer, val_buffer, opts, seed));
    }

    Rng batch_rng = Rng::stream(seed, "batch");
    std::string kind_name = learner_kind_to_string(kind);
    bool has_eval = !tdata.validation_sessions.empty();

    nn::ParamStore best_policy, best_critic;
    double best_ndcg = -1.0;
    int best_step = 0;

    auto snapshot_best = [&](int step, const UpdateReport& rep) {
        if (!has_eval) return;
        auto report = eval::evaluate(make_score_fn(*result.learner), tdata.validation_sessions,
                                     buffer.catalog, buffer.window, {5, 10}, eval::Scope::All);
        MetricsRow row;
        row.step = step;
        row.learner = kind_name;
        row.critic_loss = rep.critic_loss;
        row.actor_loss = rep.actor_loss;
        auto aux_or = [&rep](const char* key) {
            auto it = rep.aux.find(key);
            return it == rep.aux.end() ? 0.0 : it->second;
        };
        row.beta = kind == LearnerKind::SR ? result.learner->dual_beta() : aux_or("beta");
        row.residual = aux_or("residual");
        row.hr5 = report.hr.at(5);
        row.hr10 = report.hr.at(10);
        row.ndcg5 = report.ndcg.at(5);
        row.ndcg10 = report.ndcg.at(10);
        result.log.push_back(row);
        if (report.ndcg.at(10) > best_ndcg) {
            best_ndcg = report.ndcg.at(10);
            best_step = step;
            if (result.learner->policy()) best_policy = result.learner->policy()->params().clone_values();
            if (result.learner->critic()) best_critic = result.learner->critic()->params().clone_values();
        }
    };

    UpdateReport last;
    for (int step = 1; step <= opts.steps; ++step) {
        if (opts.anneal_gumbel && opts.steps > 1) {
            double frac = static_cast<double>(step - 1) / static_cast<double>(opts.steps - 1);
            result.learner->set_gumbel_temp(lcfg.gumbel_temp +
                                            frac * (lcfg.gumbel_temp_end - lcfg.gumbel_temp));
        }
        auto idx = sample_indices(batch_rng, buffer.size(), lcfg.batch_size);
        auto batch = data::make_batch(buffer, idx);
        last = result.learner->update(batch);
        if (has_eval && (step % opts.eval_every == 0 || step == opts.steps))
            snapshot_best(step, last);
    }

    if (has_eval && best_ndcg >= 0.0) {
        // restore the best-validation parameters
        if (result.learner->policy() && best_policy.count() > 0)
            result.learner->policy()->params().copy_values_from(best_policy);
        if (result.learner->critic() && best_critic.count() > 0) {
            result.learner->critic()->params().copy_values_from(best_critic);
            result.learner->critic()->target_params().copy_values_from(best_critic);
        }
        result.best_ndcg10 = best_ndcg;
        result.best_step = best_step;
    }
    if (!tdata.test_sessions.empty())
        result.test_report = eval::evaluate(make_score_fn(*result.learner), tdata.test_sessions,
                                            buffer.catalog, buffer.window, {5, 10},
                                            eval::Scope::All);
    return result;
}

std::string format_metrics_row(const MetricsRow& row) {
    char buf[320];
    std::snprintf(buf, sizeof(buf), "%d,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f",
                  row.step, row.learner.c_str(), row.critic_loss, row.actor_loss, row.beta,
                  row.residual, row.hr5, row.hr10, row.ndcg5, row.ndcg10);
    return buf;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write metrics csv: " + path);
    out << "step,learner,critic_loss,actor_loss,beta,residual,hr5,hr10,ndcg5,ndcg10\n";
    for (const auto& row : rows) out << format_metrics_row(row) << "\n";
}

}  // namespace offrec::learn
