#include "offrec/learners.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace offrec::learn {

using models::GumbelSample;
using nn::Graph;
using nn::Ref;

LearnerKind learner_kind_from_string(const std::string& s) {
    if (s == "sl") return LearnerKind::SL;
    if (s == "dqn") return LearnerKind::DQN;
    if (s == "sdac") return LearnerKind::SDAC;
    if (s == "sc") return LearnerKind::SC;
    if (s == "sr") return LearnerKind::SR;
    if (s == "pc") return LearnerKind::PC;
    if (s == "dc") return LearnerKind::DC;
    if (s == "re") return LearnerKind::RE;
    throw ConfigError("unknown learner kind: " + s);
}

std::string learner_kind_to_string(LearnerKind k) {
    switch (k) {
        case LearnerKind::SL: return "sl";
        case LearnerKind::DQN: return "dqn";
        case LearnerKind::SDAC: return "sdac";
        case LearnerKind::SC: return "sc";
        case LearnerKind::SR: return "sr";
        case LearnerKind::PC: return "pc";
        case LearnerKind::DC: return "dc";
        case LearnerKind::RE: return "re";
    }
    return "?";
}

bool learner_needs_behavior(LearnerKind k) {
    return k == LearnerKind::SC || k == LearnerKind::DC || k == LearnerKind::RE;
}
bool learner_has_critic(LearnerKind k) { return k != LearnerKind::SL; }
bool learner_has_actor(LearnerKind k) { return k != LearnerKind::DQN; }

void LearnerConfig::validate(LearnerKind kind) const {
    if (alpha < 0.0) throw ConfigError("learner: alpha must be >= 0");
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("learner: gamma must be in [0, 1]");
    if (gumbel_temp <= 0.0 || gumbel_temp_end <= 0.0)
        throw ConfigError("learner: gumbel temperature must be > 0");
    if (beta < 0.0) throw ConfigError("learner: beta must be >= 0");
    if (kind == LearnerKind::PC && beta <= 0.0) throw ConfigError("learner: pc requires beta > 0");
    if (kind == LearnerKind::SR && epsilon <= 0.0)
        throw ConfigError("learner: sr requires epsilon > 0");
    if (kind == LearnerKind::SC && (delta < 0.0 || delta > 1.0))
        throw ConfigError("learner: sc requires delta in [0, 1]");
    if (lr_actor <= 0.0 || lr_critic <= 0.0 || lr_dual <= 0.0)
        throw ConfigError("learner: learning rates must be > 0");
    if (batch_size < 1) throw ConfigError("learner: batch_size must be >= 1");
    if (gumbel_samples < 1) throw ConfigError("learner: gumbel_samples must be >= 1");
    if (expectation_samples < 0) throw ConfigError("learner: expectation_samples must be >= 0");
    if (polyak) {
        if (tau <= 0.0 || tau > 1.0) throw ConfigError("learner: tau must be in (0, 1]");
    } else if (sync_period < 1) {
        throw ConfigError("learner: sync_period must be >= 1");
    }
}

namespace {

void check_finite_loss(double loss, const char* what, const Batch& batch) {
    if (std::isfinite(loss)) return;
    std::ostringstream oss;
    oss << what << ": loss is not finite (" << loss << "); batch size " << batch.size()
        << ", first actions:";
    for (std::size_t i = 0; i < std::min<std::size_t>(8, batch.size()); ++i)
        oss << " " << batch.actions[i];
    oss << ", first rewards:";
    for (std::size_t i = 0; i < std::min<std::size_t>(8, batch.size()); ++i)
        oss << " " << batch.rewards[i];
    throw NumericError(oss.str());
}

double policy_entropy(const Tensor& logp) {
    double h = 0.0;
    for (std::size_t r = 0; r < logp.rows(); ++r)
        for (std::size_t c = 0; c < logp.cols(); ++c)
            h -= std::exp(logp(r, c)) * logp(r, c);
    return logp.rows() ? h / static_cast<double>(logp.rows()) : 0.0;
}

// Gumbel-relaxed policy improvement objective
//   mean_{batch, M} y^T (log pi - Q/alpha [- log pi_b for DC])
// with y = softmax((log pi + g)/gamma_g). At alpha == 0 the alpha-scaled
// limit is used: mean y^T (-Q).
ActorLossBuild gumbel_actor_core(Graph& g, PolicyModel& policy, const Tensor& q,
                                 const Tensor* log_behavior, const StateBatch& states,
                                 const LearnerConfig& cfg, Rng& gumbel_rng) {
    Ref logits = policy.logits(g, states);
    Ref logp = g.log_softmax_rows(logits);

    Tensor coeff = q;  // subtracted from log pi inside the bracket
    if (cfg.alpha > 0.0) {
        for (double& v : coeff.values) v /= cfg.alpha;
        if (log_behavior != nullptr)
            for (std::size_t i = 0; i < coeff.size(); ++i)
                coeff.values[i] += std::max(log_behavior->values[i], kLogProbFloor);
    }

    Ref per_sample_sum;
    for (int m = 0; m < cfg.gumbel_samples; ++m) {
        GumbelSample gs = models::gumbel_softmax_sample(g, logp, cfg.gumbel_temp, gumbel_rng);
        Ref inner =
            cfg.alpha > 0.0 ? g.sub(logp, g.input(coeff)) : g.scale(g.input(coeff), -1.0);
        Ref term = g.sum_cols(g.mul(gs.relaxed, inner));  // [batch, 1]
        per_sample_sum = m == 0 ? term : g.add(per_sample_sum, term);
    }
    ActorLossBuild out;
    out.loss = g.scale(g.mean_all(per_sample_sum), 1.0 / static_cast<double>(cfg.gumbel_samples));
    out.logp = logp;
    out.value = g.scalar_value(out.loss);
    out.entropy = policy_entropy(g.value(logp));
    return out;
}

UpdateReport critic_regression_step(CriticModel& critic, const Batch& batch,
                                    const std::vector<double>& y, const LearnerConfig& cfg,
                                    const char* what) {
    Graph g;
    Ref loss = critic_loss_ref(g, critic, batch, y);
    double loss_v = g.scalar_value(loss);
    check_finite_loss(loss_v, what, batch);
    g.backward(loss);
    critic.params().adam_step(cfg.lr_critic);
    UpdateReport rep;
    rep.critic_loss = loss_v;
    double ysum = 0.0;
    for (double v : y) ysum += v;
    rep.aux["mean_target"] = y.empty() ? 0.0 : ysum / static_cast<double>(y.size());
    return rep;
}

UpdateReport finish_actor_step(Graph& g, PolicyModel& policy, const ActorLossBuild& build,
                               const LearnerConfig& cfg, const char* what) {
    check_finite_loss(build.value, what, Batch{});
    g.backward(build.loss);
    policy.params().adam_step(cfg.lr_actor);
    UpdateReport rep;
    rep.actor_loss = build.value;
    rep.aux = build.aux;
    rep.aux["entropy"] = build.entropy;
    return rep;
}

}  // namespace

Ref sl_loss(Graph& g, PolicyModel& policy, const Batch& batch) {
    Ref logits = policy.logits(g, batch.states);
    Ref logp = g.log_softmax_rows(logits);
    Ref picked = g.gather_cols(logp, batch.actions);
    return g.scale(g.mean_all(picked), -1.0);
}

Ref critic_loss_ref(Graph& g, CriticModel& critic, const Batch& batch,
                    const std::vector<double>& y) {
    Ref q = critic.q_values_graph(g, batch.states, false);
    Ref q_sa = g.gather_cols(q, batch.actions);
    Ref diff = g.sub(q_sa, g.input(Tensor::column(y)));
    return g.scale(g.mean_all(g.square(diff)), 0.5);
}

ActorLossBuild sdac_actor_loss(Graph& g, PolicyModel& policy, const Tensor& q,
                               const StateBatch& states, const LearnerConfig& cfg,
                               Rng& gumbel_rng) {
    return gumbel_actor_core(g, policy, q, nullptr, states, cfg, gumbel_rng);
}

ActorLossBuild dc_actor_loss(Graph& g, PolicyModel& policy, const Tensor& q,
                             const Tensor& log_behavior, const StateBatch& states,
                             const LearnerConfig& cfg, Rng& gumbel_rng) {
    return gumbel_actor_core(g, policy, q, &log_behavior, states, cfg, gumbel_rng);
}

ActorLossBuild sc_actor_loss(Graph& g, PolicyModel& policy, const Tensor& q,
                             const Tensor& log_behavior, const StateBatch& states,
                             const LearnerConfig& cfg, Rng& gumbel_rng) {
    // low-support mask: pi_b_hat(a|s) <= delta
    Tensor mask(log_behavior.rows(), log_behavior.cols());
    bool any_disallowed = false;
    double log_delta = cfg.delta > 0.0 ? std::log(cfg.delta) : -1e308;
    for (std::size_t i = 0; i < log_behavior.size(); ++i) {
        bool disallowed = cfg.delta >= 1.0 || log_behavior.values[i] <= log_delta;
        mask.values[i] = disallowed ? 1.0 : 0.0;
        any_disallowed |= disallowed;
    }

    ActorLossBuild build = gumbel_actor_core(g, policy, q, nullptr, states, cfg, gumbel_rng);
    double penalty_v = 0.0;
    if (any_disallowed) {
        // policy mass on disallowed actions
        Ref probs = g.exp_fn(build.logp);
        Ref penalty = g.mean_all(g.sum_cols(g.mul(probs, g.input(mask))));
        penalty_v = g.scalar_value(penalty);
        build.loss = g.add(build.loss, g.scale(penalty, cfg.beta));
        build.value = g.scalar_value(build.loss);
    }
    build.aux["sc_penalty"] = penalty_v;
    build.aux["beta"] = cfg.beta;
    return build;
}

ActorLossBuild sr_actor_loss(Graph& g, PolicyModel& policy, const Tensor& q, const Batch& batch,
                             const LearnerConfig& cfg, Rng& gumbel_rng, double dual_beta) {
    ActorLossBuild build = gumbel_actor_core(g, policy, q, nullptr, batch.states, cfg, gumbel_rng);
    Ref ce = g.scale(g.mean_all(g.gather_cols(build.logp, batch.actions)), -1.0);
    double ce_v = g.scalar_value(ce);
    build.loss = g.add(build.loss, g.scale(ce, dual_beta));
    build.value = g.scalar_value(build.loss);
    build.aux["ce"] = ce_v;
    return build;
}

ActorLossBuild pc_actor_loss(Graph& g, PolicyModel& policy, const Tensor& q_for_weights,
                             const Batch& batch, const LearnerConfig& cfg) {
    if (cfg.beta <= 0.0) throw ConfigError("pc_actor_loss: beta must be > 0");
    std::vector<double> w(batch.size());
    int clipped = 0;
    double wsum = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        double raw =
            std::exp(q_for_weights(i, static_cast<std::size_t>(batch.actions[i])) / cfg.beta);
        if (raw > 1.0) {
            ++clipped;  // positive Q, i.e. critic overestimation
            raw = 1.0;
        }
        w[i] = raw;
        wsum += raw;
    }
    Ref logits = policy.logits(g, batch.states);
    Ref logp = g.log_softmax_rows(logits);
    Ref picked = g.gather_cols(logp, batch.actions);
    Ref weighted = g.mul_colwise(picked, g.input(Tensor::column(w)));
    ActorLossBuild build;
    build.loss = g.scale(g.mean_all(weighted), -1.0);
    build.logp = logp;
    build.value = g.scalar_value(build.loss);
    build.entropy = policy_entropy(g.value(logp));
    build.aux["mean_weight"] = wsum / static_cast<double>(batch.size());
    build.aux["pc_clipped"] = static_cast<double>(clipped);
    return build;
}

UpdateReport sl_update(PolicyModel& policy, const Batch& batch, const LearnerConfig& cfg) {
    if (batch.size() == 0) throw UsageError("sl_update: empty batch");
    Graph g;
    Ref logp = g.log_softmax_rows(policy.logits(g, batch.states));
    Ref picked = g.gather_cols(logp, batch.actions);
    Ref loss = g.scale(g.mean_all(picked), -1.0);
    double loss_v = g.scalar_value(loss);
    check_finite_loss(loss_v, "sl_update", batch);
    double entropy = policy_entropy(g.value(logp));
    g.backward(loss);
    policy.params().adam_step(cfg.lr_actor);

    UpdateReport rep;
    rep.actor_loss = loss_v;
    rep.aux["entropy"] = entropy;
    return rep;
}

UpdateReport dqn_update(CriticModel& critic, const Batch& batch, const LearnerConfig& cfg) {
    if (batch.size() == 0) throw UsageError("dqn_update: empty batch");
    Tensor q_next = critic.q_values(batch.next_states, true);
    std::vector<double> y(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        double target = batch.rewards[i];
        if (!batch.terminal[i]) {
            double mx = q_next(i, 0);
            for (std::size_t a = 1; a < q_next.cols(); ++a) mx = std::max(mx, q_next(i, a));
            target += cfg.gamma * mx;
        }
        y[i] = target;
    }
    return critic_regression_step(critic, batch, y, cfg, "dqn_update");
}

std::vector<double> soft_targets(CriticModel& critic, PolicyModel& policy,
                                 const BehaviorModel* behavior, const Batch& batch,
                                 const LearnerConfig& cfg, SoftTargetKind kind, Rng* expect_rng) {
    if (kind == SoftTargetKind::DC && behavior == nullptr)
        throw UsageError("soft_targets: DC requires a behavior model");
    Tensor logp_next = policy.log_probs(batch.next_states);
    Tensor q_next = critic.q_values(batch.next_states, true);
    Tensor logb_next;
    if (kind == SoftTargetKind::DC) logb_next = behavior->log_probs(batch.next_states);

    std::size_t n = batch.size();
    std::size_t A = q_next.cols();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double target = batch.rewards[i];
        if (!batch.terminal[i]) {
            auto term_of = [&](std::size_t a) {
                double v = q_next(i, a) - cfg.alpha * logp_next(i, a);
                if (kind == SoftTargetKind::DC)
                    v += cfg.alpha * std::max(logb_next(i, a), kLogProbFloor);
                return v;
            };
            double expectation = 0.0;
            if (cfg.expectation_samples > 0) {
                if (expect_rng == nullptr)
                    throw UsageError("soft_targets: sampled expectation requires an rng");
                for (int k = 0; k < cfg.expectation_samples; ++k) {
                    double u = expect_rng->uniform();
                    double acc = 0.0;
                    std::size_t pick = A - 1;
                    for (std::size_t a = 0; a < A; ++a) {
                        acc += std::exp(logp_next(i, a));
                        if (u <= acc) {
                            pick = a;
                            break;
                        }
                    }
                    expectation += term_of(pick);
                }
                expectation /= static_cast<double>(cfg.expectation_samples);
            } else {
                for (std::size_t a = 0; a < A; ++a)
                    expectation += std::exp(logp_next(i, a)) * term_of(a);
            }
            target += cfg.gamma * expectation;
        }
        y[i] = target;
    }
    return y;
}

UpdateReport sdac_critic_update(CriticModel& critic, PolicyModel& policy, const Batch& batch,
                                const LearnerConfig& cfg, Rng* expect_rng) {
    if (batch.size() == 0) throw UsageError("sdac_critic_update: empty batch");
    auto y = soft_targets(critic, policy, nullptr, batch, cfg, SoftTargetKind::SDAC, expect_rng);
    return critic_regression_step(critic, batch, y, cfg, "sdac_critic_update");
}

UpdateReport sdac_actor_update(PolicyModel& policy, CriticModel& critic, const StateBatch& states,
                               const LearnerConfig& cfg, Rng& gumbel_rng) {
    if (states.size() == 0) throw UsageError("sdac_actor_update: empty states");
    Tensor q = critic.q_values(states, false);
    Graph g;
    ActorLossBuild build = sdac_actor_loss(g, policy, q, states, cfg, gumbel_rng);
    return finish_actor_step(g, policy, build, cfg, "sdac_actor_update");
}

UpdateReport sc_actor_update(PolicyModel& policy, CriticModel& critic,
                             const BehaviorModel& behavior, const StateBatch& states,
                             const LearnerConfig& cfg, Rng& gumbel_rng) {
    if (states.size() == 0) throw UsageError("sc_actor_update: empty states");
    if (!behavior.frozen()) throw UsageError("sc_actor_update: behavior model must be frozen");
    Tensor q = critic.q_values(states, false);
    Tensor logb = behavior.log_probs(states);
    Graph g;
    ActorLossBuild build = sc_actor_loss(g, policy, q, logb, states, cfg, gumbel_rng);
    return finish_actor_step(g, policy, build, cfg, "sc_actor_update");
}

UpdateReport sr_actor_update(PolicyModel& policy, CriticModel& critic, const Batch& batch,
                             const LearnerConfig& cfg, Rng& gumbel_rng, double& dual_beta) {
    if (batch.size() == 0) throw UsageError("sr_actor_update: empty batch");
    Tensor q = critic.q_values(batch.states, false);
    Graph g;
    ActorLossBuild build = sr_actor_loss(g, policy, q, batch, cfg, gumbel_rng, dual_beta);
    UpdateReport rep = finish_actor_step(g, policy, build, cfg, "sr_actor_update");

    // dual ascent on the cross-entropy budget
    double ce = rep.aux.at("ce");
    double residual = ce - cfg.epsilon;
    dual_beta = std::max(0.0, dual_beta + cfg.lr_dual * residual);
    rep.aux["residual"] = residual;
    rep.aux["beta"] = dual_beta;
    return rep;
}

UpdateReport pc_actor_update(PolicyModel& policy, CriticModel& critic, const Batch& batch,
                             const LearnerConfig& cfg) {
    if (batch.size() == 0) throw UsageError("pc_actor_update: empty batch");
    Tensor q = critic.q_values(batch.states, !cfg.pc_use_online_critic);
    Graph g;
    ActorLossBuild build = pc_actor_loss(g, policy, q, batch, cfg);
    return finish_actor_step(g, policy, build, cfg, "pc_actor_update");
}

UpdateReport dc_critic_update(CriticModel& critic, PolicyModel& policy,
                              const BehaviorModel& behavior, const Batch& batch,
                              const LearnerConfig& cfg, Rng* expect_rng) {
    if (batch.size() == 0) throw UsageError("dc_critic_update: empty batch");
    if (!behavior.frozen()) throw UsageError("dc_critic_update: behavior model must be frozen");
    auto y = soft_targets(critic, policy, &behavior, batch, cfg, SoftTargetKind::DC, expect_rng);
    return critic_regression_step(critic, batch, y, cfg, "dc_critic_update");
}

UpdateReport dc_actor_update(PolicyModel& policy, CriticModel& critic,
                             const BehaviorModel& behavior, const StateBatch& states,
                             const LearnerConfig& cfg, Rng& gumbel_rng) {
    if (states.size() == 0) throw UsageError("dc_actor_update: empty states");
    if (!behavior.frozen()) throw UsageError("dc_actor_update: behavior model must be frozen");
    Tensor q = critic.q_values(states, false);
    Tensor logb = behavior.log_probs(states);
    Graph g;
    ActorLossBuild build = dc_actor_loss(g, policy, q, logb, states, cfg, gumbel_rng);
    return finish_actor_step(g, policy, build, cfg, "dc_actor_update");
}

Batch re_augment_rewards(const Batch& batch, const BehaviorModel& behavior,
                         const LearnerConfig& cfg) {
    if (!behavior.frozen()) throw UsageError("re_augment_rewards: behavior model must be frozen");
    Tensor logb = behavior.log_probs(batch.states);
    Batch out = batch;
    for (std::size_t i = 0; i < out.size(); ++i) {
        double lb = std::max(logb(i, static_cast<std::size_t>(batch.actions[i])), kLogProbFloor);
        out.rewards[i] = batch.rewards[i] + cfg.alpha * lb;
    }
    return out;
}

Learner::Learner(LearnerKind kind, models::EncoderConfig actor_cfg, int catalog, LearnerConfig cfg,
                 std::uint64_t seed)
    : kind_(kind),
      cfg_(cfg),
      gumbel_rng_(Rng::stream(seed, "gumbel")),
      expect_rng_(Rng::stream(seed, "expect")),
      dual_beta_(cfg.beta) {
    cfg_.validate(kind);
    if (learner_has_actor(kind_)) {
        Rng init = Rng::stream(seed, "init.actor");
        policy_ = std::make_unique<PolicyModel>(actor_cfg, catalog, init);
    }
    if (learner_has_critic(kind_)) {
        models::EncoderConfig critic_cfg = actor_cfg;
        if (critic_cfg.backbone != models::Backbone::Tabular) critic_cfg.hidden_dim *= 2;
        Rng init = Rng::stream(seed, "init.critic");
        critic_ = std::make_unique<CriticModel>(critic_cfg, catalog, init);
        critic_->configure_sync(
            cfg_.polyak ? CriticModel::SyncMode::Polyak : CriticModel::SyncMode::Hard,
            cfg_.sync_period, cfg_.tau);
    }
}

void Learner::set_behavior(std::shared_ptr<BehaviorModel> behavior) {
    if (!behavior || !behavior->frozen())
        throw UsageError("set_behavior: behavior model must exist and be frozen");
    behavior_ = std::move(behavior);
}

UpdateReport Learner::update(const Batch& batch) {
    if (learner_needs_behavior(kind_) && !behavior_)
        throw UsageError("learner " + learner_kind_to_string(kind_) +
                         " requires a frozen behavior model");
    UpdateReport rep;
    auto merge_actor = [&rep](UpdateReport actor) {
        rep.actor_loss = actor.actor_loss;
        rep.aux.insert(actor.aux.begin(), actor.aux.end());
    };
    switch (kind_) {
        case LearnerKind::SL:
            rep = sl_update(*policy_, batch, cfg_);
            break;
        case LearnerKind::DQN:
            rep = dqn_update(*critic_, batch, cfg_);
            critic_->sync_target();
            break;
        case LearnerKind::SDAC:
            rep = sdac_critic_update(*critic_, *policy_, batch, cfg_, &expect_rng_);
            merge_actor(sdac_actor_update(*policy_, *critic_, batch.states, cfg_, gumbel_rng_));
            critic_->sync_target();
            break;
        case LearnerKind::SC:
            rep = sdac_critic_update(*critic_, *policy_, batch, cfg_, &expect_rng_);
            merge_actor(
                sc_actor_update(*policy_, *critic_, *behavior_, batch.states, cfg_, gumbel_rng_));
            critic_->sync_target();
            break;
        case LearnerKind::SR:
            rep = sdac_critic_update(*critic_, *policy_, batch, cfg_, &expect_rng_);
            merge_actor(sr_actor_update(*policy_, *critic_, batch, cfg_, gumbel_rng_, dual_beta_));
            critic_->sync_target();
            break;
        case LearnerKind::PC:
            rep = sdac_critic_update(*critic_, *policy_, batch, cfg_, &expect_rng_);
            merge_actor(pc_actor_update(*policy_, *critic_, batch, cfg_));
            critic_->sync_target();
            break;
        case LearnerKind::DC:
            rep = dc_critic_update(*critic_, *policy_, *behavior_, batch, cfg_, &expect_rng_);
            merge_actor(
                dc_actor_update(*policy_, *critic_, *behavior_, batch.states, cfg_, gumbel_rng_));
            critic_->sync_target();
            break;
        case LearnerKind::RE: {
            Batch augmented = re_augment_rewards(batch, *behavior_, cfg_);
            rep = sdac_critic_update(*critic_, *policy_, augmented, cfg_, &expect_rng_);
            merge_actor(
                sdac_actor_update(*policy_, *critic_, augmented.states, cfg_, gumbel_rng_));
            critic_->sync_target();
            break;
        }
    }
    rep.step = ++step_;
    return rep;
}

Tensor Learner::scores(const StateBatch& states) const {
    if (kind_ == LearnerKind::DQN) return critic_->q_values(states, false);
    return policy_->log_probs(states);
}

}  // namespace offrec::learn
