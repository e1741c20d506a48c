#include "offrec/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace offrec::oracle {

namespace {

// deterministic start state required so the empty prefix identifies it
int initial_state(const TabularMDP& mdp) {
    for (int s = 0; s < mdp.S; ++s)
        if (mdp.rho0[static_cast<std::size_t>(s)] == 1.0) return s;
    throw UsageError("verify: fixture must have a deterministic initial state");
}

// window-1 state batch for pattern (last action `a` at prefix length t)
data::StateBatch pattern_state(const TabularMDP& mdp, int t, int last_action) {
    data::StateBatch sb;
    sb.window = 1;
    sb.pad_id = mdp.A;
    sb.items = {t == 0 ? mdp.A : last_action};
    sb.lengths = {t};
    return sb;
}

}  // namespace

VerifyConfig default_verify_config() {
    VerifyConfig cfg;
    cfg.learner.alpha = 0.5;
    cfg.learner.gamma = 1.0;
    cfg.learner.gumbel_temp = 0.5;
    cfg.learner.gumbel_temp_end = 0.5;
    cfg.learner.gumbel_samples = 8;
    cfg.learner.lr_actor = 3e-3;
    cfg.learner.lr_critic = 1e-2;
    cfg.learner.batch_size = 256;
    cfg.learner.sync_period = 200;
    cfg.learner.beta = 1.0;
    cfg.learner.epsilon = 0.75;  // near H(pi_b) for the two-action logs
    cfg.learner.delta = 0.05;
    cfg.train.steps = cfg.steps;
    cfg.train.eval_every = 1 << 30;  // no mid-run ranking eval
    cfg.train.anneal_gumbel = false;
    cfg.train.behavior_max_epochs = 10;
    cfg.train.behavior_steps_per_epoch = 400;
    return cfg;
}

VerifyReport verify_learner(learn::LearnerKind kind, const TabularMDP& mdp,
                            const TabularPolicy& logging_policy, const VerifyConfig& cfg,
                            const VerifyTolerances& tol) {
    auto t0 = std::chrono::steady_clock::now();
    mdp.validate();
    if (!mdp.action_determined())
        throw UsageError("verify: fixture transitions must be action-determined");
    int s0 = initial_state(mdp);

    VerifyReport report;
    report.learner = learn::learner_kind_to_string(kind);

    auto logs = generate_logs(mdp, logging_policy, cfg.n_episodes, cfg.seed, 1);

    models::EncoderConfig enc;
    enc.backbone = models::Backbone::Tabular;
    enc.window = mdp.T;  // length feature must not alias across timesteps
    enc.embedding_dim = 1;
    enc.hidden_dim = 1;

    learn::TrainOptions opts = cfg.train;
    opts.steps = cfg.steps;

    learn::TrainData tdata;
    tdata.train_buffer = std::move(logs.buffer);

    learn::TrainResult result;
    try {
        result = learn::train(kind, enc, cfg.learner, tdata, opts, cfg.seed);
    } catch (const NumericError& e) {
        report.diverged = true;
        report.divergence_message = e.what();
        return report;
    }

    auto q_dp = soft_q_dp(mdp, cfg.learner.alpha, cfg.learner.gamma);
    auto max_ret = max_return_dp(mdp, cfg.learner.gamma);
    auto occupancy = occupancy_dp(mdp, logging_policy);

    double max_q_err = 0.0;
    double kl_sum = 0.0, kl_weight = 0.0;
    double max_oos_excess = -1e300;
    bool has_oos = false;

    learn::Learner& learner = *result.learner;
    for (int t = 0; t < mdp.T; ++t) {
        auto tu = static_cast<std::size_t>(t);
        // reachable patterns: (t=0, start state) or (last action a_prev)
        for (int a_prev = -1; a_prev < mdp.A; ++a_prev) {
            int s;
            double state_mass = 0.0;
            if (t == 0) {
                if (a_prev != -1) continue;
                s = s0;
                state_mass = 1.0;
            } else {
                if (a_prev == -1) continue;
                s = mdp.next_state_of(a_prev);
                // mass of arriving at step t having just taken a_prev
                for (int sp = 0; sp < mdp.S; ++sp)
                    state_mass += occupancy[tu - 1][static_cast<std::size_t>(sp)]
                                            [static_cast<std::size_t>(a_prev)];
                if (state_mass <= 1e-12) continue;
            }
            auto su = static_cast<std::size_t>(s);
            auto sb = pattern_state(mdp, t, a_prev);
            nn::Tensor q_learned;
            if (learner.critic() != nullptr) q_learned = learner.critic()->q_values(sb, false);

            // in-support vs out-of-support actions at (t, s)
            for (int a = 0; a < mdp.A; ++a) {
                auto au = static_cast<std::size_t>(a);
                bool in_support =
                    logging_policy.probs[tu][su][au] > 0.0 && state_mass > 1e-12;
                if (learner.critic() == nullptr) continue;
                double q_hat = q_learned(0, au);
                if (in_support) {
                    max_q_err = std::max(max_q_err, std::abs(q_hat - q_dp[tu][su][au]));
                } else {
                    has_oos = true;
                    max_oos_excess = std::max(max_oos_excess, q_hat - max_ret[tu][su]);
                }
            }

            if (learner.policy() != nullptr) {
                nn::Tensor logp = learner.policy()->log_probs(sb);
                // oracle row: softmax(Q_dp / alpha)
                double alpha = std::max(cfg.learner.alpha, 1e-12);
                double mx = -1e308;
                for (int a = 0; a < mdp.A; ++a) mx = std::max(mx, q_dp[tu][su]
                                                                  [static_cast<std::size_t>(a)]);
                double z = 0.0;
                for (int a = 0; a < mdp.A; ++a)
                    z += std::exp((q_dp[tu][su][static_cast<std::size_t>(a)] - mx) / alpha);
                double kl = 0.0;
                for (int a = 0; a < mdp.A; ++a) {
                    double po = std::exp((q_dp[tu][su][static_cast<std::size_t>(a)] - mx) / alpha) / z;
                    if (po > 0.0) kl += po * (std::log(po) - logp(0, static_cast<std::size_t>(a)));
                }
                kl_sum += state_mass * kl;
                kl_weight += state_mass;
            }
        }
    }

    report.fixture = "";
    report.max_insupport_q_err = max_q_err;
    report.policy_kl = kl_weight > 0.0 ? kl_sum / kl_weight : 0.0;
    report.has_oos = has_oos;
    report.max_oos_excess = has_oos ? max_oos_excess : 0.0;
    report.q_ok = max_q_err <= tol.max_q_err;
    report.kl_ok = report.policy_kl <= tol.max_policy_kl;
    report.oos_detected = has_oos && max_oos_excess > tol.witness_margin;
    report.oos_bounded = !has_oos || max_oos_excess <= tol.oos_bound_margin;
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

bool verify_case_passes(const VerifyCase& vcase, const VerifyReport& report) {
    if (report.diverged) return false;
    bool ok = true;
    if (vcase.expect_equivalence) ok = ok && report.q_ok && report.kl_ok;
    if (vcase.expect_witness) ok = ok && report.oos_detected;
    if (vcase.expect_bounded) ok = ok && report.oos_bounded;
    return ok;
}

VerifyReport run_verify_case(const VerifyCase& vcase, const VerifyConfig& cfg,
                             const VerifyTolerances& tol) {
    TabularMDP mdp = fixture_by_name(vcase.fixture);
    TabularPolicy logging =
        vcase.fixture == "twosupport6"
            ? restricted_logging_policy(mdp, {0, 1})
            : uniform_logging_policy(mdp);
    auto report = verify_learner(learn::learner_kind_from_string(vcase.learner), mdp, logging,
                                 cfg, tol);
    report.fixture = vcase.fixture;
    return report;
}

}  // namespace offrec::oracle
