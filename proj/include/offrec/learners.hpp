#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>

#include "offrec/data.hpp"
#include "offrec/models.hpp"

namespace offrec::learn {

using data::Batch;
using data::StateBatch;
using models::BehaviorModel;
using models::CriticModel;
using models::PolicyModel;
using nn::Tensor;

enum class LearnerKind { SL, DQN, SDAC, SC, SR, PC, DC, RE };

LearnerKind learner_kind_from_string(const std::string& s);
std::string learner_kind_to_string(LearnerKind k);
bool learner_needs_behavior(LearnerKind k);  // SC, DC, RE
bool learner_has_critic(LearnerKind k);      // all but SL
bool learner_has_actor(LearnerKind k);       // all but DQN

struct LearnerConfig {
    double alpha = 1.0;        // soft temperature; 0 selects the alpha-scaled limit
    double gamma = 0.99;       // discount on the bootstrap term
    double gumbel_temp = 1.0;  // gamma_g at the start of training
    double gumbel_temp_end = 0.1;
    double beta = 1.0;     // fixed coefficient (SC, PC), initial value (SR)
    double epsilon = 1.0;  // SR cross-entropy budget
    double delta = 0.0;    // SC support threshold
    double lr_actor = 1e-3;
    double lr_critic = 1e-3;
    double lr_dual = 1e-2;
    int batch_size = 256;
    bool polyak = false;
    int sync_period = 500;
    double tau = 0.005;
    int gumbel_samples = 1;       // M relaxed samples per actor step
    int expectation_samples = 0;  // 0 = exact expectation over all actions
    bool pc_use_online_critic = false;

    void validate(LearnerKind kind) const;
};

struct UpdateReport {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    std::map<std::string, double> aux;
    int step = 0;
};

// --- loss builders ---------------------------------------------------------
// Each constructs its loss on the given graph without touching parameters,
// so the finite-difference suite can drive exactly the production losses
// (with a fixed Gumbel stream). Updates below are build + backward + Adam.

struct ActorLossBuild {
    nn::Ref loss;  // scalar node
    nn::Ref logp;  // [batch, A]
    double value = 0.0;
    double entropy = 0.0;
    std::map<std::string, double> aux;
};

nn::Ref sl_loss(nn::Graph& g, PolicyModel& policy, const Batch& batch);

// squared-error critic regression against fixed targets y
nn::Ref critic_loss_ref(nn::Graph& g, CriticModel& critic, const Batch& batch,
                        const std::vector<double>& y);

ActorLossBuild sdac_actor_loss(nn::Graph& g, PolicyModel& policy, const Tensor& q,
                               const StateBatch& states, const LearnerConfig& cfg,
                               Rng& gumbel_rng);
ActorLossBuild dc_actor_loss(nn::Graph& g, PolicyModel& policy, const Tensor& q,
                             const Tensor& log_behavior, const StateBatch& states,
                             const LearnerConfig& cfg, Rng& gumbel_rng);
ActorLossBuild sc_actor_loss(nn::Graph& g, PolicyModel& policy, const Tensor& q,
                             const Tensor& log_behavior, const StateBatch& states,
                             const LearnerConfig& cfg, Rng& gumbel_rng);
ActorLossBuild sr_actor_loss(nn::Graph& g, PolicyModel& policy, const Tensor& q,
                             const Batch& batch, const LearnerConfig& cfg, Rng& gumbel_rng,
                             double dual_beta);
ActorLossBuild pc_actor_loss(nn::Graph& g, PolicyModel& policy, const Tensor& q_for_weights,
                             const Batch& batch, const LearnerConfig& cfg);

// --- per-operation updates ----------------------------------------------
// Each performs exactly one Adam step on its model(s).

// cross-entropy step on -mean log pi(a_t | s_t)
UpdateReport sl_update(PolicyModel& policy, const Batch& batch, const LearnerConfig& cfg);

// squared error to y = r + gamma * max_a Qbar(s', a); y = r when terminal
UpdateReport dqn_update(CriticModel& critic, const Batch& batch, const LearnerConfig& cfg);

// soft target variants share one backup with per-kind extras
enum class SoftTargetKind { SDAC, DC, RE };

// y per transition; exposed for tests
std::vector<double> soft_targets(CriticModel& critic, PolicyModel& policy,
                                 const BehaviorModel* behavior, const Batch& batch,
                                 const LearnerConfig& cfg, SoftTargetKind kind, Rng* expect_rng);

UpdateReport sdac_critic_update(CriticModel& critic, PolicyModel& policy, const Batch& batch,
                                const LearnerConfig& cfg, Rng* expect_rng = nullptr);

UpdateReport sdac_actor_update(PolicyModel& policy, CriticModel& critic, const StateBatch& states,
                               const LearnerConfig& cfg, Rng& gumbel_rng);

UpdateReport sc_actor_update(PolicyModel& policy, CriticModel& critic,
                             const BehaviorModel& behavior, const StateBatch& states,
                             const LearnerConfig& cfg, Rng& gumbel_rng);

// dual_beta is the adaptive multiplier state; updated by dual ascent on the
// cross-entropy residual after the actor step
UpdateReport sr_actor_update(PolicyModel& policy, CriticModel& critic, const Batch& batch,
                             const LearnerConfig& cfg, Rng& gumbel_rng, double& dual_beta);

UpdateReport pc_actor_update(PolicyModel& policy, CriticModel& critic, const Batch& batch,
                             const LearnerConfig& cfg);

UpdateReport dc_critic_update(CriticModel& critic, PolicyModel& policy,
                              const BehaviorModel& behavior, const Batch& batch,
                              const LearnerConfig& cfg, Rng* expect_rng = nullptr);

UpdateReport dc_actor_update(PolicyModel& policy, CriticModel& critic,
                             const BehaviorModel& behavior, const StateBatch& states,
                             const LearnerConfig& cfg, Rng& gumbel_rng);

// RE rewrites rewards as r + alpha * log pi_b_hat(a_t|s_t) (clamped), then
// runs the SDAC updates unchanged.
Batch re_augment_rewards(const Batch& batch, const BehaviorModel& behavior,
                         const LearnerConfig& cfg);

// log-probability floor used when consuming estimated logging policies
constexpr double kLogProbFloor = -18.420680743952367;  // log(1e-8)

// --- learner wrapper -------------------------------------------------------

// Owns the models for one training run and applies one full update per
// minibatch (critic step, actor step, target sync, dual ascent).
class Learner {
 public:
    Learner(LearnerKind kind, models::EncoderConfig actor_cfg, int catalog, LearnerConfig cfg,
            std::uint64_t seed);

    void set_behavior(std::shared_ptr<BehaviorModel> behavior);

    UpdateReport update(const Batch& batch);

    // ranking scores over items for evaluation: policy log-probs, or Q for DQN
    Tensor scores(const StateBatch& states) const;

    LearnerKind kind() const { return kind_; }
    PolicyModel* policy() { return policy_ ? policy_.get() : nullptr; }
    const PolicyModel* policy() const { return policy_ ? policy_.get() : nullptr; }
    CriticModel* critic() { return critic_ ? critic_.get() : nullptr; }
    const CriticModel* critic() const { return critic_ ? critic_.get() : nullptr; }
    const BehaviorModel* behavior() const { return behavior_.get(); }
    double dual_beta() const { return dual_beta_; }
    int step() const { return step_; }
    const LearnerConfig& config() const { return cfg_; }
    void set_gumbel_temp(double t) { cfg_.gumbel_temp = t; }

 private:
    LearnerKind kind_;
    LearnerConfig cfg_;
    std::unique_ptr<PolicyModel> policy_;
    std::unique_ptr<CriticModel> critic_;
    std::shared_ptr<BehaviorModel> behavior_;
    Rng gumbel_rng_;
    Rng expect_rng_;
    double dual_beta_ = 0.0;
    int step_ = 0;
};

}  // namespace offrec::learn
