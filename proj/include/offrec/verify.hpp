#pragma once

#include <string>

#include "offrec/oracle.hpp"
#include "offrec/trainer.hpp"

namespace offrec::oracle {

struct VerifyTolerances {
    double max_q_err = 1e-2;       // in-support |Q_learned - Q_dp|
    double max_policy_kl = 1e-2;   // occupancy-weighted KL(oracle || learned)
    double oos_bound_margin = 0.1; // bounded learners: Q <= max-return + margin
    double witness_margin = 0.0;   // witness: some oos Q must exceed max-return + margin
};

struct VerifyConfig {
    int n_episodes = 50000;
    int steps = 20000;
    learn::LearnerConfig learner;
    learn::TrainOptions train;
    std::uint64_t seed = 1;
};

// preset tuned for the bundled fixtures (tabular features, gamma = 1)
VerifyConfig default_verify_config();

struct VerifyReport {
    std::string fixture;
    std::string learner;
    double max_insupport_q_err = 0.0;
    double policy_kl = 0.0;
    double max_oos_excess = 0.0;  // max over (t, s, oos a) of Q - maxreturn(t, s)
    bool has_oos = false;
    bool q_ok = false;
    bool kl_ok = false;
    bool oos_detected = false;   // overestimation beyond the witness margin
    bool oos_bounded = false;    // all oos Q within max-return + margin
    double seconds = 0.0;
    bool diverged = false;
    std::string divergence_message;
};

// Trains `kind` on logs from `logging_policy` with the tabular feature map
// and compares against the exact DP solutions. The MDP must be
// action-determined with a deterministic initial state.
VerifyReport verify_learner(learn::LearnerKind kind, const TabularMDP& mdp,
                            const TabularPolicy& logging_policy, const VerifyConfig& cfg,
                            const VerifyTolerances& tol);

// Fixture-specific expectations: chain5 pairs check Q and policy agreement;
// twosupport6 expects the extrapolation witness for sdac and bounded
// out-of-support values for dc and sr.
struct VerifyCase {
    std::string fixture;
    std::string learner;
    bool expect_equivalence = false;
    bool expect_witness = false;
    bool expect_bounded = false;
};

bool verify_case_passes(const VerifyCase& vcase, const VerifyReport& report);
VerifyReport run_verify_case(const VerifyCase& vcase, const VerifyConfig& cfg,
                             const VerifyTolerances& tol);

}  // namespace offrec::oracle
