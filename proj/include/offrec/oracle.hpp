#pragma once

#include <string>
#include <vector>

#include "offrec/data.hpp"
#include "offrec/rng.hpp"

namespace offrec::oracle {

// Exact finite MDP. P[s][a][s'] are transition probabilities, R[s][a] are
// nonpositive rewards, rho0 the initial distribution, T the horizon.
struct TabularMDP {
    int S = 0;
    int A = 0;
    std::vector<std::vector<std::vector<double>>> P;
    std::vector<std::vector<double>> R;
    std::vector<double> rho0;
    int T = 1;
    double gamma = 1.0;

    void validate() const;
    // true when s' depends only on the action, deterministically; such MDPs
    // let a (last action, timestep) feature identify the state exactly
    bool action_determined() const;
    int next_state_of(int action) const;
};

TabularMDP load_mdp_json(const std::string& path);
void save_mdp_json(const TabularMDP& mdp, const std::string& path);

// Backward messages in log domain with the uniform action prior:
//   log beta_T(s, a) = R[s, a] / alpha
//   log beta_t(s)    = log mean_a exp(log beta_t(s, a))
//   log beta_t(s, a) = R[s, a]/alpha + log sum_{s'} P[s,a,s'] exp(log beta_{t+1}(s'))
// Q_soft[t][s][a] = alpha * log beta_t(s, a).
struct MessageTable {
    int T = 0;
    double alpha = 1.0;
    std::vector<std::vector<std::vector<double>>> log_beta_sa;  // [t][s][a], t in [0, T)
    std::vector<std::vector<double>> log_beta_s;                // [t][s]

    double q_soft(int t, int s, int a) const { return alpha * log_beta_sa[t][s][a]; }
};

MessageTable backward_messages(const TabularMDP& mdp, double alpha);

// Time-indexed policy table; probs[t][s][a].
struct TabularPolicy {
    std::vector<std::vector<std::vector<double>>> probs;

    int horizon() const { return static_cast<int>(probs.size()); }
    const std::vector<double>& row(int t, int s) const { return probs[t][s]; }
    static TabularPolicy uniform(int T, int S, int A);
    static TabularPolicy stationary(int T, const std::vector<std::vector<double>>& per_state);
};

// Posterior policy per message recursion: pi_t(a|s) = beta(s,a)/beta(s) / A,
// equivalently softmax_a(Q_soft[t][s][.] / alpha).
TabularPolicy posterior_policy(const MessageTable& messages);

// Exact negative evidence lower bound of a policy:
//   E_q [ sum_t log q(a_t|s_t) - r(s_t, a_t)/alpha ]
// computed by forward dynamic programming over state marginals.
double elbo(const TabularMDP& mdp, const TabularPolicy& policy, double alpha);

// Finite-horizon soft Q tables matching the parametric critic's backup
// (no action prior, discounted bootstrap, mean over next states):
//   Q_T(s, a)  = R[s, a]
//   Q_t(s, a)  = R[s, a] + gamma * sum_{s'} P[s,a,s'] * V_{t+1}(s')
//   V_t(s)     = alpha * log sum_a exp(Q_t(s, a)/alpha)
// On deterministic transitions with gamma = 1 this equals Q_soft plus
// alpha*log(A)*(T-t-1), so the per-state softmax policies coincide with the
// posterior policy. (On stochastic transitions the message recursion backs
// up log E exp(V/alpha) instead of E[V]; a squared-loss critic regresses to
// the mean, which is what learner verification must compare against.)
std::vector<std::vector<std::vector<double>>> soft_q_dp(const TabularMDP& mdp, double alpha,
                                                        double gamma);

// Maximum attainable (discounted) return-to-go by any policy: [t][s].
std::vector<std::vector<double>> max_return_dp(const TabularMDP& mdp, double gamma);

// State-action occupancy d[t][s][a] under a policy (probability of being in
// (s, a) at step t).
std::vector<std::vector<std::vector<double>>> occupancy_dp(const TabularMDP& mdp,
                                                           const TabularPolicy& policy);

// Brute-force check value: sum over all trajectories of
//   rho0(s1) * prod_t P(s_{t+1}|s_t,a_t) * (1/A)^T * exp(sum_t R/alpha),
// conditioned on a start state; used to validate the message recursion.
double enumerate_trajectory_mass(const TabularMDP& mdp, double alpha, int start_state);
// log beta_1(s) equivalent from the messages, for the same comparison
double message_trajectory_mass(const MessageTable& messages, int start_state);

struct RolloutResult {
    data::ReplayBuffer buffer;            // window-1 transitions with exact MDP rewards
    std::vector<data::Session> sessions;  // action sequences, one per episode
};

// Rolls out n_episodes of the logging policy. States in the emitted buffer
// are action-prefix windows; rewards are the exact R[s, a] values.
RolloutResult generate_logs(const TabularMDP& mdp, const TabularPolicy& logging_policy,
                            int n_episodes, std::uint64_t seed, int window = 1);

// Bundled fixtures.
TabularMDP fixture_chain5();
TabularMDP fixture_twosupport6();
TabularMDP fixture_loop3();
TabularMDP fixture_by_name(const std::string& name);

// Logging policies used by verification: full-support uniform, or uniform
// over a restricted action set.
TabularPolicy uniform_logging_policy(const TabularMDP& mdp);
TabularPolicy restricted_logging_policy(const TabularMDP& mdp, const std::vector<int>& support);

}  // namespace offrec::oracle
