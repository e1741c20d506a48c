#include "offrec/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace offrec::oracle {

namespace {

double log_sum_exp(const std::vector<double>& xs) {
    double mx = -1e308;
    for (double x : xs) mx = std::max(mx, x);
    if (mx == -1e308) return mx;
    double sum = 0.0;
    for (double x : xs) sum += std::exp(x - mx);
    return mx + std::log(sum);
}

}  // namespace

void TabularMDP::validate() const {
    if (S < 1 || A < 1) throw ConfigError("mdp: S and A must be >= 1");
    if (T < 1 || T > 20) throw ConfigError("mdp: horizon T must be in [1, 20]");
    if (static_cast<long long>(S) * A > 10000) throw ConfigError("mdp: S*A exceeds 10^4");
    if (static_cast<int>(P.size()) != S || static_cast<int>(R.size()) != S ||
        static_cast<int>(rho0.size()) != S)
        throw ConfigError("mdp: table sizes do not match S");
    double rsum = 0.0;
    for (double p : rho0) rsum += p;
    if (std::abs(rsum - 1.0) > 1e-12) throw ConfigError("mdp: rho0 must sum to 1");
    for (int s = 0; s < S; ++s) {
        if (static_cast<int>(P[s].size()) != A || static_cast<int>(R[s].size()) != A)
            throw ConfigError("mdp: row sizes do not match A");
        for (int a = 0; a < A; ++a) {
            if (R[s][a] > 0.0) throw ConfigError("mdp: rewards must be <= 0");
            if (static_cast<int>(P[s][a].size()) != S)
                throw ConfigError("mdp: P[s][a] size does not match S");
            double psum = 0.0;
            for (double p : P[s][a]) {
                if (p < 0.0) throw ConfigError("mdp: negative transition probability");
                psum += p;
            }
            if (std::abs(psum - 1.0) > 1e-12) throw ConfigError("mdp: P[s][a] must sum to 1");
        }
    }
}

bool TabularMDP::action_determined() const {
    for (int a = 0; a < A; ++a) {
        int target = -1;
        for (int s = 0; s < S; ++s) {
            int det = -1;
            for (int s2 = 0; s2 < S; ++s2) {
                if (P[s][a][s2] == 1.0)
                    det = s2;
                else if (P[s][a][s2] != 0.0)
                    return false;
            }
            if (det < 0) return false;
            if (target < 0)
                target = det;
            else if (target != det)
                return false;
        }
    }
    return true;
}

int TabularMDP::next_state_of(int action) const {
    for (int s2 = 0; s2 < S; ++s2)
        if (P[0][action][s2] == 1.0) return s2;
    throw UsageError("next_state_of: MDP is not action-determined");
}

TabularMDP load_mdp_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("mdp: cannot open " + path);
    nlohmann::json j;
    in >> j;
    TabularMDP mdp;
    mdp.S = j.at("S").get<int>();
    mdp.A = j.at("A").get<int>();
    mdp.P = j.at("P").get<std::vector<std::vector<std::vector<double>>>>();
    mdp.R = j.at("R").get<std::vector<std::vector<double>>>();
    mdp.rho0 = j.at("rho0").get<std::vector<double>>();
    mdp.T = j.at("T").get<int>();
    mdp.gamma = j.at("gamma").get<double>();
    mdp.validate();
    return mdp;
}

void save_mdp_json(const TabularMDP& mdp, const std::string& path) {
    nlohmann::json j;
    j["S"] = mdp.S;
    j["A"] = mdp.A;
    j["P"] = mdp.P;
    j["R"] = mdp.R;
    j["rho0"] = mdp.rho0;
    j["T"] = mdp.T;
    j["gamma"] = mdp.gamma;
    std::ofstream out(path);
    if (!out) throw DataError("mdp: cannot write " + path);
    out << j.dump(2) << "\n";
}

MessageTable backward_messages(const TabularMDP& mdp, double alpha) {
    mdp.validate();
    if (alpha <= 0.0) throw ConfigError("backward_messages: alpha must be > 0");
    MessageTable mt;
    mt.T = mdp.T;
    mt.alpha = alpha;
    mt.log_beta_sa.assign(
        static_cast<std::size_t>(mdp.T),
        std::vector<std::vector<double>>(static_cast<std::size_t>(mdp.S),
                                         std::vector<double>(static_cast<std::size_t>(mdp.A), 0.0)));
    mt.log_beta_s.assign(static_cast<std::size_t>(mdp.T),
                         std::vector<double>(static_cast<std::size_t>(mdp.S), 0.0));

    double log_inv_a = -std::log(static_cast<double>(mdp.A));
    for (int t = mdp.T - 1; t >= 0; --t) {
        auto tu = static_cast<std::size_t>(t);
        for (int s = 0; s < mdp.S; ++s) {
            auto su = static_cast<std::size_t>(s);
            for (int a = 0; a < mdp.A; ++a) {
                double lb = mdp.R[s][a] / alpha;
                if (t + 1 < mdp.T) {
                    std::vector<double> terms;
                    terms.reserve(static_cast<std::size_t>(mdp.S));
                    for (int s2 = 0; s2 < mdp.S; ++s2) {
                        double p = mdp.P[s][a][s2];
                        if (p > 0.0)
                            terms.push_back(std::log(p) +
                                            mt.log_beta_s[tu + 1][static_cast<std::size_t>(s2)]);
                    }
                    lb += log_sum_exp(terms);
                }
                mt.log_beta_sa[tu][su][static_cast<std::size_t>(a)] = lb;
            }
            mt.log_beta_s[tu][su] = log_sum_exp(mt.log_beta_sa[tu][su]) + log_inv_a;
        }
    }
    return mt;
}

TabularPolicy TabularPolicy::uniform(int T, int S, int A) {
    TabularPolicy p;
    p.probs.assign(static_cast<std::size_t>(T),
                   std::vector<std::vector<double>>(
                       static_cast<std::size_t>(S),
                       std::vector<double>(static_cast<std::size_t>(A),
                                           1.0 / static_cast<double>(A))));
    return p;
}

TabularPolicy TabularPolicy::stationary(int T, const std::vector<std::vector<double>>& per_state) {
    TabularPolicy p;
    p.probs.assign(static_cast<std::size_t>(T), per_state);
    return p;
}

TabularPolicy posterior_policy(const MessageTable& messages) {
    TabularPolicy policy;
    policy.probs.resize(messages.log_beta_sa.size());
    for (std::size_t t = 0; t < messages.log_beta_sa.size(); ++t) {
        policy.probs[t].resize(messages.log_beta_sa[t].size());
        for (std::size_t s = 0; s < messages.log_beta_sa[t].size(); ++s) {
            const auto& row = messages.log_beta_sa[t][s];
            double lse = log_sum_exp(row);
            policy.probs[t][s].resize(row.size());
            for (std::size_t a = 0; a < row.size(); ++a)
                policy.probs[t][s][a] = std::exp(row[a] - lse);
        }
    }
    return policy;
}

double elbo(const TabularMDP& mdp, const TabularPolicy& policy, double alpha) {
    if (policy.horizon() != mdp.T) throw UsageError("elbo: policy horizon mismatch");
    std::vector<double> d = mdp.rho0;
    double total = 0.0;
    for (int t = 0; t < mdp.T; ++t) {
        std::vector<double> d_next(static_cast<std::size_t>(mdp.S), 0.0);
        for (int s = 0; s < mdp.S; ++s) {
            if (d[static_cast<std::size_t>(s)] == 0.0) continue;
            for (int a = 0; a < mdp.A; ++a) {
                double pa = policy.probs[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)]
                                        [static_cast<std::size_t>(a)];
                if (pa == 0.0) continue;
                double w = d[static_cast<std::size_t>(s)] * pa;
                total += w * (std::log(pa) - mdp.R[s][a] / alpha);
                for (int s2 = 0; s2 < mdp.S; ++s2)
                    d_next[static_cast<std::size_t>(s2)] += w * mdp.P[s][a][s2];
            }
        }
        d = std::move(d_next);
    }
    return total;
}

std::vector<std::vector<std::vector<double>>> soft_q_dp(const TabularMDP& mdp, double alpha,
                                                        double gamma) {
    if (alpha <= 0.0) throw ConfigError("soft_q_dp: alpha must be > 0");
    std::vector<std::vector<std::vector<double>>> Q(
        static_cast<std::size_t>(mdp.T),
        std::vector<std::vector<double>>(static_cast<std::size_t>(mdp.S),
                                         std::vector<double>(static_cast<std::size_t>(mdp.A))));
    std::vector<double> v_next(static_cast<std::size_t>(mdp.S), 0.0);
    for (int t = mdp.T - 1; t >= 0; --t) {
        auto tu = static_cast<std::size_t>(t);
        std::vector<double> v(static_cast<std::size_t>(mdp.S), 0.0);
        for (int s = 0; s < mdp.S; ++s) {
            auto su = static_cast<std::size_t>(s);
            std::vector<double> scaled(static_cast<std::size_t>(mdp.A));
            for (int a = 0; a < mdp.A; ++a) {
                double q = mdp.R[s][a];
                if (t + 1 < mdp.T)
                    for (int s2 = 0; s2 < mdp.S; ++s2)
                        q += gamma * mdp.P[s][a][s2] * v_next[static_cast<std::size_t>(s2)];
                Q[tu][su][static_cast<std::size_t>(a)] = q;
                scaled[static_cast<std::size_t>(a)] = q / alpha;
            }
            v[su] = alpha * log_sum_exp(scaled);
        }
        v_next = std::move(v);
    }
    return Q;
}

std::vector<std::vector<double>> max_return_dp(const TabularMDP& mdp, double gamma) {
    std::vector<std::vector<double>> M(static_cast<std::size_t>(mdp.T),
                                       std::vector<double>(static_cast<std::size_t>(mdp.S), 0.0));
    std::vector<double> v_next(static_cast<std::size_t>(mdp.S), 0.0);
    for (int t = mdp.T - 1; t >= 0; --t) {
        std::vector<double> v(static_cast<std::size_t>(mdp.S), -1e308);
        for (int s = 0; s < mdp.S; ++s) {
            for (int a = 0; a < mdp.A; ++a) {
                double q = mdp.R[s][a];
                if (t + 1 < mdp.T)
                    for (int s2 = 0; s2 < mdp.S; ++s2)
                        q += gamma * mdp.P[s][a][s2] * v_next[static_cast<std::size_t>(s2)];
                v[static_cast<std::size_t>(s)] = std::max(v[static_cast<std::size_t>(s)], q);
            }
            M[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)] =
                v[static_cast<std::size_t>(s)];
        }
        v_next = v;
    }
    return M;
}

std::vector<std::vector<std::vector<double>>> occupancy_dp(const TabularMDP& mdp,
                                                           const TabularPolicy& policy) {
    std::vector<std::vector<std::vector<double>>> d(
        static_cast<std::size_t>(mdp.T),
        std::vector<std::vector<double>>(
            static_cast<std::size_t>(mdp.S),
            std::vector<double>(static_cast<std::size_t>(mdp.A), 0.0)));
    std::vector<double> ds = mdp.rho0;
    for (int t = 0; t < mdp.T; ++t) {
        std::vector<double> ds_next(static_cast<std::size_t>(mdp.S), 0.0);
        for (int s = 0; s < mdp.S; ++s) {
            for (int a = 0; a < mdp.A; ++a) {
                double w = ds[static_cast<std::size_t>(s)] *
                           policy.probs[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)]
                                       [static_cast<std::size_t>(a)];
                d[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)]
                 [static_cast<std::size_t>(a)] = w;
                if (w == 0.0) continue;
                for (int s2 = 0; s2 < mdp.S; ++s2)
                    ds_next[static_cast<std::size_t>(s2)] += w * mdp.P[s][a][s2];
            }
        }
        ds = std::move(ds_next);
    }
    return d;
}

namespace {

double enumerate_rec(const TabularMDP& mdp, double alpha, int t, int s, double log_weight) {
    double total = 0.0;
    double log_inv_a = -std::log(static_cast<double>(mdp.A));
    for (int a = 0; a < mdp.A; ++a) {
        double lw = log_weight + log_inv_a + mdp.R[s][a] / alpha;
        if (t + 1 == mdp.T) {
            total += std::exp(lw);
            continue;
        }
        for (int s2 = 0; s2 < mdp.S; ++s2) {
            double p = mdp.P[s][a][s2];
            if (p > 0.0) total += enumerate_rec(mdp, alpha, t + 1, s2, lw + std::log(p));
        }
    }
    return total;
}

}  // namespace

double enumerate_trajectory_mass(const TabularMDP& mdp, double alpha, int start_state) {
    return enumerate_rec(mdp, alpha, 0, start_state, 0.0);
}

double message_trajectory_mass(const MessageTable& messages, int start_state) {
    return std::exp(messages.log_beta_s[0][static_cast<std::size_t>(start_state)]);
}

RolloutResult generate_logs(const TabularMDP& mdp, const TabularPolicy& logging_policy,
                            int n_episodes, std::uint64_t seed, int window) {
    mdp.validate();
    if (logging_policy.horizon() != mdp.T)
        throw UsageError("generate_logs: policy horizon mismatch");
    Rng rng = Rng::stream(seed, "rollout");

    RolloutResult out;
    out.buffer.catalog = mdp.A;
    out.buffer.window = window;
    data::ItemId pad = out.buffer.pad_id();

    auto sample_from = [&](const std::vector<double>& probs) {
        double u = rng.uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u <= acc) return static_cast<int>(i);
        }
        return static_cast<int>(probs.size()) - 1;
    };

    int digits = static_cast<int>(std::to_string(std::max(1, n_episodes - 1)).size());
    for (int ep = 0; ep < n_episodes; ++ep) {
        int s = sample_from(mdp.rho0);
        std::vector<int> actions;
        data::Session session;
        std::string num = std::to_string(ep);
        session.id = "ep" + std::string(static_cast<std::size_t>(digits) - num.size(), '0') + num;
        for (int t = 0; t < mdp.T; ++t) {
            int a = sample_from(
                logging_policy.probs[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)]);
            data::Transition tr;
            tr.state.assign(static_cast<std::size_t>(window), pad);
            tr.state_len = t;
            for (int k = 0; k < t && k < window; ++k)
                tr.state[static_cast<std::size_t>(window - 1 - k)] =
                    actions[static_cast<std::size_t>(t - 1 - k)];
            tr.action = a;
            tr.reward = mdp.R[s][a];
            actions.push_back(a);
            tr.next_state.assign(static_cast<std::size_t>(window), pad);
            tr.next_state_len = t + 1;
            for (int k = 0; k <= t && k < window; ++k)
                tr.next_state[static_cast<std::size_t>(window - 1 - k)] =
                    actions[static_cast<std::size_t>(t - k)];
            tr.terminal = (t + 1 == mdp.T);
            out.buffer.transitions.push_back(std::move(tr));

            session.events.push_back(
                data::SessionEvent{a, static_cast<std::int64_t>(t), data::Feedback::Click});
            s = sample_from(mdp.P[s][a]);
        }
        out.sessions.push_back(std::move(session));
    }
    return out;
}

TabularMDP fixture_chain5() {
    // 5 states, 4 actions. Action-determined: action a leads to state a;
    // state 4 is the fixed initial state. Rewards vary per (s, a).
    TabularMDP mdp;
    mdp.S = 5;
    mdp.A = 4;
    mdp.T = 16;
    mdp.gamma = 1.0;
    mdp.rho0 = {0, 0, 0, 0, 1};
    mdp.P.assign(5, std::vector<std::vector<double>>(4, std::vector<double>(5, 0.0)));
    for (int s = 0; s < 5; ++s)
        for (int a = 0; a < 4; ++a) mdp.P[s][a][a] = 1.0;
    mdp.R.assign(5, std::vector<double>(4, 0.0));
    for (int s = 0; s < 5; ++s)
        for (int a = 0; a < 4; ++a) mdp.R[s][a] = -0.1 * static_cast<double>((s + 2 * a + 1) % 5);
    return mdp;
}

TabularMDP fixture_twosupport6() {
    // 6 states, 6 actions, action-determined. Action 0 is mildly costly,
    // action 1 clearly bad, the rest in between; the verification logging
    // policy covers only actions {0, 1}.
    TabularMDP mdp;
    mdp.S = 6;
    mdp.A = 6;
    mdp.T = 16;
    mdp.gamma = 1.0;
    mdp.rho0 = {0, 0, 0, 0, 0, 1};
    mdp.P.assign(6, std::vector<std::vector<double>>(6, std::vector<double>(6, 0.0)));
    for (int s = 0; s < 6; ++s)
        for (int a = 0; a < 6; ++a) mdp.P[s][a][a] = 1.0;
    mdp.R.assign(6, std::vector<double>(6, 0.0));
    for (int s = 0; s < 6; ++s) {
        mdp.R[s][0] = -0.2;
        mdp.R[s][1] = -3.0;
        for (int a = 2; a < 6; ++a)
            mdp.R[s][a] = -0.2 - 0.1 * static_cast<double>((s + a) % 3);
    }
    return mdp;
}

TabularMDP fixture_loop3() {
    // 3 states, 2 actions, stochastic transitions; exercises the recursion
    // on a genuinely probabilistic chain (not learner-verifiable).
    TabularMDP mdp;
    mdp.S = 3;
    mdp.A = 2;
    mdp.T = 5;
    mdp.gamma = 1.0;
    mdp.rho0 = {0.5, 0.25, 0.25};
    mdp.P.assign(3, std::vector<std::vector<double>>(2, std::vector<double>(3, 0.0)));
    mdp.P[0][0] = {0.7, 0.3, 0.0};
    mdp.P[0][1] = {0.1, 0.2, 0.7};
    mdp.P[1][0] = {0.0, 0.5, 0.5};
    mdp.P[1][1] = {0.9, 0.1, 0.0};
    mdp.P[2][0] = {0.3, 0.3, 0.4};
    mdp.P[2][1] = {0.0, 0.0, 1.0};
    mdp.R = {{-0.5, -1.0}, {0.0, -2.0}, {-0.25, -0.75}};
    return mdp;
}

TabularMDP fixture_by_name(const std::string& name) {
    if (name == "chain5") return fixture_chain5();
    if (name == "twosupport6") return fixture_twosupport6();
    if (name == "loop3") return fixture_loop3();
    throw ConfigError("unknown fixture: " + name);
}

TabularPolicy uniform_logging_policy(const TabularMDP& mdp) {
    return TabularPolicy::uniform(mdp.T, mdp.S, mdp.A);
}

TabularPolicy restricted_logging_policy(const TabularMDP& mdp, const std::vector<int>& support) {
    if (support.empty()) throw UsageError("restricted_logging_policy: empty support");
    std::vector<std::vector<double>> per_state(
        static_cast<std::size_t>(mdp.S),
        std::vector<double>(static_cast<std::size_t>(mdp.A), 0.0));
    for (auto& row : per_state)
        for (int a : support)
            row[static_cast<std::size_t>(a)] = 1.0 / static_cast<double>(support.size());
    return TabularPolicy::stationary(mdp.T, per_state);
}

}  // namespace offrec::oracle
