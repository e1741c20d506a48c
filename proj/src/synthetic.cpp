#include "offrec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "offrec/rng.hpp"

namespace offrec::data {

std::vector<Session> generate_synthetic_sessions(const SyntheticConfig& cfg, std::uint64_t seed) {
    if (cfg.catalog < 2 || cfg.n_sessions < 1 || cfg.min_len < 1 || cfg.max_len < cfg.min_len)
        throw ConfigError("synthetic: invalid generator config");
    Rng rng = Rng::stream(seed, "synthetic");

    // popularity weights ~ 1 / rank^zipf
    std::vector<double> pop(static_cast<std::size_t>(cfg.catalog));
    double z = 0.0;
    for (int i = 0; i < cfg.catalog; ++i) {
        pop[static_cast<std::size_t>(i)] =
            1.0 / std::pow(static_cast<double>(i + 1), cfg.zipf_exponent);
        z += pop[static_cast<std::size_t>(i)];
    }
    for (double& p : pop) p /= z;

    auto sample_popular = [&]() {
        double u = rng.uniform();
        double acc = 0.0;
        for (int i = 0; i < cfg.catalog; ++i) {
            acc += pop[static_cast<std::size_t>(i)];
            if (u <= acc) return i;
        }
        return cfg.catalog - 1;
    };

    // planted successor sets, deterministic in the seed
    std::vector<std::vector<int>> successors(static_cast<std::size_t>(cfg.catalog));
    for (int i = 0; i < cfg.catalog; ++i) {
        auto& succ = successors[static_cast<std::size_t>(i)];
        for (int k = 0; k < cfg.successors; ++k)
            succ.push_back(static_cast<int>(rng.index(static_cast<std::uint64_t>(cfg.catalog))));
    }

    std::vector<Session> sessions;
    sessions.reserve(static_cast<std::size_t>(cfg.n_sessions));
    int digits =
        static_cast<int>(std::to_string(std::max(1, cfg.n_sessions - 1)).size());
    for (int sidx = 0; sidx < cfg.n_sessions; ++sidx) {
        Session session;
        std::string num = std::to_string(sidx);
        session.id = "u" + std::string(static_cast<std::size_t>(digits) - num.size(), '0') + num;
        int len = cfg.min_len +
                  static_cast<int>(rng.index(static_cast<std::uint64_t>(cfg.max_len - cfg.min_len + 1)));
        int prev = sample_popular();
        session.events.push_back(SessionEvent{prev, 0, Feedback::Click});
        for (int t = 1; t < len; ++t) {
            bool follow = rng.uniform() < cfg.follow_prob;
            int item;
            if (follow) {
                const auto& succ = successors[static_cast<std::size_t>(prev)];
                item = succ[rng.index(succ.size())];
            } else {
                item = sample_popular();
            }
            double p_buy = follow ? cfg.purchase_prob_follow : cfg.purchase_prob_other;
            Feedback fb = rng.uniform() < p_buy ? Feedback::Purchase : Feedback::Click;
            session.events.push_back(SessionEvent{item, t, fb});
            prev = item;
        }
        sessions.push_back(std::move(session));
    }
    return sessions;
}

void write_sessions_csv(const std::vector<Session>& sessions, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write sessions csv: " + path);
    out << "session_id,item_id,timestamp,behavior\n";
    for (const auto& s : sessions)
        for (const auto& e : s.events)
            out << s.id << "," << e.item << "," << e.timestamp << ","
                << (e.feedback == Feedback::Purchase ? "purchase" : "click") << "\n";
}

}  // namespace offrec::data
