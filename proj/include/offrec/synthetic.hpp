#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "offrec/data.hpp"

namespace offrec::data {

struct SyntheticConfig {
    int n_sessions = 5000;
    int catalog = 200;
    int min_len = 3;
    int max_len = 12;
    // logging behavior: with prob follow_prob the session follows the planted
    // successor pattern of the previous item, otherwise picks by popularity
    double follow_prob = 0.7;
    int successors = 5;  // planted successor set size per item
    double purchase_prob_follow = 0.25;
    double purchase_prob_other = 0.03;
    double zipf_exponent = 1.1;  // popularity skew
};

// Session logs with a planted sequential pattern: each item has a preferred
// successor set, the logging policy mostly follows it, and purchases
// correlate with pattern-following steps. Same CSV schema as real exports.
std::vector<Session> generate_synthetic_sessions(const SyntheticConfig& cfg, std::uint64_t seed);

void write_sessions_csv(const std::vector<Session>& sessions, const std::string& path);

}  // namespace offrec::data
