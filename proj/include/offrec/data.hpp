#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "offrec/errors.hpp"

namespace offrec::data {

using ItemId = int;

enum class Feedback { Click, Purchase };

struct SessionEvent {
    ItemId item = 0;
    std::int64_t timestamp = 0;
    Feedback feedback = Feedback::Click;
};

struct Session {
    std::string id;
    std::vector<SessionEvent> events;  // ascending timestamp, ties by input order
};

// Maps raw feedback values to rewards, then shifts so the maximum mapped
// reward is exactly 0 (rewards must be nonpositive).
struct RewardMap {
    double click_reward = 0.2;
    double purchase_reward = 1.0;

    double shift() const {
        return -(click_reward > purchase_reward ? click_reward : purchase_reward);
    }
    double reward(Feedback f) const {
        return (f == Feedback::Click ? click_reward : purchase_reward) + shift();
    }
};

// One logged step. The state is a fixed-length window of the most recent
// item ids (most recent last, left-padded with pad_id) plus the true prefix
// length, which the window may have truncated.
struct Transition {
    std::vector<ItemId> state;
    int state_len = 0;  // true prefix length
    ItemId action = 0;
    double reward = 0.0;
    std::vector<ItemId> next_state;
    int next_state_len = 0;
    bool terminal = false;
    Feedback feedback = Feedback::Click;
};

struct ReplayBuffer {
    std::vector<Transition> transitions;
    int catalog = 0;  // number of real items; pad id == catalog
    int window = 0;

    ItemId pad_id() const { return catalog; }
    std::size_t size() const { return transitions.size(); }
    bool empty() const { return transitions.empty(); }
};

struct IngestResult {
    std::vector<Session> sessions;       // session-id order
    int catalog = 0;                     // dense item count
    std::vector<std::string> raw_ids;    // dense id -> raw id
    std::size_t malformed_rows = 0;
    std::size_t dropped_short_sessions = 0;
};

struct IngestConfig {
    int min_length = 3;
    // column names, overridable for odd exports
    std::string col_session = "session_id";
    std::string col_item = "item_id";
    std::string col_timestamp = "timestamp";
    std::string col_behavior = "behavior";
};

// CSV with header session_id,item_id,timestamp,behavior. Items are remapped
// to dense ids by first appearance in file order; behaviors click/purchase/
// addtocart (addtocart counts as purchase). Unknown behavior labels are a
// hard error; otherwise-malformed rows are counted and skipped.
IngestResult ingest_csv(const std::string& path, const IngestConfig& cfg = {});

// Two-column CSV raw_id,dense_id.
void save_item_mapping(const IngestResult& result, const std::string& path);
std::map<std::string, int> load_item_mapping(const std::string& path);

// One transition per event: the state is the prefix before the event, the
// action is the event's item. The final event of each session is terminal.
ReplayBuffer build_buffer(const std::vector<Session>& sessions, int catalog,
                          const RewardMap& rewards, int window);

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
    std::uint64_t seed = 0;
};

// Deterministic 80/10/10 split by session count. Requires >= 10 sessions.
DatasetSplit split_sessions(const std::vector<Session>& sessions, std::uint64_t seed);

std::vector<Session> select_sessions(const std::vector<Session>& sessions,
                                     const std::vector<std::string>& ids);

// Batched window states, the encoder input layout: items is batch x window
// row-major, PAD-filled on the left.
struct StateBatch {
    int window = 0;
    int pad_id = 0;
    std::vector<ItemId> items;  // size() == lengths.size() * window
    std::vector<int> lengths;   // true prefix lengths

    std::size_t size() const { return lengths.size(); }
    ItemId item(std::size_t row, int t) const {
        return items[row * static_cast<std::size_t>(window) + static_cast<std::size_t>(t)];
    }
};

StateBatch make_state_batch(const ReplayBuffer& buffer, const std::vector<std::size_t>& indices,
                            bool next_state);

// Sparse minibatch view over buffer rows.
struct Batch {
    StateBatch states;
    StateBatch next_states;
    std::vector<ItemId> actions;
    std::vector<double> rewards;
    std::vector<std::uint8_t> terminal;

    std::size_t size() const { return actions.size(); }
};

Batch make_batch(const ReplayBuffer& buffer, const std::vector<std::size_t>& indices);

}  // namespace offrec::data
