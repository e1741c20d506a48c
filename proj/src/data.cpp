#include "offrec/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include "offrec/rng.hpp"

namespace offrec::data {

namespace {

std::vector<std::string> split_line(const std::string& line, char sep = ',') {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::optional<std::int64_t> parse_int(const std::string& s) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace

IngestResult ingest_csv(const std::string& path, const IngestConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw DataError("ingest: cannot open " + path);

    std::string header;
    if (!std::getline(in, header)) throw DataError("ingest: empty file " + path);
    auto cols = split_line(header);
    int ci_session = -1, ci_item = -1, ci_ts = -1, ci_beh = -1;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (cols[i] == cfg.col_session) ci_session = static_cast<int>(i);
        if (cols[i] == cfg.col_item) ci_item = static_cast<int>(i);
        if (cols[i] == cfg.col_timestamp) ci_ts = static_cast<int>(i);
        if (cols[i] == cfg.col_behavior) ci_beh = static_cast<int>(i);
    }
    if (ci_session < 0 || ci_item < 0 || ci_ts < 0 || ci_beh < 0)
        throw DataError("ingest: header must contain " + cfg.col_session + "," + cfg.col_item +
                        "," + cfg.col_timestamp + "," + cfg.col_behavior);

    IngestResult out;
    std::unordered_map<std::string, int> item_map;
    std::unordered_map<std::string, std::size_t> session_index;
    std::vector<Session> sessions;

    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_line(line);
        std::size_t need = static_cast<std::size_t>(std::max({ci_session, ci_item, ci_ts, ci_beh}));
        if (fields.size() <= need) {
            ++out.malformed_rows;
            continue;
        }
        const std::string& sid = fields[static_cast<std::size_t>(ci_session)];
        const std::string& raw_item = fields[static_cast<std::size_t>(ci_item)];
        auto ts = parse_int(fields[static_cast<std::size_t>(ci_ts)]);
        const std::string& beh = fields[static_cast<std::size_t>(ci_beh)];
        if (sid.empty() || raw_item.empty() || !ts) {
            ++out.malformed_rows;
            continue;
        }
        Feedback fb;
        if (beh == "click") {
            fb = Feedback::Click;
        } else if (beh == "purchase" || beh == "addtocart") {
            fb = Feedback::Purchase;
        } else {
            throw DataError("ingest: unknown behavior label '" + beh + "' in " + path);
        }
        auto [it, inserted] = item_map.emplace(raw_item, static_cast<int>(out.raw_ids.size()));
        if (inserted) out.raw_ids.push_back(raw_item);
        auto [sit, snew] = session_index.emplace(sid, sessions.size());
        if (snew) sessions.push_back(Session{sid, {}});
        sessions[sit->second].events.push_back(SessionEvent{it->second, *ts, fb});
    }
    out.catalog = static_cast<int>(out.raw_ids.size());

    // ascending timestamp, input order on ties
    for (auto& s : sessions)
        std::stable_sort(s.events.begin(), s.events.end(),
                         [](const SessionEvent& a, const SessionEvent& b) {
                             return a.timestamp < b.timestamp;
                         });

    std::sort(sessions.begin(), sessions.end(),
              [](const Session& a, const Session& b) { return a.id < b.id; });

    for (auto& s : sessions) {
        if (static_cast<int>(s.events.size()) < cfg.min_length) {
            ++out.dropped_short_sessions;
        } else {
            out.sessions.push_back(std::move(s));
        }
    }
    if (out.malformed_rows > 0)
        std::cerr << "ingest: skipped " << out.malformed_rows << " malformed rows in " << path
                  << "\n";
    return out;
}

void save_item_mapping(const IngestResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write item mapping: " + path);
    out << "raw_id,dense_id\n";
    for (std::size_t i = 0; i < result.raw_ids.size(); ++i)
        out << result.raw_ids[i] << "," << i << "\n";
}

std::map<std::string, int> load_item_mapping(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open item mapping: " + path);
    std::map<std::string, int> mapping;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (fields.size() != 2) throw DataError("item mapping: malformed row: " + line);
        auto id = parse_int(fields[1]);
        if (!id) throw DataError("item mapping: bad dense id: " + line);
        mapping[fields[0]] = static_cast<int>(*id);
    }
    return mapping;
}

ReplayBuffer build_buffer(const std::vector<Session>& sessions, int catalog,
                          const RewardMap& rewards, int window) {
    if (window < 1) throw ConfigError("build_buffer: window must be >= 1");
    ReplayBuffer buffer;
    buffer.catalog = catalog;
    buffer.window = window;
    if (sessions.empty()) {
        std::cerr << "build_buffer: empty session set, buffer is empty\n";
        return buffer;
    }
    ItemId pad = buffer.pad_id();
    for (const auto& s : sessions) {
        std::size_t T = s.events.size();
        for (std::size_t t = 0; t < T; ++t) {
            Transition tr;
            tr.state.assign(static_cast<std::size_t>(window), pad);
            tr.state_len = static_cast<int>(t);
            for (std::size_t k = 0; k < t && k < static_cast<std::size_t>(window); ++k)
                tr.state[static_cast<std::size_t>(window) - 1 - k] = s.events[t - 1 - k].item;
            tr.action = s.events[t].item;
            tr.reward = rewards.reward(s.events[t].feedback);
            tr.feedback = s.events[t].feedback;
            tr.next_state.assign(static_cast<std::size_t>(window), pad);
            tr.next_state_len = static_cast<int>(t + 1);
            for (std::size_t k = 0; k <= t && k < static_cast<std::size_t>(window); ++k)
                tr.next_state[static_cast<std::size_t>(window) - 1 - k] = s.events[t - k].item;
            tr.terminal = (t + 1 == T);
            buffer.transitions.push_back(std::move(tr));
        }
    }
    return buffer;
}

DatasetSplit split_sessions(const std::vector<Session>& sessions, std::uint64_t seed) {
    std::size_t n = sessions.size();
    if (n < 10)
        throw DataError("split_sessions: need at least 10 sessions, got " + std::to_string(n));
    std::vector<std::string> ids;
    ids.reserve(n);
    for (const auto& s : sessions) ids.push_back(s.id);
    std::sort(ids.begin(), ids.end());

    Rng rng = Rng::stream(seed, "split");
    // Fisher-Yates
    for (std::size_t i = n - 1; i > 0; --i) {
        std::size_t j = static_cast<std::size_t>(rng.index(i + 1));
        std::swap(ids[i], ids[j]);
    }
    std::size_t n_val = static_cast<std::size_t>(static_cast<double>(n) * 0.1 + 0.5);
    std::size_t n_test = n_val;
    std::size_t n_train = n - n_val - n_test;

    DatasetSplit split;
    split.seed = seed;
    split.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.validation.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                            ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

std::vector<Session> select_sessions(const std::vector<Session>& sessions,
                                     const std::vector<std::string>& ids) {
    std::vector<Session> out;
    out.reserve(ids.size());
    std::unordered_map<std::string, const Session*> by_id;
    for (const auto& s : sessions) by_id[s.id] = &s;
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it != by_id.end()) out.push_back(*it->second);
    }
    return out;
}

StateBatch make_state_batch(const ReplayBuffer& buffer, const std::vector<std::size_t>& indices,
                            bool next_state) {
    StateBatch sb;
    sb.window = buffer.window;
    sb.pad_id = buffer.pad_id();
    sb.items.reserve(indices.size() * static_cast<std::size_t>(buffer.window));
    sb.lengths.reserve(indices.size());
    for (std::size_t idx : indices) {
        const Transition& tr = buffer.transitions[idx];
        const auto& st = next_state ? tr.next_state : tr.state;
        sb.items.insert(sb.items.end(), st.begin(), st.end());
        sb.lengths.push_back(next_state ? tr.next_state_len : tr.state_len);
    }
    return sb;
}

Batch make_batch(const ReplayBuffer& buffer, const std::vector<std::size_t>& indices) {
    Batch b;
    b.states = make_state_batch(buffer, indices, false);
    b.next_states = make_state_batch(buffer, indices, true);
    b.actions.reserve(indices.size());
    b.rewards.reserve(indices.size());
    b.terminal.reserve(indices.size());
    for (std::size_t idx : indices) {
        const Transition& tr = buffer.transitions[idx];
        b.actions.push_back(tr.action);
        b.rewards.push_back(tr.reward);
        b.terminal.push_back(tr.terminal ? 1 : 0);
    }
    return b;
}

}  // namespace offrec::data
