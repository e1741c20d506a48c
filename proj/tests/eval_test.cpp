#include <doctest.h>

#include <cmath>

#include "offrec/metrics.hpp"
#include "offrec/rng.hpp"

using namespace offrec;
using namespace offrec::eval;
using data::Feedback;
using data::Session;
using data::SessionEvent;
using data::StateBatch;
using nn::Tensor;

namespace {

// score function that always ranks items by a fixed score vector
ScoreFn fixed_scores(std::vector<double> scores) {
    return [scores](const StateBatch& states) {
        Tensor t(states.size(), scores.size());
        for (std::size_t r = 0; r < states.size(); ++r)
            for (std::size_t c = 0; c < scores.size(); ++c) t(r, c) = scores[c];
        return t;
    };
}

std::vector<Session> simple_sessions(int n_events, int target_item, int catalog) {
    // one session: [0, target, target, ...]; every event after the first is
    // an evaluable prediction of target_item
    Session s;
    s.id = "s1";
    s.events.push_back(SessionEvent{0, 0, Feedback::Click});
    for (int t = 1; t < n_events; ++t)
        s.events.push_back(SessionEvent{target_item, t, Feedback::Click});
    (void)catalog;
    return {s};
}

}  // namespace

TEST_CASE("rank_of with ties broken by ascending id") {
    CHECK(rank_of({0.5, 0.1, 0.9}, 2) == 1);
    CHECK(rank_of({0.5, 0.1, 0.9}, 0) == 2);
    CHECK(rank_of({0.5, 0.1, 0.9}, 1) == 3);
    // constant scores: rank == id + 1
    CHECK(rank_of({0.2, 0.2, 0.2}, 0) == 1);
    CHECK(rank_of({0.2, 0.2, 0.2}, 2) == 3);
}

TEST_CASE("evaluate: true item always ranked first") {
    auto sessions = simple_sessions(4, 2, 5);
    std::vector<double> scores = {0.0, 0.0, 10.0, 0.0, 0.0};
    auto report = evaluate(fixed_scores(scores), sessions, 5, 3, {5}, Scope::All);
    CHECK(report.n_events == 3);
    CHECK(report.hr.at(5) == doctest::Approx(1.0));
    CHECK(report.ndcg.at(5) == doctest::Approx(1.0));
}

TEST_CASE("evaluate: rank 6 misses @5 and scores 1/log2(7) @10") {
    // catalog 12, true item ranked exactly 6th
    std::vector<double> scores(12, 0.0);
    for (int i = 0; i < 5; ++i) scores[static_cast<std::size_t>(i)] = 10.0 - i;
    scores[7] = 1.0;  // true item 7: five better scores, ties none -> rank 6
    auto sessions = simple_sessions(3, 7, 12);
    auto report = evaluate(fixed_scores(scores), sessions, 12, 3, {5, 10}, Scope::All);
    CHECK(report.hr.at(5) == doctest::Approx(0.0));
    CHECK(report.ndcg.at(5) == doctest::Approx(0.0));
    CHECK(report.hr.at(10) == doctest::Approx(1.0));
    CHECK(report.ndcg.at(10) == doctest::Approx(1.0 / std::log2(7.0)).epsilon(1e-12));
    CHECK(report.ndcg.at(10) == doctest::Approx(0.3562).epsilon(1e-3));
}

TEST_CASE("evaluate: uniform random ranking hits at roughly k/|A|") {
    const int catalog = 100;
    // 10k events across many sessions
    std::vector<Session> sessions;
    Rng rng(5);
    for (int s = 0; s < 2500; ++s) {
        Session sess;
        sess.id = "s" + std::to_string(s);
        for (int t = 0; t < 5; ++t)
            sess.events.push_back(SessionEvent{
                static_cast<int>(rng.index(catalog)), t, Feedback::Click});
        sessions.push_back(sess);
    }
    Rng score_rng(6);
    ScoreFn random_scores = [&](const StateBatch& states) {
        Tensor t(states.size(), catalog);
        for (double& v : t.values) v = score_rng.uniform();
        return t;
    };
    auto report = evaluate(random_scores, sessions, catalog, 3, {10}, Scope::All);
    CHECK(report.n_events == 10000);
    CHECK(report.hr.at(10) == doctest::Approx(0.10).epsilon(0.1));
    CHECK(std::abs(report.hr.at(10) - 0.10) < 0.01);
}

TEST_CASE("evaluate: metric monotonicity and ndcg <= hr") {
    std::vector<Session> sessions;
    Rng rng(7);
    for (int s = 0; s < 50; ++s) {
        Session sess;
        sess.id = "s" + std::to_string(s);
        for (int t = 0; t < 6; ++t)
            sess.events.push_back(SessionEvent{static_cast<int>(rng.index(20)), t,
                                               Feedback::Click});
        sessions.push_back(sess);
    }
    Rng score_rng(8);
    ScoreFn random_scores = [&](const StateBatch& states) {
        Tensor t(states.size(), 20);
        for (double& v : t.values) v = score_rng.uniform();
        return t;
    };
    auto report = evaluate(random_scores, sessions, 20, 4, {1, 5, 10, 20}, Scope::All);
    CHECK(report.hr.at(1) <= report.hr.at(5));
    CHECK(report.hr.at(5) <= report.hr.at(10));
    CHECK(report.hr.at(10) <= report.hr.at(20));
    CHECK(report.hr.at(20) == doctest::Approx(1.0));
    for (int k : {1, 5, 10, 20}) CHECK(report.ndcg.at(k) <= report.hr.at(k) + 1e-12);
}

TEST_CASE("evaluate: monotone score transforms leave the report unchanged") {
    auto sessions = simple_sessions(5, 3, 6);
    std::vector<double> base = {0.1, 0.9, 0.3, 0.6, 0.2, 0.05};
    std::vector<double> squashed;
    for (double v : base) squashed.push_back(std::tanh(3.0 * v));
    auto a = evaluate(fixed_scores(base), sessions, 6, 3, {1, 5}, Scope::All);
    auto b = evaluate(fixed_scores(squashed), sessions, 6, 3, {1, 5}, Scope::All);
    CHECK(a.hr == b.hr);
    CHECK(a.ndcg == b.ndcg);
}

TEST_CASE("evaluate: purchase scope filters targets and can be empty") {
    Session s;
    s.id = "s1";
    s.events = {SessionEvent{0, 0, Feedback::Click}, SessionEvent{1, 1, Feedback::Purchase},
                SessionEvent{2, 2, Feedback::Click}};
    std::vector<double> scores = {0.0, 5.0, 1.0};
    auto report = evaluate(fixed_scores(scores), {s}, 3, 3, {1}, Scope::PurchaseOnly);
    CHECK(report.n_events == 1);
    CHECK(report.hr.at(1) == doctest::Approx(1.0));

    Session clicks_only;
    clicks_only.id = "s2";
    clicks_only.events = {SessionEvent{0, 0, Feedback::Click}, SessionEvent{1, 1, Feedback::Click}};
    CHECK_THROWS_AS(evaluate(fixed_scores(scores), {clicks_only}, 3, 3, {1}, Scope::PurchaseOnly),
                    DataError);
}

TEST_CASE("paired t-test hand cases") {
    SUBCASE("identical samples give p = 1") {
        CHECK(paired_ttest({0.3, 0.4, 0.5}, {0.3, 0.4, 0.5}) == doctest::Approx(1.0));
    }
    SUBCASE("constant shift with tiny noise is significant") {
        std::vector<double> b = {0.50, 0.52, 0.49, 0.51, 0.50};
        std::vector<double> a;
        Rng rng(9);
        for (double v : b) a.push_back(v + 1.0 + 1e-4 * rng.uniform());
        CHECK(paired_ttest(a, b) < 0.01);
        CHECK(paired_ttest_greater(a, b) < 0.01);
        CHECK(paired_ttest_greater(b, a) > 0.99);
    }
    SUBCASE("n=2 opposite differences give t = 0, p = 1") {
        CHECK(paired_ttest({1.0, -1.0}, {0.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("inputs validated") {
        CHECK_THROWS_AS(paired_ttest({1.0}, {0.0}), UsageError);
        CHECK_THROWS_AS(paired_ttest({1.0, 2.0}, {0.0}), UsageError);
    }
    SUBCASE("two-sided matches textbook value at t=2, dof=4") {
        // 2 * P(T_4 > 2) ~= 0.1161
        CHECK(student_t_two_sided(2.0, 4.0) == doctest::Approx(0.1161).epsilon(2e-3));
    }
}
