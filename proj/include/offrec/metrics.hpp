#pragma once

#include <functional>
#include <map>
#include <vector>

#include "offrec/data.hpp"
#include "offrec/tensor.hpp"

namespace offrec::eval {

using data::Session;
using data::StateBatch;
using nn::Tensor;

// scores over all real items for a batch of states, [batch, catalog]
using ScoreFn = std::function<Tensor(const StateBatch&)>;

enum class Scope { All, PurchaseOnly };

struct RankResult {
    data::ItemId true_item = 0;
    int rank = 0;  // 1-based position in the full ranking
    std::map<int, int> hits;
};

struct MetricReport {
    std::map<int, double> hr;
    std::map<int, double> ndcg;
    std::size_t n_events = 0;
    Scope scope = Scope::All;
};

// 1-based rank of `item` under descending score with ascending-id tie-break.
int rank_of(const std::vector<double>& scores, int item);

// Next-item evaluation over every event with a non-empty prefix (t >= 2 in
// 1-based session positions). HR@k is the mean hit indicator, NDCG@k the
// mean of [rank <= k] / log2(rank + 1).
MetricReport evaluate(const ScoreFn& scores, const std::vector<Session>& sessions, int catalog,
                      int window, const std::vector<int>& ks, Scope scope);

// Two-sided paired t-test p-value. Zero variance with zero mean difference
// yields p = 1.
double paired_ttest(const std::vector<double>& a, const std::vector<double>& b);

// One-sided variant: p-value for the alternative mean(a - b) > 0.
double paired_ttest_greater(const std::vector<double>& a, const std::vector<double>& b);

// Student-t two-sided tail probability, exposed for tests.
double student_t_two_sided(double t, double dof);

}  // namespace offrec::eval
