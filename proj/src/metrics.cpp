#include "offrec/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace offrec::eval {

int rank_of(const std::vector<double>& scores, int item) {
    double target = scores[static_cast<std::size_t>(item)];
    int rank = 1;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (static_cast<int>(i) == item) continue;
        if (scores[i] > target || (scores[i] == target && static_cast<int>(i) < item)) ++rank;
    }
    return rank;
}

MetricReport evaluate(const ScoreFn& scores, const std::vector<Session>& sessions, int catalog,
                      int window, const std::vector<int>& ks, Scope scope) {
    MetricReport report;
    report.scope = scope;
    for (int k : ks) {
        if (k < 1) throw UsageError("evaluate: k must be >= 1");
        // k beyond the catalog is allowed (every rank hits); keeps the fixed
        // hr5/hr10 metric columns usable on tiny test catalogs
        report.hr[k] = 0.0;
        report.ndcg[k] = 0.0;
    }

    int pad = catalog;
    // evaluable (session, position) pairs with prefix windows
    StateBatch sb;
    sb.window = window;
    sb.pad_id = pad;
    std::vector<data::ItemId> targets;
    for (const auto& session : sessions) {
        std::size_t T = session.events.size();
        for (std::size_t t = 1; t < T; ++t) {
            if (scope == Scope::PurchaseOnly &&
                session.events[t].feedback != data::Feedback::Purchase)
                continue;
            std::vector<data::ItemId> state(static_cast<std::size_t>(window), pad);
            for (std::size_t j = 0; j < t && j < static_cast<std::size_t>(window); ++j)
                state[static_cast<std::size_t>(window) - 1 - j] = session.events[t - 1 - j].item;
            sb.items.insert(sb.items.end(), state.begin(), state.end());
            sb.lengths.push_back(static_cast<int>(t));
            targets.push_back(session.events[t].item);
        }
    }
    if (targets.empty()) throw DataError("evaluate: no evaluable events");

    // batched scoring to bound memory
    const std::size_t chunk = 512;
    for (std::size_t start = 0; start < targets.size(); start += chunk) {
        std::size_t end = std::min(start + chunk, targets.size());
        StateBatch part;
        part.window = window;
        part.pad_id = pad;
        part.items.assign(
            sb.items.begin() + static_cast<std::ptrdiff_t>(start * static_cast<std::size_t>(window)),
            sb.items.begin() + static_cast<std::ptrdiff_t>(end * static_cast<std::size_t>(window)));
        part.lengths.assign(sb.lengths.begin() + static_cast<std::ptrdiff_t>(start),
                            sb.lengths.begin() + static_cast<std::ptrdiff_t>(end));
        Tensor s = scores(part);
        if (s.rows() != end - start || s.cols() != static_cast<std::size_t>(catalog))
            throw DimensionError("evaluate: score shape mismatch");
        for (std::size_t i = 0; i < end - start; ++i) {
            std::vector<double> row(s.values.begin() + static_cast<std::ptrdiff_t>(i * s.cols()),
                                    s.values.begin() +
                                        static_cast<std::ptrdiff_t>((i + 1) * s.cols()));
            int rank = rank_of(row, targets[start + i]);
            for (int k : ks) {
                if (rank <= k) {
                    report.hr[k] += 1.0;
                    report.ndcg[k] += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
                }
            }
        }
    }
    report.n_events = targets.size();
    for (int k : ks) {
        report.hr[k] /= static_cast<double>(report.n_events);
        report.ndcg[k] /= static_cast<double>(report.n_events);
    }
    return report;
}

namespace {

double gammln(double x) {
    static const double cof[6] = {76.18009172947146,  -86.50532032941677, 24.01409824083091,
                                  -1.231739572450155, 0.1208650973866179e-2, -0.5395239384953e-5};
    double y = x;
    double tmp = x + 5.5;
    tmp -= (x + 0.5) * std::log(tmp);
    double ser = 1.000000000190015;
    for (double c : cof) ser += c / ++y;
    return -tmp + std::log(2.5066282746310005 * ser / x);
}

double betacf(double a, double b, double x) {
    const int kMaxIter = 200;
    const double kEps = 3e-14;
    const double kFpMin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

double betai(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double bt = std::exp(gammln(a + b) - gammln(a) - gammln(b) + a * std::log(x) +
                         b * std::log(1.0 - x));
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

struct TStat {
    double t = 0.0;
    double dof = 0.0;
    bool degenerate = false;  // zero variance
    bool zero_mean = false;
};

TStat paired_t_statistic(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw UsageError("paired_ttest: unequal sample sizes");
    if (a.size() < 2) throw UsageError("paired_ttest: need n >= 2");
    std::size_t n = a.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = a[i] - b[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(n - 1);
    TStat st;
    st.dof = static_cast<double>(n - 1);
    if (var == 0.0) {
        st.degenerate = true;
        st.zero_mean = (mean == 0.0);
        st.t = mean == 0.0 ? 0.0 : (mean > 0.0 ? 1e300 : -1e300);
        return st;
    }
    st.t = mean / std::sqrt(var / static_cast<double>(n));
    return st;
}

}  // namespace

double student_t_two_sided(double t, double dof) {
    return betai(dof / 2.0, 0.5, dof / (dof + t * t));
}

double paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
    TStat st = paired_t_statistic(a, b);
    if (st.degenerate) return st.zero_mean ? 1.0 : 0.0;
    return student_t_two_sided(st.t, st.dof);
}

double paired_ttest_greater(const std::vector<double>& a, const std::vector<double>& b) {
    TStat st = paired_t_statistic(a, b);
    if (st.degenerate) {
        if (st.zero_mean) return 1.0;
        return st.t > 0.0 ? 0.0 : 1.0;
    }
    double two_sided = student_t_two_sided(st.t, st.dof);
    return st.t > 0.0 ? two_sided / 2.0 : 1.0 - two_sided / 2.0;
}

}  // namespace offrec::eval
