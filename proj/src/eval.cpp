#include "fairrec/eval.hpp"

#include <algorithm>
#include <cmath>

#include "fairrec/stats.hpp"

namespace fairrec {

namespace {

void check_aligned(const std::vector<double>& predictions, const std::vector<double>& truths) {
    if (predictions.empty()) throw EvalError("error metric over an empty pair set");
    if (predictions.size() != truths.size())
        throw EvalError("predictions and truths differ in length");
}

}  // namespace

double rmse(const std::vector<double>& predictions, const std::vector<double>& truths) {
    check_aligned(predictions, truths);
    double ss = 0.0;
    for (std::size_t k = 0; k < predictions.size(); ++k) {
        const double e = predictions[k] - truths[k];
        ss += e * e;
    }
    return std::sqrt(ss / static_cast<double>(predictions.size()));
}

double mae(const std::vector<double>& predictions, const std::vector<double>& truths) {
    check_aligned(predictions, truths);
    double s = 0.0;
    for (std::size_t k = 0; k < predictions.size(); ++k) s += std::fabs(predictions[k] - truths[k]);
    return s / static_cast<double>(predictions.size());
}

double ndcg_at_n(const std::vector<std::string>& ranked, const std::unordered_set<std::string>& relevant,
                 std::size_t n, const std::unordered_map<std::string, double>* graded_gains) {
    if (n < 1) throw EvalError("ndcg needs n >= 1");
    if (relevant.empty()) throw EvalError("ndcg over an empty relevant set; exclude the user instead");
    auto gain_of = [&](const std::string& item) -> double {
        if (!relevant.count(item)) return 0.0;
        if (!graded_gains) return 1.0;
        auto it = graded_gains->find(item);
        return it == graded_gains->end() ? 0.0 : it->second;
    };
    double dcg = 0.0;
    const std::size_t depth = std::min(n, ranked.size());
    for (std::size_t rank = 1; rank <= depth; ++rank)
        dcg += gain_of(ranked[rank - 1]) / std::log2(static_cast<double>(rank) + 1.0);
    std::vector<double> ideal;
    if (graded_gains) {
        for (const std::string& item : relevant) {
            auto it = graded_gains->find(item);
            ideal.push_back(it == graded_gains->end() ? 0.0 : it->second);
        }
        std::sort(ideal.begin(), ideal.end(), std::greater<>());
    } else {
        ideal.assign(relevant.size(), 1.0);
    }
    double idcg = 0.0;
    const std::size_t ideal_depth = std::min(n, ideal.size());
    for (std::size_t rank = 1; rank <= ideal_depth; ++rank)
        idcg += ideal[rank - 1] / std::log2(static_cast<double>(rank) + 1.0);
    return idcg > 0.0 ? dcg / idcg : 0.0;
}

double mrr(const std::vector<std::string>& ranked, const std::unordered_set<std::string>& relevant) {
    for (std::size_t rank = 1; rank <= ranked.size(); ++rank)
        if (relevant.count(ranked[rank - 1])) return 1.0 / static_cast<double>(rank);
    return 0.0;
}

BiasAggregate aggregate_bias(const std::vector<UserBiasScore>& scores, double bin_width) {
    std::vector<double> thetas;
    for (const UserBiasScore& s : scores)
        if (s.defined) thetas.push_back(s.theta);
    if (thetas.empty()) throw EvalError("no user has a defined recommendation bias");
    BiasAggregate agg;
    agg.defined = thetas.size();
    agg.mean = mean_of(thetas);
    agg.stddev = sample_stddev(thetas, agg.mean);
    agg.histogram = bias_histogram(scores, bin_width);
    return agg;
}

SignificanceResult z_test_left(double x_bar, double mu, double sigma, std::size_t n) {
    if (n < 2) throw EvalError("z-test needs n >= 2");
    if (!(sigma > 0.0)) throw EvalError("z-test needs sigma > 0");
    SignificanceResult r;
    r.x_bar = x_bar;
    r.mu = mu;
    r.sigma = sigma;
    r.n = n;
    r.z = (x_bar - mu) / (sigma / std::sqrt(static_cast<double>(n)));
    r.p = normal_cdf(r.z);
    return r;
}

namespace {

double pct_loss(double before, double after) { return (after - before) / before * 100.0; }

}  // namespace

ExperimentComparison compare(const MetricsReport& before, const MetricsReport& after) {
    if (before.fingerprint != after.fingerprint)
        throw EvalError("comparing reports from different experiments ('" + before.fingerprint +
                        "' vs '" + after.fingerprint + "')");
    ExperimentComparison c;
    c.bias_reduction_pct = (before.mean_log_bias - after.mean_log_bias) / before.mean_log_bias * 100.0;
    c.rmse_loss_pct = pct_loss(before.rmse, after.rmse);
    c.mae_loss_pct = pct_loss(before.mae, after.mae);
    c.ndcg_loss_pct = pct_loss(before.ndcg, after.ndcg);
    c.mrr_loss_pct = pct_loss(before.mrr, after.mrr);
    return c;
}

double round2(double value) { return std::round(value * 100.0) / 100.0; }

}  // namespace fairrec
