#pragma once

#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "fairrec/bias.hpp"

namespace fairrec {

struct MetricsReport {
    std::string fingerprint;  // dataset + split + algorithm identity
    std::string algorithm;
    std::string mode;
    double mean_log_bias = 0.0;
    double bias_std = 0.0;
    std::size_t bias_defined_users = 0;
    double rmse = 0.0;
    double mae = 0.0;
    double ndcg = 0.0;
    double mrr = 0.0;
    std::size_t n_users = 0;
    std::size_t n_pairs = 0;
};

struct SignificanceResult {
    double x_bar;
    double mu;
    double sigma;
    std::size_t n;
    double z;
    double p;  // left tail
};

struct ExperimentComparison {
    double bias_reduction_pct;
    double rmse_loss_pct;
    double mae_loss_pct;
    double ndcg_loss_pct;
    double mrr_loss_pct;
};

/// Standard pooled errors over aligned (prediction, truth) pairs. The caller
/// clamps predictions to the report scale first.
double rmse(const std::vector<double>& predictions, const std::vector<double>& truths);
double mae(const std::vector<double>& predictions, const std::vector<double>& truths);

/// Binary-gain NDCG of one ranked list against the user's relevant set:
/// DCG discounts by 1/log2(rank+1); IDCG fills min(n, |relevant|) ideal
/// slots. `graded_gains`, when given, maps item -> gain for the graded
/// variant (ideal gains are the sorted relevant gains).
double ndcg_at_n(const std::vector<std::string>& ranked, const std::unordered_set<std::string>& relevant,
                 std::size_t n,
                 const std::unordered_map<std::string, double>* graded_gains = nullptr);

/// Reciprocal rank of the first relevant item in the list; 0 when none.
double mrr(const std::vector<std::string>& ranked, const std::unordered_set<std::string>& relevant);

struct BiasAggregate {
    double mean;
    double stddev;            // sample std over defined scores; 0 when n < 2
    std::size_t defined;
    std::vector<HistogramBin> histogram;
};

/// Mean/std/histogram of defined per-user recommendation biases.
/// All-undefined input is an error: the caller is asking for a number that
/// does not exist.
BiasAggregate aggregate_bias(const std::vector<UserBiasScore>& scores, double bin_width = 0.05);

/// Left-tail one-sample z-test: z = (x_bar - mu) / (sigma / sqrt(n)),
/// p = Phi(z). sigma must be positive and n >= 2.
SignificanceResult z_test_left(double x_bar, double mu, double sigma, std::size_t n);

/// Percentage deltas, positive reduction = bias went down, positive loss =
/// the accuracy metric got worse relative to `before`.
ExperimentComparison compare(const MetricsReport& before, const MetricsReport& after);

/// Two-decimal presentation rounding used by the report tables.
double round2(double value);

}  // namespace fairrec
