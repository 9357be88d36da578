#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fairrec/bias.hpp"
#include "fairrec/dataset.hpp"
#include "fairrec/kernels.hpp"

namespace fairrec {

enum class Algorithm { UserKnn, ItemKnn, Als, Svd };

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

struct KnnParams {
    std::size_t k = 40;
    Similarity similarity = Similarity::Pearson;
    std::size_t min_overlap = 3;
    std::size_t shrink = 50;
};

struct AlsParams {
    std::size_t factors = 32;
    double lambda = 0.1;
    std::size_t iterations = 15;
};

struct SvdParams {
    std::size_t factors = 32;
    double learning_rate = 0.005;
    double reg = 0.02;
    std::size_t epochs = 30;
};

struct ModelConfig {
    Algorithm algorithm = Algorithm::UserKnn;
    KnnParams knn;
    AlsParams als;
    SvdParams svd;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Uniform prediction contract over the four algorithms. Prediction is total
/// over the training universe through the fallback chain
/// user mean -> item mean -> global mean.
///
/// `fold_in` recomputes user-side parameters for the given users from their
/// (visible) rows in the training matrix with item-side state held fixed; it
/// must be called before concurrent prediction starts.
class RatingPredictor {
public:
    virtual ~RatingPredictor() = default;
    virtual Algorithm algorithm() const = 0;
    virtual double predict(Index user, Index item) const = 0;
    virtual void fold_in(const std::vector<Index>& users) = 0;
    /// ALS: objective after every half-step; SVD: loss after every epoch;
    /// KNN: empty.
    virtual const std::vector<double>& objective_trace() const = 0;
};

std::unique_ptr<RatingPredictor> train_model(const RatingsDataset& train, const ModelConfig& config);

/// Full-batch regularized squared loss of an SVD state and its analytic
/// gradient, exposed for finite-difference verification.
struct SvdState {
    double global_mean = 0.0;
    std::vector<double> user_bias, item_bias;
    std::vector<double> user_factors, item_factors;  // row-major
    std::size_t factors = 0;
};

double svd_loss(const SvdState& state, const SparseRows& users, double reg);
/// Gradient in the order: user_bias, item_bias, user_factors, item_factors.
std::vector<double> svd_loss_gradient(const SvdState& state, const SparseRows& users, double reg);

/// Scores every candidate item (training universe minus `excluded`) for one
/// user. Deterministic order: ascending item index.
std::vector<ScoredItem> score_candidates(const RatingPredictor& model, Index user,
                                         const std::vector<bool>& excluded, std::size_t n_items);

/// Top-n by score descending, ties by ascending item id. Returns a shorter,
/// flagged list when fewer candidates exist.
RecommendationProfile top_n_profile(const std::vector<ScoredItem>& scored, std::size_t n,
                                    const RatingsDataset& ds, const std::string& user_id);

/// Convenience composition used by the CLI paths: score, then rank.
RecommendationProfile recommend_top_n(const RatingPredictor& model, const RatingsDataset& train,
                                      const std::string& user_id, std::size_t n,
                                      const std::vector<std::string>& excluded_items);

}  // namespace fairrec
