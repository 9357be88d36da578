#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fairrec/dataset.hpp"

namespace fairrec {

/// Geometric means of one user's ratings, split by item group. A group the
/// user never rated has no mean and a zero count; that is data, not an error.
struct GroupMeans {
    std::optional<double> advantaged;     // r_ua
    std::optional<double> disadvantaged;  // r_ud
    std::size_t n = 0;                    // |A ∩ rated|
    std::size_t m = 0;                    // |D ∩ rated|
};

/// Per-user log-bias theta = ln(r_ua / r_ud). Positive means the user rates
/// advantaged items higher. Undefined (one group unrated) keeps theta = 0 and
/// is excluded from aggregates but still gets recommendations.
struct UserBiasScore {
    std::string user_id;
    double theta = 0.0;
    bool defined = false;
    std::size_t m = 0;
    std::size_t n = 0;
    std::optional<double> mean_advantaged;
    std::optional<double> mean_disadvantaged;
};

/// theta per user of one dataset, addressable by id.
class BiasMap {
public:
    BiasMap() = default;
    explicit BiasMap(std::vector<UserBiasScore> scores);

    const UserBiasScore& at(const std::string& user_id) const;  // NotFoundError
    const UserBiasScore* find(const std::string& user_id) const;
    const std::vector<UserBiasScore>& scores() const { return scores_; }
    std::size_t size() const { return scores_.size(); }

private:
    std::vector<UserBiasScore> scores_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Ratings with the per-user debias factor applied to disadvantaged items:
/// d_ui = r_ui * e^theta_u. Values may exceed the rating scale; clamping here
/// would reintroduce bias into the training signal, so presentation-time
/// clamping is the only clamping.
struct DebiasedDataset {
    RatingsDataset ratings;  // scale checks off
    const BiasMap* source = nullptr;
};

/// Top-N recommendation list for one user with predicted ratings, sorted by
/// predicted rating descending (ties by ascending item id).
struct RecommendationProfile {
    std::string user_id;
    std::vector<std::string> items;
    std::unordered_map<std::string, double> predicted;
    bool truncated = false;  // fewer candidates than requested
};

struct GlobalBias {
    std::optional<double> gamma_hat;
    std::size_t defined_count = 0;
};

/// Means are taken in the log domain (mean of logs, then exp) so long
/// profiles cannot overflow the running product.
GroupMeans group_geometric_means(const std::vector<std::pair<GroupLabel, double>>& ratings);

UserBiasScore user_log_bias(const GroupMeans& means);

/// theta for every user of the dataset. OpenMP across users; per-user results
/// are independent so the parallel and serial kernels agree bitwise.
BiasMap compute_user_bias(const RatingsDataset& ds);
BiasMap compute_user_bias_serial(const RatingsDataset& ds);

/// d_ui = r_ui * e^theta_u on disadvantaged items, identity on advantaged.
/// A user without a theta entry is a hard error: silently passing ratings
/// through would corrupt the downstream comparison.
DebiasedDataset debias_ratings(const RatingsDataset& ds, const BiasMap& thetas);

/// Multiplies predicted ratings of disadvantaged items by e^{-theta_u}
/// (the caller re-ranks afterwards). Predictions live in debiased space.
/// Items are (item_id, predicted) pairs for one user.
void preference_correct(std::vector<std::pair<std::string, double>>& predictions,
                        const std::string& user_id, const BiasMap& thetas,
                        const ItemCatalog& catalog);

/// Index-space prediction for one (user, item) candidate.
struct ScoredItem {
    Index item;
    double score;
};

/// Same correction in index space; `groups` is the per-item-index label array
/// of the dataset the predictions came from.
void preference_correct_indexed(std::vector<ScoredItem>& predictions, double theta,
                                const std::vector<GroupLabel>& groups);

/// Log-bias of a recommendation profile: same geometric-mean machinery over
/// predicted ratings of the recommended items. Non-positive predictions are
/// excluded from the means (they cannot carry a log).
UserBiasScore recommendation_log_bias(const RecommendationProfile& profile,
                                      const ItemCatalog& catalog);

GlobalBias global_bias(const std::vector<UserBiasScore>& scores);

struct HistogramBin {
    double lo;
    double hi;
    std::size_t count;
};

/// Fixed-width bins aligned to multiples of `bin_width`, lower edge
/// inclusive; spans the observed range of defined thetas.
std::vector<HistogramBin> bias_histogram(const std::vector<UserBiasScore>& scores,
                                         double bin_width = 0.05);

/// `user_id,theta,defined,m,n`, sorted by user id.
void save_bias_map(const BiasMap& map, const std::string& path, char delimiter = ',');
BiasMap load_bias_map(const std::string& path, char delimiter = ',');

void save_histogram(const std::vector<HistogramBin>& bins, const std::string& path,
                    char delimiter = ',');

}  // namespace fairrec
