#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairrec/dataset.hpp"
#include "fairrec/rng.hpp"

namespace fairrec {

/// Distribution over a nonnegative support with an analytically known mean.
/// Families: point mass, uniform, and a normal truncated at zero (truncation
/// shifts the mean; `mean()` returns the shifted, true mean).
struct DistributionSpec {
    enum class Family { PointMass, Uniform, TruncNormal };
    Family family = Family::PointMass;
    double a = 0.0;  // point value / uniform lo / normal mean
    double b = 0.0;  // uniform hi / normal sd

    static DistributionSpec point_mass(double value);
    static DistributionSpec uniform(double lo, double hi);
    static DistributionSpec trunc_normal(double mean, double sd);

    double mean() const;
    double sample(Rng& rng) const;
    void validate() const;
};

/// Per-rating noise shape placed around a per-user mean. The symmetric
/// families keep the realized mean equal to the center exactly; the
/// truncated normal shifts it, and `mean_given_center` reports the shift so
/// ground truth stays honest.
struct NoiseSpec {
    enum class Kind { None, UniformWidth, TruncNormalSd };
    Kind kind = Kind::None;
    double param = 0.0;  // half-width or sd

    static NoiseSpec none();
    static NoiseSpec uniform_width(double half_width);
    static NoiseSpec trunc_normal_sd(double sd);

    double mean_given_center(double center) const;
    double sample(double center, Rng& rng) const;
    void validate() const;
};

struct GenerativeConfig {
    double scale_max = 10.0;
    std::size_t users = 100;
    std::size_t items = 100;
    double disadvantaged_fraction = 0.5;
    double density = 1.0;  // per-pair rating probability
    DistributionSpec alpha = DistributionSpec::uniform(0.3, 0.9);   // per-user mean log-preference
    NoiseSpec preference_noise = NoiseSpec::trunc_normal_sd(0.2);   // p_ui around alpha_u
    DistributionSpec omega = DistributionSpec::trunc_normal(0.2, 0.05);  // beta_u draw
    NoiseSpec bias_noise = NoiseSpec::uniform_width(0.1);           // q_ui around beta_u
    bool clamp_to_scale = false;
    bool retain_realized = false;
    std::uint64_t seed = 0;

    void validate() const;
};

struct UserGroundTruth {
    std::string user_id;
    double alpha;  // true mean of the realized preference distribution
    double beta;   // true mean of the realized bias distribution
};

struct RealizedRating {
    std::string user_id;
    std::string item_id;
    double p;
    double q;  // 0 for advantaged items
};

struct SyntheticDataset {
    RatingsDataset ratings;
    std::vector<UserGroundTruth> ground_truth;   // one entry per user, rated or not
    std::vector<RealizedRating> realized;        // only when retain_realized
    std::size_t empty_profile_users = 0;
};

/// Draws (alpha_u, beta_u) for one user from its substream.
std::pair<double, double> sample_user(const GenerativeConfig& config, Rng& user_rng);

/// One rating: scale_max * e^{-p}, additionally scaled by e^{-q} for
/// disadvantaged items; clamped to [1, scale_max] only when configured.
double generate_rating(double scale_max, double p, double q, bool disadvantaged, bool clamp);

/// Whole dataset. Each user consumes an independent substream, so generation
/// order cannot change results. Users that end up with no ratings are
/// retained in the ground truth and counted.
SyntheticDataset generate_dataset(const GenerativeConfig& config);

/// `user_id,alpha,beta`, sorted by user id.
void save_ground_truth(const std::vector<UserGroundTruth>& truth, const std::string& path,
                       char delimiter = ',');

}  // namespace fairrec
