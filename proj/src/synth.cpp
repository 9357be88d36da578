#include "fairrec/synth.hpp"

#include <algorithm>
#include <cmath>

#include "fairrec/csv.hpp"
#include "fairrec/stats.hpp"

namespace fairrec {

DistributionSpec DistributionSpec::point_mass(double value) {
    DistributionSpec d;
    d.family = Family::PointMass;
    d.a = value;
    return d;
}

DistributionSpec DistributionSpec::uniform(double lo, double hi) {
    DistributionSpec d;
    d.family = Family::Uniform;
    d.a = lo;
    d.b = hi;
    return d;
}

DistributionSpec DistributionSpec::trunc_normal(double mean, double sd) {
    DistributionSpec d;
    d.family = Family::TruncNormal;
    d.a = mean;
    d.b = sd;
    return d;
}

void DistributionSpec::validate() const {
    switch (family) {
        case Family::PointMass:
            if (a < 0.0) throw InputError("point mass must be >= 0");
            break;
        case Family::Uniform:
            if (a < 0.0 || b < a) throw InputError("uniform needs 0 <= lo <= hi");
            break;
        case Family::TruncNormal:
            if (b <= 0.0) throw InputError("truncated normal needs sd > 0");
            if (a < 0.0) throw InputError("truncated normal center must be >= 0");
            break;
    }
}

double DistributionSpec::mean() const {
    switch (family) {
        case Family::PointMass:
            return a;
        case Family::Uniform:
            return 0.5 * (a + b);
        case Family::TruncNormal: {
            // E[X | X >= 0] for X ~ N(a, b): a + b * phi(a/b) / Phi(a/b).
            const double z = a / b;
            return a + b * normal_pdf(z) / normal_cdf(z);
        }
    }
    return 0.0;
}

double DistributionSpec::sample(Rng& rng) const {
    switch (family) {
        case Family::PointMass:
            return a;
        case Family::Uniform:
            return rng.uniform(a, b);
        case Family::TruncNormal: {
            for (;;) {
                double x = rng.normal(a, b);
                if (x >= 0.0) return x;
            }
        }
    }
    return 0.0;
}

NoiseSpec NoiseSpec::none() { return NoiseSpec{}; }

NoiseSpec NoiseSpec::uniform_width(double half_width) {
    NoiseSpec n;
    n.kind = Kind::UniformWidth;
    n.param = half_width;
    return n;
}

NoiseSpec NoiseSpec::trunc_normal_sd(double sd) {
    NoiseSpec n;
    n.kind = Kind::TruncNormalSd;
    n.param = sd;
    return n;
}

void NoiseSpec::validate() const {
    if (kind != Kind::None && param <= 0.0) throw InputError("noise parameter must be positive");
}

double NoiseSpec::mean_given_center(double center) const {
    switch (kind) {
        case Kind::None:
        case Kind::UniformWidth:
            // The uniform window is symmetric around the center (shrunk near
            // zero to stay on the support), so the mean is the center itself.
            return center;
        case Kind::TruncNormalSd:
            return DistributionSpec::trunc_normal(center, param).mean();
    }
    return center;
}

double NoiseSpec::sample(double center, Rng& rng) const {
    switch (kind) {
        case Kind::None:
            return center;
        case Kind::UniformWidth: {
            const double w = std::min(param, center);
            return rng.uniform(center - w, center + w);
        }
        case Kind::TruncNormalSd: {
            for (;;) {
                double x = rng.normal(center, param);
                if (x >= 0.0) return x;
            }
        }
    }
    return center;
}

void GenerativeConfig::validate() const {
    if (scale_max <= 1.0) throw InputError("scale_max must exceed 1");
    if (users == 0 || items == 0) throw InputError("users and items must be positive");
    if (disadvantaged_fraction < 0.0 || disadvantaged_fraction > 1.0)
        throw InputError("disadvantaged_fraction must lie in [0,1]");
    if (!(density > 0.0 && density <= 1.0)) throw InputError("density must lie in (0,1]");
    alpha.validate();
    omega.validate();
    preference_noise.validate();
    bias_noise.validate();
}

std::pair<double, double> sample_user(const GenerativeConfig& config, Rng& user_rng) {
    double alpha_u = config.alpha.sample(user_rng);
    double beta_u = config.omega.sample(user_rng);
    return {alpha_u, beta_u};
}

double generate_rating(double scale_max, double p, double q, bool disadvantaged, bool clamp) {
    double r = scale_max * std::exp(-p - (disadvantaged ? q : 0.0));
    if (clamp) r = std::min(scale_max, std::max(1.0, r));
    return r;
}

namespace {

std::string padded_id(char prefix, std::size_t value, std::size_t width) {
    std::string digits = std::to_string(value);
    std::string out(1, prefix);
    if (digits.size() < width) out.append(width - digits.size(), '0');
    out += digits;
    return out;
}

std::size_t digits_for(std::size_t n) {
    std::size_t width = 1, cap = 10;
    while (n >= cap) {
        ++width;
        cap *= 10;
    }
    return width;
}

}  // namespace

SyntheticDataset generate_dataset(const GenerativeConfig& config) {
    config.validate();
    const std::size_t item_width = digits_for(config.items);
    const std::size_t user_width = digits_for(config.users);
    const std::size_t n_disadvantaged = static_cast<std::size_t>(
        std::llround(config.disadvantaged_fraction * static_cast<double>(config.items)));

    std::vector<std::string> item_ids(config.items);
    std::vector<GroupLabel> groups(config.items);
    for (std::size_t i = 0; i < config.items; ++i) {
        item_ids[i] = padded_id('i', i + 1, item_width);
        groups[i] = i < n_disadvantaged ? GroupLabel::Disadvantaged : GroupLabel::Advantaged;
    }

    SyntheticDataset out;
    std::vector<std::string> user_ids(config.users);
    std::vector<Rating> triples;
    out.ground_truth.resize(config.users);
    for (std::size_t u = 0; u < config.users; ++u) {
        user_ids[u] = padded_id('u', u + 1, user_width);
        Rng rng(substream_seed(config.seed, u + 1));
        auto [alpha_u, beta_u] = sample_user(config, rng);
        out.ground_truth[u] = {user_ids[u], config.preference_noise.mean_given_center(alpha_u),
                               config.bias_noise.mean_given_center(beta_u)};
        std::size_t rated = 0;
        for (std::size_t i = 0; i < config.items; ++i) {
            if (config.density < 1.0 && !rng.bernoulli(config.density)) continue;
            const bool dis = groups[i] == GroupLabel::Disadvantaged;
            double p = config.preference_noise.sample(alpha_u, rng);
            double q = dis ? config.bias_noise.sample(beta_u, rng) : 0.0;
            double r = generate_rating(config.scale_max, p, q, dis, config.clamp_to_scale);
            triples.push_back({static_cast<Index>(u), static_cast<Index>(i), r});
            if (config.retain_realized) out.realized.push_back({user_ids[u], item_ids[i], p, q});
            ++rated;
        }
        if (rated == 0) out.empty_profile_users += 1;
    }

    // Users with empty profiles stay in the universe: ground truth keeps
    // them, and the id list passed to the dataset includes them.
    out.ratings = RatingsDataset::build(config.scale_max, std::move(user_ids), std::move(item_ids),
                                        std::move(triples), std::move(groups),
                                        /*enforce_scale=*/config.clamp_to_scale);
    return out;
}

void save_ground_truth(const std::vector<UserGroundTruth>& truth, const std::string& path,
                       char delimiter) {
    std::vector<const UserGroundTruth*> order;
    order.reserve(truth.size());
    for (const UserGroundTruth& t : truth) order.push_back(&t);
    std::sort(order.begin(), order.end(),
              [](const UserGroundTruth* a, const UserGroundTruth* b) { return a->user_id < b->user_id; });
    DelimitedWriter out(path, delimiter);
    out.write_row({"user_id", "alpha", "beta"});
    for (const UserGroundTruth* t : order)
        out.write_row({t->user_id, format_double(t->alpha), format_double(t->beta)});
    out.close();
}

}  // namespace fairrec
