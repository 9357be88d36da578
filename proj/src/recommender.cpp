#include "fairrec/recommender.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "fairrec/rng.hpp"

namespace fairrec {

std::string algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::UserKnn: return "user-knn";
        case Algorithm::ItemKnn: return "item-knn";
        case Algorithm::Als: return "als";
        case Algorithm::Svd: return "svd";
    }
    return "?";
}

Algorithm algorithm_from_name(const std::string& name) {
    if (name == "user-knn") return Algorithm::UserKnn;
    if (name == "item-knn") return Algorithm::ItemKnn;
    if (name == "als") return Algorithm::Als;
    if (name == "svd") return Algorithm::Svd;
    throw InputError("unknown algorithm '" + name + "'");
}

void ModelConfig::validate() const {
    if (knn.k < 1) throw InputError("knn.k must be >= 1");
    if (als.factors < 1 || svd.factors < 1) throw InputError("factors must be >= 1");
    if (als.lambda < 0.0 || svd.reg < 0.0) throw InputError("regularization must be >= 0");
    if (als.iterations < 1 || svd.epochs < 1) throw InputError("iterations/epochs must be >= 1");
    if (svd.learning_rate <= 0.0) throw InputError("learning_rate must be positive");
}

namespace {

SparseRows user_rows(const RatingsDataset& ds) {
    SparseRows m;
    m.offsets = ds.user_offsets();
    m.cols = ds.user_items();
    m.values = ds.user_values();
    return m;
}

double binary_lookup(const SparseRows& m, std::size_t row, Index col, bool& found) {
    const Index* begin = m.cols.data() + m.offsets[row];
    const Index* end = m.cols.data() + m.offsets[row + 1];
    const Index* it = std::lower_bound(begin, end, col);
    if (it != end && *it == col) {
        found = true;
        return m.values[static_cast<std::size_t>(it - m.cols.data())];
    }
    found = false;
    return 0.0;
}

struct Fallback {
    std::vector<double> user_mean, item_mean;
    std::vector<bool> user_known, item_known;
    double global = 0.0;

    double resolve(Index u, Index i) const {
        if (u < user_known.size() && user_known[u]) return user_mean[u];
        if (i < item_known.size() && item_known[i]) return item_mean[i];
        return global;
    }
};

Fallback make_fallback(const SparseRows& users, const SparseRows& items) {
    Fallback f;
    f.user_mean = row_means(users);
    f.item_mean = row_means(items);
    f.user_known.resize(users.rows());
    for (std::size_t u = 0; u < users.rows(); ++u) f.user_known[u] = users.degree(u) > 0;
    f.item_known.resize(items.rows());
    for (std::size_t i = 0; i < items.rows(); ++i) f.item_known[i] = items.degree(i) > 0;
    f.global = global_mean(users);
    return f;
}

class KnnModel final : public RatingPredictor {
public:
    KnnModel(const RatingsDataset& ds, const ModelConfig& config, bool item_based)
        : config_(config), item_based_(item_based) {
        users_ = user_rows(ds);
        items_ = transpose(users_, ds.item_count());
        fallback_ = make_fallback(users_, items_);
        NeighborParams params{config.knn.k, config.knn.similarity, config.knn.min_overlap,
                              config.knn.shrink};
        const SparseRows& oriented = item_based_ ? items_ : users_;
        neighbors_ = neighbor_lists(oriented, params);
        oriented_means_ = row_means(oriented);
    }

    Algorithm algorithm() const override {
        return item_based_ ? Algorithm::ItemKnn : Algorithm::UserKnn;
    }

    double predict(Index user, Index item) const override {
        if (item_based_) return predict_oriented(item, user, items_, fallback_, user, item);
        return predict_oriented(user, item, users_, fallback_, user, item);
    }

    void fold_in(const std::vector<Index>&) override {
        // Nothing to do: KNN reads the visible ratings directly from the
        // training matrix.
    }

    const std::vector<double>& objective_trace() const override { return empty_trace_; }

private:
    /// `query` indexes the oriented side (user for UserKNN, item for ItemKNN);
    /// `target` the other side. The prediction is the oriented row's mean plus
    /// the similarity-weighted deviation of neighbors that rated `target`.
    double predict_oriented(Index query, Index target, const SparseRows& oriented,
                            const Fallback& fb, Index fb_user, Index fb_item) const {
        if (query >= neighbors_.size() || oriented.degree(query) == 0)
            return fb.resolve(fb_user, fb_item);
        double num = 0.0, den = 0.0;
        for (const Neighbor& nb : neighbors_[query]) {
            bool found = false;
            double value = binary_lookup(oriented, nb.id, target, found);
            if (!found) continue;
            num += nb.sim * (value - oriented_means_[nb.id]);
            den += nb.sim;
        }
        if (den <= 0.0) return fb.resolve(fb_user, fb_item);
        return oriented_means_[query] + num / den;
    }

    ModelConfig config_;
    bool item_based_;
    SparseRows users_, items_;
    Fallback fallback_;
    std::vector<std::vector<Neighbor>> neighbors_;
    std::vector<double> oriented_means_;
    std::vector<double> empty_trace_;
};

class AlsModel final : public RatingPredictor {
public:
    AlsModel(const RatingsDataset& ds, const ModelConfig& config) : config_(config) {
        users_ = user_rows(ds);
        items_ = transpose(users_, ds.item_count());
        fallback_ = make_fallback(users_, items_);
        const std::size_t f = config.als.factors;
        Rng rng(substream_seed(config.seed, 0x616c73ull));  // "als"
        item_factors_.resize(items_.rows() * f);
        for (double& v : item_factors_) v = 0.1 * rng.uniform_pos();
        user_factors_.assign(users_.rows() * f, 0.0);
        for (std::size_t it = 0; it < config.als.iterations; ++it) {
            als_half_step(users_, item_factors_, f, config.als.lambda, user_factors_);
            trace_.push_back(als_objective(users_, user_factors_, item_factors_, f, config.als.lambda));
            als_half_step(items_, user_factors_, f, config.als.lambda, item_factors_);
            trace_.push_back(als_objective(users_, user_factors_, item_factors_, f, config.als.lambda));
        }
    }

    Algorithm algorithm() const override { return Algorithm::Als; }

    double predict(Index user, Index item) const override {
        if (user >= users_.rows() || item >= items_.rows() || users_.degree(user) == 0 ||
            items_.degree(item) == 0)
            return fallback_.resolve(user, item);
        const std::size_t f = config_.als.factors;
        const double* x = user_factors_.data() + user * f;
        const double* y = item_factors_.data() + item * f;
        double dot = 0.0;
        for (std::size_t d = 0; d < f; ++d) dot += x[d] * y[d];
        return dot;
    }

    void fold_in(const std::vector<Index>& users) override {
        // One user half-step restricted to the given rows: least squares
        // against the final item factors.
        const std::size_t f = config_.als.factors;
        SparseRows sub;
        sub.offsets.push_back(0);
        for (Index u : users) {
            for (std::uint32_t s = users_.offsets[u]; s < users_.offsets[u + 1]; ++s) {
                sub.cols.push_back(users_.cols[s]);
                sub.values.push_back(users_.values[s]);
            }
            sub.offsets.push_back(static_cast<std::uint32_t>(sub.cols.size()));
        }
        std::vector<double> refit;
        als_half_step(sub, item_factors_, f, config_.als.lambda, refit);
        for (std::size_t k = 0; k < users.size(); ++k) {
            if (sub.degree(k) == 0) continue;  // keep trained factors for empty rows
            std::copy(refit.begin() + k * f, refit.begin() + (k + 1) * f,
                      user_factors_.begin() + static_cast<std::size_t>(users[k]) * f);
        }
    }

    const std::vector<double>& objective_trace() const override { return trace_; }

private:
    ModelConfig config_;
    SparseRows users_, items_;
    Fallback fallback_;
    std::vector<double> user_factors_, item_factors_;
    std::vector<double> trace_;
};

class SvdModel final : public RatingPredictor {
public:
    SvdModel(const RatingsDataset& ds, const ModelConfig& config) : config_(config) {
        users_ = user_rows(ds);
        items_ = transpose(users_, ds.item_count());
        fallback_ = make_fallback(users_, items_);
        const std::size_t f = config.svd.factors;
        state_.factors = f;
        state_.global_mean = global_mean(users_);
        state_.user_bias.assign(users_.rows(), 0.0);
        state_.item_bias.assign(items_.rows(), 0.0);
        Rng rng(substream_seed(config.seed, 0x737664ull));  // "svd"
        state_.user_factors.resize(users_.rows() * f);
        for (double& v : state_.user_factors) v = 0.05 * rng.normal();
        state_.item_factors.resize(items_.rows() * f);
        for (double& v : state_.item_factors) v = 0.05 * rng.normal();

        // Flat triple list for the epoch shuffles.
        std::vector<std::pair<Index, std::uint32_t>> entries;  // (user, csr slot)
        entries.reserve(users_.values.size());
        for (std::size_t u = 0; u < users_.rows(); ++u)
            for (std::uint32_t s = users_.offsets[u]; s < users_.offsets[u + 1]; ++s)
                entries.emplace_back(static_cast<Index>(u), s);

        const double lr = config.svd.learning_rate;
        const double reg = config.svd.reg;
        std::vector<std::size_t> order(entries.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        for (std::size_t epoch = 0; epoch < config.svd.epochs; ++epoch) {
            rng.shuffle(order);
            for (std::size_t k : order) {
                const auto [u, slot] = entries[k];
                const Index i = users_.cols[slot];
                const double r = users_.values[slot];
                double* p = state_.user_factors.data() + static_cast<std::size_t>(u) * f;
                double* q = state_.item_factors.data() + static_cast<std::size_t>(i) * f;
                double pred = state_.global_mean + state_.user_bias[u] + state_.item_bias[i];
                for (std::size_t d = 0; d < f; ++d) pred += p[d] * q[d];
                const double e = r - pred;
                state_.user_bias[u] += lr * (e - reg * state_.user_bias[u]);
                state_.item_bias[i] += lr * (e - reg * state_.item_bias[i]);
                for (std::size_t d = 0; d < f; ++d) {
                    const double pd = p[d];
                    p[d] += lr * (e * q[d] - reg * pd);
                    q[d] += lr * (e * pd - reg * q[d]);
                }
            }
            trace_.push_back(svd_loss(state_, users_, reg));
        }
    }

    Algorithm algorithm() const override { return Algorithm::Svd; }

    double predict(Index user, Index item) const override {
        if (user >= users_.rows() || item >= items_.rows() || users_.degree(user) == 0 ||
            items_.degree(item) == 0)
            return fallback_.resolve(user, item);
        const std::size_t f = state_.factors;
        const double* p = state_.user_factors.data() + static_cast<std::size_t>(user) * f;
        const double* q = state_.item_factors.data() + static_cast<std::size_t>(item) * f;
        double pred = state_.global_mean + state_.user_bias[user] + state_.item_bias[item];
        for (std::size_t d = 0; d < f; ++d) pred += p[d] * q[d];
        return pred;
    }

    void fold_in(const std::vector<Index>& users) override {
        // Ridge least squares for (b_u, p_u) with the item side fixed:
        // design rows are [1, q_i], targets r - mu - b_i.
        const std::size_t f = state_.factors;
        for (Index u : users) {
            const std::uint32_t lo = users_.offsets[u], hi = users_.offsets[u + 1];
            if (lo == hi) continue;
            Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(f + 1),
                                                      static_cast<Eigen::Index>(f + 1));
            Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f + 1));
            Eigen::VectorXd row(static_cast<Eigen::Index>(f + 1));
            for (std::uint32_t s = lo; s < hi; ++s) {
                const Index i = users_.cols[s];
                row(0) = 1.0;
                for (std::size_t d = 0; d < f; ++d)
                    row(static_cast<Eigen::Index>(d + 1)) =
                        state_.item_factors[static_cast<std::size_t>(i) * f + d];
                a.noalias() += row * row.transpose();
                b.noalias() += (users_.values[s] - state_.global_mean - state_.item_bias[i]) * row;
            }
            const double ridge = std::max(config_.svd.reg, 1e-9);
            for (std::size_t d = 0; d <= f; ++d)
                a(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)) += ridge;
            Eigen::VectorXd sol = a.ldlt().solve(b);
            state_.user_bias[u] = sol(0);
            for (std::size_t d = 0; d < f; ++d)
                state_.user_factors[static_cast<std::size_t>(u) * f + d] =
                    sol(static_cast<Eigen::Index>(d + 1));
        }
    }

    const std::vector<double>& objective_trace() const override { return trace_; }

private:
    ModelConfig config_;
    SparseRows users_, items_;
    Fallback fallback_;
    SvdState state_;
    std::vector<double> trace_;
};

}  // namespace

double svd_loss(const SvdState& state, const SparseRows& users, double reg) {
    const std::size_t f = state.factors;
    double loss = 0.0;
    for (std::size_t u = 0; u < users.rows(); ++u) {
        for (std::uint32_t s = users.offsets[u]; s < users.offsets[u + 1]; ++s) {
            const Index i = users.cols[s];
            double pred = state.global_mean + state.user_bias[u] + state.item_bias[i];
            const double* p = state.user_factors.data() + u * f;
            const double* q = state.item_factors.data() + static_cast<std::size_t>(i) * f;
            for (std::size_t d = 0; d < f; ++d) pred += p[d] * q[d];
            const double e = users.values[s] - pred;
            loss += e * e;
        }
    }
    double penalty = 0.0;
    for (double v : state.user_bias) penalty += v * v;
    for (double v : state.item_bias) penalty += v * v;
    for (double v : state.user_factors) penalty += v * v;
    for (double v : state.item_factors) penalty += v * v;
    return loss + reg * penalty;
}

std::vector<double> svd_loss_gradient(const SvdState& state, const SparseRows& users, double reg) {
    const std::size_t f = state.factors;
    const std::size_t n_users = state.user_bias.size();
    const std::size_t n_items = state.item_bias.size();
    std::vector<double> grad(n_users + n_items + (n_users + n_items) * f, 0.0);
    double* g_bu = grad.data();
    double* g_bi = g_bu + n_users;
    double* g_p = g_bi + n_items;
    double* g_q = g_p + n_users * f;
    for (std::size_t u = 0; u < users.rows(); ++u) {
        for (std::uint32_t s = users.offsets[u]; s < users.offsets[u + 1]; ++s) {
            const Index i = users.cols[s];
            double pred = state.global_mean + state.user_bias[u] + state.item_bias[i];
            const double* p = state.user_factors.data() + u * f;
            const double* q = state.item_factors.data() + static_cast<std::size_t>(i) * f;
            for (std::size_t d = 0; d < f; ++d) pred += p[d] * q[d];
            const double e = users.values[s] - pred;
            g_bu[u] += -2.0 * e;
            g_bi[i] += -2.0 * e;
            for (std::size_t d = 0; d < f; ++d) {
                g_p[u * f + d] += -2.0 * e * q[d];
                g_q[static_cast<std::size_t>(i) * f + d] += -2.0 * e * p[d];
            }
        }
    }
    for (std::size_t u = 0; u < n_users; ++u) g_bu[u] += 2.0 * reg * state.user_bias[u];
    for (std::size_t i = 0; i < n_items; ++i) g_bi[i] += 2.0 * reg * state.item_bias[i];
    for (std::size_t k = 0; k < n_users * f; ++k) g_p[k] += 2.0 * reg * state.user_factors[k];
    for (std::size_t k = 0; k < n_items * f; ++k) g_q[k] += 2.0 * reg * state.item_factors[k];
    return grad;
}

std::unique_ptr<RatingPredictor> train_model(const RatingsDataset& train, const ModelConfig& config) {
    if (train.rating_count() == 0) throw InputError("cannot train on an empty dataset");
    config.validate();
    switch (config.algorithm) {
        case Algorithm::UserKnn: return std::make_unique<KnnModel>(train, config, false);
        case Algorithm::ItemKnn: return std::make_unique<KnnModel>(train, config, true);
        case Algorithm::Als: return std::make_unique<AlsModel>(train, config);
        case Algorithm::Svd: return std::make_unique<SvdModel>(train, config);
    }
    throw InputError("unreachable algorithm");
}

std::vector<ScoredItem> score_candidates(const RatingPredictor& model, Index user,
                                         const std::vector<bool>& excluded, std::size_t n_items) {
    std::vector<ScoredItem> scored;
    scored.reserve(n_items);
    for (Index i = 0; i < n_items; ++i) {
        if (excluded[i]) continue;
        scored.push_back({i, model.predict(user, i)});
    }
    return scored;
}

RecommendationProfile top_n_profile(const std::vector<ScoredItem>& scored, std::size_t n,
                                    const RatingsDataset& ds, const std::string& user_id) {
    if (n < 1) throw InputError("top-n length must be >= 1");
    std::vector<const ScoredItem*> order;
    order.reserve(scored.size());
    for (const ScoredItem& s : scored) order.push_back(&s);
    std::sort(order.begin(), order.end(), [&](const ScoredItem* a, const ScoredItem* b) {
        if (a->score != b->score) return a->score > b->score;
        return ds.item_id(a->item) < ds.item_id(b->item);
    });
    RecommendationProfile profile;
    profile.user_id = user_id;
    profile.truncated = scored.size() < n;
    const std::size_t take = std::min(n, order.size());
    for (std::size_t k = 0; k < take; ++k) {
        const std::string& id = ds.item_id(order[k]->item);
        profile.items.push_back(id);
        profile.predicted.emplace(id, order[k]->score);
    }
    return profile;
}

RecommendationProfile recommend_top_n(const RatingPredictor& model, const RatingsDataset& train,
                                      const std::string& user_id, std::size_t n,
                                      const std::vector<std::string>& excluded_items) {
    auto u = train.find_user(user_id);
    if (!u) throw NotFoundError("unknown user '" + user_id + "'");
    std::vector<bool> excluded(train.item_count(), false);
    for (const std::string& id : excluded_items) {
        auto i = train.find_item(id);
        if (i) excluded[*i] = true;
    }
    return top_n_profile(score_candidates(model, *u, excluded, train.item_count()), n, train, user_id);
}

}  // namespace fairrec
