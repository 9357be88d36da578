// Independent reference implementations used as test oracles. These
// deliberately re-derive everything from the written definitions instead of
// calling into the library's kernels, so they can catch the kernels lying.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fairrec/dataset.hpp"
#include "fairrec/kernels.hpp"

namespace refimpl {

// Small dense instance: ratings[u][i] is nullopt when unrated.
struct Instance {
    std::size_t n_users = 0;
    std::size_t n_items = 0;
    std::vector<std::vector<std::optional<double>>> r;

    static Instance make(std::size_t users, std::size_t items) {
        Instance inst;
        inst.n_users = users;
        inst.n_items = items;
        inst.r.assign(users, std::vector<std::optional<double>>(items));
        return inst;
    }
};

inline double row_mean(const Instance& inst, std::size_t u) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& v : inst.r[u])
        if (v) {
            s += *v;
            ++n;
        }
    return n ? s / static_cast<double>(n) : 0.0;
}

inline double global_mean(const Instance& inst) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& row : inst.r)
        for (const auto& v : row)
            if (v) {
                s += *v;
                ++n;
            }
    return n ? s / static_cast<double>(n) : 0.0;
}

// Full similarity matrix per the documented definition: pearson over
// co-rated items with full-profile centering, or cosine with full norms;
// min_overlap gate and significance shrink applied, accumulation in
// ascending item order.
inline double similarity(const Instance& inst, std::size_t a, std::size_t b,
                         const fairrec::NeighborParams& p) {
    double dot = 0.0, ssa = 0.0, ssb = 0.0;
    std::size_t overlap = 0;
    const double ma = row_mean(inst, a), mb = row_mean(inst, b);
    for (std::size_t i = 0; i < inst.n_items; ++i) {
        if (!inst.r[a][i] || !inst.r[b][i]) continue;
        const double va = *inst.r[a][i], vb = *inst.r[b][i];
        if (p.similarity == fairrec::Similarity::Pearson) {
            dot += (va - ma) * (vb - mb);
            ssa += (va - ma) * (va - ma);
            ssb += (vb - mb) * (vb - mb);
        } else {
            dot += va * vb;
        }
        ++overlap;
    }
    if (overlap < p.min_overlap || overlap == 0) return 0.0;
    double sim;
    if (p.similarity == fairrec::Similarity::Pearson) {
        if (ssa <= 0.0 || ssb <= 0.0) return 0.0;
        sim = dot / std::sqrt(ssa * ssb);
    } else {
        double na = 0.0, nb = 0.0;
        for (const auto& v : inst.r[a])
            if (v) na += *v * *v;
        for (const auto& v : inst.r[b])
            if (v) nb += *v * *v;
        if (na <= 0.0 || nb <= 0.0) return 0.0;
        sim = dot / (std::sqrt(na) * std::sqrt(nb));
    }
    if (p.shrink > 0)
        sim *= static_cast<double>(std::min(overlap, p.shrink)) / static_cast<double>(p.shrink);
    return sim;
}

// Global top-k positive neighbors, similarity descending, index ascending.
inline std::vector<std::pair<std::size_t, double>> top_k_neighbors(const Instance& inst,
                                                                   std::size_t u,
                                                                   const fairrec::NeighborParams& p) {
    std::vector<std::pair<std::size_t, double>> sims;
    for (std::size_t v = 0; v < inst.n_users; ++v) {
        if (v == u) continue;
        double s = similarity(inst, u, v, p);
        if (s > 0.0) sims.emplace_back(v, s);
    }
    std::sort(sims.begin(), sims.end(), [](const auto& x, const auto& y) {
        if (x.second != y.second) return x.second > y.second;
        return x.first < y.first;
    });
    if (sims.size() > p.k) sims.resize(p.k);
    return sims;
}

inline double knn_predict(const Instance& inst, std::size_t u, std::size_t i,
                          const fairrec::NeighborParams& p) {
    bool u_known = false;
    for (const auto& v : inst.r[u])
        if (v) u_known = true;
    bool i_known = false;
    for (std::size_t v = 0; v < inst.n_users; ++v)
        if (inst.r[v][i]) i_known = true;
    auto fallback = [&]() -> double {
        if (u_known) return row_mean(inst, u);
        if (i_known) {
            double s = 0.0;
            std::size_t n = 0;
            for (std::size_t v = 0; v < inst.n_users; ++v)
                if (inst.r[v][i]) {
                    s += *inst.r[v][i];
                    ++n;
                }
            return s / static_cast<double>(n);
        }
        return global_mean(inst);
    };
    if (!u_known) return fallback();
    double num = 0.0, den = 0.0;
    for (const auto& [v, s] : top_k_neighbors(inst, u, p)) {
        if (!inst.r[v][i]) continue;
        num += s * (*inst.r[v][i] - row_mean(inst, v));
        den += s;
    }
    if (den <= 0.0) return fallback();
    return row_mean(inst, u) + num / den;
}

// ItemKNN is UserKNN on the transposed instance.
inline Instance transpose(const Instance& inst) {
    Instance t = Instance::make(inst.n_items, inst.n_users);
    for (std::size_t u = 0; u < inst.n_users; ++u)
        for (std::size_t i = 0; i < inst.n_items; ++i) t.r[i][u] = inst.r[u][i];
    return t;
}

// Naive geometric mean: product^(1/k), the overflow-prone form the library
// avoids; valid as an oracle on small inputs.
inline double naive_geometric_mean(const std::vector<double>& values) {
    double prod = 1.0;
    for (double v : values) prod *= v;
    return std::pow(prod, 1.0 / static_cast<double>(values.size()));
}

// Ranking metrics, re-derived.
inline double ref_dcg(const std::vector<int>& gains_in_rank_order) {
    double dcg = 0.0;
    for (std::size_t rank = 1; rank <= gains_in_rank_order.size(); ++rank)
        dcg += gains_in_rank_order[rank - 1] / (std::log(static_cast<double>(rank) + 1.0) / std::log(2.0));
    return dcg;
}

inline double ref_ndcg(const std::vector<int>& gains_in_rank_order, std::size_t n_relevant,
                       std::size_t n) {
    std::vector<int> truncated(gains_in_rank_order.begin(),
                               gains_in_rank_order.begin() +
                                   static_cast<std::ptrdiff_t>(std::min(n, gains_in_rank_order.size())));
    std::vector<int> ideal(std::min(n, n_relevant), 1);
    const double idcg = ref_dcg(ideal);
    return idcg > 0.0 ? ref_dcg(truncated) / idcg : 0.0;
}

inline double ref_rmse(const std::vector<std::pair<double, double>>& pairs) {
    double ss = 0.0;
    for (const auto& [p, t] : pairs) ss += (p - t) * (p - t);
    return std::sqrt(ss / static_cast<double>(pairs.size()));
}

inline double ref_mae(const std::vector<std::pair<double, double>>& pairs) {
    double s = 0.0;
    for (const auto& [p, t] : pairs) s += std::fabs(p - t);
    return s / static_cast<double>(pairs.size());
}

// Reference normal CDF through the standard library's erfc.
inline double ref_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Builds a real dataset from a dense instance (and the instance from a
// dataset) so both sides of the oracle see identical inputs.
inline fairrec::RatingsDataset to_dataset(const Instance& inst, double scale_max = 10.0) {
    std::vector<std::string> users, items;
    for (std::size_t u = 0; u < inst.n_users; ++u) users.push_back("u" + std::to_string(u + 100));
    for (std::size_t i = 0; i < inst.n_items; ++i) items.push_back("i" + std::to_string(i + 100));
    std::vector<fairrec::Rating> triples;
    std::vector<fairrec::GroupLabel> groups(inst.n_items, fairrec::GroupLabel::Advantaged);
    for (std::size_t u = 0; u < inst.n_users; ++u)
        for (std::size_t i = 0; i < inst.n_items; ++i)
            if (inst.r[u][i])
                triples.push_back({static_cast<fairrec::Index>(u), static_cast<fairrec::Index>(i),
                                   *inst.r[u][i]});
    return fairrec::RatingsDataset::build(scale_max, users, items, triples, groups);
}

}  // namespace refimpl
