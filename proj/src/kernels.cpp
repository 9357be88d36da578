#include "fairrec/kernels.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace fairrec {

SparseRows transpose(const SparseRows& m, std::size_t n_cols) {
    SparseRows t;
    t.offsets.assign(n_cols + 1, 0);
    for (Index c : m.cols) t.offsets[c + 1] += 1;
    for (std::size_t c = 0; c < n_cols; ++c) t.offsets[c + 1] += t.offsets[c];
    t.cols.resize(m.cols.size());
    t.values.resize(m.values.size());
    std::vector<std::uint32_t> cursor(t.offsets.begin(), t.offsets.end() - 1);
    // Row-major scan keeps each transposed row sorted by original row index.
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::uint32_t s = m.offsets[r]; s < m.offsets[r + 1]; ++s) {
            std::uint32_t slot = cursor[m.cols[s]]++;
            t.cols[slot] = static_cast<Index>(r);
            t.values[slot] = m.values[s];
        }
    }
    return t;
}

std::vector<double> row_means(const SparseRows& m) {
    std::vector<double> means(m.rows(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const std::size_t d = m.degree(r);
        if (d == 0) continue;
        double s = 0.0;
        for (std::uint32_t k = m.offsets[r]; k < m.offsets[r + 1]; ++k) s += m.values[k];
        means[r] = s / static_cast<double>(d);
    }
    return means;
}

std::vector<double> row_norms(const SparseRows& m) {
    std::vector<double> norms(m.rows(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double s = 0.0;
        for (std::uint32_t k = m.offsets[r]; k < m.offsets[r + 1]; ++k) s += m.values[k] * m.values[k];
        norms[r] = std::sqrt(s);
    }
    return norms;
}

double global_mean(const SparseRows& m) {
    if (m.values.empty()) return 0.0;
    double s = 0.0;
    for (double v : m.values) s += v;
    return s / static_cast<double>(m.values.size());
}

double pairwise_similarity(const SparseRows& m, const std::vector<double>& means,
                           const std::vector<double>& norms, std::size_t a, std::size_t b,
                           const NeighborParams& params) {
    std::uint32_t ia = m.offsets[a], ea = m.offsets[a + 1];
    std::uint32_t ib = m.offsets[b], eb = m.offsets[b + 1];
    std::size_t overlap = 0;
    double dot = 0.0, ssa = 0.0, ssb = 0.0;
    const double ma = means[a], mb = means[b];
    while (ia < ea && ib < eb) {
        const Index ca = m.cols[ia], cb = m.cols[ib];
        if (ca < cb) {
            ++ia;
        } else if (cb < ca) {
            ++ib;
        } else {
            const double va = m.values[ia], vb = m.values[ib];
            if (params.similarity == Similarity::Pearson) {
                dot += (va - ma) * (vb - mb);
                ssa += (va - ma) * (va - ma);
                ssb += (vb - mb) * (vb - mb);
            } else {
                dot += va * vb;
            }
            ++overlap;
            ++ia;
            ++ib;
        }
    }
    if (overlap < params.min_overlap || overlap == 0) return 0.0;
    double sim;
    if (params.similarity == Similarity::Pearson) {
        if (ssa <= 0.0 || ssb <= 0.0) return 0.0;
        sim = dot / std::sqrt(ssa * ssb);
    } else {
        if (norms[a] <= 0.0 || norms[b] <= 0.0) return 0.0;
        sim = dot / (norms[a] * norms[b]);
    }
    if (params.shrink > 0)
        sim *= static_cast<double>(std::min(overlap, params.shrink)) / static_cast<double>(params.shrink);
    return sim;
}

namespace {

std::vector<Neighbor> neighbors_for_row(const SparseRows& m, const std::vector<double>& means,
                                        const std::vector<double>& norms, std::size_t r,
                                        const NeighborParams& params) {
    std::vector<Neighbor> all;
    for (std::size_t v = 0; v < m.rows(); ++v) {
        if (v == r) continue;
        double sim = pairwise_similarity(m, means, norms, r, v, params);
        if (sim > 0.0) all.push_back({static_cast<Index>(v), sim});
    }
    auto better = [](const Neighbor& x, const Neighbor& y) {
        if (x.sim != y.sim) return x.sim > y.sim;
        return x.id < y.id;
    };
    if (all.size() > params.k) {
        std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(params.k), all.end(),
                         better);
        all.resize(params.k);
    }
    std::sort(all.begin(), all.end(), better);
    return all;
}

}  // namespace

std::vector<std::vector<Neighbor>> neighbor_lists(const SparseRows& m, const NeighborParams& params) {
    const std::vector<double> means = row_means(m);
    const std::vector<double> norms = row_norms(m);
    std::vector<std::vector<Neighbor>> lists(m.rows());
#pragma omp parallel for schedule(dynamic, 16)
    for (long long r = 0; r < static_cast<long long>(m.rows()); ++r)
        lists[static_cast<std::size_t>(r)] =
            neighbors_for_row(m, means, norms, static_cast<std::size_t>(r), params);
    return lists;
}

std::vector<std::vector<Neighbor>> neighbor_lists_serial(const SparseRows& m,
                                                         const NeighborParams& params) {
    const std::vector<double> means = row_means(m);
    const std::vector<double> norms = row_norms(m);
    std::vector<std::vector<Neighbor>> lists(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        lists[r] = neighbors_for_row(m, means, norms, r, params);
    return lists;
}

namespace {

void solve_row(const SparseRows& side, const std::vector<double>& fixed_factors, std::size_t factors,
               double lambda, std::size_t r, std::vector<double>& out_factors) {
    const std::uint32_t lo = side.offsets[r], hi = side.offsets[r + 1];
    double* x = out_factors.data() + r * factors;
    if (lo == hi) {
        std::fill(x, x + factors, 0.0);
        return;
    }
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(factors),
                                              static_cast<Eigen::Index>(factors));
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(factors));
    for (std::uint32_t s = lo; s < hi; ++s) {
        Eigen::Map<const Eigen::VectorXd> f(fixed_factors.data() + side.cols[s] * factors,
                                            static_cast<Eigen::Index>(factors));
        a.noalias() += f * f.transpose();
        b.noalias() += side.values[s] * f;
    }
    Eigen::VectorXd solution;
    if (lambda > 0.0) {
        for (std::size_t d = 0; d < factors; ++d)
            a(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)) += lambda;
        solution = a.ldlt().solve(b);
    } else {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
        if (!lu.isInvertible())
            throw SingularSystemError("ALS normal equations singular with lambda = 0");
        solution = lu.solve(b);
    }
    for (std::size_t d = 0; d < factors; ++d) x[d] = solution(static_cast<Eigen::Index>(d));
}

}  // namespace

void als_half_step(const SparseRows& side, const std::vector<double>& fixed_factors,
                   std::size_t factors, double lambda, std::vector<double>& out_factors) {
    out_factors.resize(side.rows() * factors);
    // Exceptions cannot cross the parallel region; carry the first one out.
    bool singular = false;
#pragma omp parallel for schedule(dynamic, 32)
    for (long long r = 0; r < static_cast<long long>(side.rows()); ++r) {
        try {
            solve_row(side, fixed_factors, factors, lambda, static_cast<std::size_t>(r), out_factors);
        } catch (const SingularSystemError&) {
#pragma omp critical
            singular = true;
        }
    }
    if (singular) throw SingularSystemError("ALS normal equations singular with lambda = 0");
}

void als_half_step_serial(const SparseRows& side, const std::vector<double>& fixed_factors,
                          std::size_t factors, double lambda, std::vector<double>& out_factors) {
    out_factors.resize(side.rows() * factors);
    for (std::size_t r = 0; r < side.rows(); ++r)
        solve_row(side, fixed_factors, factors, lambda, r, out_factors);
}

double als_objective(const SparseRows& users, const std::vector<double>& user_factors,
                     const std::vector<double>& item_factors, std::size_t factors, double lambda) {
    std::vector<double> partial(users.rows(), 0.0);
#pragma omp parallel for schedule(static)
    for (long long u = 0; u < static_cast<long long>(users.rows()); ++u) {
        const auto r = static_cast<std::size_t>(u);
        double s = 0.0;
        for (std::uint32_t k = users.offsets[r]; k < users.offsets[r + 1]; ++k) {
            double pred = 0.0;
            const double* x = user_factors.data() + r * factors;
            const double* y = item_factors.data() + users.cols[k] * factors;
            for (std::size_t d = 0; d < factors; ++d) pred += x[d] * y[d];
            const double e = users.values[k] - pred;
            s += e * e;
        }
        partial[r] = s;
    }
    double objective = 0.0;
    for (double s : partial) objective += s;
    double penalty = 0.0;
    for (double v : user_factors) penalty += v * v;
    for (double v : item_factors) penalty += v * v;
    return objective + lambda * penalty;
}

}  // namespace fairrec
