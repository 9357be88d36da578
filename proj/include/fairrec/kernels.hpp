#pragma once

#include <cstdint>
#include <vector>

#include "fairrec/common.hpp"

namespace fairrec {

/// One side of a sparse rating matrix in compressed row form. Rows are users
/// for the user-oriented view, items for the transposed view, so the same
/// kernels serve UserKNN/ItemKNN and both ALS half-steps.
struct SparseRows {
    std::vector<std::uint32_t> offsets;  // size rows+1
    std::vector<Index> cols;             // sorted within each row
    std::vector<double> values;

    std::size_t rows() const { return offsets.size() - 1; }
    std::size_t degree(std::size_t r) const { return offsets[r + 1] - offsets[r]; }
};

SparseRows transpose(const SparseRows& m, std::size_t n_cols);

std::vector<double> row_means(const SparseRows& m);
std::vector<double> row_norms(const SparseRows& m);
double global_mean(const SparseRows& m);

enum class Similarity { Pearson, Cosine };

struct NeighborParams {
    std::size_t k = 40;
    Similarity similarity = Similarity::Pearson;
    std::size_t min_overlap = 3;
    /// Significance weighting: similarities are scaled by
    /// min(overlap, shrink) / shrink. 0 disables.
    std::size_t shrink = 50;
};

struct Neighbor {
    Index id;
    double sim;
};

/// Pearson correlation over the co-rated columns, rows centered by their
/// full-row means, or cosine over the full sparse vectors. Returns 0 when the
/// overlap is below min_overlap or a variance vanishes.
double pairwise_similarity(const SparseRows& m, const std::vector<double>& means,
                           const std::vector<double>& norms, std::size_t a, std::size_t b,
                           const NeighborParams& params);

/// Global top-k neighbor list per row: positive similarities only, ordered by
/// similarity descending with ascending-index tie-break.
///
/// The OpenMP variant parallelizes across rows; each row is computed
/// independently so it matches the serial reference bitwise.
std::vector<std::vector<Neighbor>> neighbor_lists(const SparseRows& m, const NeighborParams& params);
std::vector<std::vector<Neighbor>> neighbor_lists_serial(const SparseRows& m,
                                                         const NeighborParams& params);

/// One ALS half-step: for every row r of `side`, solves
///   (F_r^T F_r + lambda I) x_r = F_r^T values_r
/// over the columns rated in that row, where F holds the fixed factors of the
/// other side (row-major, `factors` wide). Rows with no ratings get zeros.
/// lambda = 0 on a rank-deficient system throws SingularSystemError.
void als_half_step(const SparseRows& side, const std::vector<double>& fixed_factors,
                   std::size_t factors, double lambda, std::vector<double>& out_factors);
void als_half_step_serial(const SparseRows& side, const std::vector<double>& fixed_factors,
                          std::size_t factors, double lambda, std::vector<double>& out_factors);

/// Squared reconstruction error of the current factor pair over the observed
/// entries, plus the L2 penalty. Per-row partials are reduced in index order
/// so the result does not depend on thread count.
double als_objective(const SparseRows& users, const std::vector<double>& user_factors,
                     const std::vector<double>& item_factors, std::size_t factors, double lambda);

}  // namespace fairrec
