#pragma once

#include <span>
#include <string>
#include <vector>

#include "qfi/calibration.hpp"
#include "qfi/common.hpp"
#include "qfi/qmath.hpp"
#include "qfi/sampling.hpp"

namespace qfi::shadows {

enum class Mode { Robust, Raw };

// Average of robust shadows over one block of the record stream. Hermitian
// with unit trace up to rounding (every factorized shadow has trace 1).
struct BatchShadow {
    CMat rho_hat;
    int batch_index = 0;
    int first_iteration = 0;
    int last_iteration = 0;
};

struct Estimate {
    double value = 0.0;
    double stderr_ = 0.0;  // delete-one-batch jackknife
    int n_batches = 0;
    std::string method;
};

// Weighted sum over outcomes s of tensor products x_j maps[j](:, s_j),
// where each column of maps[j] is the vec of a 2x2 operator. This is the
// mode-by-mode Kronecker transform: O(4^N) independent of the number of
// distinct outcomes.
CMat expand_product_operators(const RVec& weights,
                              const std::vector<Eigen::Matrix<Complex, 4, 2>>& maps);

// Count-weighted average over one record's outcomes of
//   prod_j [ alpha_j U_j^dag |s_j><s_j| U_j + beta_j I ],
// with alpha_j = 3/(2G_j - 1), beta_j = (G_j - 2)/(2G_j - 1).
CMat record_average_shadow(const sampling::MeasurementRecord& rec, std::span<const double> g);

// Compress estimation records into n_batches batch shadows. When n_batches
// divides the iteration count, batches are iteration ranges; otherwise the
// record stream is split into near-equal contiguous blocks in (i, r) order.
// Raw mode forces G = 1 (no mitigation).
std::vector<BatchShadow> build_batch_shadows(
    const std::vector<sampling::MeasurementRecord>& est_records,
    const calibration::CalibrationTable& table, int n_batches, Mode mode = Mode::Robust);

// U-statistics estimators over distinct batch indices (orders 0..2):
//   F0 = 4 <Tr(r1 [r2, A] A)>
//   F1 = 2 F0 - 4 <Tr(r1 r2 [r3, A] A)>
//   F2 = 3(F1 - F0) + 4 <Tr(r1 r2 [r3 r4, A] A)>
Estimate ustat_f(std::span<const BatchShadow> shadows, const qmath::DiagonalOperator& a, int n);

// Evaluates several orders while sharing the pairwise-product cache.
// Supported orders: 0, 1, 2, 3.
std::vector<Estimate> ustat_f_orders(std::span<const BatchShadow> shadows,
                                     const qmath::DiagonalOperator& a,
                                     const std::vector<int>& orders);

// Mean of Tr(r_b1 r_b2) over distinct batch pairs.
Estimate ustat_purity(std::span<const BatchShadow> shadows);

// Degree-5 estimator of F_3: every density-matrix power in the trace
// polynomial is replaced by distinct batch indices, averaged over all
// ordered selections.
Estimate ustat_f3(std::span<const BatchShadow> shadows, const qmath::DiagonalOperator& a);

}  // namespace qfi::shadows
