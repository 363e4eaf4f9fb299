#pragma once

// Naive serial oracles used by the tests and the benchmark. These stay
// deliberately independent of the spo2_core implementation paths they
// cross-check: plain loops, exhaustive searches, textbook formulas.

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "spo2/roi.hpp"
#include "spo2/types.hpp"

namespace reference {

// Mean of each channel over mask-true pixels, nested x/y loops.
spo2::RgbTrace spatial_average(const spo2::FrameSequence& seq,
                               const std::vector<spo2::roi::SkinMask>& masks);

// Centered moving mean, O(n*w) rescan per output sample.
std::vector<double> moving_average(std::span<const double> x, int window);

// Otsu by recomputing both class statistics from scratch for all 256
// candidate thresholds.
int otsu_threshold(const std::array<std::uint64_t, 256>& histogram);

// Best DP-tracker path score by enumerating all F^T paths.
double dp_best_score_exhaustive(const std::vector<std::vector<double>>& mag,
                                double jump_penalty, int max_jump);

// O(n^2) DFT magnitudes of a real signal, bins 0..n/2.
std::vector<double> dft_magnitude(std::span<const double> x);

// Full 2D convolution with the given kernel, replicate padding.
spo2::FrameSequence gaussian_blur_naive(const spo2::FrameSequence& seq,
                                        double sigma, int support);

// Ridge objective minimized by plain gradient descent on centered data.
std::vector<double> ridge_gradient_descent(
    const std::vector<std::vector<double>>& rows, std::span<const double> y,
    double lambda, double y_mean, int iters = 200000, double lr = 1e-3);

// epsilon-SVR dual objective W(beta) = -1/2 b'Kb + y'b - eps*sum|b|
// for the box-and-sum-constrained beta parametrization.
double svr_dual_objective(const std::vector<std::vector<double>>& kernel,
                          std::span<const double> y, double epsilon,
                          std::span<const double> beta);

// Maximum of the 4-point dual by nested grid refinement down to the
// given final step (the dual is concave, so refinement is exact up to
// the grid resolution).
double svr_dual_grid_max4(const std::vector<std::vector<double>>& kernel,
                          std::span<const double> y, double epsilon, double c,
                          double final_step = 1e-3);

}  // namespace reference
