#pragma once

#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "spo2/error.hpp"

namespace spo2::regress {

using Matrix = std::vector<std::vector<double>>;

struct Standardization {
  std::vector<double> mean, stddev;  // population convention
};

// Per-column z-scores; throws degenerate-feature on a zero-variance
// column. The stats are stored on the trained model for inference.
Standardization standardize_stats(const Matrix& rows);
Matrix apply_standardization(const Matrix& rows, const Standardization& s);

struct RidgeModel {
  std::vector<double> w;
  double intercept = 0.0;
  double lambda = 0.0;
  Standardization stats;
};

struct SvrModel {
  Matrix support_vectors;           // standardized rows
  std::vector<double> coef;         // alpha - alpha*
  double bias = 0.0;
  double c = 1.0, gamma = 1.0, epsilon = 0.1;
  Standardization stats;
};

using Model = std::variant<RidgeModel, SvrModel>;

// Solves (F^T F + lambda I) w = F^T y on centered y; the intercept is
// the label mean and stays unregularized. Expects standardized rows.
RidgeModel ridge_fit(const Matrix& rows, std::span<const double> y,
                     double lambda);

std::vector<double> default_lambda_grid();  // 10^-6 .. 10^2, 9 points

// Contiguous-block 5-fold CV, per-fold standardization from the
// training part only; ties resolve to the larger lambda.
double ridge_select(const Matrix& rows, std::span<const double> y,
                    std::span<const double> lambda_grid);

// Mean-fold MAE per grid value, in grid order (the CV report contract).
std::vector<double> ridge_cv_curve(const Matrix& rows,
                                   std::span<const double> y,
                                   std::span<const double> lambda_grid);

struct SvrOptions {
  double tol = 1e-3;       // max KKT violation at convergence
  long max_iter = 2000000;
  std::vector<double>* objective_trace = nullptr;  // dual objective per step
};

// epsilon-SVR dual with RBF kernel solved by SMO-style pairwise
// updates on the maximal violating pair. Expects standardized rows.
SvrModel svr_fit(const Matrix& rows, std::span<const double> y, double c,
                 double gamma, double epsilon, const SvrOptions& opt = {});

std::vector<double> default_c_grid();      // 2^-5 .. 2^15, step 2^2
std::vector<double> default_gamma_grid();  // 2^-15 .. 2^3, step 2^2

struct SvrSelection {
  double c = 1.0, gamma = 1.0;
  std::vector<std::vector<double>> cv_mae;  // [c index][gamma index]
};

// Full grid, contiguous folds; ties resolve to smaller C then smaller
// gamma. Grid cells evaluate in parallel.
SvrSelection svr_select(const Matrix& rows, std::span<const double> y,
                        std::span<const double> c_grid,
                        std::span<const double> gamma_grid, double epsilon,
                        const SvrOptions& opt = {});

std::vector<double> predict_raw(const Model& model, const Matrix& rows);

struct Prediction {
  std::vector<double> spo2;      // smoothed then clamped to [0,100]
  std::vector<double> preclamp;  // smoothed, before clamping
  std::vector<double> raw;       // per-window model output
};

// Model output smoothed by a moving average over `smooth_windows`
// windows, then clamped to [0,100].
Prediction predict(const Model& model, const Matrix& rows,
                   int smooth_windows = 10);

void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

// Deterministic contiguous-block fold boundaries: fold k covers rows
// [k*n/folds, (k+1)*n/folds).
std::vector<std::pair<std::size_t, std::size_t>> cv_folds(std::size_t n,
                                                          int folds = 5);

}  // namespace spo2::regress
