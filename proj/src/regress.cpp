#include "spo2/regress.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "spo2/dsp.hpp"
#include "spo2/io_util.hpp"

namespace spo2::regress {

namespace {

constexpr int kModelFormatVersion = 1;

void check_rows(const Matrix& rows) {
  if (rows.empty()) throw Error(Errc::shape_mismatch, "empty feature matrix");
  const std::size_t d = rows.front().size();
  if (d == 0) throw Error(Errc::shape_mismatch, "zero-width feature matrix");
  for (const auto& r : rows) {
    if (r.size() != d)
      throw Error(Errc::shape_mismatch, "ragged feature matrix");
    for (double v : r)
      if (!std::isfinite(v))
        throw Error(Errc::degenerate_feature, "non-finite feature value");
  }
}

// Cholesky solve of the symmetric positive definite system A x = b.
std::vector<double> spd_solve(std::vector<std::vector<double>> a,
                              std::vector<double> b) {
  const std::size_t n = a.size();
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < j; ++k)
      for (std::size_t i = j; i < n; ++i) a[i][j] -= a[i][k] * a[j][k];
    if (a[j][j] <= 0.0)
      throw Error(Errc::degenerate_feature,
                  "rank-deficient normal equations (collinear features at lambda=0)");
    a[j][j] = std::sqrt(a[j][j]);
    for (std::size_t i = j + 1; i < n; ++i) a[i][j] /= a[j][j];
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) b[i] -= a[i][k] * b[k];
    b[i] /= a[i][i];
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) b[i] -= a[k][i] * b[k];
    b[i] /= a[i][i];
  }
  return b;
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

}  // namespace

Standardization standardize_stats(const Matrix& rows) {
  check_rows(rows);
  const std::size_t d = rows.front().size();
  const double n = static_cast<double>(rows.size());
  Standardization s;
  s.mean.assign(d, 0.0);
  s.stddev.assign(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += r[j];
  for (auto& m : s.mean) m /= n;
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j)
      s.stddev[j] += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
  for (std::size_t j = 0; j < d; ++j) {
    s.stddev[j] = std::sqrt(s.stddev[j] / n);
    if (s.stddev[j] <= 0.0)
      throw Error(Errc::degenerate_feature,
                  "zero-variance feature column " + std::to_string(j));
  }
  return s;
}

Matrix apply_standardization(const Matrix& rows, const Standardization& s) {
  check_rows(rows);
  if (rows.front().size() != s.mean.size())
    throw Error(Errc::feature_schema, "feature dimension mismatch");
  Matrix out = rows;
  for (auto& r : out)
    for (std::size_t j = 0; j < r.size(); ++j)
      r[j] = (r[j] - s.mean[j]) / s.stddev[j];
  return out;
}

RidgeModel ridge_fit(const Matrix& rows, std::span<const double> y,
                     double lambda) {
  check_rows(rows);
  if (rows.size() != y.size())
    throw Error(Errc::shape_mismatch, "row/label count mismatch");
  if (lambda < 0) throw Error(Errc::invalid_config, "lambda must be >= 0");
  const std::size_t d = rows.front().size();
  const std::size_t n = rows.size();

  RidgeModel m;
  m.lambda = lambda;
  m.intercept = mean_of(y);

  std::vector<std::vector<double>> gram(d, std::vector<double>(d, 0.0));
  std::vector<double> rhs(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double yc = y[i] - m.intercept;
    for (std::size_t j = 0; j < d; ++j) {
      rhs[j] += rows[i][j] * yc;
      for (std::size_t k = 0; k <= j; ++k) gram[j][k] += rows[i][j] * rows[i][k];
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    gram[j][j] += lambda;
    for (std::size_t k = j + 1; k < d; ++k) gram[j][k] = gram[k][j];
  }
  m.w = spd_solve(std::move(gram), std::move(rhs));
  return m;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  for (int e = -6; e <= 2; ++e) g.push_back(std::pow(10.0, e));
  return g;
}

std::vector<std::pair<std::size_t, std::size_t>> cv_folds(std::size_t n,
                                                          int folds) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (int k = 0; k < folds; ++k)
    out.emplace_back(n * static_cast<std::size_t>(k) / folds,
                     n * static_cast<std::size_t>(k + 1) / folds);
  return out;
}

namespace {

struct FoldSplit {
  Matrix train_x, test_x;
  std::vector<double> train_y, test_y;
};

FoldSplit make_fold(const Matrix& rows, std::span<const double> y,
                    std::pair<std::size_t, std::size_t> fold) {
  FoldSplit s;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i >= fold.first && i < fold.second) {
      s.test_x.push_back(rows[i]);
      s.test_y.push_back(y[i]);
    } else {
      s.train_x.push_back(rows[i]);
      s.train_y.push_back(y[i]);
    }
  }
  return s;
}

double fold_mae(const std::vector<double>& pred,
                const std::vector<double>& truth) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    acc += std::abs(pred[i] - truth[i]);
  return acc / static_cast<double>(pred.size());
}

}  // namespace

std::vector<double> ridge_cv_curve(const Matrix& rows,
                                   std::span<const double> y,
                                   std::span<const double> lambda_grid) {
  check_rows(rows);
  if (rows.size() < 10)
    throw Error(Errc::insufficient_samples, "need at least 10 rows for CV");
  const auto folds = cv_folds(rows.size());
  std::vector<double> curve(lambda_grid.size(), 0.0);
  for (const auto& fold : folds) {
    const auto split = make_fold(rows, y, fold);
    if (split.test_x.empty()) continue;
    // standardization stats from the training part only
    const auto stats = standardize_stats(split.train_x);
    const auto train_z = apply_standardization(split.train_x, stats);
    const auto test_z = apply_standardization(split.test_x, stats);
    for (std::size_t gi = 0; gi < lambda_grid.size(); ++gi) {
      RidgeModel m = ridge_fit(train_z, split.train_y, lambda_grid[gi]);
      m.stats = stats;
      std::vector<double> pred;
      pred.reserve(test_z.size());
      for (const auto& r : test_z) {
        double v = m.intercept;
        for (std::size_t j = 0; j < r.size(); ++j) v += m.w[j] * r[j];
        pred.push_back(v);
      }
      curve[gi] += fold_mae(pred, split.test_y) /
                   static_cast<double>(folds.size());
    }
  }
  return curve;
}

double ridge_select(const Matrix& rows, std::span<const double> y,
                    std::span<const double> lambda_grid) {
  if (lambda_grid.empty())
    throw Error(Errc::invalid_config, "empty lambda grid");
  const auto curve = ridge_cv_curve(rows, y, lambda_grid);
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    // ties resolve to the larger lambda
    if (curve[i] <= curve[best] &&
        (curve[i] < curve[best] || lambda_grid[i] > lambda_grid[best]))
      best = i;
  }
  return lambda_grid[best];
}

namespace {

double rbf(const std::vector<double>& a, const std::vector<double>& b,
           double gamma) {
  double d2 = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j)
    d2 += (a[j] - b[j]) * (a[j] - b[j]);
  return std::exp(-gamma * d2);
}

}  // namespace

SvrModel svr_fit(const Matrix& rows, std::span<const double> y, double c,
                 double gamma, double epsilon, const SvrOptions& opt) {
  check_rows(rows);
  if (rows.size() != y.size())
    throw Error(Errc::shape_mismatch, "row/label count mismatch");
  if (c <= 0 || gamma <= 0 || epsilon < 0)
    throw Error(Errc::invalid_config, "C and gamma must be positive");
  const std::size_t n = rows.size();

  std::vector<std::vector<double>> kernel(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      kernel[i][j] = kernel[j][i] = rbf(rows[i], rows[j], gamma);

  // 2n box variables: index i < n is alpha_i (sign +1), i >= n is
  // alpha*_i (sign -1). beta = alpha - alpha*.
  const std::size_t m2 = 2 * n;
  std::vector<double> z(m2, 0.0);
  std::vector<double> kbeta(n, 0.0);  // (K beta)_a per sample
  auto sign_of = [n](std::size_t i) { return i < n ? 1.0 : -1.0; };
  auto sample_of = [n](std::size_t i) { return i < n ? i : i - n; };
  auto grad = [&](std::size_t i) {
    const std::size_t a = sample_of(i);
    const double p = i < n ? epsilon - y[a] : epsilon + y[a];
    return sign_of(i) * kbeta[a] + p;
  };

  double objective = 0.0;  // dual minimization objective
  if (opt.objective_trace) {
    opt.objective_trace->clear();
    opt.objective_trace->push_back(objective);
  }

  long iter = 0;
  double gap = 0.0;
  for (;; ++iter) {
    // working-set selection: maximal violator from I_up, then the
    // second-order partner from I_low (largest decrease estimate)
    double m_up = -std::numeric_limits<double>::infinity();
    double m_low = std::numeric_limits<double>::infinity();
    std::size_t i_up = m2;
    for (std::size_t i = 0; i < m2; ++i) {
      const double s = sign_of(i);
      const double v = -s * grad(i);
      const bool in_up = (s > 0 && z[i] < c) || (s < 0 && z[i] > 0);
      const bool in_low = (s > 0 && z[i] > 0) || (s < 0 && z[i] < c);
      if (in_up && v > m_up) {
        m_up = v;
        i_up = i;
      }
      if (in_low && v < m_low) m_low = v;
    }
    gap = m_up - m_low;
    if (i_up == m2 || gap <= opt.tol) break;
    if (iter >= opt.max_iter)
      throw Error(Errc::no_convergence,
                  "SVR solver hit the iteration cap with KKT violation " +
                      format_double(gap));

    const std::size_t au = sample_of(i_up);
    std::size_t i_low = m2;
    double best_score = 0.0;
    for (std::size_t i = 0; i < m2; ++i) {
      const double s = sign_of(i);
      const bool in_low = (s > 0 && z[i] > 0) || (s < 0 && z[i] < c);
      if (!in_low) continue;
      const double diff = m_up - (-s * grad(i));  // violation against i_up
      if (diff <= 0) continue;
      const std::size_t al = sample_of(i);
      const double h =
          std::max(kernel[au][au] + kernel[al][al] - 2.0 * kernel[au][al],
                   1e-12);
      const double score = diff * diff / h;
      if (score > best_score) {
        best_score = score;
        i_low = i;
      }
    }
    if (i_low == m2) break;

    const std::size_t a = sample_of(i_up), b = sample_of(i_low);
    const double si = sign_of(i_up), sj = sign_of(i_low);
    const double h =
        std::max(kernel[a][a] + kernel[b][b] - 2.0 * kernel[a][b], 1e-12);
    const double g = grad(i_up) - si * sj * grad(i_low);
    double t = -g / h;

    // box clipping: z[i_up] += t, z[i_low] -= si*sj*t
    double t_lo = -z[i_up], t_hi = c - z[i_up];
    if (si * sj > 0) {
      t_lo = std::max(t_lo, z[i_low] - c);
      t_hi = std::min(t_hi, z[i_low]);
    } else {
      t_lo = std::max(t_lo, -z[i_low]);
      t_hi = std::min(t_hi, c - z[i_low]);
    }
    t = std::clamp(t, t_lo, t_hi);
    if (t == 0.0) break;  // boxed in; gap cannot improve on this pair

    z[i_up] += t;
    z[i_low] -= si * sj * t;
    const double dbeta_a = si * t;
    const double dbeta_b = -si * t;  // sj * dz_j with dz_j = -si*sj*t
    for (std::size_t k = 0; k < n; ++k)
      kbeta[k] += dbeta_a * kernel[k][a] + dbeta_b * kernel[k][b];
    objective += g * t + 0.5 * h * t * t;
    if (opt.objective_trace) opt.objective_trace->push_back(objective);
  }

  SvrModel model;
  model.c = c;
  model.gamma = gamma;
  model.epsilon = epsilon;

  // bias from the free variables, else the midpoint of the KKT bounds
  double bias_acc = 0.0;
  int bias_cnt = 0;
  for (std::size_t i = 0; i < m2; ++i) {
    if (z[i] > 0 && z[i] < c) {
      bias_acc += -sign_of(i) * grad(i);
      ++bias_cnt;
    }
  }
  if (bias_cnt > 0) {
    model.bias = bias_acc / bias_cnt;
  } else {
    double up = -std::numeric_limits<double>::infinity();
    double low = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m2; ++i) {
      const double s = sign_of(i);
      const double v = -s * grad(i);
      if ((s > 0 && z[i] < c) || (s < 0 && z[i] > 0)) up = std::max(up, v);
      if ((s > 0 && z[i] > 0) || (s < 0 && z[i] < c)) low = std::min(low, v);
    }
    model.bias = 0.5 * (up + low);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const double beta = z[i] - z[i + n];
    if (beta != 0.0) {
      model.support_vectors.push_back(rows[i]);
      model.coef.push_back(beta);
    }
  }
  return model;
}

std::vector<double> default_c_grid() {
  std::vector<double> g;
  for (int e = -5; e <= 15; e += 2) g.push_back(std::pow(2.0, e));
  return g;
}

std::vector<double> default_gamma_grid() {
  std::vector<double> g;
  for (int e = -15; e <= 3; e += 2) g.push_back(std::pow(2.0, e));
  return g;
}

SvrSelection svr_select(const Matrix& rows, std::span<const double> y,
                        std::span<const double> c_grid,
                        std::span<const double> gamma_grid, double epsilon,
                        const SvrOptions& opt) {
  check_rows(rows);
  if (c_grid.empty() || gamma_grid.empty())
    throw Error(Errc::invalid_config, "empty SVR grid");
  if (rows.size() < 10)
    throw Error(Errc::insufficient_samples, "need at least 10 rows for CV");
  const auto folds = cv_folds(rows.size());

  struct FoldData {
    Matrix train_z, test_z;
    std::vector<double> train_y, test_y;
  };
  std::vector<FoldData> prepared;
  for (const auto& fold : folds) {
    const auto split = make_fold(rows, y, fold);
    if (split.test_x.empty()) continue;
    const auto stats = standardize_stats(split.train_x);
    prepared.push_back({apply_standardization(split.train_x, stats),
                        apply_standardization(split.test_x, stats),
                        split.train_y, split.test_y});
  }

  SvrSelection sel;
  sel.cv_mae.assign(c_grid.size(),
                    std::vector<double>(gamma_grid.size(), 0.0));
  const std::ptrdiff_t cells =
      static_cast<std::ptrdiff_t>(c_grid.size() * gamma_grid.size());
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t cell = 0; cell < cells; ++cell) {
    try {
      const std::size_t ci = static_cast<std::size_t>(cell) / gamma_grid.size();
      const std::size_t gi = static_cast<std::size_t>(cell) % gamma_grid.size();
      SvrOptions cell_opt;
      cell_opt.tol = opt.tol;
      cell_opt.max_iter = opt.max_iter;
      double acc = 0.0;
      for (const auto& fd : prepared) {
        const SvrModel m =
            svr_fit(fd.train_z, fd.train_y, c_grid[ci], gamma_grid[gi], epsilon,
                    cell_opt);
        std::vector<double> pred;
        pred.reserve(fd.test_z.size());
        for (const auto& r : fd.test_z) {
          double v = m.bias;
          for (std::size_t s = 0; s < m.coef.size(); ++s)
            v += m.coef[s] * rbf(m.support_vectors[s], r, m.gamma);
          pred.push_back(v);
        }
        acc += fold_mae(pred, fd.test_y) / static_cast<double>(prepared.size());
      }
      sel.cv_mae[ci][gi] = acc;
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);

  std::size_t best_c = 0, best_g = 0;
  for (std::size_t ci = 0; ci < c_grid.size(); ++ci)
    for (std::size_t gi = 0; gi < gamma_grid.size(); ++gi)
      if (sel.cv_mae[ci][gi] < sel.cv_mae[best_c][best_g]) {
        best_c = ci;
        best_g = gi;
      }
  // ties resolve by grid order: smaller C first, then smaller gamma
  sel.c = c_grid[best_c];
  sel.gamma = gamma_grid[best_g];
  return sel;
}

std::vector<double> predict_raw(const Model& model, const Matrix& rows) {
  check_rows(rows);
  std::vector<double> out;
  out.reserve(rows.size());
  if (const auto* ridge = std::get_if<RidgeModel>(&model)) {
    if (rows.front().size() != ridge->w.size())
      throw Error(Errc::feature_schema, "feature dimension mismatch");
    const auto z = apply_standardization(rows, ridge->stats);
    for (const auto& r : z) {
      double v = ridge->intercept;
      for (std::size_t j = 0; j < r.size(); ++j) v += ridge->w[j] * r[j];
      out.push_back(v);
    }
    return out;
  }
  const auto& svr = std::get<SvrModel>(model);
  if (rows.front().size() != svr.stats.mean.size())
    throw Error(Errc::feature_schema, "feature dimension mismatch");
  const auto z = apply_standardization(rows, svr.stats);
  for (const auto& r : z) {
    double v = svr.bias;
    for (std::size_t s = 0; s < svr.coef.size(); ++s)
      v += svr.coef[s] * rbf(svr.support_vectors[s], r, svr.gamma);
    out.push_back(v);
  }
  return out;
}

Prediction predict(const Model& model, const Matrix& rows,
                   int smooth_windows) {
  Prediction p;
  p.raw = predict_raw(model, rows);
  p.preclamp = dsp::moving_average(p.raw, smooth_windows);
  p.spo2 = p.preclamp;
  for (auto& v : p.spo2) v = std::clamp(v, 0.0, 100.0);
  return p;
}

namespace {

nlohmann::json stats_to_json(const Standardization& s) {
  return {{"mean", s.mean}, {"stddev", s.stddev}};
}

Standardization stats_from_json(const nlohmann::json& j) {
  Standardization s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stddev = j.at("stddev").get<std::vector<double>>();
  return s;
}

}  // namespace

void save_model(const Model& model, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  if (const auto* ridge = std::get_if<RidgeModel>(&model)) {
    j["type"] = "ridge";
    j["w"] = ridge->w;
    j["intercept"] = ridge->intercept;
    j["lambda"] = ridge->lambda;
    j["stats"] = stats_to_json(ridge->stats);
  } else {
    const auto& svr = std::get<SvrModel>(model);
    j["type"] = "svr";
    j["support_vectors"] = svr.support_vectors;
    j["coef"] = svr.coef;
    j["bias"] = svr.bias;
    j["c"] = svr.c;
    j["gamma"] = svr.gamma;
    j["epsilon"] = svr.epsilon;
    j["stats"] = stats_to_json(svr.stats);
  }
  atomic_write(path, j.dump(2) + "\n");
}

Model load_model(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::incompatible_model, path + ": bad JSON: " + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion)
      throw Error(Errc::incompatible_model,
                  path + ": unsupported format_version");
    const std::string type = j.at("type").get<std::string>();
    if (type == "ridge") {
      RidgeModel m;
      m.w = j.at("w").get<std::vector<double>>();
      m.intercept = j.at("intercept").get<double>();
      m.lambda = j.at("lambda").get<double>();
      m.stats = stats_from_json(j.at("stats"));
      return m;
    }
    if (type == "svr") {
      SvrModel m;
      m.support_vectors = j.at("support_vectors").get<Matrix>();
      m.coef = j.at("coef").get<std::vector<double>>();
      m.bias = j.at("bias").get<double>();
      m.c = j.at("c").get<double>();
      m.gamma = j.at("gamma").get<double>();
      m.epsilon = j.at("epsilon").get<double>();
      m.stats = stats_from_json(j.at("stats"));
      return m;
    }
    throw Error(Errc::incompatible_model, path + ": unknown model type");
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::incompatible_model, path + ": " + e.what());
  }
}

}  // namespace spo2::regress
