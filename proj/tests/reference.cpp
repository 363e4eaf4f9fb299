#include "reference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace reference {

spo2::RgbTrace spatial_average(const spo2::FrameSequence& seq,
                               const std::vector<spo2::roi::SkinMask>& masks) {
  spo2::RgbTrace trace;
  trace.fps = seq.fps;
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    double sum[3] = {0, 0, 0};
    long count = 0;
    for (int y = 0; y < seq.height; ++y) {
      for (int x = 0; x < seq.width; ++x) {
        if (!masks[f].at(x, y)) continue;
        ++count;
        for (int c = 0; c < 3; ++c) sum[c] += seq.at(f, x, y, c);
      }
    }
    trace.r.push_back(sum[0] / count);
    trace.g.push_back(sum[1] / count);
    trace.b.push_back(sum[2] / count);
  }
  return trace;
}

std::vector<double> moving_average(std::span<const double> x, int window) {
  const long n = static_cast<long>(x.size());
  const long left = (window - 1) / 2;
  const long right = window / 2;
  std::vector<double> out(x.size());
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    long cnt = 0;
    for (long j = i - left; j <= i + right; ++j) {
      if (j < 0 || j >= n) continue;
      acc += x[j];
      ++cnt;
    }
    out[i] = acc / cnt;
  }
  return out;
}

int otsu_threshold(const std::array<std::uint64_t, 256>& histogram) {
  int best_t = 0;
  double best = -1.0;
  for (int t = 0; t < 256; ++t) {
    double w0 = 0, w1 = 0, s0 = 0, s1 = 0;
    for (int v = 0; v <= t; ++v) {
      w0 += histogram[v];
      s0 += static_cast<double>(histogram[v]) * v;
    }
    for (int v = t + 1; v < 256; ++v) {
      w1 += histogram[v];
      s1 += static_cast<double>(histogram[v]) * v;
    }
    if (w0 == 0 || w1 == 0) continue;
    const double d = s0 / w0 - s1 / w1;
    const double var = w0 * w1 * d * d;
    if (var > best) {
      best = var;
      best_t = t;
    }
  }
  return best_t;
}

namespace {

double path_score(const std::vector<std::vector<double>>& mag,
                  const std::vector<int>& path, double jump_penalty,
                  double eps) {
  double s = 0.0;
  for (std::size_t t = 0; t < path.size(); ++t) {
    s += std::log(mag[path[t]][t] + eps);
    if (t > 0) s -= jump_penalty * std::abs(path[t] - path[t - 1]);
  }
  return s;
}

}  // namespace

double dp_best_score_exhaustive(const std::vector<std::vector<double>>& mag,
                                double jump_penalty, int max_jump) {
  const int F = static_cast<int>(mag.size());
  const int T = static_cast<int>(mag.front().size());
  double max_mag = 0.0;
  for (const auto& row : mag)
    for (double v : row) max_mag = std::max(max_mag, v);
  const double eps = max_mag > 0 ? 1e-12 * max_mag : 1e-300;

  std::vector<int> path(T, 0);
  double best = -1e300;
  while (true) {
    bool feasible = true;
    for (int t = 1; t < T && feasible; ++t)
      if (std::abs(path[t] - path[t - 1]) > max_jump) feasible = false;
    if (feasible)
      best = std::max(best, path_score(mag, path, jump_penalty, eps));
    int t = T - 1;
    while (t >= 0 && path[t] == F - 1) path[t--] = 0;
    if (t < 0) break;
    ++path[t];
  }
  return best;
}

std::vector<double> dft_magnitude(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += x[i] * std::exp(std::complex<double>(
                        0.0, -2.0 * std::numbers::pi *
                                 static_cast<double>(k * i) / n));
    out[k] = std::abs(acc);
  }
  return out;
}

spo2::FrameSequence gaussian_blur_naive(const spo2::FrameSequence& seq,
                                        double sigma, int support) {
  const int half = support / 2;
  std::vector<double> kernel(static_cast<std::size_t>(support) * support);
  double sum = 0.0;
  for (int dy = -half; dy <= half; ++dy)
    for (int dx = -half; dx <= half; ++dx) {
      const double w = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      kernel[(dy + half) * support + (dx + half)] = w;
      sum += w;
    }
  for (auto& w : kernel) w /= sum;

  spo2::FrameSequence out = seq;
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    for (int y = 0; y < seq.height; ++y)
      for (int x = 0; x < seq.width; ++x)
        for (int c = 0; c < 3; ++c) {
          double acc = 0.0;
          for (int dy = -half; dy <= half; ++dy)
            for (int dx = -half; dx <= half; ++dx) {
              const int xx = std::clamp(x + dx, 0, seq.width - 1);
              const int yy = std::clamp(y + dy, 0, seq.height - 1);
              acc += kernel[(dy + half) * support + (dx + half)] *
                     seq.at(f, xx, yy, c);
            }
          out.frames[f][(static_cast<std::size_t>(y) * seq.width + x) * 3 + c] =
              static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
        }
  }
  return out;
}

std::vector<double> ridge_gradient_descent(
    const std::vector<std::vector<double>>& rows, std::span<const double> y,
    double lambda, double y_mean, int iters, double lr) {
  const std::size_t n = rows.size();
  const std::size_t d = rows.front().size();
  std::vector<double> w(d, 0.0);
  for (int it = 0; it < iters; ++it) {
    std::vector<double> grad(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double pred = 0.0;
      for (std::size_t j = 0; j < d; ++j) pred += w[j] * rows[i][j];
      const double r = pred - (y[i] - y_mean);
      for (std::size_t j = 0; j < d; ++j) grad[j] += 2.0 * r * rows[i][j];
    }
    for (std::size_t j = 0; j < d; ++j) {
      grad[j] += 2.0 * lambda * w[j];
      w[j] -= lr * grad[j];
    }
  }
  return w;
}

double svr_dual_objective(const std::vector<std::vector<double>>& kernel,
                          std::span<const double> y, double epsilon,
                          std::span<const double> beta) {
  const std::size_t n = y.size();
  double quad = 0.0, lin = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lin += y[i] * beta[i] - epsilon * std::abs(beta[i]);
    for (std::size_t j = 0; j < n; ++j)
      quad += beta[i] * beta[j] * kernel[i][j];
  }
  return -0.5 * quad + lin;
}

double svr_dual_grid_max4(const std::vector<std::vector<double>>& kernel,
                          std::span<const double> y, double epsilon, double c,
                          double final_step) {
  // beta4 = -(beta1+beta2+beta3) keeps the equality constraint exact
  double c1 = 0.0, c2 = 0.0, c3 = 0.0;  // current center
  double span = c;
  double best = -1e300;
  const int steps_per_side = 10;
  while (true) {
    const double step = span / steps_per_side;
    double b1 = c1, b2 = c2, b3 = c3;
    for (int i = -steps_per_side; i <= steps_per_side; ++i)
      for (int j = -steps_per_side; j <= steps_per_side; ++j)
        for (int k = -steps_per_side; k <= steps_per_side; ++k) {
          const double x1 = std::clamp(c1 + i * step, -c, c);
          const double x2 = std::clamp(c2 + j * step, -c, c);
          const double x3 = std::clamp(c3 + k * step, -c, c);
          const double x4 = -(x1 + x2 + x3);
          if (x4 < -c || x4 > c) continue;
          const std::array<double, 4> beta{x1, x2, x3, x4};
          const double w = svr_dual_objective(kernel, y, epsilon, beta);
          if (w > best) {
            best = w;
            b1 = x1;
            b2 = x2;
            b3 = x3;
          }
        }
    c1 = b1;
    c2 = b2;
    c3 = b3;
    if (step <= final_step) break;
    span = 2.0 * step;  // refine around the incumbent
  }
  return best;
}

}  // namespace reference
