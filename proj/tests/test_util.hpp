#pragma once

#include <cmath>

// |a - b| <= abs_tol + rel * |b|
inline bool near(double a, double b, double rel, double abs_tol) {
  return std::abs(a - b) <= abs_tol + rel * std::abs(b);
}
