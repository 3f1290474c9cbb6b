#include "fedams/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedams/errors.hpp"

namespace fedams {

void require_same_dim(const ParamVector& a, const ParamVector& b, const char* op) {
  if (a.dim() != b.dim())
    throw DimensionError(std::string(op) + ": dimension mismatch (" + std::to_string(a.dim()) +
                         " vs " + std::to_string(b.dim()) + ")");
}

ParamVector axpy(double a, const ParamVector& x, const ParamVector& y) {
  require_same_dim(x, y, "axpy");
  ParamVector out(x.dim());
  for (std::size_t j = 0; j < x.dim(); ++j) out[j] = a * x[j] + y[j];
  return out;
}

ParamVector elementwise_max3(const ParamVector& a, const ParamVector& b, double c) {
  require_same_dim(a, b, "elementwise_max3");
  ParamVector out(a.dim());
  for (std::size_t j = 0; j < a.dim(); ++j) out[j] = std::max({a[j], b[j], c});
  return out;
}

Norms norms(const ParamVector& x) {
  Norms n;
  double sq = 0.0;
  for (double v : x) {
    const double a = std::abs(v);
    n.l1 += a;
    sq += v * v;
    n.linf = std::max(n.linf, a);
  }
  n.l2 = std::sqrt(sq);
  return n;
}

ParamVector operator+(const ParamVector& a, const ParamVector& b) {
  require_same_dim(a, b, "operator+");
  ParamVector out(a.dim());
  for (std::size_t j = 0; j < a.dim(); ++j) out[j] = a[j] + b[j];
  return out;
}

ParamVector operator-(const ParamVector& a, const ParamVector& b) {
  require_same_dim(a, b, "operator-");
  ParamVector out(a.dim());
  for (std::size_t j = 0; j < a.dim(); ++j) out[j] = a[j] - b[j];
  return out;
}

ParamVector operator*(double s, const ParamVector& x) {
  ParamVector out(x.dim());
  for (std::size_t j = 0; j < x.dim(); ++j) out[j] = s * x[j];
  return out;
}

double dot(const ParamVector& a, const ParamVector& b) {
  require_same_dim(a, b, "dot");
  double acc = 0.0;
  for (std::size_t j = 0; j < a.dim(); ++j) acc += a[j] * b[j];
  return acc;
}

double squared_norm(const ParamVector& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc;
}

double l2_norm(const ParamVector& x) { return std::sqrt(squared_norm(x)); }

bool all_finite(const ParamVector& x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace fedams
