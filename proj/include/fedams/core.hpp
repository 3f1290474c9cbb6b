#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace fedams {

/// Dense parameter vector. Carries models, model differences, optimizer
/// moments and error-feedback memories.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t dim, double fill = 0.0) : values_(dim, fill) {}
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}
  ParamVector(std::initializer_list<double> values) : values_(values) {}

  std::size_t dim() const noexcept { return values_.size(); }

  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  bool operator==(const ParamVector&) const = default;

 private:
  std::vector<double> values_;
};

struct Norms {
  double l1 = 0.0;
  double l2 = 0.0;
  double linf = 0.0;
};

/// Throws DimensionError unless a.dim() == b.dim().
void require_same_dim(const ParamVector& a, const ParamVector& b, const char* op);

/// a*x + y
ParamVector axpy(double a, const ParamVector& x, const ParamVector& y);

/// Per-coordinate max(a_j, b_j, c).
ParamVector elementwise_max3(const ParamVector& a, const ParamVector& b, double c);

Norms norms(const ParamVector& x);

ParamVector operator+(const ParamVector& a, const ParamVector& b);
ParamVector operator-(const ParamVector& a, const ParamVector& b);
ParamVector operator*(double s, const ParamVector& x);

double dot(const ParamVector& a, const ParamVector& b);
double squared_norm(const ParamVector& x);
double l2_norm(const ParamVector& x);
bool all_finite(const ParamVector& x);

}  // namespace fedams
