#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lpwalk/error.hpp"

namespace lpwalk {

inline constexpr int kMaxDim = 8;

// Coordinates beyond this magnitude are treated as saturated. The margin below
// INT64_MAX leaves room for one more bounded step without wrapping.
inline constexpr std::int64_t kMaxCoordinate = std::int64_t{1} << 62;

// A point of Z^d with 1 <= d <= kMaxDim.
class LatticePoint {
 public:
  LatticePoint() = default;

  explicit LatticePoint(int dim) : dim_(dim) {
    if (dim < 1 || dim > kMaxDim) {
      throw ConfigError("lattice dimension must be in [1, " + std::to_string(kMaxDim) +
                        "], got " + std::to_string(dim));
    }
  }

  LatticePoint(std::initializer_list<std::int64_t> coords)
      : LatticePoint(static_cast<int>(coords.size())) {
    std::copy(coords.begin(), coords.end(), coords_.begin());
  }

  static LatticePoint from(std::span<const std::int64_t> coords) {
    LatticePoint p(static_cast<int>(coords.size()));
    std::copy(coords.begin(), coords.end(), p.coords_.begin());
    return p;
  }

  static LatticePoint unit(int dim, int axis, std::int64_t sign = 1) {
    LatticePoint p(dim);
    p.coords_[static_cast<std::size_t>(axis)] = sign;
    return p;
  }

  int dim() const noexcept { return dim_; }
  bool empty() const noexcept { return dim_ == 0; }

  std::int64_t operator[](int i) const noexcept { return coords_[static_cast<std::size_t>(i)]; }
  std::int64_t& operator[](int i) noexcept { return coords_[static_cast<std::size_t>(i)]; }

  std::span<const std::int64_t> coords() const noexcept {
    return {coords_.data(), static_cast<std::size_t>(dim_)};
  }

  bool is_zero() const noexcept {
    for (int i = 0; i < dim_; ++i) {
      if (coords_[static_cast<std::size_t>(i)] != 0) return false;
    }
    return true;
  }

  friend bool operator==(const LatticePoint& a, const LatticePoint& b) noexcept {
    if (a.dim_ != b.dim_) return false;
    for (int i = 0; i < a.dim_; ++i) {
      if (a[i] != b[i]) return false;
    }
    return true;
  }

  friend std::strong_ordering operator<=>(const LatticePoint& a, const LatticePoint& b) noexcept {
    if (auto c = a.dim_ <=> b.dim_; c != 0) return c;
    for (int i = 0; i < a.dim_; ++i) {
      if (auto c = a[i] <=> b[i]; c != 0) return c;
    }
    return std::strong_ordering::equal;
  }

  // Unchecked arithmetic; callers on the simulation path use checked_add.
  friend LatticePoint operator+(LatticePoint a, const LatticePoint& b) noexcept {
    for (int i = 0; i < a.dim_; ++i) a[i] += b[i];
    return a;
  }
  friend LatticePoint operator-(LatticePoint a, const LatticePoint& b) noexcept {
    for (int i = 0; i < a.dim_; ++i) a[i] -= b[i];
    return a;
  }
  friend LatticePoint operator-(LatticePoint a) noexcept {
    for (int i = 0; i < a.dim_; ++i) a[i] = -a[i];
    return a;
  }
  friend LatticePoint operator*(std::int64_t m, LatticePoint a) noexcept {
    for (int i = 0; i < a.dim_; ++i) a[i] *= m;
    return a;
  }

  std::string to_string() const {
    std::string s = "(";
    for (int i = 0; i < dim_; ++i) {
      if (i) s += ",";
      s += std::to_string(coords_[static_cast<std::size_t>(i)]);
    }
    return s + ")";
  }

 private:
  std::array<std::int64_t, kMaxDim> coords_{};
  int dim_ = 0;
};

inline bool within_range(std::int64_t v) noexcept {
  return v <= kMaxCoordinate && v >= -kMaxCoordinate;
}

// Returns a + b, or nullopt if any coordinate would leave [-kMaxCoordinate, kMaxCoordinate].
inline std::optional<LatticePoint> checked_add(const LatticePoint& a, const LatticePoint& b) noexcept {
  LatticePoint r = a;
  for (int i = 0; i < a.dim(); ++i) {
    std::int64_t v;
    if (__builtin_add_overflow(a[i], b[i], &v) || !within_range(v)) return std::nullopt;
    r[i] = v;
  }
  return r;
}

inline std::int64_t sup_norm(const LatticePoint& x) noexcept {
  std::int64_t m = 0;
  for (auto c : x.coords()) m = std::max(m, c < 0 ? -c : c);
  return m;
}

inline double euclidean_norm(const LatticePoint& x) noexcept {
  double s = 0.0;
  for (auto c : x.coords()) {
    const double v = static_cast<double>(c);
    s += v * v;
  }
  return std::sqrt(s);
}

enum class Norm { Sup, Euclidean };

inline double norm(const LatticePoint& x, Norm which) noexcept {
  return which == Norm::Sup ? static_cast<double>(sup_norm(x)) : euclidean_norm(x);
}

inline const char* to_string(Norm n) noexcept { return n == Norm::Sup ? "sup" : "euclidean"; }

// Symmetric positive semidefinite d x d matrix, row-major.
class CovarianceMatrix {
 public:
  CovarianceMatrix() = default;
  explicit CovarianceMatrix(int dim) : dim_(dim) {
    if (dim < 1 || dim > kMaxDim) throw ConfigError("covariance dimension out of range");
  }

  static CovarianceMatrix diagonal(std::initializer_list<double> diag) {
    CovarianceMatrix m(static_cast<int>(diag.size()));
    int i = 0;
    for (double v : diag) {
      m(i, i) = v;
      ++i;
    }
    return m;
  }

  int dim() const noexcept { return dim_; }
  double operator()(int i, int j) const noexcept { return entries_[index(i, j)]; }
  double& operator()(int i, int j) noexcept { return entries_[index(i, j)]; }

  double max_abs_entry() const noexcept {
    double m = 0.0;
    for (int i = 0; i < dim_ * dim_; ++i) m = std::max(m, std::abs(entries_[static_cast<std::size_t>(i)]));
    return m;
  }

  // Gaussian elimination with partial pivoting.
  double determinant() const noexcept {
    std::array<double, kMaxDim * kMaxDim> a = entries_;
    const int n = dim_;
    double det = 1.0;
    for (int col = 0; col < n; ++col) {
      int piv = col;
      for (int r = col + 1; r < n; ++r) {
        if (std::abs(a[idx(r, col, n)]) > std::abs(a[idx(piv, col, n)])) piv = r;
      }
      if (a[idx(piv, col, n)] == 0.0) return 0.0;
      if (piv != col) {
        for (int c = 0; c < n; ++c) std::swap(a[idx(piv, c, n)], a[idx(col, c, n)]);
        det = -det;
      }
      const double p = a[idx(col, col, n)];
      det *= p;
      for (int r = col + 1; r < n; ++r) {
        const double f = a[idx(r, col, n)] / p;
        for (int c = col; c < n; ++c) a[idx(r, c, n)] -= f * a[idx(col, c, n)];
      }
    }
    return det;
  }

  // determinant > 0, with a relative tolerance for rounding in the moments.
  bool nondegenerate() const noexcept {
    const double scale = std::pow(std::max(max_abs_entry(), 1e-300), dim_);
    return determinant() > 1e-12 * scale;
  }

 private:
  static constexpr std::size_t idx(int i, int j, int n) noexcept {
    return static_cast<std::size_t>(i * n + j);
  }
  std::size_t index(int i, int j) const noexcept { return idx(i, j, dim_); }

  std::array<double, kMaxDim * kMaxDim> entries_{};
  int dim_ = 0;
};

}  // namespace lpwalk
