#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "subdisc/dataset.hpp"
#include "subdisc/error.hpp"

namespace subdisc {

/// Quadratic forms in (-kPsdSlack, 0) are rounding noise and clamp to zero;
/// anything more negative means the matrix is not PSD.
inline constexpr double kPsdSlack = 1e-9;
inline constexpr double kSymmetryTolerance = 1e-9;

namespace detail {
inline void require_same_length(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorCode::DimensionMismatch,
                "vector lengths " + std::to_string(a) + " and " + std::to_string(b));
  }
}
}  // namespace detail

template <typename T>
T squared_euclidean_distance(std::span<const T> a, std::span<const T> b) {
  detail::require_same_length(a.size(), b.size());
  T sum{};
  for (std::size_t d = 0; d < a.size(); ++d) {
    const T diff = a[d] - b[d];
    sum += diff * diff;
  }
  return sum;
}

template <typename T>
T euclidean_distance(std::span<const T> a, std::span<const T> b) {
  return std::sqrt(squared_euclidean_distance(a, b));
}

inline double squared_euclidean_distance(const Vector& a, const Vector& b) {
  return squared_euclidean_distance<double>(a, b);
}
inline double euclidean_distance(const Vector& a, const Vector& b) {
  return euclidean_distance<double>(a, b);
}

/// sqrt((a-b)^T M (a-b)). M is assumed symmetric; only the PSD condition on
/// this particular difference vector is checked.
inline double mahalanobis_distance(std::span<const double> a, std::span<const double> b,
                                   const Eigen::MatrixXd& m) {
  detail::require_same_length(a.size(), b.size());
  if (static_cast<std::size_t>(m.rows()) != a.size() || static_cast<std::size_t>(m.cols()) != a.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "metric matrix is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                    " for vectors of length " + std::to_string(a.size()));
  }
  const std::size_t n = a.size();
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double di = a[i] - b[i];
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += m(i, j) * (a[j] - b[j]);
    q += di * row;
  }
  if (q < -kPsdSlack) throw Error(ErrorCode::NotPSD, "quadratic form " + std::to_string(q));
  return std::sqrt(std::max(q, 0.0));
}

enum class MetricKind { euclidean, squared_euclidean, mahalanobis };

constexpr std::string_view to_string(MetricKind kind) noexcept {
  switch (kind) {
    case MetricKind::euclidean: return "euclidean";
    case MetricKind::squared_euclidean: return "squared-euclidean";
    case MetricKind::mahalanobis: return "mahalanobis";
  }
  return "euclidean";
}

inline MetricKind parse_metric_kind(std::string_view name) {
  if (name == "euclidean") return MetricKind::euclidean;
  if (name == "squared-euclidean") return MetricKind::squared_euclidean;
  if (name == "mahalanobis") return MetricKind::mahalanobis;
  throw Error(ErrorCode::InvalidArgument, "unknown metric '" + std::string(name) + "'");
}

class MetricSpec {
 public:
  MetricSpec() = default;

  static MetricSpec euclidean() { return MetricSpec(MetricKind::euclidean, std::nullopt); }
  static MetricSpec squared_euclidean() {
    return MetricSpec(MetricKind::squared_euclidean, std::nullopt);
  }
  static MetricSpec mahalanobis(Eigen::MatrixXd m) {
    if (m.rows() != m.cols() || m.rows() == 0) {
      throw Error(ErrorCode::DimensionMismatch, "metric matrix must be square and non-empty");
    }
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
        if (!std::isfinite(m(i, j)) || std::abs(m(i, j) - m(j, i)) > kSymmetryTolerance) {
          throw Error(ErrorCode::NotSymmetric,
                      "entries (" + std::to_string(i) + "," + std::to_string(j) + ")");
        }
      }
    }
    return MetricSpec(MetricKind::mahalanobis, std::move(m));
  }

  MetricKind kind() const noexcept { return kind_; }
  const std::optional<Eigen::MatrixXd>& matrix() const noexcept { return matrix_; }

  double operator()(std::span<const double> a, std::span<const double> b) const {
    switch (kind_) {
      case MetricKind::euclidean: return euclidean_distance<double>(a, b);
      case MetricKind::squared_euclidean: return squared_euclidean_distance<double>(a, b);
      case MetricKind::mahalanobis: return mahalanobis_distance(a, b, *matrix_);
    }
    return 0.0;
  }

  friend bool operator==(const MetricSpec& x, const MetricSpec& y) {
    if (x.kind_ != y.kind_ || x.matrix_.has_value() != y.matrix_.has_value()) return false;
    return !x.matrix_ || *x.matrix_ == *y.matrix_;
  }

 private:
  MetricSpec(MetricKind kind, std::optional<Eigen::MatrixXd> m) : kind_(kind), matrix_(std::move(m)) {}

  MetricKind kind_ = MetricKind::euclidean;
  std::optional<Eigen::MatrixXd> matrix_;
};

/// A W with W^T W = M, so Mahalanobis distance under M is Euclidean distance
/// after x -> Wx. Built from the eigendecomposition M = V L V^T as L^(1/2) V^T.
inline Eigen::MatrixXd linear_map_from_metric(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::NotPSD, "eigendecomposition failed");
  Eigen::VectorXd values = eig.eigenvalues();
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) < -kPsdSlack) throw Error(ErrorCode::NotPSD, "eigenvalue " + std::to_string(values(i)));
    values(i) = std::sqrt(std::max(values(i), 0.0));
  }
  return values.asDiagonal() * eig.eigenvectors().transpose();
}

inline Vector apply_linear_map(const Eigen::MatrixXd& w, std::span<const double> x) {
  if (static_cast<std::size_t>(w.cols()) != x.size()) {
    throw Error(ErrorCode::DimensionMismatch, "linear map expects length " + std::to_string(w.cols()));
  }
  const Eigen::VectorXd y = w * Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  return Vector(y.data(), y.data() + y.size());
}

/// Dataset in the space where `metric` becomes plain Euclidean distance.
/// Euclidean and squared-euclidean leave the data untouched.
inline Dataset to_euclidean_space(const Dataset& data, const MetricSpec& metric) {
  if (metric.kind() != MetricKind::mahalanobis) return data;
  const Eigen::MatrixXd w = linear_map_from_metric(*metric.matrix());
  return map_vectors(data, [&](const Vector& v) { return apply_linear_map(w, v); });
}

}  // namespace subdisc
