#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "subdisc/dataset.hpp"
#include "subdisc/error.hpp"
#include "subdisc/kmeans.hpp"

namespace subdisc {

enum class CovarianceKind { diagonal, full };

constexpr std::string_view to_string(CovarianceKind kind) noexcept {
  return kind == CovarianceKind::full ? "full" : "diagonal";
}

inline CovarianceKind parse_covariance_kind(std::string_view name) {
  if (name == "diagonal") return CovarianceKind::diagonal;
  if (name == "full") return CovarianceKind::full;
  throw Error(ErrorCode::InvalidArgument, "unknown covariance kind '" + std::string(name) + "'");
}

/// Components whose weight falls below this are reported as degenerate.
inline constexpr double kMinComponentWeight = 1e-12;

struct GmmConfig {
  std::size_t components = 2;
  std::size_t max_iterations = 100;
  /// Stop once the mean per-sample log-likelihood improves by less than this.
  double tolerance = 1e-6;
  CovarianceKind covariance_kind = CovarianceKind::diagonal;
  double covariance_floor = 1e-6;
  std::uint64_t rng_seed = 0;
  /// Lloyd runs tried for the K-Means initialisation (best inertia wins).
  /// 1 means a single kmeans_fit_once with rng_seed.
  std::size_t init_runs = 1;
};

struct GmmModel {
  CovarianceKind covariance_kind = CovarianceKind::diagonal;
  std::vector<double> weights;
  std::vector<Vector> means;
  /// Diagonal: D variances per component. Full: D*D row-major matrix.
  std::vector<Vector> covariances;
  double log_likelihood = 0.0;
  std::vector<double> log_likelihood_history;
  /// Row per record, one posterior per component.
  std::vector<std::vector<double>> responsibilities;
  std::size_t iterations_run = 0;
  bool converged = false;

  std::size_t components() const noexcept { return weights.size(); }
  std::size_t dimension() const noexcept { return means.empty() ? 0 : means.front().size(); }
};

struct GmmPrediction {
  std::size_t component = 0;
  std::vector<double> posterior;
};

/// Precomputed per-component log-density terms (log-determinants, inverse
/// variances or Cholesky factors) for a set of Gaussian components.
class GaussianMixtureDensity {
 public:
  GaussianMixtureDensity(CovarianceKind kind, std::span<const double> weights, std::span<const Vector> means,
                         std::span<const Vector> covariances)
      : kind_(kind), means_(means.begin(), means.end()) {
    if (weights.empty() || weights.size() != means.size() || means.size() != covariances.size()) {
      throw Error(ErrorCode::InvalidArgument, "mixture parameter lists disagree in length");
    }
    dim_ = means.front().size();
    const double log_2pi = std::log(2.0 * std::numbers::pi);
    for (std::size_t c = 0; c < weights.size(); ++c) {
      if (means[c].size() != dim_) throw Error(ErrorCode::DimensionMismatch, "component mean length");
      double log_det = 0.0;
      if (kind == CovarianceKind::diagonal) {
        if (covariances[c].size() != dim_) throw Error(ErrorCode::DimensionMismatch, "variance length");
        Vector inv(dim_);
        for (std::size_t d = 0; d < dim_; ++d) {
          if (!(covariances[c][d] > 0.0)) throw Error(ErrorCode::NotPSD, "non-positive variance");
          inv[d] = 1.0 / covariances[c][d];
          log_det += std::log(covariances[c][d]);
        }
        inverse_variances_.push_back(std::move(inv));
      } else {
        if (covariances[c].size() != dim_ * dim_) throw Error(ErrorCode::DimensionMismatch, "covariance size");
        const auto n = static_cast<Eigen::Index>(dim_);
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> cov(
            covariances[c].data(), n, n);
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotPSD, "covariance is not positive definite");
        Eigen::MatrixXd lower = llt.matrixL();
        for (Eigen::Index d = 0; d < n; ++d) log_det += 2.0 * std::log(lower(d, d));
        cholesky_.push_back(std::move(lower));
      }
      const double log_weight = weights[c] > 0.0 ? std::log(weights[c]) : -std::numeric_limits<double>::infinity();
      log_norm_.push_back(log_weight - 0.5 * (static_cast<double>(dim_) * log_2pi + log_det));
    }
  }

  std::size_t components() const noexcept { return log_norm_.size(); }
  std::size_t dimension() const noexcept { return dim_; }

  /// log(w_c) + log N(x | mean_c, cov_c)
  double weighted_log_density(std::size_t c, std::span<const double> x) const {
    const Vector& mean = means_[c];
    double quad = 0.0;
    if (kind_ == CovarianceKind::diagonal) {
      const Vector& inv = inverse_variances_[c];
      for (std::size_t d = 0; d < dim_; ++d) {
        const double diff = x[d] - mean[d];
        quad += diff * diff * inv[d];
      }
    } else {
      Eigen::VectorXd diff(static_cast<Eigen::Index>(dim_));
      for (std::size_t d = 0; d < dim_; ++d) diff(static_cast<Eigen::Index>(d)) = x[d] - mean[d];
      cholesky_[c].triangularView<Eigen::Lower>().solveInPlace(diff);
      quad = diff.squaredNorm();
    }
    return log_norm_[c] - 0.5 * quad;
  }

  /// Fills `posterior` and returns log p(x) via log-sum-exp.
  double posterior(std::span<const double> x, std::span<double> posterior) const {
    if (x.size() != dim_) {
      throw Error(ErrorCode::DimensionMismatch,
                  "query length " + std::to_string(x.size()) + ", model dimension " + std::to_string(dim_));
    }
    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < components(); ++c) {
      posterior[c] = weighted_log_density(c, x);
      max_log = std::max(max_log, posterior[c]);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < components(); ++c) {
      posterior[c] = std::exp(posterior[c] - max_log);
      sum += posterior[c];
    }
    for (std::size_t c = 0; c < components(); ++c) posterior[c] /= sum;
    return max_log + std::log(sum);
  }

 private:
  CovarianceKind kind_;
  std::size_t dim_ = 0;
  std::vector<Vector> means_;
  std::vector<Vector> inverse_variances_;
  std::vector<Eigen::MatrixXd> cholesky_;
  std::vector<double> log_norm_;
};

inline GaussianMixtureDensity make_density(const GmmModel& model) {
  return GaussianMixtureDensity(model.covariance_kind, model.weights, model.means, model.covariances);
}

/// Mean per-sample log-likelihood of `data` under the model's parameters.
inline double mean_log_likelihood(const GmmModel& model, const Dataset& data) {
  const auto density = make_density(model);
  std::vector<double> scratch(density.components());
  double total = 0.0;
  for (const auto& r : data.records()) total += density.posterior(r.vector, scratch);
  return total / static_cast<double>(data.size());
}

namespace detail {

inline void validate(const GmmConfig& config, std::size_t record_count) {
  if (config.components == 0) throw Error(ErrorCode::InvalidArgument, "components must be positive");
  if (config.max_iterations == 0) throw Error(ErrorCode::InvalidArgument, "max_iterations must be positive");
  if (config.init_runs == 0) throw Error(ErrorCode::InvalidArgument, "init_runs must be positive");
  if (!(config.covariance_floor > 0.0) || !std::isfinite(config.covariance_floor)) {
    throw Error(ErrorCode::InvalidArgument, "covariance_floor must be positive");
  }
  if (!(config.tolerance >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be >= 0");
  if (config.components > record_count) {
    throw Error(ErrorCode::TooFewRecords, "components=" + std::to_string(config.components) + " exceeds " +
                                              std::to_string(record_count) + " records");
  }
}

/// Weighted M-step for one component. `resp` is the column of
/// responsibilities for that component.
inline void estimate_component(const Points& pts, std::span<const double> resp, double nk, CovarianceKind kind,
                               double floor, Vector& mean, Vector& cov) {
  const std::size_t dim = pts.dim;
  mean.assign(dim, 0.0);
  for (std::size_t i = 0; i < pts.n; ++i) {
    const auto x = pts.row(i);
    for (std::size_t d = 0; d < dim; ++d) mean[d] += resp[i] * x[d];
  }
  for (auto& m : mean) m /= nk;
  if (kind == CovarianceKind::diagonal) {
    cov.assign(dim, 0.0);
    for (std::size_t i = 0; i < pts.n; ++i) {
      const auto x = pts.row(i);
      for (std::size_t d = 0; d < dim; ++d) cov[d] += resp[i] * (x[d] - mean[d]) * (x[d] - mean[d]);
    }
    for (auto& v : cov) v = std::max(v / nk, floor);
  } else {
    cov.assign(dim * dim, 0.0);
    for (std::size_t i = 0; i < pts.n; ++i) {
      const auto x = pts.row(i);
      for (std::size_t a = 0; a < dim; ++a) {
        const double da = resp[i] * (x[a] - mean[a]);
        for (std::size_t b = 0; b < dim; ++b) cov[a * dim + b] += da * (x[b] - mean[b]);
      }
    }
    for (auto& v : cov) v /= nk;
    for (std::size_t d = 0; d < dim; ++d) cov[d * dim + d] += floor;
  }
}

}  // namespace detail

/// EM for a Gaussian mixture initialised from K-Means (means = centroids,
/// weights = cluster fractions, covariances = per-cluster spread, floored).
/// Log-likelihoods are mean per-sample values; the returned parameters,
/// log_likelihood and responsibilities are mutually consistent.
inline GmmModel gmm_fit(const Dataset& data, const GmmConfig& config) {
  detail::validate(config, data.size());
  const std::size_t n = data.size();
  const std::size_t dim = data.dimension();
  const std::size_t k = config.components;
  const std::vector<double> flat = data.flat_matrix();
  const detail::Points pts{flat, n, dim};

  const KMeansModel init = detail::best_of_inits(pts, k, 300, 1e-6, config.rng_seed, config.init_runs);

  GmmModel model;
  model.covariance_kind = config.covariance_kind;
  model.weights.assign(k, 0.0);
  model.means = init.centroids;
  model.covariances.resize(k);
  {
    std::vector<double> column(n);
    for (std::size_t c = 0; c < k; ++c) {
      double count = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        column[i] = init.assignments[i] == c ? 1.0 : 0.0;
        count += column[i];
      }
      if (count / static_cast<double>(n) < kMinComponentWeight) {
        throw Error(ErrorCode::DegenerateComponent, "K-Means initialisation left component " +
                                                        std::to_string(c) + " empty");
      }
      model.weights[c] = count / static_cast<double>(n);
      Vector mean;
      detail::estimate_component(pts, column, count, config.covariance_kind, config.covariance_floor, mean,
                                 model.covariances[c]);
    }
  }

  std::vector<std::vector<double>> resp(n, std::vector<double>(k));
  auto e_step = [&] {
    const auto density = make_density(model);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += density.posterior(pts.row(i), resp[i]);
    return total / static_cast<double>(n);
  };

  model.log_likelihood_history.push_back(e_step());
  std::vector<double> column(n);
  while (model.iterations_run < config.max_iterations) {
    for (std::size_t c = 0; c < k; ++c) {
      double nk = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        column[i] = resp[i][c];
        nk += column[i];
      }
      if (nk / static_cast<double>(n) < kMinComponentWeight) {
        throw Error(ErrorCode::DegenerateComponent,
                    "component " + std::to_string(c) + " weight fell below 1e-12");
      }
      model.weights[c] = nk / static_cast<double>(n);
      detail::estimate_component(pts, column, nk, config.covariance_kind, config.covariance_floor,
                                 model.means[c], model.covariances[c]);
    }
    ++model.iterations_run;
    model.log_likelihood_history.push_back(e_step());
    const auto& h = model.log_likelihood_history;
    if (h[h.size() - 1] - h[h.size() - 2] < config.tolerance) {
      model.converged = true;
      break;
    }
  }
  model.log_likelihood = model.log_likelihood_history.back();
  model.responsibilities = std::move(resp);
  return model;
}

/// Most probable component (lowest index on ties) and the full posterior.
inline GmmPrediction gmm_predict(const GmmModel& model, std::span<const double> x) {
  const auto density = make_density(model);
  GmmPrediction out;
  out.posterior.resize(density.components());
  density.posterior(x, out.posterior);
  out.component = static_cast<std::size_t>(
      std::max_element(out.posterior.begin(), out.posterior.end()) - out.posterior.begin());
  return out;
}

/// Hard assignments: argmax of each record's responsibilities.
inline std::vector<std::size_t> hard_assignments(const GmmModel& model) {
  std::vector<std::size_t> out;
  out.reserve(model.responsibilities.size());
  for (const auto& row : model.responsibilities) {
    out.push_back(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return out;
}

}  // namespace subdisc
