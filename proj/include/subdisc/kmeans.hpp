#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "subdisc/dataset.hpp"
#include "subdisc/error.hpp"
#include "subdisc/random.hpp"

namespace subdisc {

struct KMeansConfig {
  std::size_t k = 2;
  std::size_t restarts = 5;
  std::size_t max_iterations = 300;
  double tolerance = 1e-6;
  std::uint64_t rng_seed = 0;
  /// Lloyd runs per restart; the lowest-inertia run is kept. Forgy seeding
  /// on k >= 8 tight clusters rarely lands one seed per cluster, so a single
  /// run is usually stuck in a merged-cluster minimum.
  std::size_t inits_per_run = 100;
};

struct KMeansModel {
  std::vector<Vector> centroids;
  double inertia = 0.0;
  std::size_t iterations_run = 0;
  std::vector<std::size_t> assignments;
  /// Inertia after every assignment step, starting with the initial seeding.
  std::vector<double> inertia_history;
  /// Seed of the Lloyd run that produced this model.
  std::uint64_t seed = 0;

  std::size_t k() const noexcept { return centroids.size(); }
};

inline void validate(const KMeansConfig& config, std::size_t record_count) {
  if (config.k == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");
  if (config.restarts == 0) throw Error(ErrorCode::InvalidArgument, "restarts must be positive");
  if (config.max_iterations == 0) throw Error(ErrorCode::InvalidArgument, "max_iterations must be positive");
  if (config.inits_per_run == 0) throw Error(ErrorCode::InvalidArgument, "inits_per_run must be positive");
  if (!(config.tolerance >= 0.0) || !std::isfinite(config.tolerance)) {
    throw Error(ErrorCode::InvalidArgument, "tolerance must be finite and >= 0");
  }
  if (config.k > record_count) {
    throw Error(ErrorCode::TooFewRecords,
                "k=" + std::to_string(config.k) + " exceeds " + std::to_string(record_count) + " records");
  }
}

namespace detail {

/// Row-major point matrix view.
struct Points {
  std::span<const double> values;
  std::size_t n;
  std::size_t dim;

  std::span<const double> row(std::size_t i) const { return values.subspan(i * dim, dim); }
};

inline double squared_distance(const double* a, const double* b, std::size_t dim) {
  double sum = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = a[d] - b[d];
    sum += diff * diff;
  }
  return sum;
}

/// Nearest centroid for each point (strict <, so ties go to the lowest index).
/// Fills per-point squared distances and returns the total.
inline double assign_points(const Points& pts, const std::vector<double>& centroids, std::size_t k,
                            std::vector<std::size_t>& assignment, std::vector<double>& dist2) {
  double total = 0.0;
  for (std::size_t i = 0; i < pts.n; ++i) {
    const double* x = pts.values.data() + i * pts.dim;
    std::size_t best = 0;
    double best_d = squared_distance(x, centroids.data(), pts.dim);
    for (std::size_t c = 1; c < k; ++c) {
      const double d = squared_distance(x, centroids.data() + c * pts.dim, pts.dim);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    assignment[i] = best;
    dist2[i] = best_d;
    total += best_d;
  }
  return total;
}

inline KMeansModel lloyd(const Points& pts, std::size_t k, std::size_t max_iterations, double tolerance,
                         std::uint64_t seed) {
  const std::size_t dim = pts.dim;
  Rng rng(seed);
  std::vector<double> centroids(k * dim);
  {
    const auto seeds = sample_without_replacement(rng, pts.n, k);
    for (std::size_t c = 0; c < k; ++c) {
      const auto src = pts.row(seeds[c]);
      std::copy(src.begin(), src.end(), centroids.begin() + static_cast<std::ptrdiff_t>(c * dim));
    }
  }

  KMeansModel model;
  model.seed = seed;
  std::vector<std::size_t> assignment(pts.n);
  std::vector<double> dist2(pts.n);
  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);
  std::vector<char> reseeded(pts.n);

  model.inertia_history.push_back(assign_points(pts, centroids, k, assignment, dist2));
  while (model.iterations_run < max_iterations) {
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), std::size_t{0});
    for (std::size_t i = 0; i < pts.n; ++i) {
      const std::size_t c = assignment[i];
      ++counts[c];
      const double* x = pts.values.data() + i * dim;
      for (std::size_t d = 0; d < dim; ++d) sums[c * dim + d] += x[d];
    }

    double max_shift2 = 0.0;
    std::fill(reseeded.begin(), reseeded.end(), char{0});
    for (std::size_t c = 0; c < k; ++c) {
      double* centroid = centroids.data() + c * dim;
      double shift2 = 0.0;
      if (counts[c] > 0) {
        const double inv = 1.0 / static_cast<double>(counts[c]);
        for (std::size_t d = 0; d < dim; ++d) {
          const double updated = sums[c * dim + d] * inv;
          shift2 += (updated - centroid[d]) * (updated - centroid[d]);
          centroid[d] = updated;
        }
      } else {
        // Empty cluster: move it onto the point farthest from its current centroid.
        std::size_t far = pts.n;
        for (std::size_t i = 0; i < pts.n; ++i) {
          if (!reseeded[i] && (far == pts.n || dist2[i] > dist2[far])) far = i;
        }
        reseeded[far] = 1;
        const double* x = pts.values.data() + far * dim;
        for (std::size_t d = 0; d < dim; ++d) {
          shift2 += (x[d] - centroid[d]) * (x[d] - centroid[d]);
          centroid[d] = x[d];
        }
      }
      max_shift2 = std::max(max_shift2, shift2);
    }
    ++model.iterations_run;
    model.inertia_history.push_back(assign_points(pts, centroids, k, assignment, dist2));
    if (std::sqrt(max_shift2) <= tolerance) break;
  }

  model.inertia = model.inertia_history.back();
  model.assignments = std::move(assignment);
  model.centroids.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    model.centroids[c].assign(centroids.begin() + static_cast<std::ptrdiff_t>(c * dim),
                              centroids.begin() + static_cast<std::ptrdiff_t>((c + 1) * dim));
  }
  return model;
}

/// Best-inertia Lloyd run among `inits` runs; run 0 uses `seed` itself and
/// run j > 0 uses derive_seed(seed, j).
inline KMeansModel best_of_inits(const Points& pts, std::size_t k, std::size_t max_iterations,
                                 double tolerance, std::uint64_t seed, std::size_t inits) {
  KMeansModel best = lloyd(pts, k, max_iterations, tolerance, seed);
  for (std::size_t j = 1; j < inits; ++j) {
    KMeansModel candidate = lloyd(pts, k, max_iterations, tolerance, derive_seed(seed, j));
    if (candidate.inertia < best.inertia) best = std::move(candidate);
  }
  return best;
}

}  // namespace detail

/// One Lloyd run from a Forgy seeding drawn with `rng_seed`.
inline KMeansModel kmeans_fit_once(const Dataset& data, std::size_t k, std::size_t max_iterations,
                                   double tolerance, std::uint64_t rng_seed) {
  KMeansConfig config;
  config.k = k;
  config.max_iterations = max_iterations;
  config.tolerance = tolerance;
  validate(config, data.size());
  const std::vector<double> flat = data.flat_matrix();
  return detail::lloyd({flat, data.size(), data.dimension()}, k, max_iterations, tolerance, rng_seed);
}

/// Seed used by restart `index` of kmeans_fit.
constexpr std::uint64_t restart_seed(std::uint64_t rng_seed, std::size_t index) noexcept {
  return derive_seed(rng_seed, index);
}

/// `config.restarts` independent models, in restart order. Restart i starts
/// from restart_seed(config.rng_seed, i) and keeps the best of
/// `config.inits_per_run` Lloyd runs.
inline std::vector<KMeansModel> kmeans_fit(const Dataset& data, const KMeansConfig& config) {
  validate(config, data.size());
  const std::vector<double> flat = data.flat_matrix();
  const detail::Points pts{flat, data.size(), data.dimension()};
  std::vector<KMeansModel> models;
  models.reserve(config.restarts);
  for (std::size_t i = 0; i < config.restarts; ++i) {
    models.push_back(detail::best_of_inits(pts, config.k, config.max_iterations, config.tolerance,
                                           restart_seed(config.rng_seed, i), config.inits_per_run));
  }
  return models;
}

/// Minimum inertia; ties go to the earliest model.
inline const KMeansModel& select_best_by_inertia(std::span<const KMeansModel> models) {
  if (models.empty()) throw Error(ErrorCode::EmptyList, "no models to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < models.size(); ++i) {
    if (models[i].inertia < models[best].inertia) best = i;
  }
  return models[best];
}

/// Index of the nearest centroid by squared Euclidean distance (lowest index on ties).
inline std::size_t nearest_centroid(const KMeansModel& model, std::span<const double> x) {
  if (model.centroids.empty()) throw Error(ErrorCode::EmptyList, "model has no centroids");
  if (x.size() != model.centroids.front().size()) {
    throw Error(ErrorCode::DimensionMismatch, "query length " + std::to_string(x.size()));
  }
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < model.centroids.size(); ++c) {
    const double d = detail::squared_distance(x.data(), model.centroids[c].data(), x.size());
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace subdisc
