#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "subdisc/alignment.hpp"
#include "subdisc/dataset.hpp"
#include "subdisc/error.hpp"
#include "subdisc/kmeans.hpp"

namespace subdisc {

struct SubsetScore {
  std::vector<std::string> attributes;
  /// mean over restarts of overall accuracy against this subset
  double mean_accuracy = 0.0;

  friend bool operator==(const SubsetScore&, const SubsetScore&) = default;
};

struct HierarchyLevel {
  std::size_t cluster_count = 0;
  /// best-scoring attribute subset of size log2(cluster_count)
  std::vector<std::string> resolved;
  double overall_accuracy = 0.0;
  /// averaged per-attribute accuracy for the resolved attributes
  std::map<std::string, double> attribute_accuracies;
  /// averaged per-value recall for the resolved attributes
  std::map<std::string, std::map<std::string, double>> value_accuracies;
  /// overall accuracy of each restart against the resolved subset
  std::vector<double> run_accuracies;
  std::vector<SubsetScore> subsets;

  friend bool operator==(const HierarchyLevel&, const HierarchyLevel&) = default;
};

struct HierarchyReport {
  std::vector<HierarchyLevel> levels;
  /// most dominant first
  std::vector<std::string> dominance_order;

  friend bool operator==(const HierarchyReport&, const HierarchyReport&) = default;
};

namespace detail {

inline void for_each_combination(std::size_t n, std::size_t m,
                                 const std::function<void(const std::vector<std::size_t>&)>& fn) {
  std::vector<std::size_t> idx(m);
  for (std::size_t i = 0; i < m; ++i) idx[i] = i;
  while (true) {
    fn(idx);
    std::size_t i = m;
    while (i > 0 && idx[i - 1] == n - m + (i - 1)) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < m; ++j) idx[j] = idx[j - 1] + 1;
  }
}

inline void require_binary(const Dataset& data, std::span<const std::string> attributes) {
  for (const auto& attr : attributes) {
    std::set<std::string> values;
    for (const auto& r : data.records()) {
      auto it = r.labels.find(attr);
      if (it == r.labels.end()) {
        throw Error(ErrorCode::MissingAttribute, "record '" + r.id + "' lacks '" + attr + "'");
      }
      values.insert(it->second);
    }
    if (values.size() != 2) {
      throw Error(ErrorCode::NonBinaryAttribute,
                  "'" + attr + "' takes " + std::to_string(values.size()) + " values, expected 2");
    }
  }
}

}  // namespace detail

/// For each cluster count 2^m, fit K-Means (`config.restarts` restarts, k
/// overridden) and score every m-subset of `attributes`, averaging over
/// restarts. The best subset is what that level resolves; an attribute's
/// dominance rank is the first level that resolves it (ties: higher accuracy,
/// then input order). Attributes never resolved go last in input order.
inline HierarchyReport hierarchy_probe(const Dataset& data, std::span<const std::string> attributes,
                                       std::vector<std::size_t> cluster_counts, KMeansConfig config) {
  if (attributes.empty()) throw Error(ErrorCode::InvalidArgument, "no attributes to probe");
  if (std::set<std::string>(attributes.begin(), attributes.end()).size() != attributes.size()) {
    throw Error(ErrorCode::InvalidArgument, "attributes repeat");
  }
  if (cluster_counts.empty()) throw Error(ErrorCode::InvalidArgument, "no cluster counts");
  std::sort(cluster_counts.begin(), cluster_counts.end());
  cluster_counts.erase(std::unique(cluster_counts.begin(), cluster_counts.end()), cluster_counts.end());
  for (std::size_t count : cluster_counts) {
    const bool ok = count >= 2 && std::has_single_bit(count) &&
                    static_cast<std::size_t>(std::countr_zero(count)) <= attributes.size();
    if (!ok) {
      throw Error(ErrorCode::InvalidArgument, "cluster count " + std::to_string(count) +
                                                  " is not a power of two in [2, 2^attributes]");
    }
  }
  detail::require_binary(data, attributes);

  HierarchyReport report;
  std::map<std::string, std::size_t> first_level;
  std::map<std::string, double> first_accuracy;
  for (std::size_t count : cluster_counts) {
    config.k = count;
    const auto models = kmeans_fit(data, config);
    const auto m = static_cast<std::size_t>(std::countr_zero(count));

    HierarchyLevel level;
    level.cluster_count = count;
    std::vector<AlignmentReport> best_runs;
    double best = -1.0;
    detail::for_each_combination(attributes.size(), m, [&](const std::vector<std::size_t>& idx) {
      std::vector<std::string> subset;
      for (std::size_t i : idx) subset.push_back(attributes[i]);
      std::vector<AlignmentReport> runs;
      double sum = 0.0;
      for (const auto& model : models) {
        runs.push_back(align_and_score(model.assignments, data, subset, count));
        sum += runs.back().overall_accuracy;
      }
      const double mean = sum / static_cast<double>(models.size());
      level.subsets.push_back({subset, mean});
      if (mean > best) {
        best = mean;
        best_runs = std::move(runs);
        level.resolved = subset;
      }
    });

    const AveragedAccuracy avg = average_runs(best_runs);
    level.overall_accuracy = avg.overall;
    level.attribute_accuracies = avg.attribute;
    level.value_accuracies = avg.value;
    for (const auto& run : best_runs) level.run_accuracies.push_back(run.overall_accuracy);
    for (const auto& attr : level.resolved) {
      if (first_level.emplace(attr, count).second) first_accuracy[attr] = avg.attribute.at(attr);
    }
    report.levels.push_back(std::move(level));
  }

  std::vector<std::size_t> order(attributes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto rank = [&](std::size_t i) {
    auto it = first_level.find(attributes[i]);
    return it == first_level.end() ? std::size_t(-1) : it->second;
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rank(a) != rank(b)) return rank(a) < rank(b);
    if (rank(a) == std::size_t(-1)) return false;
    return first_accuracy.at(attributes[a]) > first_accuracy.at(attributes[b]);
  });
  for (std::size_t i : order) report.dominance_order.push_back(attributes[i]);
  return report;
}

}  // namespace subdisc
