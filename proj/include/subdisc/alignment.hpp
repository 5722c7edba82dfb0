#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "subdisc/dataset.hpp"
#include "subdisc/error.hpp"
#include "subdisc/hungarian.hpp"

namespace subdisc {

/// Scores an unlabeled clustering as a classifier of composite labels.
struct AlignmentReport {
  std::vector<std::string> attributes;
  /// Distinct composite labels present in the data, sorted.
  std::vector<CompositeLabel> classes;
  /// cluster index -> index into `classes`
  std::vector<std::size_t> mapping;
  /// rows: true class, columns: predicted class
  std::vector<std::vector<std::size_t>> confusion;
  /// recall per class, parallel to `classes`
  std::vector<double> per_class_accuracy;
  double overall_accuracy = 0.0;
  /// fraction of records whose predicted value for the attribute is right
  std::map<std::string, double> attribute_accuracy;
  /// attribute -> value -> recall of that value
  std::map<std::string, std::map<std::string, double>> value_accuracy;
  std::size_t record_count = 0;

  std::size_t cluster_count() const noexcept { return mapping.size(); }
  const CompositeLabel& cluster_label(std::size_t cluster) const { return classes.at(mapping.at(cluster)); }

  std::map<std::string, double> per_class_accuracy_by_name() const {
    std::map<std::string, double> out;
    for (std::size_t c = 0; c < classes.size(); ++c) out[join_label(classes[c])] = per_class_accuracy[c];
    return out;
  }

  friend bool operator==(const AlignmentReport&, const AlignmentReport&) = default;
};

/// Optimal cluster -> class mapping for a clusters x classes contingency
/// table (row-major counts).
///
/// clusters <= classes: injective mapping maximising agreement.
/// clusters > classes: every class receives at least one cluster and the rest
/// go to their majority class. The injective core is solved with weights
/// count - row_max so that core and extension are optimal jointly.
inline std::vector<std::size_t> optimal_cluster_mapping(std::span<const std::int64_t> counts, std::size_t clusters,
                                                        std::size_t classes) {
  if (counts.size() != clusters * classes) throw Error(ErrorCode::DimensionMismatch, "contingency size");
  std::vector<std::size_t> mapping(clusters, 0);
  if (clusters == 0 || classes == 0) return mapping;

  if (clusters <= classes) {
    std::vector<std::int64_t> cost(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) cost[i] = -counts[i];
    return min_cost_assignment<std::int64_t>(cost, clusters, classes);
  }

  std::vector<std::size_t> majority(clusters, 0);
  std::vector<std::int64_t> row_max(clusters, 0);
  for (std::size_t k = 0; k < clusters; ++k) {
    for (std::size_t c = 0; c < classes; ++c) {
      const std::int64_t v = counts[k * classes + c];
      if (v > row_max[k]) {
        row_max[k] = v;
        majority[k] = c;
      }
    }
  }
  // classes x clusters, cost = -(count - row_max) >= 0
  std::vector<std::int64_t> cost(classes * clusters);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < clusters; ++k) cost[c * clusters + k] = row_max[k] - counts[k * classes + c];
  }
  const auto core = min_cost_assignment<std::int64_t>(cost, classes, clusters);
  mapping = majority;
  for (std::size_t c = 0; c < classes; ++c) mapping[core[c]] = c;
  return mapping;
}

/// Align cluster indices with the composite labels formed by `attributes`
/// and score the result. `cluster_count` of 0 means max(assignments) + 1.
inline AlignmentReport align_and_score(std::span<const std::size_t> assignments, const Dataset& data,
                                       std::span<const std::string> attributes, std::size_t cluster_count = 0) {
  if (assignments.empty()) throw Error(ErrorCode::NoRecords, "no assignments to score");
  if (assignments.size() != data.size()) {
    throw Error(ErrorCode::InvalidArgument, std::to_string(assignments.size()) + " assignments for " +
                                                std::to_string(data.size()) + " records");
  }
  if (attributes.empty()) throw Error(ErrorCode::InvalidArgument, "no attributes to score against");

  std::vector<CompositeLabel> truth;
  truth.reserve(data.size());
  std::map<CompositeLabel, std::size_t> class_index;
  for (const auto& r : data.records()) {
    truth.push_back(composite_label(r, attributes));
    class_index.emplace(truth.back(), 0);
  }

  AlignmentReport report;
  report.attributes.assign(attributes.begin(), attributes.end());
  for (auto& [label, index] : class_index) {
    index = report.classes.size();
    report.classes.push_back(label);
  }
  const std::size_t classes = report.classes.size();
  const std::size_t clusters =
      std::max(cluster_count, *std::max_element(assignments.begin(), assignments.end()) + 1);

  std::vector<std::size_t> true_class(data.size());
  std::vector<std::int64_t> counts(clusters * classes, 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    true_class[i] = class_index.at(truth[i]);
    ++counts[assignments[i] * classes + true_class[i]];
  }
  report.mapping = optimal_cluster_mapping(counts, clusters, classes);

  report.record_count = data.size();
  report.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t correct = 0;
  std::vector<std::size_t> attr_correct(attributes.size(), 0);
  std::vector<std::map<std::string, std::pair<std::size_t, std::size_t>>> value_counts(attributes.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t predicted = report.mapping[assignments[i]];
    ++report.confusion[true_class[i]][predicted];
    if (predicted == true_class[i]) ++correct;
    const CompositeLabel& p = report.classes[predicted];
    for (std::size_t a = 0; a < attributes.size(); ++a) {
      auto& [hit, total] = value_counts[a][truth[i][a]];
      ++total;
      if (p[a] == truth[i][a]) {
        ++hit;
        ++attr_correct[a];
      }
    }
  }

  const auto n = static_cast<double>(data.size());
  report.overall_accuracy = static_cast<double>(correct) / n;
  report.per_class_accuracy.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t row = 0;
    for (std::size_t v : report.confusion[c]) row += v;
    report.per_class_accuracy[c] = static_cast<double>(report.confusion[c][c]) / static_cast<double>(row);
  }
  for (std::size_t a = 0; a < attributes.size(); ++a) {
    report.attribute_accuracy[attributes[a]] = static_cast<double>(attr_correct[a]) / n;
    for (const auto& [value, hits] : value_counts[a]) {
      report.value_accuracy[attributes[a]][value] =
          static_cast<double>(hits.first) / static_cast<double>(hits.second);
    }
  }
  return report;
}

/// Arithmetic means of accuracies over several runs of the same protocol.
struct AveragedAccuracy {
  std::size_t runs = 0;
  std::map<std::string, double> per_class;
  double overall = 0.0;
  std::map<std::string, double> attribute;
  std::map<std::string, std::map<std::string, double>> value;

  friend bool operator==(const AveragedAccuracy&, const AveragedAccuracy&) = default;
};

inline AveragedAccuracy average_runs(std::span<const AlignmentReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::EmptyList, "no reports to average");
  const AlignmentReport& first = reports.front();
  for (const auto& r : reports) {
    if (r.attributes != first.attributes || r.classes != first.classes ||
        r.per_class_accuracy.size() != r.classes.size()) {
      throw Error(ErrorCode::SchemaMismatch, "reports cover different class sets");
    }
  }
  AveragedAccuracy out;
  out.runs = reports.size();
  const auto runs = static_cast<double>(reports.size());
  for (std::size_t c = 0; c < first.classes.size(); ++c) {
    double sum = 0.0;
    for (const auto& r : reports) sum += r.per_class_accuracy[c];
    out.per_class[join_label(first.classes[c])] = sum / runs;
  }
  double overall = 0.0;
  for (const auto& r : reports) {
    overall += r.overall_accuracy;
    for (const auto& [attr, acc] : r.attribute_accuracy) out.attribute[attr] += acc;
    for (const auto& [attr, values] : r.value_accuracy) {
      for (const auto& [value, acc] : values) out.value[attr][value] += acc;
    }
  }
  out.overall = overall / runs;
  for (auto& [attr, acc] : out.attribute) acc /= runs;
  for (auto& [attr, values] : out.value) {
    for (auto& [value, acc] : values) acc /= runs;
  }
  return out;
}

}  // namespace subdisc
