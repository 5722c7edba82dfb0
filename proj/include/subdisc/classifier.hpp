#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "subdisc/alignment.hpp"
#include "subdisc/dataset.hpp"
#include "subdisc/distance.hpp"
#include "subdisc/error.hpp"
#include "subdisc/gmm.hpp"
#include "subdisc/kmeans.hpp"
#include "subdisc/random.hpp"

namespace subdisc {

// ---------------------------------------------------------------------------
// Train/test split

struct SplitSpec {
  double train_fraction = 0.7;
  std::vector<std::string> stratify_by;
  std::uint64_t rng_seed = 0;
};

struct DatasetSplit {
  Dataset train;
  Dataset test;
};

/// Seeded split. Within each stratum (composite of `stratify_by`; one stratum
/// if empty) round(train_fraction * size) records go to train, clamped to
/// [1, size - 1]. Both halves keep the input record order.
inline DatasetSplit split_dataset(const Dataset& data, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "train_fraction must lie strictly between 0 and 1");
  }
  std::map<CompositeLabel, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < data.size(); ++i) {
    strata[composite_label(data[i], spec.stratify_by)].push_back(i);
  }
  Rng rng(spec.rng_seed);
  std::vector<std::size_t> train, test;
  for (auto& [key, members] : strata) {
    if (members.size() < 2) {
      throw Error(ErrorCode::StratumTooSmall, "stratum '" + join_label(key) + "' has " +
                                                  std::to_string(members.size()) + " record(s)");
    }
    shuffle(rng, members);
    const auto size = static_cast<double>(members.size());
    const auto wanted = static_cast<std::size_t>(std::lround(spec.train_fraction * size));
    const std::size_t take = std::clamp<std::size_t>(wanted, 1, members.size() - 1);
    train.insert(train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    test.insert(test.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {data.subset(train), data.subset(test)};
}

/// Seeded subsample with `counts[value]` records for each value of
/// `attribute`, for disparate-ratio experiments. Values not listed are
/// dropped; output keeps the input record order.
inline Dataset subsample_by_value(const Dataset& data, const std::string& attribute,
                                  const std::map<std::string, std::size_t>& counts, std::uint64_t rng_seed) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto it = data[i].labels.find(attribute);
    if (it == data[i].labels.end()) {
      throw Error(ErrorCode::MissingAttribute, "record '" + data[i].id + "' lacks '" + attribute + "'");
    }
    groups[it->second].push_back(i);
  }
  Rng rng(rng_seed);
  std::vector<std::size_t> keep;
  for (const auto& [value, wanted] : counts) {
    const auto& members = groups[value];
    if (wanted > members.size()) {
      throw Error(ErrorCode::TooFewRecords, "'" + attribute + "'='" + value + "' has " +
                                                std::to_string(members.size()) + " records, " +
                                                std::to_string(wanted) + " requested");
    }
    for (std::size_t j : sample_without_replacement(rng, members.size(), wanted)) keep.push_back(members[j]);
  }
  if (keep.empty()) throw Error(ErrorCode::NoRecords, "subsample is empty");
  std::sort(keep.begin(), keep.end());
  return data.subset(keep);
}

// ---------------------------------------------------------------------------
// Centroid classifier

enum class Backend { kmeans, mog };

constexpr std::string_view to_string(Backend backend) noexcept {
  return backend == Backend::mog ? "mog" : "kmeans";
}

inline Backend parse_backend(std::string_view name) {
  if (name == "kmeans") return Backend::kmeans;
  if (name == "mog") return Backend::mog;
  throw Error(ErrorCode::InvalidArgument, "unknown algorithm '" + std::string(name) + "'");
}

struct ClassifierEntry {
  /// cluster count of the fit that produced this centroid
  std::size_t level = 0;
  Vector centroid;
  CompositeLabel label;
  /// restart of that fit which was selected
  std::size_t restart = 0;
  /// mixture parameters; only set for the mog backend
  double weight = 0.0;
  Vector covariance;

  friend bool operator==(const ClassifierEntry&, const ClassifierEntry&) = default;
};

struct LevelSummary {
  std::size_t cluster_count = 0;
  std::size_t selected_restart = 0;
  double training_accuracy = 0.0;
  std::vector<double> restart_accuracies;

  friend bool operator==(const LevelSummary&, const LevelSummary&) = default;
};

struct CentroidClassifier {
  std::size_t dimension = 0;
  Backend backend = Backend::kmeans;
  CovarianceKind covariance_kind = CovarianceKind::diagonal;
  MetricSpec metric;
  std::vector<std::string> attributes;
  Schema schema;
  std::vector<ClassifierEntry> entries;
  std::vector<LevelSummary> levels;

  friend bool operator==(const CentroidClassifier&, const CentroidClassifier&) = default;
};

inline void validate_classifier(const CentroidClassifier& c) {
  if (c.entries.empty()) throw Error(ErrorCode::EmptyList, "classifier has no entries");
  if (c.dimension == 0) throw Error(ErrorCode::DimensionMismatch, "classifier dimension is 0");
  if (c.metric.kind() == MetricKind::mahalanobis &&
      static_cast<std::size_t>(c.metric.matrix()->rows()) != c.dimension) {
    throw Error(ErrorCode::DimensionMismatch, "metric matrix does not match classifier dimension");
  }
  for (std::size_t i = 0; i < c.entries.size(); ++i) {
    const auto& e = c.entries[i];
    const std::string where = "entry " + std::to_string(i);
    if (e.centroid.size() != c.dimension) throw Error(ErrorCode::DimensionMismatch, where);
    for (double v : e.centroid) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteComponent, where);
    }
    if (e.label.size() != c.attributes.size()) throw Error(ErrorCode::SchemaMismatch, where + " label arity");
    for (std::size_t a = 0; a < c.attributes.size(); ++a) {
      auto it = c.schema.find(c.attributes[a]);
      if (it == c.schema.end()) throw Error(ErrorCode::UnknownAttribute, c.attributes[a]);
      if (!it->second.contains(e.label[a])) {
        throw Error(ErrorCode::UnknownValue, where + " '" + c.attributes[a] + "'='" + e.label[a] + "'");
      }
    }
    if (c.backend == Backend::mog) {
      const std::size_t expected =
          c.covariance_kind == CovarianceKind::diagonal ? c.dimension : c.dimension * c.dimension;
      if (e.covariance.size() != expected) throw Error(ErrorCode::DimensionMismatch, where + " covariance");
    }
  }
}

inline std::vector<std::size_t> classifier_levels(const CentroidClassifier& c) {
  std::vector<std::size_t> out;
  for (const auto& e : c.entries) out.push_back(e.level);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct Classification {
  CompositeLabel label;
  std::size_t level = 0;
  std::size_t entry = 0;
  /// distance to the chosen centroid under the classifier metric
  double distance = 0.0;
  /// mog backend: posterior over the level's components
  std::vector<double> posterior;
};

/// Nearest centroid under the classifier metric (lowest entry index on ties),
/// optionally restricted to one level. The mog backend instead picks the
/// most probable component of one mixture; without a level it uses the
/// largest level, since mixtures of different levels do not share a posterior.
inline Classification classify(const CentroidClassifier& classifier, std::span<const double> x,
                               std::optional<std::size_t> level = std::nullopt) {
  if (x.size() != classifier.dimension) {
    throw Error(ErrorCode::DimensionMismatch, "query length " + std::to_string(x.size()) +
                                                  ", classifier dimension " + std::to_string(classifier.dimension));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteComponent, "query vector");
  }
  if (classifier.backend == Backend::mog && !level) {
    const auto levels = classifier_levels(classifier);
    if (!levels.empty()) level = levels.back();
  }
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < classifier.entries.size(); ++i) {
    if (!level || classifier.entries[i].level == *level) candidates.push_back(i);
  }
  if (candidates.empty()) {
    throw Error(ErrorCode::EmptyLevel, "no centroids at level " + std::to_string(level.value_or(0)));
  }

  Classification out;
  if (classifier.backend == Backend::kmeans) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i : candidates) {
      const double d = classifier.metric(x, classifier.entries[i].centroid);
      if (d < best) {
        best = d;
        out.entry = i;
      }
    }
    out.distance = best;
  } else {
    std::vector<double> weights;
    std::vector<Vector> means, covariances;
    for (std::size_t i : candidates) {
      weights.push_back(classifier.entries[i].weight);
      means.push_back(classifier.entries[i].centroid);
      covariances.push_back(classifier.entries[i].covariance);
    }
    const GaussianMixtureDensity density(classifier.covariance_kind, weights, means, covariances);
    out.posterior.resize(candidates.size());
    density.posterior(x, out.posterior);
    const auto best = static_cast<std::size_t>(
        std::max_element(out.posterior.begin(), out.posterior.end()) - out.posterior.begin());
    out.entry = candidates[best];
    out.distance = classifier.metric(x, classifier.entries[out.entry].centroid);
  }
  out.label = classifier.entries[out.entry].label;
  out.level = classifier.entries[out.entry].level;
  return out;
}

namespace detail {

inline void check_levels(std::span<const std::size_t> cluster_counts) {
  if (cluster_counts.empty()) throw Error(ErrorCode::InvalidArgument, "no cluster counts");
  for (std::size_t k : cluster_counts) {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "cluster count must be positive");
  }
}

inline CentroidClassifier empty_classifier(const Dataset& train, std::span<const std::string> attributes,
                                           Backend backend, MetricSpec metric) {
  CentroidClassifier c;
  c.dimension = train.dimension();
  c.backend = backend;
  c.metric = std::move(metric);
  c.attributes.assign(attributes.begin(), attributes.end());
  for (const auto& attr : attributes) {
    auto it = train.schema().find(attr);
    if (it == train.schema().end()) throw Error(ErrorCode::UnknownAttribute, attr);
    c.schema[attr] = it->second;
  }
  return c;
}

/// Index of the highest-accuracy report (earliest on ties).
inline std::size_t best_report(std::span<const AlignmentReport> reports, LevelSummary& summary) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    summary.restart_accuracies.push_back(reports[i].overall_accuracy);
    if (reports[i].overall_accuracy > reports[best].overall_accuracy) best = i;
  }
  summary.selected_restart = best;
  summary.training_accuracy = reports[best].overall_accuracy;
  return best;
}

}  // namespace detail

/// For every cluster count: multi-restart K-Means on `train`, alignment of
/// each restart against the composite of `attributes`, and the restart with
/// the best training accuracy contributes its labelled centroids. K-Means
/// runs in Euclidean space; `metric` only governs classification.
/// `selected_reports`, when given, receives the training report of each
/// selected restart in level order.
inline CentroidClassifier train_centroid_classifier(const Dataset& train, std::span<const std::string> attributes,
                                                    std::span<const std::size_t> cluster_counts,
                                                    KMeansConfig config, MetricSpec metric = MetricSpec::euclidean(),
                                                    std::vector<AlignmentReport>* selected_reports = nullptr) {
  detail::check_levels(cluster_counts);
  CentroidClassifier classifier = detail::empty_classifier(train, attributes, Backend::kmeans, std::move(metric));
  for (std::size_t count : cluster_counts) {
    config.k = count;
    const auto models = kmeans_fit(train, config);
    std::vector<AlignmentReport> reports;
    for (const auto& m : models) reports.push_back(align_and_score(m.assignments, train, attributes, count));
    LevelSummary summary;
    summary.cluster_count = count;
    const std::size_t best = detail::best_report(reports, summary);
    for (std::size_t j = 0; j < count; ++j) {
      ClassifierEntry e;
      e.level = count;
      e.centroid = models[best].centroids[j];
      e.label = reports[best].cluster_label(j);
      e.restart = best;
      classifier.entries.push_back(std::move(e));
    }
    classifier.levels.push_back(std::move(summary));
    if (selected_reports) selected_reports->push_back(reports[best]);
  }
  validate_classifier(classifier);
  return classifier;
}

/// Mixture-of-Gaussians counterpart: `restarts` EM fits per cluster count
/// with seeds restart_seed(config.rng_seed, r), scored on hard assignments.
inline CentroidClassifier train_mog_classifier(const Dataset& train, std::span<const std::string> attributes,
                                               std::span<const std::size_t> cluster_counts, GmmConfig config,
                                               std::size_t restarts, MetricSpec metric = MetricSpec::euclidean(),
                                               std::vector<AlignmentReport>* selected_reports = nullptr) {
  detail::check_levels(cluster_counts);
  if (restarts == 0) throw Error(ErrorCode::InvalidArgument, "restarts must be positive");
  CentroidClassifier classifier = detail::empty_classifier(train, attributes, Backend::mog, std::move(metric));
  classifier.covariance_kind = config.covariance_kind;
  const std::uint64_t base_seed = config.rng_seed;
  for (std::size_t count : cluster_counts) {
    config.components = count;
    std::vector<GmmModel> models;
    std::vector<AlignmentReport> reports;
    for (std::size_t r = 0; r < restarts; ++r) {
      config.rng_seed = restart_seed(base_seed, r);
      models.push_back(gmm_fit(train, config));
      reports.push_back(align_and_score(hard_assignments(models.back()), train, attributes, count));
    }
    LevelSummary summary;
    summary.cluster_count = count;
    const std::size_t best = detail::best_report(reports, summary);
    for (std::size_t j = 0; j < count; ++j) {
      ClassifierEntry e;
      e.level = count;
      e.centroid = models[best].means[j];
      e.label = reports[best].cluster_label(j);
      e.restart = best;
      e.weight = models[best].weights[j];
      e.covariance = models[best].covariances[j];
      classifier.entries.push_back(std::move(e));
    }
    classifier.levels.push_back(std::move(summary));
    if (selected_reports) selected_reports->push_back(reports[best]);
  }
  validate_classifier(classifier);
  return classifier;
}

/// Accuracy of a classifier over labelled records.
struct ClassificationScore {
  std::vector<Classification> predictions;
  double composite_accuracy = 0.0;
  std::map<std::string, double> attribute_accuracy;
};

inline ClassificationScore score_classifier(const CentroidClassifier& classifier, const Dataset& data,
                                            std::optional<std::size_t> level = std::nullopt) {
  ClassificationScore out;
  std::size_t composite_hits = 0;
  std::vector<std::size_t> attr_hits(classifier.attributes.size(), 0);
  for (const auto& r : data.records()) {
    const CompositeLabel truth = composite_label(r, classifier.attributes);
    out.predictions.push_back(classify(classifier, r.vector, level));
    const auto& predicted = out.predictions.back().label;
    if (predicted == truth) ++composite_hits;
    for (std::size_t a = 0; a < truth.size(); ++a) {
      if (predicted[a] == truth[a]) ++attr_hits[a];
    }
  }
  const auto n = static_cast<double>(data.size());
  out.composite_accuracy = static_cast<double>(composite_hits) / n;
  for (std::size_t a = 0; a < classifier.attributes.size(); ++a) {
    out.attribute_accuracy[classifier.attributes[a]] = static_cast<double>(attr_hits[a]) / n;
  }
  return out;
}

// ---------------------------------------------------------------------------
// One-shot identification

inline constexpr double kDefaultIdentityThreshold = 0.6;

struct Identification {
  /// empty when the nearest gallery record lies beyond the threshold
  std::optional<std::string> identity;
  double nearest_distance = 0.0;
  /// gallery indices of the k nearest records, nearest first
  std::vector<std::size_t> neighbors;
};

/// k nearest gallery records by Euclidean distance (lower index on ties);
/// majority identity among them, ties going to the identity seen first.
/// Unknown when the nearest distance exceeds `threshold`.
inline Identification knn_identify(const Dataset& gallery, std::span<const double> query, std::size_t k = 1,
                                   double threshold = kDefaultIdentityThreshold,
                                   const std::string& identity_attribute = "identity") {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");
  if (!(threshold >= 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be >= 0");
  if (query.size() != gallery.dimension()) {
    throw Error(ErrorCode::DimensionMismatch, "query length " + std::to_string(query.size()) +
                                                  ", gallery dimension " + std::to_string(gallery.dimension()));
  }
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(gallery.size());
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    scored.emplace_back(euclidean_distance<double>(query, gallery[i].vector), i);
  }
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end());

  Identification out;
  out.nearest_distance = scored.front().first;
  std::vector<std::pair<std::string, std::size_t>> votes;
  for (std::size_t i = 0; i < take; ++i) {
    const auto& record = gallery[scored[i].second];
    out.neighbors.push_back(scored[i].second);
    auto it = record.labels.find(identity_attribute);
    if (it == record.labels.end()) {
      throw Error(ErrorCode::MissingAttribute, "record '" + record.id + "' lacks '" + identity_attribute + "'");
    }
    auto v = std::find_if(votes.begin(), votes.end(), [&](const auto& p) { return p.first == it->second; });
    if (v == votes.end()) {
      votes.emplace_back(it->second, 1);
    } else {
      ++v->second;
    }
  }
  if (out.nearest_distance > threshold) return out;
  const auto winner = std::max_element(votes.begin(), votes.end(),
                                       [](const auto& a, const auto& b) { return a.second < b.second; });
  out.identity = winner->first;
  return out;
}

}  // namespace subdisc
