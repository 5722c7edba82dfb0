#include <cmath>
#include <limits>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "subdisc/classifier.hpp"
#include "subdisc/synth.hpp"
#include "test_support.hpp"

namespace subdisc {
namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::InvalidArgument;
}

const std::vector<std::string> kAttrs{"skin_tone", "gender", "age"};

HierarchySpec spec_with(std::size_t per_cell, std::uint64_t seed = 1) {
  auto spec = default_hierarchy_spec();
  spec.samples_per_cell = per_cell;
  spec.rng_seed = seed;
  return spec;
}

KMeansConfig quick(std::uint64_t seed = 0) {
  KMeansConfig config;
  config.rng_seed = seed;
  config.inits_per_run = 20;
  return config;
}

/// Hand-built classifier with random centroids at a single level.
CentroidClassifier random_classifier(std::mt19937_64& rng, std::size_t entries, std::size_t dim) {
  CentroidClassifier c;
  c.dimension = dim;
  c.attributes = {"c"};
  for (std::size_t i = 0; i < entries; ++i) {
    c.schema["c"].insert(std::to_string(i));
    c.entries.push_back({entries, testing::random_vector(rng, dim), {std::to_string(i)}, 0, 0.0, {}});
  }
  return c;
}

TEST(Split, StratumSizesFollowRounding) {
  const Dataset data = generate(spec_with(125));
  const auto parts = split_dataset(data, {0.7, kAttrs, 5});
  EXPECT_EQ(parts.train.size(), 8u * 88);
  EXPECT_EQ(parts.test.size(), 8u * 37);
  std::map<CompositeLabel, std::size_t> per_stratum;
  for (const auto& r : parts.train.records()) ++per_stratum[composite_label(r, kAttrs)];
  for (const auto& [key, count] : per_stratum) EXPECT_EQ(count, 88u) << join_label(key);
}

TEST(Split, TwoRecordsHalve) {
  std::vector<EmbeddingRecord> records{{"a", {0.0}, {{"x", "1"}}}, {"b", {1.0}, {{"x", "1"}}}};
  const Dataset data = validate_dataset(std::move(records), {{"x", {"1"}}});
  const auto parts = split_dataset(data, {0.5, {"x"}, 0});
  EXPECT_EQ(parts.train.size(), 1u);
  EXPECT_EQ(parts.test.size(), 1u);
}

TEST(Split, DeterministicDisjointAndCovering) {
  const Dataset data = generate(spec_with(10));
  const SplitSpec spec{0.6, {"gender"}, 9};
  const auto a = split_dataset(data, spec), b = split_dataset(data, spec);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  std::set<std::string> ids;
  for (const auto& r : a.train.records()) ids.insert(r.id);
  for (const auto& r : a.test.records()) EXPECT_TRUE(ids.insert(r.id).second) << r.id;
  EXPECT_EQ(ids.size(), data.size());
  const auto other = split_dataset(data, {0.6, {"gender"}, 10});
  EXPECT_NE(other.train, a.train);
}

TEST(Split, Errors) {
  std::vector<EmbeddingRecord> records{{"a", {0.0}, {{"x", "1"}}}, {"b", {1.0}, {{"x", "2"}}}};
  const Dataset data = validate_dataset(std::move(records), {{"x", {"1", "2"}}});
  EXPECT_EQ(code_of([&] { split_dataset(data, {0.5, {"x"}, 0}); }), ErrorCode::StratumTooSmall);
  EXPECT_EQ(code_of([&] { split_dataset(data, {1.0, {}, 0}); }), ErrorCode::InvalidArgument);
}

TEST(Subsample, DrawsRequestedCountsPerValue) {
  const Dataset data = generate(spec_with(20));
  const auto sub = subsample_by_value(data, "age", {{"old", 10}, {"young", 70}}, 3);
  std::map<std::string, std::size_t> seen;
  for (const auto& r : sub.records()) ++seen[r.labels.at("age")];
  EXPECT_EQ(seen.at("old"), 10u);
  EXPECT_EQ(seen.at("young"), 70u);
  for (std::size_t i = 1; i < sub.size(); ++i) EXPECT_LT(sub[i - 1].id, sub[i].id);
  EXPECT_EQ(sub, subsample_by_value(data, "age", {{"old", 10}, {"young", 70}}, 3));
  const auto only_old = subsample_by_value(data, "age", {{"old", 5}}, 3);
  EXPECT_EQ(only_old.size(), 5u);
  EXPECT_EQ(code_of([&] { subsample_by_value(data, "age", {{"old", 81}}, 0); }), ErrorCode::TooFewRecords);
  EXPECT_EQ(code_of([&] { subsample_by_value(data, "mood", {{"x", 1}}, 0); }), ErrorCode::MissingAttribute);
}

TEST(Train, SeparatedDataGivesClassMeans) {
  const auto truth = generate_with_truth(spec_with(20));
  const std::vector<std::size_t> levels{2, 4, 8};
  const auto classifier = train_centroid_classifier(truth.data, kAttrs, levels, quick());
  ASSERT_EQ(classifier.levels.size(), 3u);
  EXPECT_EQ(classifier.levels[2].training_accuracy, 1.0);
  // level-8 centroids are the per-class sample means
  std::map<CompositeLabel, std::pair<Vector, std::size_t>> sums;
  for (const auto& r : truth.data.records()) {
    auto& [sum, n] = sums[composite_label(r, kAttrs)];
    sum.resize(r.vector.size(), 0.0);
    for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += r.vector[d];
    ++n;
  }
  std::size_t seen = 0;
  for (const auto& e : classifier.entries) {
    if (e.level != 8) continue;
    ++seen;
    const auto& [sum, n] = sums.at(e.label);
    for (std::size_t d = 0; d < sum.size(); ++d) EXPECT_NEAR(e.centroid[d], sum[d] / n, 1e-6);
  }
  EXPECT_EQ(seen, 8u);
  EXPECT_EQ(score_classifier(classifier, truth.data, 8).composite_accuracy, 1.0);
}

TEST(Train, SelectedRestartHasBestTrainingAccuracy) {
  auto spec = spec_with(10, 3);
  spec.noise_sigma = 0.6;
  const Dataset data = generate(spec);
  auto config = quick(4);
  config.inits_per_run = 1;
  const std::vector<std::size_t> levels{2, 4, 8};
  std::vector<AlignmentReport> reports;
  const auto classifier = train_centroid_classifier(data, kAttrs, levels, config, MetricSpec::euclidean(), &reports);
  ASSERT_EQ(reports.size(), 3u);
  for (std::size_t l = 0; l < classifier.levels.size(); ++l) {
    const auto& level = classifier.levels[l];
    for (double acc : level.restart_accuracies) EXPECT_GE(level.training_accuracy, acc);
    EXPECT_EQ(level.training_accuracy, level.restart_accuracies[level.selected_restart]);
    EXPECT_EQ(reports[l].overall_accuracy, level.training_accuracy);
  }
  config.restarts = 1;
  const auto single = train_centroid_classifier(data, kAttrs, levels, config);
  for (const auto& level : single.levels) EXPECT_EQ(level.selected_restart, 0u);
}

TEST(Classify, CentroidQueryReturnsItsLabel) {
  std::mt19937_64 rng(1);
  const auto c = random_classifier(rng, 6, 4);
  for (std::size_t i = 0; i < 6; ++i) {
    const auto result = classify(c, c.entries[i].centroid);
    EXPECT_EQ(result.entry, i);
    EXPECT_EQ(result.distance, 0.0);
    EXPECT_EQ(result.label, c.entries[i].label);
  }
}

TEST(Classify, EquidistantGoesToLowerIndex) {
  CentroidClassifier c;
  c.dimension = 1;
  c.attributes = {"c"};
  c.schema["c"] = {"a", "b"};
  c.entries = {{2, {1.0}, {"b"}, 0, 0.0, {}}, {2, {-1.0}, {"a"}, 0, 0.0, {}}};
  EXPECT_EQ(classify(c, Vector{0.0}).label, CompositeLabel{"b"});
}

TEST(Classify, MatchesExhaustiveScan) {
  std::mt19937_64 rng(2);
  const auto c = random_classifier(rng, 14, 8);
  std::vector<Vector> centroids;
  for (const auto& e : c.entries) centroids.push_back(e.centroid);
  for (int q = 0; q < 500; ++q) {
    const Vector x = testing::random_vector(rng, 8);
    EXPECT_EQ(classify(c, x).entry, testing::brute_nearest(centroids, x));
  }
}

TEST(Classify, IsOneNearestNeighbourOverCentroids) {
  std::mt19937_64 rng(3);
  const auto c = random_classifier(rng, 10, 5);
  std::vector<EmbeddingRecord> records;
  for (std::size_t i = 0; i < c.entries.size(); ++i) {
    records.push_back({"e" + std::to_string(i), c.entries[i].centroid, {{"identity", std::to_string(i)}}});
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < c.entries.size(); ++i) ids.insert(std::to_string(i));
  const Dataset gallery = validate_dataset(std::move(records), {{"identity", ids}});
  for (int q = 0; q < 200; ++q) {
    const Vector x = testing::random_vector(rng, 5);
    const auto knn = knn_identify(gallery, x, 1, std::numeric_limits<double>::infinity());
    EXPECT_EQ(std::to_string(classify(c, x).entry), knn.identity.value());
  }
}

TEST(Classify, LevelFilterAndErrors) {
  const Dataset data = generate(spec_with(10));
  const std::vector<std::size_t> levels{2, 8};
  const auto c = train_centroid_classifier(data, kAttrs, levels, quick());
  for (const auto& r : data.records()) {
    EXPECT_EQ(classify(c, r.vector, 8).level, 8u);
    EXPECT_EQ(classify(c, r.vector, 2).level, 2u);
  }
  EXPECT_EQ(code_of([&] { classify(c, data[0].vector, 4); }), ErrorCode::EmptyLevel);
  EXPECT_EQ(code_of([&] { classify(c, Vector{1.0}); }), ErrorCode::DimensionMismatch);
}

TEST(Classify, TranslationInvariance) {
  std::mt19937_64 rng(4);
  const Dataset data = generate(spec_with(8, 4));
  const std::vector<std::size_t> levels{8};
  const auto base = train_centroid_classifier(data, kAttrs, levels, quick());
  for (int t = 0; t < 10; ++t) {
    const Vector offset = testing::random_vector(rng, data.dimension(), 20.0);
    auto shift = [&](const Vector& v) {
      Vector out = v;
      for (std::size_t d = 0; d < out.size(); ++d) out[d] += offset[d];
      return out;
    };
    const auto moved = train_centroid_classifier(map_vectors(data, shift), kAttrs, levels, quick());
    for (int q = 0; q < 20; ++q) {
      const Vector x = testing::random_vector(rng, data.dimension(), 5.0);
      EXPECT_EQ(classify(base, x).label, classify(moved, shift(x)).label);
    }
  }
}

TEST(Classify, MahalanobisMetricIsUsed) {
  CentroidClassifier c;
  c.dimension = 2;
  c.attributes = {"c"};
  c.schema["c"] = {"a", "b"};
  c.entries = {{2, {1.5, 0.0}, {"a"}, 0, 0.0, {}}, {2, {0.0, 2.0}, {"b"}, 0, 0.0, {}}};
  EXPECT_EQ(classify(c, Vector{0.0, 0.0}).label, CompositeLabel{"a"});
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2);
  m(0, 0) = 4.0;
  c.metric = MetricSpec::mahalanobis(m);
  EXPECT_EQ(classify(c, Vector{0.0, 0.0}).label, CompositeLabel{"b"});
}

TEST(MogClassifier, AgreesWithKMeansOnSeparatedData) {
  const Dataset data = generate(spec_with(15));
  const std::vector<std::size_t> levels{8};
  const auto km = train_centroid_classifier(data, kAttrs, levels, quick());
  GmmConfig gmm;
  gmm.init_runs = 20;
  const auto mog = train_mog_classifier(data, kAttrs, levels, gmm, 2);
  EXPECT_EQ(mog.levels[0].training_accuracy, 1.0);
  for (const auto& r : data.records()) {
    const auto p = classify(mog, r.vector);
    EXPECT_EQ(p.label, classify(km, r.vector).label);
    double sum = 0.0;
    for (double v : p.posterior) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

Dataset gallery_of(std::mt19937_64& rng, std::size_t identities, std::size_t dim) {
  std::vector<EmbeddingRecord> records;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < identities; ++i) {
    ids.insert("id" + std::to_string(i));
    records.push_back({"g" + std::to_string(i), testing::random_vector(rng, dim), {{"identity", "id" + std::to_string(i)}}});
  }
  return validate_dataset(std::move(records), {{"identity", ids}});
}

TEST(Knn, IdenticalRecordIsRecognised) {
  std::mt19937_64 rng(5);
  const Dataset gallery = gallery_of(rng, 10, 16);
  for (const auto& r : gallery.records()) {
    const auto id = knn_identify(gallery, r.vector);
    EXPECT_EQ(id.identity, r.labels.at("identity"));
    EXPECT_EQ(id.nearest_distance, 0.0);
  }
}

TEST(Knn, BeyondThresholdIsUnknown) {
  std::vector<EmbeddingRecord> records{{"a", {0.7, 0.0}, {{"identity", "x"}}}, {"b", {-0.7, 0.0}, {{"identity", "y"}}}};
  const Dataset gallery = validate_dataset(std::move(records), {{"identity", {"x", "y"}}});
  const auto id = knn_identify(gallery, Vector{0.0, 0.0});
  EXPECT_FALSE(id.identity.has_value());
  EXPECT_NEAR(id.nearest_distance, 0.7, 1e-15);
  EXPECT_TRUE(knn_identify(gallery, Vector{0.0, 0.0}, 1, 0.7).identity.has_value());
}

TEST(Knn, MatchesLinearScan) {
  std::mt19937_64 rng(6);
  const Dataset gallery = gallery_of(rng, 10, 8);
  for (int q = 0; q < 300; ++q) {
    const Vector x = testing::random_vector(rng, 8);
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t i = 0; i < gallery.size(); ++i) {
      double d = 0.0;
      for (std::size_t j = 0; j < 8; ++j) d += (x[j] - gallery[i].vector[j]) * (x[j] - gallery[i].vector[j]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    const auto id = knn_identify(gallery, x, 1, 100.0);
    EXPECT_EQ(id.neighbors.front(), best);
    EXPECT_EQ(id.identity, gallery[best].labels.at("identity"));
  }
}

TEST(Knn, MajorityVoteWithFirstSeenTieBreak) {
  std::vector<EmbeddingRecord> records{{"a", {0.1}, {{"identity", "x"}}},
                                       {"b", {0.2}, {{"identity", "y"}}},
                                       {"c", {0.3}, {{"identity", "y"}}},
                                       {"d", {0.4}, {{"identity", "x"}}}};
  const Dataset gallery = validate_dataset(std::move(records), {{"identity", {"x", "y"}}});
  EXPECT_EQ(knn_identify(gallery, Vector{0.0}, 3).identity, "y");
  EXPECT_EQ(knn_identify(gallery, Vector{0.0}, 4).identity, "x");
  EXPECT_EQ(code_of([&] { knn_identify(gallery, Vector{0.0}, 0); }), ErrorCode::InvalidArgument);
}

}  // namespace
}  // namespace subdisc
