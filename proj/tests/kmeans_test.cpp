#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "subdisc/kmeans.hpp"
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

double oracle_inertia(const Dataset& data, const KMeansModel& model) {
  long double total = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& c = model.centroids[model.assignments[i]];
    for (std::size_t d = 0; d < c.size(); ++d) {
      const long double diff = data[i].vector[d] - c[d];
      total += diff * diff;
    }
  }
  return static_cast<double>(total);
}

TEST(KMeans, SingleClusterIsTheMean) {
  std::mt19937_64 rng(1);
  const Dataset data = testing::random_dataset(rng, 40, 5);
  const auto model = kmeans_fit_once(data, 1, 300, 1e-9, 7);
  for (std::size_t d = 0; d < 5; ++d) {
    long double mean = 0;
    for (const auto& r : data.records()) mean += r.vector[d];
    mean /= 40;
    EXPECT_NEAR(model.centroids[0][d], static_cast<double>(mean), 1e-12);
  }
}

TEST(KMeans, OneClusterPerPointHasZeroInertia) {
  std::mt19937_64 rng(2);
  const Dataset data = testing::random_dataset(rng, 12, 3);
  const auto model = kmeans_fit_once(data, 12, 300, 1e-9, 3);
  EXPECT_EQ(model.inertia, 0.0);
}

TEST(KMeans, SeparatesTwoBlobs) {
  const Dataset data = testing::two_blobs(4);
  KMeansConfig config;
  config.restarts = 3;
  for (const auto& model : kmeans_fit(data, config)) {
    std::vector<std::size_t> truth;
    for (const auto& r : data.records()) truth.push_back(r.labels.at("blob") == "b");
    EXPECT_EQ(testing::agreement_after_relabel(model.assignments, truth, 2), 1.0);
  }
}

TEST(KMeans, InertiaNeverIncreasesAndMatchesOracle) {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Dataset data = testing::random_dataset(rng, 60, 4);
    const auto model = kmeans_fit_once(data, 5, 300, 0.0, seed);
    for (std::size_t i = 1; i < model.inertia_history.size(); ++i) {
      EXPECT_LE(model.inertia_history[i], model.inertia_history[i - 1] * (1 + 1e-12));
    }
    EXPECT_NEAR(model.inertia, oracle_inertia(data, model), 1e-9 * model.inertia);
  }
}

TEST(KMeans, AssignmentsAreNearestCentroids) {
  std::mt19937_64 rng(6);
  const Dataset data = testing::random_dataset(rng, 200, 6);
  KMeansConfig config;
  config.k = 7;
  config.restarts = 2;
  config.inits_per_run = 3;
  for (const auto& model : kmeans_fit(data, config)) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      EXPECT_EQ(model.assignments[i], testing::brute_nearest(model.centroids, data[i].vector));
      EXPECT_EQ(nearest_centroid(model, data[i].vector), model.assignments[i]);
    }
  }
}

TEST(KMeans, DeterministicForSeed) {
  std::mt19937_64 rng(7);
  const Dataset data = testing::random_dataset(rng, 80, 4);
  KMeansConfig config;
  config.k = 4;
  config.rng_seed = 99;
  config.inits_per_run = 4;
  const auto a = kmeans_fit(data, config);
  const auto b = kmeans_fit(data, config);
  ASSERT_EQ(a.size(), config.restarts);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].centroids, b[i].centroids);
    EXPECT_EQ(a[i].assignments, b[i].assignments);
    EXPECT_EQ(a[i].inertia, b[i].inertia);
  }
}

TEST(KMeans, SingleInitRestartEqualsSingleFit) {
  std::mt19937_64 rng(8);
  const Dataset data = testing::random_dataset(rng, 50, 3);
  KMeansConfig config;
  config.k = 3;
  config.restarts = 1;
  config.inits_per_run = 1;
  config.rng_seed = 42;
  const auto models = kmeans_fit(data, config);
  const auto once = kmeans_fit_once(data, 3, config.max_iterations, config.tolerance, restart_seed(42, 0));
  EXPECT_EQ(models[0].centroids, once.centroids);
  EXPECT_EQ(models[0].inertia_history, once.inertia_history);
}

TEST(KMeans, MoreInitsNeverWorse) {
  std::mt19937_64 rng(9);
  const Dataset data = testing::random_dataset(rng, 100, 2);
  KMeansConfig one, many;
  one.k = many.k = 6;
  one.inits_per_run = 1;
  many.inits_per_run = 10;
  const auto a = kmeans_fit(data, one), b = kmeans_fit(data, many);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE(b[i].inertia, a[i].inertia);
}

TEST(KMeans, SelectBestByInertia) {
  std::vector<KMeansModel> models(3);
  models[0].inertia = 3.2;
  models[1].inertia = 1.1;
  models[2].inertia = 2.0;
  EXPECT_EQ(&select_best_by_inertia(models), &models[1]);
  models[2].inertia = 1.1;
  EXPECT_EQ(&select_best_by_inertia(models), &models[1]);
  EXPECT_EQ(code_of([] { select_best_by_inertia({}); }), ErrorCode::EmptyList);
}

TEST(KMeans, TooFewRecords) {
  std::mt19937_64 rng(10);
  const Dataset data = testing::random_dataset(rng, 3, 2);
  KMeansConfig config;
  config.k = 4;
  EXPECT_EQ(code_of([&] { kmeans_fit(data, config); }), ErrorCode::TooFewRecords);
}

TEST(KMeans, EmptyClusterIsReseeded) {
  // Duplicated points force empty clusters during Lloyd iterations.
  std::vector<EmbeddingRecord> records;
  for (int i = 0; i < 20; ++i) records.push_back({"p" + std::to_string(i), {i < 15 ? 0.0 : 1.0}, {}});
  const Dataset data = validate_dataset(std::move(records), {});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto model = kmeans_fit_once(data, 2, 300, 1e-9, seed);
    EXPECT_EQ(model.inertia, 0.0) << seed;
  }
}

}  // namespace
}  // namespace subdisc
