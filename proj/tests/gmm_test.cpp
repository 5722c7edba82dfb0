#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "subdisc/gmm.hpp"
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

/// log N(x; mean, cov) via LU inverse and determinant, independent of the
/// library's Cholesky path.
double oracle_log_normal(const Vector& x, const Vector& mean, const Vector& cov, CovarianceKind kind) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (kind == CovarianceKind::diagonal) {
        if (i == j) sigma(i, i) = cov[i];
      } else {
        sigma(i, j) = cov[i * n + j];
      }
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(sigma);
  Eigen::VectorXd diff(n);
  for (Eigen::Index i = 0; i < n; ++i) diff(i) = x[i] - mean[i];
  const double quad = diff.dot(lu.inverse() * diff);
  return -0.5 * (static_cast<double>(n) * std::log(2 * std::numbers::pi) + std::log(lu.determinant()) + quad);
}

double oracle_mean_log_likelihood(const GmmModel& model, const Dataset& data) {
  long double total = 0;
  for (const auto& r : data.records()) {
    long double p = 0;
    for (std::size_t c = 0; c < model.weights.size(); ++c) {
      p += model.weights[c] *
           std::exp(static_cast<long double>(
               oracle_log_normal(r.vector, model.means[c], model.covariances[c], model.covariance_kind)));
    }
    total += std::log(p);
  }
  return static_cast<double>(total / data.size());
}

TEST(Gmm, SingleComponentIsSampleMeanAndVariance) {
  std::mt19937_64 rng(1);
  const Dataset data = testing::random_dataset(rng, 300, 3, 2.0);
  GmmConfig config;
  config.components = 1;
  const auto model = gmm_fit(data, config);
  for (std::size_t d = 0; d < 3; ++d) {
    long double mean = 0, var = 0;
    for (const auto& r : data.records()) mean += r.vector[d];
    mean /= 300;
    for (const auto& r : data.records()) var += (r.vector[d] - mean) * (r.vector[d] - mean);
    var /= 300;
    EXPECT_NEAR(model.means[0][d], static_cast<double>(mean), 1e-9);
    EXPECT_NEAR(model.covariances[0][d], static_cast<double>(var), 1e-9);
  }
  EXPECT_EQ(model.weights[0], 1.0);
}

TEST(Gmm, SeparatesTwoBlobs) {
  const Dataset data = testing::two_blobs(2);
  for (auto kind : {CovarianceKind::diagonal, CovarianceKind::full}) {
    GmmConfig config;
    config.covariance_kind = kind;
    const auto model = gmm_fit(data, config);
    std::vector<std::size_t> truth;
    for (const auto& r : data.records()) truth.push_back(r.labels.at("blob") == "b");
    EXPECT_EQ(testing::agreement_after_relabel(hard_assignments(model), truth, 2), 1.0);
    EXPECT_NEAR(model.weights[0], 0.5, 1e-9);
  }
}

TEST(Gmm, LogLikelihoodMatchesIndependentDensity) {
  std::mt19937_64 rng(3);
  for (auto kind : {CovarianceKind::diagonal, CovarianceKind::full}) {
    const Dataset data = testing::random_dataset(rng, 150, 4);
    GmmConfig config;
    config.components = 3;
    config.covariance_kind = kind;
    const auto model = gmm_fit(data, config);
    EXPECT_NEAR(model.log_likelihood, oracle_mean_log_likelihood(model, data), 1e-9);
    EXPECT_NEAR(mean_log_likelihood(model, data), model.log_likelihood, 1e-12);
  }
}

TEST(Gmm, LogLikelihoodNeverDecreases) {
  std::mt19937_64 rng(4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset data = testing::random_dataset(rng, 120, 3);
    GmmConfig config;
    config.components = 4;
    config.rng_seed = seed;
    config.tolerance = 0.0;
    config.max_iterations = 50;
    const auto model = gmm_fit(data, config);
    const auto& h = model.log_likelihood_history;
    for (std::size_t i = 1; i < h.size(); ++i) EXPECT_GE(h[i], h[i - 1] - 1e-9) << "seed " << seed << " step " << i;
  }
}

TEST(Gmm, ResponsibilitiesArePosteriors) {
  std::mt19937_64 rng(5);
  const Dataset data = testing::random_dataset(rng, 80, 2);
  GmmConfig config;
  config.components = 3;
  const auto model = gmm_fit(data, config);
  double weight_sum = 0.0;
  for (double w : model.weights) weight_sum += w;
  EXPECT_NEAR(weight_sum, 1.0, 1e-12);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& row = model.responsibilities[i];
    double sum = 0.0;
    for (double p : row) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    const auto pred = gmm_predict(model, data[i].vector);
    for (std::size_t c = 0; c < row.size(); ++c) EXPECT_NEAR(pred.posterior[c], row[c], 1e-12);
  }
}

TEST(Gmm, SymmetricMidpointTiesToLowestIndex) {
  GmmModel model;
  model.weights = {0.5, 0.5};
  model.means = {{-1.0, 0.0}, {1.0, 0.0}};
  model.covariances = {{1.0, 1.0}, {1.0, 1.0}};
  const auto pred = gmm_predict(model, Vector{0.0, 0.0});
  EXPECT_EQ(pred.component, 0u);
  EXPECT_DOUBLE_EQ(pred.posterior[0], 0.5);
  EXPECT_DOUBLE_EQ(pred.posterior[1], 0.5);
}

TEST(Gmm, PosteriorAtAWellSeparatedMean) {
  GmmModel model;
  model.weights = {0.5, 0.5};
  model.means = {{0.0}, {10.0}};
  model.covariances = {{1.0}, {1.0}};
  const auto pred = gmm_predict(model, Vector{0.0});
  // posterior of component 1 is 1 / (1 + exp(50))
  EXPECT_NEAR(pred.posterior[1], 1.0 / (1.0 + std::exp(50.0)), 1e-30);
  EXPECT_GT(pred.posterior[0], 0.99);
}

TEST(Gmm, CovarianceFloorHoldsOnDegenerateAxis) {
  std::mt19937_64 rng(6);
  std::vector<EmbeddingRecord> records;
  for (int i = 0; i < 40; ++i) records.push_back({"p" + std::to_string(i), {testing::random_vector(rng, 1)[0], 3.0}, {}});
  const Dataset data = validate_dataset(std::move(records), {});
  GmmConfig config;
  config.components = 2;
  config.covariance_floor = 1e-4;
  const auto diag = gmm_fit(data, config);
  for (const auto& cov : diag.covariances) EXPECT_GE(cov[1], 1e-4);
  config.covariance_kind = CovarianceKind::full;
  const auto full = gmm_fit(data, config);
  for (const auto& cov : full.covariances) EXPECT_GE(cov[3], 1e-4);
  EXPECT_TRUE(std::isfinite(full.log_likelihood));
}

TEST(Gmm, InitialisationAgreesWithKMeansOnSeparatedData) {
  const Dataset data = testing::two_blobs(7, 4, 30, 0.2);
  GmmConfig config;
  config.rng_seed = 5;
  const auto model = gmm_fit(data, config);
  const auto km = kmeans_fit_once(data, 2, 300, 1e-6, 5);
  EXPECT_EQ(testing::agreement_after_relabel(hard_assignments(model), km.assignments, 2), 1.0);
}

TEST(Gmm, Errors) {
  std::mt19937_64 rng(8);
  const Dataset data = testing::random_dataset(rng, 3, 2);
  GmmConfig config;
  config.components = 4;
  EXPECT_EQ(code_of([&] { gmm_fit(data, config); }), ErrorCode::TooFewRecords);
  config.components = 2;
  config.covariance_floor = 0.0;
  EXPECT_EQ(code_of([&] { gmm_fit(data, config); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(parse_covariance_kind("full"), CovarianceKind::full);
}

TEST(Gmm, Deterministic) {
  std::mt19937_64 rng(9);
  const Dataset data = testing::random_dataset(rng, 60, 3);
  GmmConfig config;
  config.components = 3;
  config.rng_seed = 11;
  const auto a = gmm_fit(data, config), b = gmm_fit(data, config);
  EXPECT_EQ(a.means, b.means);
  EXPECT_EQ(a.log_likelihood_history, b.log_likelihood_history);
}

}  // namespace
}  // namespace subdisc
