#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "misconception/gibbs.hpp"
#include "test_support.hpp"

namespace mc = misconception;
using namespace test_support;

namespace {

mc::Mat scalar(double v) { return mc::Mat::Constant(1, 1, v); }

mc::Mat row_theta(std::initializer_list<double> values) {
  mc::Mat theta(1, static_cast<Eigen::Index>(values.size()));
  int k = 0;
  for (double v : values) theta(0, k++) = v;
  return theta;
}

// Pinned K = 2, D = 1 instance used by several step-a tests.
struct PinnedPair {
  double f = 1.3, gamma = 0.2, theta1 = 0.9, theta2 = 0.6, sigma2 = 0.5;
  double c = -0.3, d = 0.1;  // eta = -0.2 for both components
  mc::Layout layout = single_cell(mc::Vec::Constant(1, 1.3), 1);

  mc::LatentState state() const {
    auto s = pinned_state(layout, row_theta({theta1, theta2}), scalar(sigma2), c, d);
    s.gamma(0, 0) = gamma;
    return s;
  }

  // Closed form odds for P_2 given P_1 = 1.
  double odds_second_given_first() const {
    const double eta = c + d;
    const double gauss = normal_pdf(f, gamma + theta1 + theta2, sigma2) / normal_pdf(f, gamma + theta1, sigma2);
    return gauss * normal_cdf(eta) / (1.0 - normal_cdf(eta));
  }

  // Posterior over the three admissible rows {10, 01, 11}.
  std::vector<double> row_posterior() const {
    const double eta = c + d;
    const double on = normal_cdf(eta), off = 1.0 - on;
    const double w10 = normal_pdf(f, gamma + theta1, sigma2) * on * off;
    const double w01 = normal_pdf(f, gamma + theta2, sigma2) * off * on;
    const double w11 = normal_pdf(f, gamma + theta1 + theta2, sigma2) * on * on;
    const double z = w10 + w01 + w11;
    return {w10 / z, w01 / z, w11 / z};
  }
};

TEST(SampleP, NegativeLabelForcesAllZero) {
  auto layout = single_cell(mc::Vec::Constant(1, 5.0), 0);
  auto s = pinned_state(layout, row_theta({5.0, 5.0}), scalar(0.1), 10.0, 10.0);
  s.P.setOnes();  // even from an inconsistent start
  mc::Rng rng(1);
  mc::sample_P(s, layout, mc::Hyperparams::defaults(1, 2), rng);
  EXPECT_EQ(s.P.sum(), 0);
}

TEST(SampleP, SingleComponentPositiveLabelIsDeterministic) {
  auto layout = single_cell(mc::Vec::Constant(1, -3.0), 1);
  auto s = pinned_state(layout, row_theta({4.0}), scalar(0.1), -10.0, -10.0);
  mc::Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    mc::sample_P(s, layout, mc::Hyperparams::defaults(1, 1), rng);
    ASSERT_EQ(s.P(0, 0), 1);
  }
}

TEST(SampleP, LogOddsMatchesClosedForm) {
  PinnedPair pp;
  auto s = pp.state();
  s.P << 1, 0;
  const mc::Mat precision = scalar(1.0 / pp.sigma2);
  EXPECT_NEAR(mc::log_indicator_odds(s, pp.layout, 0, 1, precision), std::log(pp.odds_second_given_first()), 1e-12);
  s.P << 1, 1;  // current value of the updated entry must not matter
  EXPECT_NEAR(mc::log_indicator_odds(s, pp.layout, 0, 1, precision), std::log(pp.odds_second_given_first()), 1e-12);
}

TEST(SampleP, LogOddsMultivariate) {
  mc::Vec f(2);
  f << 0.4, -1.1;
  auto layout = single_cell(f, 1);
  mc::Mat theta(2, 2);
  theta << 0.5, -0.7, 1.2, 0.3;
  mc::Mat cov(2, 2);
  cov << 0.8, 0.2, 0.2, 0.5;
  auto s = pinned_state(layout, theta, cov, 0.4, -0.9);
  s.gamma.col(0) << 0.1, 0.2;
  s.P << 0, 1;
  const double eta = 0.4 - 0.9;
  const double expected = std::log(mvn_pdf(f, s.gamma.col(0) + theta.col(0) + theta.col(1), cov) /
                                   mvn_pdf(f, s.gamma.col(0) + theta.col(1), cov) *
                                   normal_cdf(eta) / normal_cdf(-eta));
  EXPECT_NEAR(mc::log_indicator_odds(s, layout, 0, 0, mc::spd_inverse(cov)), expected, 1e-10);
}

TEST(SampleP, SingleSiteFrequencyMatchesOdds) {
  PinnedPair pp;
  auto s = pp.state();
  const mc::Mat precision = scalar(1.0 / pp.sigma2);
  const double r = pp.odds_second_given_first();
  const double p = r / (r + 1.0);
  mc::Rng rng(3);
  const int draws = 100000;
  int on = 0;
  for (int t = 0; t < draws; ++t) {
    s.P << 1, 0;
    mc::sample_indicator(s, pp.layout, 0, 1, precision, rng);
    on += s.P(0, 1);
  }
  const double se = std::sqrt(p * (1.0 - p) / draws);
  EXPECT_LT(std::abs(static_cast<double>(on) / draws - p), 3.0 * se);
}

TEST(SampleP, SweepsVisitRowsWithPosteriorFrequencies) {
  PinnedPair pp;
  auto s = pp.state();
  s.P << 1, 1;
  const auto target = pp.row_posterior();
  const auto hp = mc::Hyperparams::defaults(1, 2);
  mc::Rng rng(4);
  const int batches = 100, per_batch = 1000;
  std::vector<double> batch_means;
  for (int b = 0; b < batches; ++b) {
    int hits = 0;
    for (int t = 0; t < per_batch; ++t) {
      mc::sample_P(s, pp.layout, hp, rng);
      ASSERT_TRUE(mc::indicators_consistent(s, pp.layout));
      hits += s.P(0, 1);  // P_2 on: rows 01 and 11
    }
    batch_means.push_back(static_cast<double>(hits) / per_batch);
  }
  double mean = 0.0, var = 0.0;
  for (double m : batch_means) mean += m / batches;
  for (double m : batch_means) var += (m - mean) * (m - mean) / (batches - 1);
  const double se = std::sqrt(var / batches);
  EXPECT_LT(std::abs(mean - (target[1] + target[2])), 3.0 * se) << "se " << se;
}

// Moments of repeated draws from a Gaussian conditional.
struct Moments {
  double mean = 0.0, var = 0.0;
};

template <class Draw>
Moments moments(int draws, Draw draw) {
  double sum = 0.0, sq = 0.0;
  for (int t = 0; t < draws; ++t) {
    const double x = draw();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / draws;
  return {mean, sq / draws - mean * mean};
}

void expect_normal_moments(const Moments& m, double mean, double var, int draws) {
  EXPECT_LT(std::abs(m.mean - mean), 4.0 * std::sqrt(var / draws)) << "mean " << m.mean << " vs " << mean;
  EXPECT_NEAR(m.var, var, 0.03 * var);
}

TEST(SampleGamma, QuestionWithoutResponsesDrawsFromPrior) {
  mc::ObservedData data{1, 2, 1, {}, {}};
  data.features[{0, 0}] = mc::Vec::Constant(1, 3.0);
  data.labels[{0, 0}] = 0;
  const auto layout = mc::make_layout(data);
  auto s = pinned_state(layout, row_theta({1.0}), scalar(1.0), 0.0, 0.0);
  auto hp = mc::Hyperparams::defaults(1, 1);
  hp.mu_gamma(0) = 1.5;
  hp.Sigma_gamma(0, 0) = 2.0;
  mc::Rng rng(5);
  const int draws = 100000;
  const auto m = moments(draws, [&] {
    mc::sample_gamma(s, layout, hp, rng);
    return s.gamma(0, 1);
  });
  expect_normal_moments(m, 1.5, 2.0, draws);
}

TEST(SampleGamma, ScalarConjugatePosterior) {
  const double f = 2.5, theta = 0.7, sigma2 = 0.4;
  auto layout = single_cell(mc::Vec::Constant(1, f), 1);
  auto s = pinned_state(layout, row_theta({theta}), scalar(sigma2), 0.0, 0.0);
  s.P(0, 0) = 1;
  const auto hp = mc::Hyperparams::defaults(1, 1);  // prior N(0, 1)
  const double post_var = 1.0 / (1.0 + 1.0 / sigma2);
  const double post_mean = (f - theta) / sigma2 * post_var;
  mc::Rng rng(6);
  const int draws = 100000;
  const auto m = moments(draws, [&] {
    mc::sample_gamma(s, layout, hp, rng);
    return s.gamma(0, 0);
  });
  expect_normal_moments(m, post_mean, post_var, draws);
}

TEST(SampleGamma, FlatPriorLimitIsResidualMean) {
  mc::ObservedData data{4, 1, 2, {}, {}};
  mc::Vec residual_sum = mc::Vec::Zero(2);
  for (int j = 0; j < 4; ++j) {
    mc::Vec f(2);
    f << 0.3 * j, 1.0 - 0.5 * j;
    data.features[{0, j}] = f;
    data.labels[{0, j}] = 0;
    residual_sum += f;
  }
  const auto layout = mc::make_layout(data);
  auto s = pinned_state(layout, mc::Mat::Zero(2, 1), mc::Mat::Identity(2, 2) * 0.01, 0.0, 0.0);
  auto hp = mc::Hyperparams::defaults(2, 1);
  hp.Sigma_gamma = mc::Mat::Identity(2, 2) * 1e6;
  mc::Rng rng(7);
  mc::Vec sum = mc::Vec::Zero(2);
  const int draws = 20000;
  for (int t = 0; t < draws; ++t) {
    mc::sample_gamma(s, layout, hp, rng);
    sum += s.gamma.col(0);
  }
  EXPECT_LT((sum / draws - residual_sum / 4.0).cwiseAbs().maxCoeff(), 2e-3);
}

TEST(SampleTheta, InactiveComponentDrawsFromPrior) {
  auto layout = single_cell(mc::Vec::Constant(1, 4.0), 1);
  auto s = pinned_state(layout, row_theta({1.0, 1.0}), scalar(1.0), 0.0, 0.0);
  s.P << 1, 0;
  auto hp = mc::Hyperparams::defaults(1, 2);
  hp.mu_theta(0) = -0.5;
  hp.Sigma_theta(0, 0) = 3.0;
  mc::Rng rng(8);
  const int draws = 100000;
  const auto m = moments(draws, [&] {
    mc::sample_theta(s, layout, hp, rng);
    return s.theta(0, 1);
  });
  expect_normal_moments(m, -0.5, 3.0, draws);
}

TEST(SampleTheta, ScalarConjugatePosterior) {
  const double f = 2.5, gamma = 0.4, other = 0.6, sigma2 = 0.3;
  auto layout = single_cell(mc::Vec::Constant(1, f), 1);
  auto s = pinned_state(layout, row_theta({0.0, other}), scalar(sigma2), 0.0, 0.0);
  s.gamma(0, 0) = gamma;
  s.P << 1, 1;
  auto hp = mc::Hyperparams::defaults(1, 2);
  const double post_var = 1.0 / (1.0 + 1.0 / sigma2);
  const double post_mean = (f - gamma - other) / sigma2 * post_var;
  mc::Rng rng(9);
  const int draws = 100000;
  const auto m = moments(draws, [&] {
    s.theta(0, 1) = other;  // hold the other component fixed
    mc::sample_theta(s, layout, hp, rng);
    return s.theta(0, 0);
  });
  expect_normal_moments(m, post_mean, post_var, draws);
}

TEST(SampleTheta, DisjointActiveSetsDecouple) {
  mc::ObservedData data{2, 2, 2, {}, {}};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      data.features[{i, j}] = mc::Vec::Constant(2, 1.0 + i - 0.5 * j);
      data.labels[{i, j}] = 1;
    }
  }
  const auto layout = mc::make_layout(data);
  auto base = pinned_state(layout, mc::Mat::Zero(2, 2), mc::Mat::Identity(2, 2) * 0.5, 0.0, 0.0);
  base.P << 1, 0, 1, 0, 0, 1, 0, 1;  // first two cells use k=0, last two k=1
  const auto hp = mc::Hyperparams::defaults(2, 2);

  auto a = base;
  a.theta << 5.0, -3.0, 2.0, 7.0;
  auto b = base;
  b.theta << -1.0, 0.5, 4.0, 1.0;
  mc::Rng rng_a(10), rng_b(10);
  mc::sample_theta(a, layout, hp, rng_a);
  mc::sample_theta(b, layout, hp, rng_b);
  EXPECT_EQ(a.theta, b.theta);
}

TEST(SampleSigmaF, ZeroResidualsGivePriorUpdateOnly) {
  const double f = 1.7, gamma = 1.2, theta = 0.5;
  auto layout = single_cell(mc::Vec::Constant(1, f), 1);
  auto s = pinned_state(layout, row_theta({theta}), scalar(1.0), 0.0, 0.0);
  s.gamma(0, 0) = gamma;
  s.P(0, 0) = 1;
  const auto hp = mc::Hyperparams::defaults(1, 1);
  EXPECT_NEAR(mc::residual_scatter(s, layout)(0, 0), 0.0, 1e-20);
  mc::Rng rng(11);
  const int draws = 100000;
  double sum = 0.0;
  for (int t = 0; t < draws; ++t) {
    mc::sample_Sigma_F(s, layout, hp, rng);
    sum += s.Sigma_F(0, 0);
  }
  // IW(h_F + 1, 1) in one dimension: mean 1 / (h_F + 1 - 2)
  EXPECT_NEAR(sum / draws, 1.0 / 9.0, 0.05 / 9.0);
}

TEST(SampleSigmaF, ScalarUpdateMean) {
  mc::ObservedData data{6, 1, 1, {}, {}};
  for (int j = 0; j < 6; ++j) {
    data.features[{0, j}] = mc::Vec::Constant(1, 0.8 * j - 2.0);
    data.labels[{0, j}] = 0;
  }
  const auto layout = mc::make_layout(data);
  auto s = pinned_state(layout, row_theta({0.0}), scalar(1.0), 0.0, 0.0);
  const auto hp = mc::Hyperparams::defaults(1, 1);
  double scatter = 0.0;
  for (int j = 0; j < 6; ++j) scatter += std::pow(0.8 * j - 2.0, 2);
  const double expected = (1.0 + scatter) / (hp.h_F + 6 - 2);
  mc::Rng rng(12);
  const int draws = 100000;
  double sum = 0.0;
  for (int t = 0; t < draws; ++t) {
    mc::sample_Sigma_F(s, layout, hp, rng);
    sum += s.Sigma_F(0, 0);
  }
  EXPECT_NEAR(sum / draws, expected, 0.05 * expected);
}

TEST(SampleSigmaF, ConcentratesOnResidualCovariance) {
  mc::Rng gen(13);
  mc::ObservedData data{2000, 1, 2, {}, {}};
  for (int j = 0; j < 2000; ++j) {
    data.features[{0, j}] = mc::sample_mvn(mc::Vec::Zero(2), mc::Mat::Identity(2, 2) * 4.0, gen);
    data.labels[{0, j}] = 0;
  }
  const auto layout = mc::make_layout(data);
  auto s = pinned_state(layout, mc::Mat::Zero(2, 1), mc::Mat::Identity(2, 2), 0.0, 0.0);
  const auto hp = mc::Hyperparams::defaults(2, 1);
  mc::Rng rng(14);
  mc::Mat sum = mc::Mat::Zero(2, 2);
  for (int t = 0; t < 200; ++t) {
    mc::sample_Sigma_F(s, layout, hp, rng);
    sum += s.Sigma_F;
  }
  const mc::Mat mean = sum / 200.0;
  EXPECT_NEAR(mean(0, 0), 4.0, 0.4);
  EXPECT_NEAR(mean(1, 1), 4.0, 0.4);
  EXPECT_NEAR(mean(0, 1), 0.0, 0.4);
}

TEST(SampleZ, SignFollowsIndicator) {
  mc::ObservedData data{3, 2, 1, {}, {}};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) {
      data.features[{i, j}] = mc::Vec::Zero(1);
      data.labels[{i, j}] = 1;
    }
  }
  const auto layout = mc::make_layout(data);
  auto s = pinned_state(layout, row_theta({0.0, 0.0}), scalar(1.0), 2.0, -6.0);
  s.P << 1, 0, 0, 1, 1, 1, 1, 0, 0, 1, 1, 1;
  mc::Rng rng(15);
  mc::sample_z(s, layout, rng);
  for (int n = 0; n < layout.size(); ++n) {
    for (int k = 0; k < 2; ++k) EXPECT_EQ(s.z(n, k) > 0.0, s.P(n, k) == 1);
  }
}

TEST(SampleC, AbsentStudentDrawsFromPrior) {
  mc::ObservedData data{2, 1, 1, {}, {}};
  data.features[{0, 0}] = mc::Vec::Zero(1);
  data.labels[{0, 0}] = 1;
  const auto layout = mc::make_layout(data);
  auto s = pinned_state(layout, row_theta({0.0}), scalar(1.0), 0.0, 0.0);
  s.z(0, 0) = 3.0;
  auto hp = mc::Hyperparams::defaults(1, 1);
  hp.mu_c = 0.7;
  hp.sigma_c2 = 2.0;
  mc::Rng rng(16);
  const int draws = 100000;
  const auto m = moments(draws, [&] {
    mc::sample_c(s, layout, hp, rng);
    return s.c(0, 1);
  });
  expect_normal_moments(m, 0.7, 2.0, draws);
}

TEST(SampleC, ScalarConjugateWithPinnedZ) {
  auto layout = single_cell(mc::Vec::Zero(1), 1);
  auto s = pinned_state(layout, row_theta({0.0}), scalar(1.0), 0.0, 0.5);
  s.z(0, 0) = 2.0;
  const auto hp = mc::Hyperparams::defaults(1, 1);
  mc::Rng rng(17);
  const int draws = 100000;
  const auto m = moments(draws, [&] {
    mc::sample_c(s, layout, hp, rng);
    return s.c(0, 0);
  });
  expect_normal_moments(m, 1.5 / 2.0, 0.5, draws);
}

TEST(SampleD, ScalarConjugateWithPinnedZ) {
  auto layout = single_cell(mc::Vec::Zero(1), 1);
  auto s = pinned_state(layout, row_theta({0.0}), scalar(1.0), -0.4, 0.0);
  s.z(0, 0) = 1.0;
  auto hp = mc::Hyperparams::defaults(1, 1);
  hp.mu_d = 1.0;
  hp.sigma_d2 = 0.5;
  // precision 1/0.5 + 1 = 3; mean (1/0.5 + (1 + 0.4)) / 3
  mc::Rng rng(18);
  const int draws = 100000;
  const auto m = moments(draws, [&] {
    mc::sample_d(s, layout, hp, rng);
    return s.d(0, 0);
  });
  expect_normal_moments(m, 3.4 / 3.0, 1.0 / 3.0, draws);
}

TEST(SampleCD, ManyActiveCellsPushTendencyUp) {
  mc::ObservedData data{1, 30, 1, {}, {}};
  for (int i = 0; i < 30; ++i) {
    data.features[{i, 0}] = mc::Vec::Zero(1);
    data.labels[{i, 0}] = 1;
  }
  const auto layout = mc::make_layout(data);
  auto s = pinned_state(layout, row_theta({0.0}), scalar(1.0), 0.0, 0.0);
  s.P.setOnes();
  const auto hp = mc::Hyperparams::defaults(1, 1);
  mc::Rng rng(19);
  double sum = 0.0;
  for (int t = 0; t < 2000; ++t) {
    mc::sample_c_d(s, layout, hp, rng);
    sum += s.c(0, 0);
  }
  EXPECT_GT(sum / 2000.0, 0.3);
}

TEST(LogAugLikelihood, SingleCellHandComputation) {
  const double f = 0.9, gamma = -0.2, theta1 = 0.8, theta2 = -1.5, sigma2 = 0.7;
  auto layout = single_cell(mc::Vec::Constant(1, f), 1);
  auto s = pinned_state(layout, row_theta({theta1, theta2}), scalar(sigma2), 0.3, -0.1);
  s.gamma(0, 0) = gamma;
  s.c(1, 0) = -1.2;
  s.P << 1, 0;
  const double expected = std::log(normal_pdf(f, gamma + theta1, sigma2)) + std::log(normal_cdf(0.3 - 0.1)) +
                          std::log(normal_cdf(-(-1.2 - 0.1)));
  EXPECT_NEAR(mc::log_aug_likelihood(s, layout), expected, 1e-10);
}

TEST(LogAugLikelihood, DecreasesWhenScalingCovarianceAtZeroResidual) {
  mc::Vec f(2);
  f << 0.0, 0.0;
  auto layout = single_cell(f, 0);
  mc::Mat base(2, 2);
  base << 1.0, 0.3, 0.3, 0.8;
  double previous = std::numeric_limits<double>::infinity();
  for (double t = 1.0; t <= 10.0; t += 0.5) {
    auto s = pinned_state(layout, mc::Mat::Zero(2, 2), base * t, 0.0, 0.0);
    const double ll = mc::log_aug_likelihood(s, layout);
    EXPECT_LT(ll, previous);
    previous = ll;
  }
}

TEST(LogAugLikelihood, PerfectFitApproachesGaussianNormalizer) {
  const double sigma2 = 0.25;
  auto layout = single_cell(mc::Vec::Constant(1, 1.0), 1);
  auto s = pinned_state(layout, row_theta({1.0}), scalar(sigma2), 20.0, 20.0);
  s.P(0, 0) = 1;
  EXPECT_NEAR(mc::log_aug_likelihood(s, layout), -0.5 * std::log(2.0 * std::numbers::pi * sigma2), 1e-12);
}

mc::ObservedData random_instance(std::uint64_t seed, int N, int Q, int D) {
  mc::Rng rng(seed);
  mc::ObservedData data{N, Q, D, {}, {}};
  for (int i = 0; i < Q; ++i) {
    for (int j = 0; j < N; ++j) {
      if ((i + 2 * j) % 3 == 0 && !(i == 0 && j == 0)) continue;
      data.features[{i, j}] = mc::sample_mvn(mc::Vec::Zero(D), mc::Mat::Identity(D, D), rng);
      data.labels[{i, j}] = static_cast<int>(rng() % 2);
    }
  }
  return data;
}

TEST(Sweep, IndicatorConsistencyAfterEveryStep) {
  const auto data = random_instance(20, 6, 5, 3);
  ASSERT_TRUE(mc::validate(data).empty());
  const auto layout = mc::make_layout(data);
  const auto hp = mc::Hyperparams::defaults(3, 3);
  mc::Rng rng(21);
  auto s = mc::init_state(layout, hp, rng);
  for (int t = 0; t < 50; ++t) {
    mc::sample_P(s, layout, hp, rng);
    ASSERT_TRUE(mc::indicators_consistent(s, layout));
    mc::sample_gamma(s, layout, hp, rng);
    mc::sample_theta(s, layout, hp, rng);
    mc::sample_Sigma_F(s, layout, hp, rng);
    ASSERT_TRUE(mc::is_positive_definite(s.Sigma_F));
    mc::sample_c_d(s, layout, hp, rng);
    ASSERT_TRUE(mc::indicators_consistent(s, layout));
    ASSERT_TRUE(std::isfinite(mc::log_aug_likelihood(s, layout)));
  }
}

TEST(RunChain, OneStoredSampleWhenTIsBurnInPlusOne) {
  auto hp = mc::Hyperparams::defaults(2, 2);
  hp.T = 11;
  hp.burn_in = 10;
  const auto result = mc::run_chain(tiny_data(), hp, 5);
  EXPECT_EQ(result.samples.size(), 1u);
  EXPECT_EQ(result.log_likelihoods.size(), 1u);
  EXPECT_EQ(result.trace.size(), 11u);
  EXPECT_EQ(result.reference_index, 0u);
  EXPECT_EQ(result.posterior.theta, result.samples[0].theta);
}

TEST(RunChain, SameSeedIsBitIdentical) {
  const auto data = random_instance(30, 5, 4, 2);
  auto hp = mc::Hyperparams::defaults(2, 2);
  hp.T = 60;
  hp.burn_in = 30;
  const auto a = mc::run_chain(data, hp, 77);
  const auto b = mc::run_chain(data, hp, 77);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.posterior.theta, b.posterior.theta);
  EXPECT_EQ(a.posterior.p_freq, b.posterior.p_freq);
  EXPECT_EQ(a.posterior.Sigma_F, b.posterior.Sigma_F);
  const auto c = mc::run_chain(data, hp, 78);
  EXPECT_NE(a.trace, c.trace);
}

TEST(RunChain, StoredSamplesAndPosteriorInvariants) {
  const auto data = random_instance(31, 6, 5, 2);
  auto hp = mc::Hyperparams::defaults(2, 3);
  hp.T = 80;
  hp.burn_in = 40;
  const auto result = mc::run_chain(data, hp, 3);
  const auto layout = mc::make_layout(data);
  ASSERT_EQ(result.samples.size(), 40u);
  for (double ll : result.log_likelihoods) EXPECT_TRUE(std::isfinite(ll));
  for (int n = 0; n < layout.size(); ++n) {
    for (int k = 0; k < 3; ++k) {
      const double freq = result.posterior.p_freq(n, k);
      EXPECT_GE(freq, 0.0);
      EXPECT_LE(freq, 1.0);
      if (layout.labels[n] == 0) EXPECT_EQ(freq, 0.0);
    }
  }
  for (const auto& sample : result.samples) EXPECT_TRUE(mc::indicators_consistent(sample, layout));
  // thin mode keeps the summary only
  const auto thin = mc::run_chain(data, hp, 3, {.store_samples = false});
  EXPECT_TRUE(thin.samples.empty());
  EXPECT_EQ(thin.posterior.theta, result.posterior.theta);
}

TEST(RunChain, RejectsInvalidData) {
  auto data = tiny_data();
  data.features[{0, 0}](0) = std::nan("");
  try {
    mc::run_chain(data, mc::Hyperparams::defaults(2, 2), 1);
    FAIL();
  } catch (const mc::Error& e) {
    EXPECT_EQ(e.kind(), mc::ErrorKind::kShapeMismatch);
  }
}

}  // namespace
