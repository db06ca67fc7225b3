#pragma once

// Gibbs sampler for the latent misconception model. One sweep updates, in
// order: the indicators P, the correct-response signatures gamma, the
// misconception signatures theta, the feature covariance Sigma_F, and the
// tendency / confusion parameters c and d via probit augmentation.

#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "misconception/align.hpp"
#include "misconception/math.hpp"
#include "misconception/model.hpp"

namespace misconception {

/// Maximum K for which the 2^K predictive enumeration is allowed.
inline constexpr int kMaxEnumerationK = 20;

struct SweepStats {
  int iteration = 0;
  double log_aug_likelihood = 0.0;
  int num_active = 0;
};

/// gamma_i + sum_k P_nk theta_k for cell n.
inline Vec cell_mean(const LatentState& s, const Layout& layout, int n) {
  return s.gamma.col(layout.cells[n].question) + s.theta * s.P.row(n).transpose().cast<double>();
}

/// Log of the step-a odds for switching P_nk on versus off, holding every
/// other indicator of the row at its current value.
inline double log_indicator_odds(const LatentState& s, const Layout& layout, int n, int k,
                                 const Mat& precision) {
  const Cell& cell = layout.cells[n];
  Vec base = layout.features.col(n) - cell_mean(s, layout, n);
  if (s.P(n, k) == 1) base += s.theta.col(k);  // residual with P_nk = 0
  const Vec weighted = precision * s.theta.col(k);
  const double log_gauss = weighted.dot(base) - 0.5 * weighted.dot(s.theta.col(k));
  const double eta = s.c(k, cell.student) + s.d(cell.question, k);
  return log_gauss + log_probit(eta) - log_probit(-eta);
}

/// Single-site update of P_nk.
template <class Engine>
void sample_indicator(LatentState& s, const Layout& layout, int n, int k, const Mat& precision,
                      Engine& rng) {
  if (layout.labels[n] == 0) {
    s.P(n, k) = 0;
    return;
  }
  const int others = s.P.row(n).sum() - s.P(n, k);
  if (others == 0) {
    s.P(n, k) = 1;
    return;
  }
  const double p_on = logistic(log_indicator_odds(s, layout, n, k, precision));
  s.P(n, k) = uniform_open(rng) < p_on ? 1 : 0;
}

template <class Engine>
void sample_P(LatentState& s, const Layout& layout, const Hyperparams&, Engine& rng) {
  const Mat precision = spd_inverse(s.Sigma_F);
  for (int n = 0; n < layout.size(); ++n) {
    for (int k = 0; k < s.K(); ++k) sample_indicator(s, layout, n, k, precision, rng);
  }
}

template <class Engine>
void sample_gamma(LatentState& s, const Layout& layout, const Hyperparams& hp, Engine& rng) {
  const Mat noise_precision = spd_inverse(s.Sigma_F);
  const Mat prior_precision = spd_inverse(hp.Sigma_gamma);
  const Vec prior_term = prior_precision * hp.mu_gamma;
  for (int i = 0; i < layout.num_questions; ++i) {
    const auto& cells = layout.by_question[i];
    Vec residual_sum = Vec::Zero(layout.dim);
    for (int n : cells) {
      residual_sum += layout.features.col(n) - s.theta * s.P.row(n).transpose().cast<double>();
    }
    const Mat cov = spd_inverse(prior_precision + static_cast<double>(cells.size()) * noise_precision);
    const Vec mean = cov * (prior_term + noise_precision * residual_sum);
    s.gamma.col(i) = sample_mvn(mean, cov, rng);
  }
}

template <class Engine>
void sample_theta(LatentState& s, const Layout& layout, const Hyperparams& hp, Engine& rng) {
  const Mat noise_precision = spd_inverse(s.Sigma_F);
  const Mat prior_precision = spd_inverse(hp.Sigma_theta);
  const Vec prior_term = prior_precision * hp.mu_theta;
  for (int k = 0; k < s.K(); ++k) {
    Vec residual_sum = Vec::Zero(layout.dim);
    int active = 0;
    for (int n = 0; n < layout.size(); ++n) {
      if (s.P(n, k) != 1) continue;
      // f - gamma_i - sum_{k' != k} P theta_k'
      residual_sum += layout.features.col(n) - cell_mean(s, layout, n) + s.theta.col(k);
      ++active;
    }
    const Mat cov = spd_inverse(prior_precision + static_cast<double>(active) * noise_precision);
    const Vec mean = cov * (prior_term + noise_precision * residual_sum);
    s.theta.col(k) = sample_mvn(mean, cov, rng);
  }
}

/// Sum over cells of residual outer products.
inline Mat residual_scatter(const LatentState& s, const Layout& layout) {
  Mat scatter = Mat::Zero(layout.dim, layout.dim);
  for (int n = 0; n < layout.size(); ++n) {
    const Vec e = layout.features.col(n) - cell_mean(s, layout, n);
    scatter.noalias() += e * e.transpose();
  }
  return scatter;
}

template <class Engine>
void sample_Sigma_F(LatentState& s, const Layout& layout, const Hyperparams& hp, Engine& rng) {
  const Mat scatter = residual_scatter(s, layout);
  s.Sigma_F = sample_inv_wishart(hp.h_F + layout.size(), hp.V_F + scatter, rng);
}

/// Auxiliary probit variables: z_nk ~ N(c_kj + d_ik, 1) truncated to the
/// side given by P_nk.
template <class Engine>
void sample_z(LatentState& s, const Layout& layout, Engine& rng) {
  const int K = s.K();
  s.z.resize(layout.size(), K);
  for (int n = 0; n < layout.size(); ++n) {
    const Cell& cell = layout.cells[n];
    for (int k = 0; k < K; ++k) {
      const double eta = s.c(k, cell.student) + s.d(cell.question, k);
      s.z(n, k) = sample_truncnorm(eta, s.P(n, k) == 1 ? TruncSide::kPositive : TruncSide::kNegative, rng);
    }
  }
}

template <class Engine>
void sample_c(LatentState& s, const Layout& layout, const Hyperparams& hp, Engine& rng) {
  for (int k = 0; k < s.K(); ++k) {
    for (int j = 0; j < layout.num_students; ++j) {
      const auto& cells = layout.by_student[j];
      double sum = 0.0;
      for (int n : cells) sum += s.z(n, k) - s.d(layout.cells[n].question, k);
      const double var = 1.0 / (1.0 / hp.sigma_c2 + static_cast<double>(cells.size()));
      const double mean = var * (hp.mu_c / hp.sigma_c2 + sum);
      s.c(k, j) = mean + std::sqrt(var) * standard_normal(rng);
    }
  }
}

template <class Engine>
void sample_d(LatentState& s, const Layout& layout, const Hyperparams& hp, Engine& rng) {
  for (int i = 0; i < layout.num_questions; ++i) {
    const auto& cells = layout.by_question[i];
    for (int k = 0; k < s.K(); ++k) {
      double sum = 0.0;
      for (int n : cells) sum += s.z(n, k) - s.c(k, layout.cells[n].student);
      const double var = 1.0 / (1.0 / hp.sigma_d2 + static_cast<double>(cells.size()));
      const double mean = var * (hp.mu_d / hp.sigma_d2 + sum);
      s.d(i, k) = mean + std::sqrt(var) * standard_normal(rng);
    }
  }
}

/// Refreshes z, then draws every c_kj, then every d_ik using the new c.
template <class Engine>
void sample_c_d(LatentState& s, const Layout& layout, const Hyperparams& hp, Engine& rng) {
  sample_z(s, layout, rng);
  sample_c(s, layout, hp, rng);
  sample_d(s, layout, hp, rng);
}

/// log of the augmented data likelihood: Gaussian feature terms plus the
/// probit terms of every indicator.
inline double log_aug_likelihood(const LatentState& s, const Layout& layout) {
  const Mat lower = cholesky_lower(s.Sigma_F);
  const double log_det = 2.0 * lower.diagonal().array().log().sum();
  const double log_norm =
      -0.5 * (static_cast<double>(layout.dim) * std::log(2.0 * std::numbers::pi) + log_det);
  double total = 0.0;
  for (int n = 0; n < layout.size(); ++n) {
    const Vec e = layout.features.col(n) - cell_mean(s, layout, n);
    const Vec w = lower.triangularView<Eigen::Lower>().solve(e);
    total += log_norm - 0.5 * w.squaredNorm();
    const Cell& cell = layout.cells[n];
    for (int k = 0; k < s.K(); ++k) {
      const double eta = s.c(k, cell.student) + s.d(cell.question, k);
      total += log_probit((2.0 * s.P(n, k) - 1.0) * eta);
    }
  }
  return total;
}

template <class Engine>
SweepStats gibbs_sweep(LatentState& s, const Layout& layout, const Hyperparams& hp, Engine& rng) {
  sample_P(s, layout, hp, rng);
  sample_gamma(s, layout, hp, rng);
  sample_theta(s, layout, hp, rng);
  sample_Sigma_F(s, layout, hp, rng);
  sample_c_d(s, layout, hp, rng);
  SweepStats stats;
  stats.log_aug_likelihood = log_aug_likelihood(s, layout);
  stats.num_active = s.P.sum();
  return stats;
}

struct ChainOptions {
  /// Keep every aligned post-burn-in sample in the result. When false only
  /// the posterior summary and traces are returned.
  bool store_samples = true;
  AlignCost align_cost = AlignCost::kTheta;
};

struct ChainResult {
  std::uint64_t seed = 0;
  Hyperparams hyperparams;
  std::vector<LatentState> samples;     // aligned, post burn-in
  std::vector<double> log_likelihoods;  // one per stored iteration
  std::vector<double> trace;            // one per iteration, burn-in included
  std::size_t reference_index = 0;      // into log_likelihoods
  std::vector<Permutation> permutations;
  PosteriorSummary posterior;
};

/// Runs T sweeps from a prior draw, aligns the post-burn-in samples to the
/// one with the largest augmented likelihood and averages them.
inline ChainResult run_chain(const Layout& layout, const Hyperparams& hp, std::uint64_t seed,
                             const ChainOptions& options = {}) {
  check_hyperparams(hp, layout.dim);
  Rng rng(seed);
  ChainResult result;
  result.seed = seed;
  result.hyperparams = hp;
  result.trace.reserve(hp.T);

  std::vector<LatentState> stored;
  stored.reserve(hp.T - hp.burn_in);
  LatentState state = init_state(layout, hp, rng);
  for (int t = 0; t < hp.T; ++t) {
    SweepStats stats;
    try {
      stats = gibbs_sweep(state, layout, hp, rng);
    } catch (const Error& e) {
      throw Error(e.kind(), "iteration " + std::to_string(t) + ": " + e.what());
    }
    stats.iteration = t;
    result.trace.push_back(stats.log_aug_likelihood);
    if (t >= hp.burn_in) {
      stored.push_back(state);
      result.log_likelihoods.push_back(stats.log_aug_likelihood);
    }
  }

  result.reference_index = find_reference(result.log_likelihoods);
  const LatentState reference = stored[result.reference_index];
  for (LatentState& sample : stored) {
    Aligned aligned = align_sample(sample, reference, options.align_cost);
    sample = std::move(aligned.sample);
    result.permutations.push_back(std::move(aligned.permutation));
  }
  result.posterior = posterior_means(stored);
  if (options.store_samples) result.samples = std::move(stored);
  return result;
}

inline ChainResult run_chain(const ObservedData& data, const Hyperparams& hp, std::uint64_t seed,
                             const ChainOptions& options = {}) {
  const auto violations = validate(data, {.require_coverage = false});
  if (!violations.empty()) {
    throw Error(ErrorKind::kShapeMismatch, "invalid data: " + violations.front().message);
  }
  return run_chain(make_layout(data), hp, seed, options);
}

}  // namespace misconception
