#pragma once

// Forward simulation of the model: draws parameters from their priors,
// an observation set at a target density, indicators, labels and
// features. Used as ground truth for recovery and classification tests.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "misconception/align.hpp"
#include "misconception/gibbs.hpp"
#include "misconception/model.hpp"

namespace misconception {

struct SynthConfig {
  int num_students = 50;
  int num_questions = 40;
  int K = 2;
  int dim = 5;
  double sparsity = 0.3;
  double separation = 0.0;
  /// Minimum responses per student / question for an observation set to be
  /// accepted. Negative selects min(5, max(1, floor(sparsity * other / 2))).
  int min_per_student = -1;
  int min_per_question = -1;
  int max_attempts = 100;
};

struct GroundTruth {
  Mat gamma;
  Mat theta;
  Mat Sigma_F;
  Mat c;
  Mat d;
  std::vector<Cell> cells;  // sorted, same order as make_layout
  Eigen::MatrixXi P;
  std::vector<int> M;

  int K() const { return static_cast<int>(theta.cols()); }
};

struct SynthResult {
  ObservedData data;
  GroundTruth truth;
};

/// Uniformly rescales theta so that the smallest pairwise distance within
/// {0, theta_1, ..., theta_K} is at least separation.
inline void enforce_separation(Mat& theta, double separation) {
  if (separation <= 0.0) return;
  double min_dist = std::numeric_limits<double>::infinity();
  for (int k = 0; k < theta.cols(); ++k) {
    min_dist = std::min(min_dist, theta.col(k).norm());
    for (int m = k + 1; m < theta.cols(); ++m) {
      min_dist = std::min(min_dist, (theta.col(k) - theta.col(m)).norm());
    }
  }
  if (min_dist < separation && min_dist > 0.0) theta *= separation / min_dist;
}

/// P_nk ~ Bernoulli(Phi(c_kj + d_ik)) for every cell, ignoring labels.
template <class Engine>
void sample_prior_indicators(LatentState& s, const Layout& layout, Engine& rng) {
  for (int n = 0; n < layout.size(); ++n) {
    const Cell& cell = layout.cells[n];
    for (int k = 0; k < s.K(); ++k) {
      s.P(n, k) = uniform_open(rng) < probit(s.c(k, cell.student) + s.d(cell.question, k)) ? 1 : 0;
    }
  }
}

/// Parameters from their priors and indicators from the unconstrained
/// probit prior.
template <class Engine>
LatentState sample_prior_state(const Layout& layout, const Hyperparams& hp, Engine& rng) {
  LatentState s = init_state(layout, hp, rng);
  sample_prior_indicators(s, layout, rng);
  return s;
}

/// Redraws labels and features of every cell given the indicators and
/// parameters in state.
template <class Engine>
void regenerate_observations(const LatentState& state, Layout& layout, Engine& rng) {
  const Mat lower = cholesky_lower(state.Sigma_F);
  for (int n = 0; n < layout.size(); ++n) {
    layout.labels[n] = state.P.row(n).sum() > 0 ? 1 : 0;
    Vec noise(layout.dim);
    for (int d = 0; d < layout.dim; ++d) noise(d) = standard_normal(rng);
    layout.features.col(n) = cell_mean(state, layout, n) + lower * noise;
  }
}

template <class Engine>
SynthResult generate(const SynthConfig& config, Engine& rng) {
  auto invalid = [](const std::string& msg) { throw Error(ErrorKind::kInvalidConfig, msg); };
  if (config.num_students < 1 || config.num_questions < 1) invalid("N and Q must be positive");
  if (config.K < 1 || config.dim < 1) invalid("K and D must be positive");
  if (!(config.sparsity > 0.0 && config.sparsity <= 1.0)) invalid("sparsity must lie in (0, 1]");
  if (!(config.separation >= 0.0)) invalid("separation must be non-negative");

  const int N = config.num_students;
  const int Q = config.num_questions;
  const Hyperparams hp = Hyperparams::defaults(config.dim, config.K);

  const long total = static_cast<long>(N) * Q;
  const long count = std::clamp(std::lround(config.sparsity * static_cast<double>(total)), 1L, total);
  auto auto_min = [&](int other) {
    return std::min(5, std::max(1, static_cast<int>(std::floor(0.5 * config.sparsity * other))));
  };
  const int min_student = config.min_per_student >= 0 ? config.min_per_student : auto_min(Q);
  const int min_question = config.min_per_question >= 0 ? config.min_per_question : auto_min(N);

  std::vector<long> all(total);
  std::iota(all.begin(), all.end(), 0L);
  std::vector<Cell> cells;
  for (int attempt = 0;; ++attempt) {
    if (attempt >= config.max_attempts) {
      invalid("could not draw an observation set meeting the per-student/per-question minimum");
    }
    std::vector<long> chosen;
    chosen.reserve(count);
    std::sample(all.begin(), all.end(), std::back_inserter(chosen), count, rng);
    std::vector<int> per_student(N, 0), per_question(Q, 0);
    cells.clear();
    for (long idx : chosen) {
      const Cell cell{static_cast<int>(idx / N), static_cast<int>(idx % N)};
      ++per_question[cell.question];
      ++per_student[cell.student];
      cells.push_back(cell);
    }
    const bool viable =
        *std::min_element(per_student.begin(), per_student.end()) >= min_student &&
        *std::min_element(per_question.begin(), per_question.end()) >= min_question;
    if (viable) break;
  }
  std::sort(cells.begin(), cells.end());

  Layout layout;
  layout.num_students = N;
  layout.num_questions = Q;
  layout.dim = config.dim;
  layout.cells = cells;
  layout.features = Mat::Zero(config.dim, static_cast<Eigen::Index>(cells.size()));
  layout.labels.assign(cells.size(), 0);

  LatentState s = sample_prior_state(layout, hp, rng);
  enforce_separation(s.theta, config.separation);
  regenerate_observations(s, layout, rng);

  SynthResult out;
  out.truth = {s.gamma, s.theta, s.Sigma_F, s.c, s.d, cells, s.P, layout.labels};
  out.data.num_students = N;
  out.data.num_questions = Q;
  out.data.dim = config.dim;
  for (int n = 0; n < layout.size(); ++n) {
    out.data.features[cells[n]] = layout.features.col(n);
    out.data.labels[cells[n]] = layout.labels[n];
  }
  return out;
}

struct RecoveryReport {
  Permutation permutation;  // truth component k <-> posterior component mapping[k]
  std::vector<double> cosine;
  double mean_cosine = 0.0;
  double rmse_c = 0.0;
  double rmse_d = 0.0;
  double p_agreement = 0.0;      // over (cell, k) entries, posterior frequency rounded at 0.5
  double p_row_agreement = 0.0;  // cells whose whole indicator row matches
};

inline RecoveryReport recovery_score(const GroundTruth& truth, const PosteriorSummary& posterior) {
  const int K = truth.K();
  if (posterior.K() != K || posterior.theta.rows() != truth.theta.rows() ||
      posterior.c.cols() != truth.c.cols() || posterior.d.rows() != truth.d.rows() ||
      posterior.p_freq.rows() != static_cast<Eigen::Index>(truth.cells.size())) {
    throw Error(ErrorKind::kShapeMismatch, "ground truth and posterior shapes differ");
  }
  auto cosine = [](const Vec& a, const Vec& b) {
    const double denom = a.norm() * b.norm();
    return denom > 0.0 ? a.dot(b) / denom : 0.0;
  };
  Mat cost(K, K);
  for (int k = 0; k < K; ++k) {
    for (int m = 0; m < K; ++m) cost(k, m) = -cosine(truth.theta.col(k), posterior.theta.col(m));
  }
  RecoveryReport r;
  r.permutation = solve_assignment(cost);
  double sq_c = 0.0, sq_d = 0.0;
  long agree = 0;
  std::vector<bool> row_ok(posterior.p_freq.rows(), true);
  for (int k = 0; k < K; ++k) {
    const int m = r.permutation.mapping[k];
    r.cosine.push_back(-cost(k, m));
    sq_c += (truth.c.row(k) - posterior.c.row(m)).squaredNorm();
    sq_d += (truth.d.col(k) - posterior.d.col(m)).squaredNorm();
    for (Eigen::Index n = 0; n < posterior.p_freq.rows(); ++n) {
      const int estimated = posterior.p_freq(n, m) >= 0.5 ? 1 : 0;
      if (estimated == truth.P(n, k)) {
        ++agree;
      } else {
        row_ok[n] = false;
      }
    }
  }
  r.mean_cosine = std::accumulate(r.cosine.begin(), r.cosine.end(), 0.0) / K;
  r.rmse_c = std::sqrt(sq_c / static_cast<double>(truth.c.size()));
  r.rmse_d = std::sqrt(sq_d / static_cast<double>(truth.d.size()));
  r.p_agreement = static_cast<double>(agree) / static_cast<double>(posterior.p_freq.size());
  r.p_row_agreement = static_cast<double>(std::count(row_ok.begin(), row_ok.end(), true)) /
                      static_cast<double>(row_ok.size());
  return r;
}

/// Ground truth packaged as a one-sample posterior, for replay checks.
inline PosteriorSummary as_posterior(const GroundTruth& truth) {
  return {truth.gamma, truth.theta, truth.Sigma_F, truth.c, truth.d, truth.P.cast<double>()};
}

}  // namespace misconception
