#pragma once

// Misconception probabilities for individual responses by exact
// enumeration of the 2^K indicator configurations, and cluster reports
// grouping training responses by their posterior indicator frequencies.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "misconception/align.hpp"
#include "misconception/gibbs.hpp"
#include "misconception/model.hpp"

namespace misconception {

/// Plug-in parameter values used for prediction. Students or questions not
/// seen in training fall back to the prior means.
struct PointEstimates {
  Mat gamma;    // dim x Q
  Mat theta;    // dim x K
  Mat Sigma_F;
  Mat c;        // K x N
  Mat d;        // Q x K
  std::vector<bool> student_seen;
  std::vector<bool> question_seen;
  Vec mu_gamma;
  double mu_c = 0.0;
  double mu_d = 0.0;

  int K() const { return static_cast<int>(theta.cols()); }
  int dim() const { return static_cast<int>(theta.rows()); }
};

inline PointEstimates point_estimates(const PosteriorSummary& posterior, const Layout& training,
                                      const Hyperparams& hp) {
  PointEstimates p{posterior.gamma, posterior.theta, posterior.Sigma_F, posterior.c, posterior.d,
                   std::vector<bool>(training.num_students, false),
                   std::vector<bool>(training.num_questions, false),
                   hp.mu_gamma, hp.mu_c, hp.mu_d};
  for (const Cell& cell : training.cells) {
    p.student_seen[cell.student] = true;
    p.question_seen[cell.question] = true;
  }
  return p;
}

/// Same as point_estimates but taking values from one posterior sample.
inline PointEstimates point_estimates(const LatentState& sample, const Layout& training,
                                      const Hyperparams& hp) {
  PosteriorSummary s{sample.gamma, sample.theta, sample.Sigma_F, sample.c, sample.d, {}};
  return point_estimates(s, training, hp);
}

/// Parameters entering the enumeration for one response.
struct ResponseParams {
  Vec gamma;
  Vec eta;  // c_kj + d_ik per component
};

/// question or student may be -1 (or unseen) for a cold start.
inline ResponseParams resolve(const PointEstimates& p, int question, int student) {
  const bool q_known = question >= 0 && question < static_cast<int>(p.question_seen.size()) &&
                       p.question_seen[question];
  const bool s_known = student >= 0 && student < static_cast<int>(p.student_seen.size()) &&
                       p.student_seen[student];
  ResponseParams r;
  r.gamma = q_known ? Vec(p.gamma.col(question)) : p.mu_gamma;
  r.eta.resize(p.K());
  for (int k = 0; k < p.K(); ++k) {
    const double c = s_known ? p.c(k, student) : p.mu_c;
    const double d = q_known ? p.d(question, k) : p.mu_d;
    r.eta(k) = c + d;
  }
  return r;
}

/// Normalized log posterior weight of every configuration; bit k of the
/// index is indicator k.
inline std::vector<double> configuration_log_posterior(const Vec& f, const ResponseParams& r,
                                                       const Mat& theta, const Mat& Sigma_F) {
  const int K = static_cast<int>(theta.cols());
  if (K > kMaxEnumerationK) {
    throw Error(ErrorKind::kEnumerationTooLarge,
                "K = " + std::to_string(K) + " exceeds enumeration limit " +
                    std::to_string(kMaxEnumerationK));
  }
  if (f.size() != theta.rows()) {
    throw Error(ErrorKind::kDimensionMismatch, "feature dimension " + std::to_string(f.size()) +
                                                   " != model dimension " +
                                                   std::to_string(theta.rows()));
  }
  const Mat lower = cholesky_lower(Sigma_F);
  const std::uint32_t count = 1u << K;
  std::vector<double> logw(count);
  double total = -std::numeric_limits<double>::infinity();
  for (std::uint32_t config = 0; config < count; ++config) {
    Vec mean = r.gamma;
    double log_prior = 0.0;
    for (int k = 0; k < K; ++k) {
      const bool on = (config >> k) & 1u;
      if (on) mean += theta.col(k);
      log_prior += log_probit(on ? r.eta(k) : -r.eta(k));
    }
    // The Gaussian normalizer is shared by every configuration.
    const Vec w = lower.triangularView<Eigen::Lower>().solve(f - mean);
    logw[config] = log_prior - 0.5 * w.squaredNorm();
    total = log_sum_exp(total, logw[config]);
  }
  for (double& v : logw) v -= total;
  return logw;
}

/// Probability that at least one misconception is present.
inline double predictive_prob(const Vec& f, int question, int student, const PointEstimates& p) {
  const auto logw = configuration_log_posterior(f, resolve(p, question, student), p.theta, p.Sigma_F);
  double tail = -std::numeric_limits<double>::infinity();
  for (std::size_t config = 1; config < logw.size(); ++config) tail = log_sum_exp(tail, logw[config]);
  return std::clamp(std::exp(tail), 0.0, 1.0);
}

/// Marginal probability of each indicator being on.
inline Vec per_k_posterior(const Vec& f, int question, int student, const PointEstimates& p) {
  const auto logw = configuration_log_posterior(f, resolve(p, question, student), p.theta, p.Sigma_F);
  Vec out = Vec::Zero(p.K());
  for (std::size_t config = 1; config < logw.size(); ++config) {
    const double w = std::exp(logw[config]);
    for (int k = 0; k < p.K(); ++k) {
      if ((config >> k) & 1u) out(k) += w;
    }
  }
  return out.cwiseMin(1.0);
}

inline int classify(double prob, double threshold = 0.5) { return prob >= threshold ? 1 : 0; }

struct Prediction {
  Cell pair;
  double prob_misconception = 0.0;
  Vec per_k_prob;
  int hard_label = 0;
};

inline Prediction predict(const Vec& f, const Cell& pair, const PointEstimates& p,
                          double threshold = 0.5) {
  Prediction out;
  out.pair = pair;
  out.prob_misconception = predictive_prob(f, pair.question, pair.student, p);
  out.per_k_prob = per_k_posterior(f, pair.question, pair.student, p);
  out.hard_label = classify(out.prob_misconception, threshold);
  return out;
}

/// Averages the plug-in prediction over posterior samples instead of using
/// posterior means.
inline Prediction predict_averaged(const Vec& f, const Cell& pair,
                                   std::span<const LatentState> samples, const Layout& training,
                                   const Hyperparams& hp, double threshold = 0.5) {
  if (samples.empty()) throw Error(ErrorKind::kEmptyInput, "no posterior samples stored");
  Prediction out;
  out.pair = pair;
  out.per_k_prob = Vec::Zero(samples.front().K());
  for (const LatentState& sample : samples) {
    const PointEstimates p = point_estimates(sample, training, hp);
    out.prob_misconception += predictive_prob(f, pair.question, pair.student, p);
    out.per_k_prob += per_k_posterior(f, pair.question, pair.student, p);
  }
  const double n = static_cast<double>(samples.size());
  out.prob_misconception /= n;
  out.per_k_prob /= n;
  out.hard_label = classify(out.prob_misconception, threshold);
  return out;
}

struct ClusterMember {
  Cell pair;
  std::optional<std::string> text;
  double frequency = 0.0;
};

struct ClusterReport {
  std::vector<std::vector<ClusterMember>> clusters;  // one per component
};

/// Groups training responses under every component whose posterior
/// indicator frequency reaches membership_threshold.
inline ClusterReport build_cluster_report(const Layout& layout, const PosteriorSummary& posterior,
                                          double membership_threshold = 0.5,
                                          const std::map<Cell, std::string>* texts = nullptr) {
  if (posterior.p_freq.rows() != layout.size()) {
    throw Error(ErrorKind::kShapeMismatch, "posterior was not computed on this dataset");
  }
  ClusterReport report;
  report.clusters.resize(posterior.K());
  for (int k = 0; k < posterior.K(); ++k) {
    auto& members = report.clusters[k];
    for (int n = 0; n < layout.size(); ++n) {
      const double freq = posterior.p_freq(n, k);
      if (freq < membership_threshold) continue;
      ClusterMember m{layout.cells[n], std::nullopt, freq};
      if (texts != nullptr) {
        if (auto it = texts->find(layout.cells[n]); it != texts->end()) m.text = it->second;
      }
      members.push_back(std::move(m));
    }
    std::stable_sort(members.begin(), members.end(),
                     [](const ClusterMember& a, const ClusterMember& b) {
                       return a.frequency > b.frequency;
                     });
  }
  return report;
}

}  // namespace misconception
