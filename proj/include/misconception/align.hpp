#pragma once

// Post-hoc relabeling of mixture components across stored Gibbs samples,
// followed by posterior-mean summaries.

#include <algorithm>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "misconception/model.hpp"

namespace misconception {

/// mapping[k] = component of the source sample that becomes component k.
struct Permutation {
  std::vector<int> mapping;

  static Permutation identity(int K) {
    Permutation p;
    p.mapping.resize(K);
    std::iota(p.mapping.begin(), p.mapping.end(), 0);
    return p;
  }

  bool is_identity() const {
    for (int k = 0; k < static_cast<int>(mapping.size()); ++k) {
      if (mapping[k] != k) return false;
    }
    return true;
  }

  bool is_bijective() const {
    std::vector<int> sorted = mapping;
    std::sort(sorted.begin(), sorted.end());
    for (int k = 0; k < static_cast<int>(sorted.size()); ++k) {
      if (sorted[k] != k) return false;
    }
    return true;
  }

  bool operator==(const Permutation&) const = default;
};

inline constexpr int kExhaustiveAssignmentMaxK = 6;

namespace detail {

inline std::vector<int> exhaustive_assignment(const Mat& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int r = 0; r < n; ++r) total += cost(r, perm[r]);
    if (total < best_cost) {
      best_cost = total;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Shortest augmenting path Hungarian method with row/column potentials.
inline std::vector<int> hungarian_assignment(const Mat& cost) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> col_owner(n + 1, 0), way(n + 1, 0);
  for (int row = 1; row <= n; ++row) {
    col_owner[0] = row;
    int col0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[col0] = 1;
      const int row0 = col_owner[col0];
      double delta = inf;
      int col1 = 0;
      for (int col = 1; col <= n; ++col) {
        if (used[col]) continue;
        const double reduced = cost(row0 - 1, col - 1) - u[row0] - v[col];
        if (reduced < minv[col]) {
          minv[col] = reduced;
          way[col] = col0;
        }
        if (minv[col] < delta) {
          delta = minv[col];
          col1 = col;
        }
      }
      for (int col = 0; col <= n; ++col) {
        if (used[col]) {
          u[col_owner[col]] += delta;
          v[col] -= delta;
        } else {
          minv[col] -= delta;
        }
      }
      col0 = col1;
    } while (col_owner[col0] != 0);
    do {
      const int col1 = way[col0];
      col_owner[col0] = col_owner[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<int> assignment(n);
  for (int col = 1; col <= n; ++col) assignment[col_owner[col] - 1] = col - 1;
  return assignment;
}

}  // namespace detail

/// Minimum-cost perfect matching of rows to columns of a square cost
/// matrix. Exhaustive for small K, Hungarian otherwise.
inline Permutation solve_assignment(const Mat& cost) {
  Permutation p;
  if (cost.rows() <= kExhaustiveAssignmentMaxK) {
    p.mapping = detail::exhaustive_assignment(cost);
  } else {
    p.mapping = detail::hungarian_assignment(cost);
  }
  return p;
}

/// Index of the largest value; ties go to the lowest index.
inline std::size_t find_reference(std::span<const double> log_likelihoods) {
  if (log_likelihoods.empty()) {
    throw Error(ErrorKind::kEmptyInput, "no stored samples to choose a reference from");
  }
  std::size_t best = 0;
  for (std::size_t l = 1; l < log_likelihoods.size(); ++l) {
    if (log_likelihoods[l] > log_likelihoods[best]) best = l;
  }
  return best;
}

enum class AlignCost {
  kTheta,            // squared distance between signature vectors
  kThetaTendencies,  // adds squared distance between c rows and d columns
};

inline Mat alignment_cost(const LatentState& sample, const LatentState& reference,
                          AlignCost metric) {
  const int K = reference.K();
  if (sample.K() != K || sample.theta.rows() != reference.theta.rows()) {
    throw Error(ErrorKind::kShapeMismatch, "sample and reference differ in K or dim");
  }
  Mat cost(K, K);
  for (int k = 0; k < K; ++k) {
    for (int m = 0; m < K; ++m) {
      double value = (reference.theta.col(k) - sample.theta.col(m)).squaredNorm();
      if (metric == AlignCost::kThetaTendencies) {
        value += (reference.c.row(k) - sample.c.row(m)).squaredNorm();
        value += (reference.d.col(k) - sample.d.col(m)).squaredNorm();
      }
      cost(k, m) = value;
    }
  }
  return cost;
}

/// Applies perm jointly to theta, c, d, P and z.
inline LatentState permute_components(const LatentState& sample, const Permutation& perm) {
  LatentState out = sample;
  for (int k = 0; k < sample.K(); ++k) {
    const int src = perm.mapping[k];
    out.theta.col(k) = sample.theta.col(src);
    out.c.row(k) = sample.c.row(src);
    out.d.col(k) = sample.d.col(src);
    out.P.col(k) = sample.P.col(src);
    if (sample.z.cols() == sample.K()) out.z.col(k) = sample.z.col(src);
  }
  return out;
}

struct Aligned {
  LatentState sample;
  Permutation permutation;
};

inline Aligned align_sample(const LatentState& sample, const LatentState& reference,
                            AlignCost metric = AlignCost::kTheta) {
  Permutation perm = solve_assignment(alignment_cost(sample, reference, metric));
  return {permute_components(sample, perm), std::move(perm)};
}

/// Elementwise posterior means; p_freq holds the fraction of samples with
/// each indicator switched on.
struct PosteriorSummary {
  Mat gamma;
  Mat theta;
  Mat Sigma_F;
  Mat c;
  Mat d;
  Mat p_freq;  // |cells| x K

  int K() const { return static_cast<int>(theta.cols()); }
};

inline PosteriorSummary posterior_means(std::span<const LatentState> samples) {
  if (samples.empty()) {
    throw Error(ErrorKind::kEmptyInput, "posterior means need at least one sample");
  }
  const LatentState& first = samples.front();
  PosteriorSummary s{Mat::Zero(first.gamma.rows(), first.gamma.cols()),
                     Mat::Zero(first.theta.rows(), first.theta.cols()),
                     Mat::Zero(first.Sigma_F.rows(), first.Sigma_F.cols()),
                     Mat::Zero(first.c.rows(), first.c.cols()),
                     Mat::Zero(first.d.rows(), first.d.cols()),
                     Mat::Zero(first.P.rows(), first.P.cols())};
  for (const LatentState& x : samples) {
    s.gamma += x.gamma;
    s.theta += x.theta;
    s.Sigma_F += x.Sigma_F;
    s.c += x.c;
    s.d += x.d;
    s.p_freq += x.P.cast<double>();
  }
  const double n = static_cast<double>(samples.size());
  s.gamma /= n;
  s.theta /= n;
  s.Sigma_F = (0.5 * (s.Sigma_F + s.Sigma_F.transpose()) / n).eval();
  s.c /= n;
  s.d /= n;
  s.p_freq /= n;
  return s;
}

}  // namespace misconception
