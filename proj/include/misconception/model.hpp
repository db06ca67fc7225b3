#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "misconception/errors.hpp"
#include "misconception/math.hpp"

namespace misconception {

/// One labeled response: question i answered by student j.
struct Cell {
  int question = 0;
  int student = 0;

  auto operator<=>(const Cell&) const = default;
};

inline std::string to_string(const Cell& cell) {
  return "(question " + std::to_string(cell.question) + ", student " +
         std::to_string(cell.student) + ")";
}

/// Labeled responses over the observation set. The label key set is the
/// observation set; every labeled cell needs a feature vector of length dim.
struct ObservedData {
  int num_students = 0;
  int num_questions = 0;
  int dim = 0;
  std::map<Cell, Vec> features;
  std::map<Cell, int> labels;
};

struct Hyperparams {
  int K = 2;
  Vec mu_gamma;
  Mat Sigma_gamma;
  Vec mu_theta;
  Mat Sigma_theta;
  double h_F = 10.0;
  Mat V_F;
  double mu_c = 0.0;
  double sigma_c2 = 1.0;
  double mu_d = 0.0;
  double sigma_d2 = 1.0;
  int T = 500;
  int burn_in = 250;

  /// Zero means, identity covariances, h_F = 10, unit-variance tendency
  /// priors, 500 iterations with 250 burn-in. h_F is raised to dim when
  /// dim > 10 so the inverse-Wishart prior stays proper.
  static Hyperparams defaults(int dim, int K = 2) {
    Hyperparams hp;
    hp.K = K;
    hp.mu_gamma = Vec::Zero(dim);
    hp.Sigma_gamma = Mat::Identity(dim, dim);
    hp.mu_theta = Vec::Zero(dim);
    hp.Sigma_theta = Mat::Identity(dim, dim);
    hp.V_F = Mat::Identity(dim, dim);
    hp.h_F = std::max(10.0, static_cast<double>(dim));
    return hp;
  }

  int dim() const { return static_cast<int>(mu_gamma.size()); }
};

/// Throws InvalidConfig when hp is unusable with feature dimension dim.
inline void check_hyperparams(const Hyperparams& hp, int dim) {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::kInvalidConfig, msg); };
  if (hp.K < 1) fail("K must be at least 1");
  if (hp.mu_gamma.size() != dim || hp.mu_theta.size() != dim) {
    fail("prior mean dimension does not match feature dimension " + std::to_string(dim));
  }
  for (const Mat* m : {&hp.Sigma_gamma, &hp.Sigma_theta, &hp.V_F}) {
    if (m->rows() != dim || m->cols() != dim) fail("prior covariance has wrong shape");
    if (!is_symmetric(*m) || !is_positive_definite(*m)) {
      fail("prior covariance must be symmetric positive definite");
    }
  }
  if (!(hp.h_F > dim - 1)) fail("h_F must exceed dim - 1");
  if (!(hp.sigma_c2 > 0.0) || !(hp.sigma_d2 > 0.0)) fail("sigma_c2 and sigma_d2 must be positive");
  if (hp.T < 1) fail("T must be positive");
  if (hp.burn_in < 0 || hp.burn_in >= hp.T) fail("burn_in must lie in [0, T)");
}

struct Violation {
  std::optional<Cell> cell;
  std::string message;
};

struct ValidateOptions {
  // Training folds keep the full index space, so some students or
  // questions may legitimately have no cells there.
  bool require_coverage = true;
};

inline std::vector<Violation> validate(const ObservedData& data, ValidateOptions options = {}) {
  std::vector<Violation> out;
  if (data.num_students < 1) out.push_back({std::nullopt, "num_students must be positive"});
  if (data.num_questions < 1) out.push_back({std::nullopt, "num_questions must be positive"});
  if (data.dim < 1) out.push_back({std::nullopt, "dim must be positive"});
  if (data.labels.empty()) out.push_back({std::nullopt, "observation set is empty"});

  auto in_range = [&](const Cell& c) {
    return c.question >= 0 && c.question < data.num_questions && c.student >= 0 &&
           c.student < data.num_students;
  };

  std::vector<int> per_student(std::max(data.num_students, 0), 0);
  std::vector<int> per_question(std::max(data.num_questions, 0), 0);
  for (const auto& [cell, label] : data.labels) {
    if (!in_range(cell)) {
      out.push_back({cell, "index out of range at " + to_string(cell)});
      continue;
    }
    ++per_student[cell.student];
    ++per_question[cell.question];
    if (label != 0 && label != 1) {
      out.push_back({cell, "label " + std::to_string(label) + " is not binary at " + to_string(cell)});
    }
    if (!data.features.contains(cell)) {
      out.push_back({cell, "label without feature vector at " + to_string(cell)});
    }
  }
  for (const auto& [cell, f] : data.features) {
    if (!data.labels.contains(cell)) {
      out.push_back({cell, "feature vector without label at " + to_string(cell)});
    }
    if (f.size() != data.dim) {
      out.push_back({cell, "feature length " + std::to_string(f.size()) + " != dim " +
                               std::to_string(data.dim) + " at " + to_string(cell)});
      continue;
    }
    for (Eigen::Index d = 0; d < f.size(); ++d) {
      if (!std::isfinite(f(d))) {
        out.push_back({cell, "non-finite feature at " + to_string(cell) + " coordinate " +
                                 std::to_string(d)});
      }
    }
  }
  if (options.require_coverage) {
    for (int j = 0; j < data.num_students; ++j) {
      if (per_student[j] == 0) out.push_back({std::nullopt, "student " + std::to_string(j) + " has no responses"});
    }
    for (int i = 0; i < data.num_questions; ++i) {
      if (per_question[i] == 0) out.push_back({std::nullopt, "question " + std::to_string(i) + " has no responses"});
    }
  }
  return out;
}

/// Dense view of the observation set in question-major, then student order.
/// Row n of every per-cell array refers to cells[n].
struct Layout {
  int num_students = 0;
  int num_questions = 0;
  int dim = 0;
  std::vector<Cell> cells;
  Mat features;  // dim x |cells|
  std::vector<int> labels;
  std::vector<std::vector<int>> by_question;
  std::vector<std::vector<int>> by_student;

  int size() const { return static_cast<int>(cells.size()); }
};

inline Layout make_layout(const ObservedData& data) {
  Layout layout;
  layout.num_students = data.num_students;
  layout.num_questions = data.num_questions;
  layout.dim = data.dim;
  layout.features.resize(data.dim, static_cast<Eigen::Index>(data.labels.size()));
  layout.by_question.resize(data.num_questions);
  layout.by_student.resize(data.num_students);
  for (const auto& [cell, label] : data.labels) {
    auto it = data.features.find(cell);
    if (it == data.features.end()) {
      throw Error(ErrorKind::kMissingFeature, "no feature vector for " + to_string(cell));
    }
    if (it->second.size() != data.dim) {
      throw Error(ErrorKind::kDimensionMismatch, "feature vector of wrong length at " + to_string(cell));
    }
    const int n = static_cast<int>(layout.cells.size());
    layout.cells.push_back(cell);
    layout.features.col(n) = it->second;
    layout.labels.push_back(label);
    layout.by_question.at(cell.question).push_back(n);
    layout.by_student.at(cell.student).push_back(n);
  }
  return layout;
}

/// One Gibbs state. Per-cell arrays (P, z) follow Layout row order.
struct LatentState {
  Mat gamma;           // dim x Q
  Mat theta;           // dim x K
  Mat Sigma_F;         // dim x dim
  Eigen::MatrixXi P;   // |cells| x K, entries in {0, 1}
  Mat c;               // K x N
  Mat d;               // Q x K
  Mat z;               // |cells| x K, auxiliary probit variables

  int K() const { return static_cast<int>(theta.cols()); }
};

/// Labels are 1 exactly when at least one indicator in the row is on.
inline bool indicators_consistent(const LatentState& state, const Layout& layout) {
  for (int n = 0; n < layout.size(); ++n) {
    const int active = state.P.row(n).sum();
    if (layout.labels[n] == 0 && active != 0) return false;
    if (layout.labels[n] == 1 && active < 1) return false;
  }
  return true;
}

/// Draws every continuous latent from its prior, then indicators from the
/// probit prior, repaired so labeled-positive rows have one active entry.
template <class Engine>
LatentState init_state(const Layout& layout, const Hyperparams& hp, Engine& rng) {
  const int K = hp.K;
  LatentState s;
  s.gamma.resize(layout.dim, layout.num_questions);
  for (int i = 0; i < layout.num_questions; ++i) {
    s.gamma.col(i) = sample_mvn(hp.mu_gamma, hp.Sigma_gamma, rng);
  }
  s.theta.resize(layout.dim, K);
  for (int k = 0; k < K; ++k) s.theta.col(k) = sample_mvn(hp.mu_theta, hp.Sigma_theta, rng);
  s.Sigma_F = sample_inv_wishart(hp.h_F, hp.V_F, rng);

  const double sd_c = std::sqrt(hp.sigma_c2);
  const double sd_d = std::sqrt(hp.sigma_d2);
  s.c.resize(K, layout.num_students);
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < layout.num_students; ++j) s.c(k, j) = hp.mu_c + sd_c * standard_normal(rng);
  }
  s.d.resize(layout.num_questions, K);
  for (int i = 0; i < layout.num_questions; ++i) {
    for (int k = 0; k < K; ++k) s.d(i, k) = hp.mu_d + sd_d * standard_normal(rng);
  }

  s.P = Eigen::MatrixXi::Zero(layout.size(), K);
  s.z = Mat::Zero(layout.size(), K);
  for (int n = 0; n < layout.size(); ++n) {
    if (layout.labels[n] == 0) continue;
    const Cell& cell = layout.cells[n];
    for (int k = 0; k < K; ++k) {
      const double p = probit(s.c(k, cell.student) + s.d(cell.question, k));
      s.P(n, k) = uniform_open(rng) < p ? 1 : 0;
    }
    if (s.P.row(n).sum() == 0) {
      s.P(n, std::uniform_int_distribution<int>(0, K - 1)(rng)) = 1;
    }
  }
  return s;
}

}  // namespace misconception
