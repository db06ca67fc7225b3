#pragma once

// Cross-validated evaluation: random K-fold partitions of the observation
// set, accuracy and rank-based AUC over pooled held-out predictions, and a
// sweep over the number of latent misconceptions.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <initializer_list>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "misconception/gibbs.hpp"
#include "misconception/predict.hpp"

namespace misconception {

/// Seed for an independent job: the first 64 bits produced by
/// std::seed_seq over (base low word, base high word, labels...).
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint32_t> labels) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(base & 0xffffffffu),
                                   static_cast<std::uint32_t>(base >> 32)};
  words.insert(words.end(), labels.begin(), labels.end());
  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

struct FoldSplit {
  int num_folds = 0;
  std::vector<int> fold;  // per cell, in layout order

  std::vector<int> sizes() const {
    std::vector<int> s(num_folds, 0);
    for (int f : fold) ++s[f];
    return s;
  }
};

enum class SplitUnit { kCell, kStudent };

/// Uniform random partition of num_cells cells into folds whose sizes
/// differ by at most one.
template <class Engine>
FoldSplit kfold_split(int num_cells, int num_folds, Engine& rng) {
  if (num_folds < 2) throw Error(ErrorKind::kInvalidConfig, "need at least 2 folds");
  if (num_cells < num_folds) {
    throw Error(ErrorKind::kTooFewCells, std::to_string(num_cells) + " cells cannot fill " +
                                             std::to_string(num_folds) + " folds");
  }
  std::vector<int> order(num_cells);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  FoldSplit split{num_folds, std::vector<int>(num_cells)};
  for (int pos = 0; pos < num_cells; ++pos) split.fold[order[pos]] = pos % num_folds;
  return split;
}

/// All cells of a student land in the same fold.
template <class Engine>
FoldSplit kfold_split_by_student(const Layout& layout, int num_folds, Engine& rng) {
  if (num_folds < 2) throw Error(ErrorKind::kInvalidConfig, "need at least 2 folds");
  if (layout.num_students < num_folds) {
    throw Error(ErrorKind::kTooFewCells, "fewer students than folds");
  }
  std::vector<int> students(layout.num_students);
  std::iota(students.begin(), students.end(), 0);
  std::shuffle(students.begin(), students.end(), rng);
  std::vector<int> student_fold(layout.num_students);
  for (int pos = 0; pos < layout.num_students; ++pos) student_fold[students[pos]] = pos % num_folds;
  FoldSplit split{num_folds, std::vector<int>(layout.size())};
  for (int n = 0; n < layout.size(); ++n) split.fold[n] = student_fold[layout.cells[n].student];
  return split;
}

inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorKind::kShapeMismatch, "prediction and truth lengths differ");
  }
  if (truth.empty()) throw Error(ErrorKind::kEmptyInput, "accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t n = 0; n < truth.size(); ++n) hits += predicted[n] == truth[n] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Mann-Whitney AUC with ties counted one half. Computed from twice the U
/// statistic as an integer so the result is exact.
inline double auc(std::span<const double> scores, std::span<const int> truth) {
  if (scores.size() != truth.size()) {
    throw Error(ErrorKind::kShapeMismatch, "score and truth lengths differ");
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::int64_t positives = 0;
  std::int64_t twice_rank_sum = 0;  // ranks are 1-based; tied groups share the mean rank
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start;
    while (end < n && scores[order[end]] == scores[order[start]]) ++end;
    const auto twice_mean_rank = static_cast<std::int64_t>(start + 1 + end);
    for (std::size_t t = start; t < end; ++t) {
      if (truth[order[t]] == 1) {
        ++positives;
        twice_rank_sum += twice_mean_rank;
      }
    }
    start = end;
  }
  const std::int64_t negatives = static_cast<std::int64_t>(n) - positives;
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorKind::kSingleClass, "AUC undefined: only one class present");
  }
  const std::int64_t twice_u = twice_rank_sum - positives * (positives + 1);
  return static_cast<double>(twice_u) / static_cast<double>(2 * positives * negatives);
}

/// Trains on train and returns misconception probabilities for test cells.
using FoldModel = std::function<std::vector<double>(
    const ObservedData& train, std::span<const Cell> test_cells, std::span<const Vec> test_features,
    const Hyperparams& hp, std::uint64_t seed)>;

inline std::vector<double> gibbs_fold_model(const ObservedData& train, std::span<const Cell> test_cells,
                                            std::span<const Vec> test_features, const Hyperparams& hp,
                                            std::uint64_t seed) {
  const Layout layout = make_layout(train);
  const ChainResult chain = run_chain(layout, hp, seed, {.store_samples = false});
  const PointEstimates params = point_estimates(chain.posterior, layout, hp);
  std::vector<double> out;
  out.reserve(test_cells.size());
  for (std::size_t t = 0; t < test_cells.size(); ++t) {
    out.push_back(predictive_prob(test_features[t], test_cells[t].question, test_cells[t].student, params));
  }
  return out;
}

struct EvalConfig {
  int folds = 5;
  int repetitions = 20;
  std::uint64_t base_seed = 0;
  double threshold = 0.5;
  SplitUnit unit = SplitUnit::kCell;
  int threads = 1;
};

struct RunRecord {
  int repetition = 0;
  int num_test = 0;
  double acc = 0.0;
  std::optional<double> auc;  // missing when the pooled test set has one class
};

struct MetricSummary {
  double acc_mean = 0.0;
  double acc_std = 0.0;
  double auc_mean = 0.0;
  double auc_std = 0.0;
  std::vector<RunRecord> runs;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {std::nan(""), std::nan("")};
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

// Runs jobs [0, count) on up to threads workers; rethrows the first failure.
inline void parallel_for(int count, int threads, const std::function<void(int)>& job) {
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

/// Repeated F-fold cross-validation. Split seeds are
/// derive_seed(base_seed, {rep, 0xffffffff}); the chain for fold f of
/// repetition rep uses derive_seed(base_seed, {rep, f}).
inline MetricSummary run_experiment(const ObservedData& data, const Hyperparams& hp,
                                    const EvalConfig& config, const FoldModel& model = gibbs_fold_model) {
  const auto violations = validate(data);
  if (!violations.empty()) {
    throw Error(ErrorKind::kShapeMismatch, "invalid data: " + violations.front().message);
  }
  if (config.repetitions < 1) throw Error(ErrorKind::kInvalidConfig, "repetitions must be positive");
  check_hyperparams(hp, data.dim);
  const Layout layout = make_layout(data);

  std::vector<FoldSplit> splits;
  for (int rep = 0; rep < config.repetitions; ++rep) {
    Rng rng(derive_seed(config.base_seed, {static_cast<std::uint32_t>(rep), 0xffffffffu}));
    splits.push_back(config.unit == SplitUnit::kCell ? kfold_split(layout.size(), config.folds, rng)
                                                     : kfold_split_by_student(layout, config.folds, rng));
  }

  // scores[rep][n]: held-out probability of cell n.
  std::vector<std::vector<double>> scores(config.repetitions, std::vector<double>(layout.size(), 0.0));
  detail::parallel_for(config.repetitions * config.folds, config.threads, [&](int job) {
    const int rep = job / config.folds;
    const int fold = job % config.folds;
    const FoldSplit& split = splits[rep];
    ObservedData train{data.num_students, data.num_questions, data.dim, {}, {}};
    std::vector<int> test_rows;
    std::vector<Cell> test_cells;
    std::vector<Vec> test_features;
    for (int n = 0; n < layout.size(); ++n) {
      const Cell& cell = layout.cells[n];
      if (split.fold[n] == fold) {
        test_rows.push_back(n);
        test_cells.push_back(cell);
        test_features.emplace_back(layout.features.col(n));
      } else {
        train.features.emplace(cell, layout.features.col(n));
        train.labels.emplace(cell, layout.labels[n]);
      }
    }
    if (test_rows.empty()) return;
    const auto probs = model(train, test_cells, test_features, hp,
                             derive_seed(config.base_seed, {static_cast<std::uint32_t>(rep),
                                                            static_cast<std::uint32_t>(fold)}));
    for (std::size_t t = 0; t < test_rows.size(); ++t) scores[rep][test_rows[t]] = probs.at(t);
  });

  MetricSummary summary;
  std::vector<double> accs, aucs;
  for (int rep = 0; rep < config.repetitions; ++rep) {
    std::vector<int> hard(layout.size());
    for (int n = 0; n < layout.size(); ++n) hard[n] = classify(scores[rep][n], config.threshold);
    RunRecord record{rep, layout.size(), accuracy(hard, layout.labels), std::nullopt};
    try {
      record.auc = auc(scores[rep], layout.labels);
      aucs.push_back(*record.auc);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kSingleClass) throw;
      summary.warnings.push_back("repetition " + std::to_string(rep) + ": " + e.what());
    }
    accs.push_back(record.acc);
    summary.runs.push_back(record);
  }
  std::tie(summary.acc_mean, summary.acc_std) = detail::mean_std(accs);
  std::tie(summary.auc_mean, summary.auc_std) = detail::mean_std(aucs);
  return summary;
}

struct SweepRow {
  int K = 0;
  MetricSummary metrics;
};

inline std::vector<SweepRow> k_sweep(const ObservedData& data, const Hyperparams& base,
                                     std::span<const int> K_values, const EvalConfig& config,
                                     const FoldModel& model = gibbs_fold_model) {
  if (K_values.empty()) throw Error(ErrorKind::kInvalidConfig, "K sweep needs at least one K");
  std::vector<SweepRow> rows;
  for (int K : K_values) {
    Hyperparams hp = base;
    hp.K = K;
    rows.push_back({K, run_experiment(data, hp, config, model)});
  }
  return rows;
}

/// Tab-separated K, acc_mean, acc_std, auc_mean, auc_std with a header.
inline std::string format_metrics_table(std::span<const SweepRow> rows) {
  std::ostringstream out;
  out.precision(17);
  out << "K\tacc_mean\tacc_std\tauc_mean\tauc_std\n";
  for (const auto& row : rows) {
    out << row.K << '\t' << row.metrics.acc_mean << '\t' << row.metrics.acc_std << '\t'
        << row.metrics.auc_mean << '\t' << row.metrics.auc_std << '\n';
  }
  return out.str();
}

}  // namespace misconception
