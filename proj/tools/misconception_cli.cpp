// misconception: command-line front end.
//
//   ingest    responses + embeddings -> dataset file
//   train     dataset -> model file
//   predict   model + dataset/responses -> JSON-lines predictions
//   clusters  model + dataset -> cluster report
//   eval      repeated cross-validation, optional K sweep
//   synth     synthetic dataset + ground truth
//   recover   compare a model with synthetic ground truth
//
// Exit codes: 0 success, 2 config/parse, 3 data shape, 4 numerical.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "misconception/eval.hpp"
#include "misconception/io.hpp"
#include "misconception/predict.hpp"
#include "misconception/synth.hpp"

namespace mc = misconception;
namespace io = misconception::io;
using io::json;

namespace {

#ifndef MISCONCEPTION_DEFAULT_STOPWORDS
#define MISCONCEPTION_DEFAULT_STOPWORDS "data/stopwords_en.txt"
#endif

struct HyperFlags {
  int K = 2;
  int T = 500;
  int burn_in = 250;
  std::optional<double> h_F;
  double mu_c = 0.0;
  double sigma_c2 = 1.0;
  double mu_d = 0.0;
  double sigma_d2 = 1.0;
  double sigma_gamma2 = 1.0;
  double sigma_theta2 = 1.0;
  double v_F = 1.0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--K", K, "number of latent misconceptions")->capture_default_str();
    cmd->add_option("--iterations,--T", T, "Gibbs iterations")->capture_default_str();
    cmd->add_option("--burn-in", burn_in, "iterations discarded before averaging")->capture_default_str();
    cmd->add_option("--h-F", h_F, "inverse-Wishart degrees of freedom (default max(10, D))");
    cmd->add_option("--v-F", v_F, "inverse-Wishart scale, times identity")->capture_default_str();
    cmd->add_option("--mu-c", mu_c, "prior mean of student tendencies")->capture_default_str();
    cmd->add_option("--sigma-c2", sigma_c2, "prior variance of student tendencies")->capture_default_str();
    cmd->add_option("--mu-d", mu_d, "prior mean of question confusion levels")->capture_default_str();
    cmd->add_option("--sigma-d2", sigma_d2, "prior variance of question confusion levels")->capture_default_str();
    cmd->add_option("--sigma-gamma2", sigma_gamma2, "prior variance of correct-response signatures")
        ->capture_default_str();
    cmd->add_option("--sigma-theta2", sigma_theta2, "prior variance of misconception signatures")
        ->capture_default_str();
  }

  mc::Hyperparams build(int dim) const {
    if (K > mc::kMaxEnumerationK) {
      throw mc::Error(mc::ErrorKind::kEnumerationTooLarge,
                      "K = " + std::to_string(K) + " exceeds the prediction limit of " +
                          std::to_string(mc::kMaxEnumerationK));
    }
    mc::Hyperparams hp = mc::Hyperparams::defaults(dim, K);
    hp.T = T;
    hp.burn_in = burn_in;
    if (h_F) hp.h_F = *h_F;
    hp.V_F *= v_F;
    hp.mu_c = mu_c;
    hp.sigma_c2 = sigma_c2;
    hp.mu_d = mu_d;
    hp.sigma_d2 = sigma_d2;
    hp.Sigma_gamma *= sigma_gamma2;
    hp.Sigma_theta *= sigma_theta2;
    mc::check_hyperparams(hp, dim);
    return hp;
  }
};

json input_entry(const std::string& path) { return {{"path", path}, {"sha256", io::file_digest(path)}}; }

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw mc::Error(mc::ErrorKind::kParse, "cannot write file: " + path);
  return out;
}

std::string padded_ids(const std::string& prefix, int index, int count) {
  std::ostringstream s;
  s << prefix << std::setw(static_cast<int>(std::to_string(count - 1).size())) << std::setfill('0') << index;
  return s.str();
}

std::string format_fixed(double x, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << x;
  return s.str();
}

std::map<mc::ResponseKey, mc::Vec> embed_or_load(const std::vector<mc::RawResponse>& raw,
                                                 const std::string& word_vectors, const std::string& features,
                                                 const std::string& stopwords, bool normalize, json& inputs) {
  if (!features.empty()) {
    inputs["features"] = input_entry(features);
    return mc::load_precomputed(features);
  }
  inputs["word_vectors"] = input_entry(word_vectors);
  inputs["stopwords"] = input_entry(stopwords);
  const auto table = mc::load_word_vectors(word_vectors);
  const auto summary = mc::embed_responses(raw, table, mc::load_stopwords(stopwords), normalize);
  if (summary.num_all_oov > 0) {
    std::cerr << "warning: " << summary.num_all_oov
              << " responses have no in-vocabulary tokens and were embedded as zero vectors\n";
  }
  return summary.features;
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string responses, word_vectors, features, stopwords = MISCONCEPTION_DEFAULT_STOPWORDS, out;
  int min_per_student = 5;
  int min_per_question = 5;
  bool normalize = false;
};

int run_ingest(const IngestArgs& a) {
  json inputs = {{"responses", input_entry(a.responses)}};
  auto raw = mc::load_responses(a.responses);
  const auto total = raw.size();
  raw = mc::trim(std::move(raw), a.min_per_student, a.min_per_question);
  const auto features = embed_or_load(raw, a.word_vectors, a.features, a.stopwords, a.normalize, inputs);
  io::DatasetFile file{mc::assemble(raw, features), {}};
  const auto violations = mc::validate(file.assembled.data);
  if (!violations.empty()) throw mc::Error(mc::ErrorKind::kShapeMismatch, violations.front().message);
  const json config = {{"min_per_student", a.min_per_student},
                       {"min_per_question", a.min_per_question},
                       {"normalize", a.normalize}};
  file.provenance = io::provenance("ingest", config, inputs);
  io::write_json(a.out, io::dataset_to_json(file));

  const auto& d = file.assembled.data;
  const double sparsity = static_cast<double>(d.labels.size()) / (static_cast<double>(d.num_students) * d.num_questions);
  std::cout << "N=" << d.num_students << " Q=" << d.num_questions << " cells=" << d.labels.size()
            << " sparsity=" << format_fixed(sparsity, 3) << " dim=" << d.dim << " (kept " << raw.size() << " of "
            << total << " responses)\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string dataset, out;
  HyperFlags hyper;
  std::uint64_t seed = 0;
  int chains = 1;
  int threads = 1;
  bool store_samples = false;
  std::string align_cost = "theta";
};

int run_train(const TrainArgs& a) {
  const auto file = io::load_dataset(a.dataset);
  const auto& data = file.assembled.data;
  const mc::Hyperparams hp = a.hyper.build(data.dim);
  if (a.chains < 1) throw mc::Error(mc::ErrorKind::kInvalidConfig, "--chains must be positive");
  const auto violations = mc::validate(data);
  if (!violations.empty()) throw mc::Error(mc::ErrorKind::kShapeMismatch, violations.front().message);
  const mc::Layout layout = mc::make_layout(data);
  const mc::ChainOptions options{a.store_samples, a.align_cost == "theta" ? mc::AlignCost::kTheta
                                                                          : mc::AlignCost::kThetaTendencies};

  io::ModelFile model;
  model.dataset_digest = io::dataset_digest(file.assembled);
  model.dim = data.dim;
  model.num_students = data.num_students;
  model.num_questions = data.num_questions;
  model.student_ids = file.assembled.student_ids;
  model.question_ids = file.assembled.question_ids;
  model.cells = layout.cells;
  model.hyperparams = hp;
  model.chains.resize(a.chains);
  // Chain c draws from derive_seed(seed, {c}).
  mc::detail::parallel_for(a.chains, a.threads, [&](int c) {
    model.chains[c] = mc::run_chain(layout, hp, mc::derive_seed(a.seed, {static_cast<std::uint32_t>(c)}), options);
  });
  const json config = {{"seed", a.seed},
                       {"chains", a.chains},
                       {"store_samples", a.store_samples},
                       {"align_cost", a.align_cost},
                       {"hyperparams", io::to_json(hp)}};
  model.provenance = io::provenance("train", config, {{"dataset", input_entry(a.dataset)}});
  io::write_json(a.out, io::model_to_json(model));

  for (int c = 0; c < a.chains; ++c) {
    const auto& chain = model.chains[c];
    std::cout << "chain " << c << ": " << hp.T << " iterations, final log L "
              << format_fixed(chain.trace.back(), 3) << ", reference iteration "
              << hp.burn_in + chain.reference_index << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

const mc::ChainResult& pick_chain(const io::ModelFile& model, int index) {
  if (index < 0 || index >= static_cast<int>(model.chains.size())) {
    throw mc::Error(mc::ErrorKind::kInvalidConfig, "model has " + std::to_string(model.chains.size()) +
                                                       " chains; --chain " + std::to_string(index) + " is out of range");
  }
  return model.chains[index];
}

int index_of(const std::vector<std::string>& ids, const std::string& id) {
  const auto it = std::find(ids.begin(), ids.end(), id);
  return it == ids.end() ? -1 : static_cast<int>(it - ids.begin());
}

struct PredictArgs {
  std::string model, dataset, responses, word_vectors, features, stopwords = MISCONCEPTION_DEFAULT_STOPWORDS, out;
  double threshold = 0.5;
  int chain = 0;
  bool averaged = false;
  bool normalize = false;
};

int run_predict(const PredictArgs& a) {
  const auto model = io::load_model(a.model);
  const auto& chain = pick_chain(model, a.chain);
  json inputs = {{"model", input_entry(a.model)}};

  struct Item {
    std::string student_id, question_id;
    mc::Vec f;
    int label;
  };
  std::vector<Item> items;
  if (!a.dataset.empty()) {
    inputs["dataset"] = input_entry(a.dataset);
    const auto file = io::load_dataset(a.dataset);
    const auto& d = file.assembled.data;
    for (const auto& [cell, label] : d.labels) {
      items.push_back({file.assembled.student_ids[cell.student], file.assembled.question_ids[cell.question],
                       d.features.at(cell), label});
    }
  } else {
    inputs["responses"] = input_entry(a.responses);
    const auto raw = mc::load_responses(a.responses, false);
    const auto features = embed_or_load(raw, a.word_vectors, a.features, a.stopwords, a.normalize, inputs);
    for (const auto& r : raw) {
      const auto it = features.find({r.student_id, r.question_id});
      if (it == features.end()) {
        throw mc::Error(mc::ErrorKind::kMissingFeature,
                        "no feature vector for student " + r.student_id + ", question " + r.question_id);
      }
      items.push_back({r.student_id, r.question_id, it->second, r.label});
    }
  }
  for (const auto& item : items) {
    if (item.f.size() != model.dim) {
      throw mc::Error(mc::ErrorKind::kDimensionMismatch, "input features have dimension " +
                                                             std::to_string(item.f.size()) + ", model expects " +
                                                             std::to_string(model.dim));
    }
  }
  if (a.averaged && chain.samples.empty()) {
    throw mc::Error(mc::ErrorKind::kInvalidConfig, "--averaged needs a model trained with --store-samples");
  }

  const mc::Layout training = model.training_layout();
  const mc::PointEstimates params = mc::point_estimates(chain.posterior, training, model.hyperparams);
  std::ofstream file_out;
  if (!a.out.empty()) file_out = open_output(a.out);
  std::ostream& out = a.out.empty() ? std::cout : file_out;
  const json config = {{"threshold", a.threshold}, {"chain", a.chain}, {"averaged", a.averaged}};
  out << json{{"provenance", io::provenance("predict", config, inputs)}}.dump() << '\n';
  for (const auto& item : items) {
    const mc::Cell pair{index_of(model.question_ids, item.question_id), index_of(model.student_ids, item.student_id)};
    const mc::Prediction p = a.averaged
                                 ? mc::predict_averaged(item.f, pair, chain.samples, training, model.hyperparams,
                                                        a.threshold)
                                 : mc::predict(item.f, pair, params, a.threshold);
    json row = {{"student_id", item.student_id},
                {"question_id", item.question_id},
                {"prob_misconception", p.prob_misconception},
                {"hard_label", p.hard_label},
                {"per_k_prob", io::to_json(p.per_k_prob)}};
    if (item.label >= 0) row["label"] = item.label;
    out << row.dump() << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct ClustersArgs {
  std::string model, dataset, out;
  double threshold = 0.5;
  int chain = 0;
  int top = 20;
};

int run_clusters(const ClustersArgs& a) {
  const auto model = io::load_model(a.model);
  const auto& chain = pick_chain(model, a.chain);
  const auto file = io::load_dataset(a.dataset);
  if (io::dataset_digest(file.assembled) != model.dataset_digest) {
    throw mc::Error(mc::ErrorKind::kInvalidConfig, "dataset " + a.dataset + " is not the one the model was trained on");
  }
  const mc::Layout layout = mc::make_layout(file.assembled.data);
  const auto report = mc::build_cluster_report(layout, chain.posterior, a.threshold, &file.assembled.texts);

  json clusters = json::array();
  for (std::size_t k = 0; k < report.clusters.size(); ++k) {
    const auto& members = report.clusters[k];
    std::cout << "misconception " << k + 1 << ": " << members.size() << " responses\n";
    json rows = json::array();
    for (std::size_t m = 0; m < members.size(); ++m) {
      const auto& member = members[m];
      const std::string& sid = file.assembled.student_ids[member.pair.student];
      const std::string& qid = file.assembled.question_ids[member.pair.question];
      json row = {{"student_id", sid}, {"question_id", qid}, {"frequency", member.frequency}};
      if (member.text) row["text"] = *member.text;
      rows.push_back(std::move(row));
      if (a.top > 0 && static_cast<int>(m) >= a.top) continue;
      std::cout << "  " << format_fixed(member.frequency, 2) << "  " << sid << " / " << qid;
      if (member.text) std::cout << "  \"" << *member.text << '"';
      std::cout << '\n';
    }
    if (a.top > 0 && static_cast<int>(members.size()) > a.top) {
      std::cout << "  ... " << members.size() - a.top << " more\n";
    }
    clusters.push_back({{"k", k}, {"members", std::move(rows)}});
  }
  if (!a.out.empty()) {
    const json config = {{"threshold", a.threshold}, {"chain", a.chain}};
    io::write_json(a.out, {{"threshold", a.threshold},
                           {"clusters", std::move(clusters)},
                           {"provenance", io::provenance("clusters", config,
                                                         {{"model", input_entry(a.model)},
                                                          {"dataset", input_entry(a.dataset)}})}});
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string dataset, out, runs;
  HyperFlags hyper;
  std::vector<int> k_sweep;
  std::uint64_t seed = 0;
  int folds = 5;
  int repetitions = 20;
  int threads = 1;
  double threshold = 0.5;
  std::string split = "cell";
};

int run_eval(const EvalArgs& a) {
  const auto file = io::load_dataset(a.dataset);
  const auto& data = file.assembled.data;
  std::vector<int> Ks = a.k_sweep.empty() ? std::vector<int>{a.hyper.K} : a.k_sweep;
  HyperFlags flags = a.hyper;
  mc::Hyperparams base;
  for (int K : Ks) {  // every K is checked before any chain runs
    flags.K = K;
    base = flags.build(data.dim);
  }
  const mc::EvalConfig config{a.folds, a.repetitions, a.seed, a.threshold,
                              a.split == "student" ? mc::SplitUnit::kStudent : mc::SplitUnit::kCell, a.threads};
  const auto rows = mc::k_sweep(data, base, Ks, config);
  const std::string table = mc::format_metrics_table(rows);
  std::cout << table;
  for (const auto& row : rows) {
    for (const auto& w : row.metrics.warnings) std::cerr << "warning: K=" << row.K << ": " << w << '\n';
  }

  json cfg = {{"seed", a.seed},          {"folds", a.folds},         {"repetitions", a.repetitions},
              {"threshold", a.threshold}, {"split", a.split},         {"K_values", Ks},
              {"hyperparams", io::to_json(base)}};
  const json prov = io::provenance("eval", cfg, {{"dataset", input_entry(a.dataset)}});
  if (!a.out.empty()) {
    auto out = open_output(a.out);
    out << "# provenance: " << prov.dump() << '\n' << table;
  }
  if (!a.runs.empty()) {
    auto out = open_output(a.runs);
    out << json{{"provenance", prov}}.dump() << '\n';
    for (const auto& row : rows) {
      for (const auto& run : row.metrics.runs) {
        out << json{{"K", row.K},
                    {"repetition", run.repetition},
                    {"num_test", run.num_test},
                    {"acc", run.acc},
                    {"auc", run.auc ? json(*run.auc) : json(nullptr)}}
                   .dump()
            << '\n';
      }
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  mc::SynthConfig config;
  std::uint64_t seed = 0;
  std::string out, truth_out;
};

int run_synth(const SynthArgs& a) {
  mc::Rng rng(a.seed);
  const auto result = mc::generate(a.config, rng);
  io::DatasetFile file;
  file.assembled.data = result.data;
  for (int j = 0; j < a.config.num_students; ++j) {
    file.assembled.student_ids.push_back(padded_ids("s", j, a.config.num_students));
  }
  for (int i = 0; i < a.config.num_questions; ++i) {
    file.assembled.question_ids.push_back(padded_ids("q", i, a.config.num_questions));
  }
  const json config = {{"seed", a.seed},
                       {"N", a.config.num_students},
                       {"Q", a.config.num_questions},
                       {"K", a.config.K},
                       {"D", a.config.dim},
                       {"sparsity", a.config.sparsity},
                       {"separation", a.config.separation}};
  file.provenance = io::provenance("synth", config, json::object());
  io::write_json(a.out, io::dataset_to_json(file));
  if (!a.truth_out.empty()) io::write_json(a.truth_out, io::truth_to_json(result.truth, file.provenance));
  long positives = 0;
  for (const auto& [cell, label] : result.data.labels) positives += label;
  std::cout << "N=" << a.config.num_students << " Q=" << a.config.num_questions
            << " cells=" << result.data.labels.size() << " positive=" << positives << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct RecoverArgs {
  std::string model, truth, out;
  int chain = 0;
};

int run_recover(const RecoverArgs& a) {
  const auto model = io::load_model(a.model);
  const auto& chain = pick_chain(model, a.chain);
  const auto truth = io::truth_from_json(io::read_json(a.truth));
  if (truth.cells != model.cells) {
    throw mc::Error(mc::ErrorKind::kShapeMismatch, "ground truth and model cover different cells");
  }
  const auto r = mc::recovery_score(truth, chain.posterior);
  json report = {{"permutation", r.permutation.mapping},
                 {"cosine", r.cosine},
                 {"mean_cosine", r.mean_cosine},
                 {"rmse_c", r.rmse_c},
                 {"rmse_d", r.rmse_d},
                 {"p_agreement", r.p_agreement},
                 {"p_row_agreement", r.p_row_agreement}};
  std::cout << report.dump(1) << '\n';
  if (!a.out.empty()) {
    report["provenance"] =
        io::provenance("recover", {{"chain", a.chain}}, {{"model", input_entry(a.model)}, {"truth", input_entry(a.truth)}});
    io::write_json(a.out, report);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent misconception discovery from embedded student responses"};
  app.set_config("--config", "", "TOML or INI file of option values; command-line flags take precedence");
  app.require_subcommand(1);
  app.set_version_flag("--version", io::kToolVersion);

  IngestArgs ingest;
  auto* cmd_ingest = app.add_subcommand("ingest", "build a dataset file from labeled responses");
  cmd_ingest->add_option("--responses", ingest.responses, "responses (.tsv with header, or .jsonl)")
      ->required()
      ->check(CLI::ExistingFile);
  auto* wv = cmd_ingest->add_option("--word-vectors", ingest.word_vectors, "word-vector text file")
                 ->check(CLI::ExistingFile);
  auto* feat = cmd_ingest->add_option("--features", ingest.features, "precomputed feature vectors (.jsonl)")
                   ->check(CLI::ExistingFile);
  wv->excludes(feat);
  cmd_ingest->add_option("--stopwords", ingest.stopwords, "stopword list, one per line")
      ->capture_default_str()
      ->check(CLI::ExistingFile);
  cmd_ingest->add_option("--min-per-student", ingest.min_per_student)->capture_default_str();
  cmd_ingest->add_option("--min-per-question", ingest.min_per_question)->capture_default_str();
  cmd_ingest->add_flag("--normalize", ingest.normalize, "divide summed word vectors by the token count");
  cmd_ingest->add_option("--out", ingest.out, "dataset file to write")->required();
  cmd_ingest->callback([&] {
    if (ingest.word_vectors.empty() && ingest.features.empty()) {
      throw CLI::RequiredError("--word-vectors or --features");
    }
  });

  TrainArgs train;
  auto* cmd_train = app.add_subcommand("train", "run the Gibbs sampler on a dataset");
  cmd_train->add_option("--dataset", train.dataset)->required()->check(CLI::ExistingFile);
  train.hyper.add_to(cmd_train);
  cmd_train->add_option("--seed", train.seed, "random seed")->required();
  cmd_train->add_option("--chains", train.chains)->capture_default_str();
  cmd_train->add_option("--threads", train.threads, "worker threads")->capture_default_str();
  cmd_train->add_flag("--store-samples", train.store_samples, "keep every aligned post-burn-in sample");
  cmd_train->add_option("--align-cost", train.align_cost)
      ->check(CLI::IsMember({"theta", "theta-tendencies"}))
      ->capture_default_str();
  cmd_train->add_option("--out", train.out, "model file to write")->required();

  PredictArgs predict;
  auto* cmd_predict = app.add_subcommand("predict", "misconception probabilities for responses");
  cmd_predict->add_option("--model", predict.model)->required()->check(CLI::ExistingFile);
  auto* p_data = cmd_predict->add_option("--dataset", predict.dataset)->check(CLI::ExistingFile);
  auto* p_resp = cmd_predict->add_option("--responses", predict.responses)->check(CLI::ExistingFile);
  p_data->excludes(p_resp);
  auto* p_wv = cmd_predict->add_option("--word-vectors", predict.word_vectors)->check(CLI::ExistingFile);
  auto* p_feat = cmd_predict->add_option("--features", predict.features)->check(CLI::ExistingFile);
  p_wv->excludes(p_feat);
  cmd_predict->add_option("--stopwords", predict.stopwords)->capture_default_str()->check(CLI::ExistingFile);
  cmd_predict->add_flag("--normalize", predict.normalize);
  cmd_predict->add_option("--threshold", predict.threshold)->capture_default_str();
  cmd_predict->add_option("--chain", predict.chain)->capture_default_str();
  cmd_predict->add_flag("--averaged", predict.averaged, "average over stored samples instead of posterior means");
  cmd_predict->add_option("--out", predict.out, "JSON-lines output (default stdout)");
  cmd_predict->callback([&] {
    if (predict.dataset.empty() && predict.responses.empty()) throw CLI::RequiredError("--dataset or --responses");
    if (!predict.responses.empty() && predict.word_vectors.empty() && predict.features.empty()) {
      throw CLI::RequiredError("--word-vectors or --features");
    }
  });

  ClustersArgs clusters;
  auto* cmd_clusters = app.add_subcommand("clusters", "group training responses by misconception");
  cmd_clusters->add_option("--model", clusters.model)->required()->check(CLI::ExistingFile);
  cmd_clusters->add_option("--dataset", clusters.dataset)->required()->check(CLI::ExistingFile);
  cmd_clusters->add_option("--threshold", clusters.threshold, "membership threshold")->capture_default_str();
  cmd_clusters->add_option("--chain", clusters.chain)->capture_default_str();
  cmd_clusters->add_option("--top", clusters.top, "members listed per cluster on stdout (0 = all)")
      ->capture_default_str();
  cmd_clusters->add_option("--out", clusters.out, "JSON report");

  EvalArgs eval;
  auto* cmd_eval = app.add_subcommand("eval", "repeated K-fold cross-validation");
  cmd_eval->add_option("--dataset", eval.dataset)->required()->check(CLI::ExistingFile);
  eval.hyper.add_to(cmd_eval);
  cmd_eval->add_option("--k-sweep", eval.k_sweep, "comma-separated K values")->delimiter(',');
  cmd_eval->add_option("--seed", eval.seed)->required();
  cmd_eval->add_option("--folds", eval.folds)->capture_default_str();
  cmd_eval->add_option("--repetitions", eval.repetitions)->capture_default_str();
  cmd_eval->add_option("--threads", eval.threads)->capture_default_str();
  cmd_eval->add_option("--threshold", eval.threshold)->capture_default_str();
  cmd_eval->add_option("--split", eval.split)->check(CLI::IsMember({"cell", "student"}))->capture_default_str();
  cmd_eval->add_option("--out", eval.out, "metrics table (tab-separated)");
  cmd_eval->add_option("--runs", eval.runs, "per-run metrics (JSON lines)");

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic dataset and its ground truth");
  cmd_synth->add_option("--N", synth.config.num_students, "students")->capture_default_str();
  cmd_synth->add_option("--Q", synth.config.num_questions, "questions")->capture_default_str();
  cmd_synth->add_option("--K", synth.config.K)->capture_default_str();
  cmd_synth->add_option("--D", synth.config.dim, "feature dimension")->capture_default_str();
  cmd_synth->add_option("--sparsity", synth.config.sparsity)->capture_default_str();
  cmd_synth->add_option("--separation", synth.config.separation)->capture_default_str();
  cmd_synth->add_option("--seed", synth.seed)->required();
  cmd_synth->add_option("--out", synth.out, "dataset file")->required();
  cmd_synth->add_option("--truth-out", synth.truth_out, "ground-truth file");

  RecoverArgs recover;
  auto* cmd_recover = app.add_subcommand("recover", "score a model against synthetic ground truth");
  cmd_recover->add_option("--model", recover.model)->required()->check(CLI::ExistingFile);
  cmd_recover->add_option("--truth", recover.truth)->required()->check(CLI::ExistingFile);
  cmd_recover->add_option("--chain", recover.chain)->capture_default_str();
  cmd_recover->add_option("--out", recover.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*cmd_ingest) return run_ingest(ingest);
    if (*cmd_train) return run_train(train);
    if (*cmd_predict) return run_predict(predict);
    if (*cmd_clusters) return run_clusters(clusters);
    if (*cmd_eval) return run_eval(eval);
    if (*cmd_synth) return run_synth(synth);
    if (*cmd_recover) return run_recover(recover);
  } catch (const mc::Error& e) {
    std::cerr << "error: " << mc::to_string(e.kind()) << ": " << e.what() << '\n';
    return mc::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
