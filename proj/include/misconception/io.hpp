#pragma once

// JSON file artifacts exchanged between CLI stages: datasets, trained
// models and synthetic ground truth. Requires OpenSSL (libcrypto) for the
// SHA-256 content digests.

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "misconception/gibbs.hpp"
#include "misconception/ingest.hpp"
#include "misconception/synth.hpp"

namespace misconception::io {

using json = nlohmann::json;

inline constexpr const char* kDatasetFormat = "misconception-dataset";
inline constexpr const char* kModelFormat = "misconception-model";
inline constexpr const char* kTruthFormat = "misconception-truth";
inline constexpr int kFormatVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr);
  std::ostringstream out;
  for (unsigned int i = 0; i < length; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kParse, "cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::string file_digest(const std::string& path) { return sha256_hex(read_file(path)); }

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kParse, "cannot write file: " + path);
  out << contents;
}

inline json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParse, path + ": " + e.what());
  }
}

inline void write_json(const std::string& path, const json& j) { write_file(path, j.dump(1) + "\n"); }

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

/// Provenance block; created_at is the only non-reproducible field.
inline json provenance(const std::string& command, json config, json inputs) {
  return {{"tool", "misconception"},
          {"version", kToolVersion},
          {"command", command},
          {"config", std::move(config)},
          {"inputs", std::move(inputs)},
          {"created_at", utc_timestamp()}};
}

// Matrices are stored as arrays of rows.
inline json to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const Eigen::MatrixXi& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vec vec_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

template <class MatrixT = Mat>
MatrixT matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols) {
  MatrixT m(rows, cols);
  if (static_cast<Eigen::Index>(j.size()) != rows) {
    throw Error(ErrorKind::kParse, "matrix has " + std::to_string(j.size()) + " rows, expected " +
                                       std::to_string(rows));
  }
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) {
      throw Error(ErrorKind::kParse, "matrix row has wrong length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<typename MatrixT::Scalar>();
  }
  return m;
}

inline json cells_to_json(const std::vector<Cell>& cells) {
  json out = json::array();
  for (const Cell& cell : cells) out.push_back({cell.question, cell.student});
  return out;
}

inline std::vector<Cell> cells_from_json(const json& j) {
  std::vector<Cell> out;
  for (const auto& pair : j) out.push_back({pair.at(0).get<int>(), pair.at(1).get<int>()});
  return out;
}

// ---------------------------------------------------------------------------
// Dataset

struct DatasetFile {
  AssembledData assembled;
  json provenance;
};

/// Dataset content without provenance.
inline json dataset_body(const AssembledData& a) {
  const ObservedData& d = a.data;
  json cells = json::array();
  for (const auto& [cell, label] : d.labels) {
    json row = {{"question", cell.question},
                {"student", cell.student},
                {"label", label},
                {"features", to_json(d.features.at(cell))}};
    if (auto it = a.texts.find(cell); it != a.texts.end()) row["text"] = it->second;
    cells.push_back(std::move(row));
  }
  return {{"format", kDatasetFormat},
          {"version", kFormatVersion},
          {"num_students", d.num_students},
          {"num_questions", d.num_questions},
          {"dim", d.dim},
          {"student_ids", a.student_ids},
          {"question_ids", a.question_ids},
          {"cells", std::move(cells)}};
}

inline std::string dataset_digest(const AssembledData& a) { return sha256_hex(dataset_body(a).dump()); }

inline json dataset_to_json(const DatasetFile& file) {
  json j = dataset_body(file.assembled);
  j["provenance"] = file.provenance;
  return j;
}

inline DatasetFile dataset_from_json(const json& j) {
  if (j.value("format", "") != kDatasetFormat) {
    throw Error(ErrorKind::kParse, "not a dataset file (format field)");
  }
  DatasetFile file;
  AssembledData& a = file.assembled;
  try {
    a.data.num_students = j.at("num_students").get<int>();
    a.data.num_questions = j.at("num_questions").get<int>();
    a.data.dim = j.at("dim").get<int>();
    a.student_ids = j.at("student_ids").get<std::vector<std::string>>();
    a.question_ids = j.at("question_ids").get<std::vector<std::string>>();
    for (const auto& row : j.at("cells")) {
      const Cell cell{row.at("question").get<int>(), row.at("student").get<int>()};
      a.data.labels[cell] = row.at("label").get<int>();
      a.data.features[cell] = vec_from_json(row.at("features"));
      if (row.contains("text")) a.texts[cell] = row["text"].get<std::string>();
    }
    file.provenance = j.value("provenance", json::object());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("malformed dataset file: ") + e.what());
  }
  if (static_cast<int>(a.student_ids.size()) != a.data.num_students ||
      static_cast<int>(a.question_ids.size()) != a.data.num_questions) {
    throw Error(ErrorKind::kParse, "dataset id lists do not match its dimensions");
  }
  return file;
}

inline DatasetFile load_dataset(const std::string& path) { return dataset_from_json(read_json(path)); }

// ---------------------------------------------------------------------------
// Hyperparameters and chain results

inline json to_json(const Hyperparams& hp) {
  return {{"K", hp.K},
          {"mu_gamma", to_json(hp.mu_gamma)},
          {"Sigma_gamma", to_json(hp.Sigma_gamma)},
          {"mu_theta", to_json(hp.mu_theta)},
          {"Sigma_theta", to_json(hp.Sigma_theta)},
          {"h_F", hp.h_F},
          {"V_F", to_json(hp.V_F)},
          {"mu_c", hp.mu_c},
          {"sigma_c2", hp.sigma_c2},
          {"mu_d", hp.mu_d},
          {"sigma_d2", hp.sigma_d2},
          {"T", hp.T},
          {"burn_in", hp.burn_in}};
}

inline Hyperparams hyperparams_from_json(const json& j) {
  Hyperparams hp;
  hp.K = j.at("K").get<int>();
  hp.mu_gamma = vec_from_json(j.at("mu_gamma"));
  const auto D = hp.mu_gamma.size();
  hp.Sigma_gamma = matrix_from_json(j.at("Sigma_gamma"), D, D);
  hp.mu_theta = vec_from_json(j.at("mu_theta"));
  hp.Sigma_theta = matrix_from_json(j.at("Sigma_theta"), D, D);
  hp.h_F = j.at("h_F").get<double>();
  hp.V_F = matrix_from_json(j.at("V_F"), D, D);
  hp.mu_c = j.at("mu_c").get<double>();
  hp.sigma_c2 = j.at("sigma_c2").get<double>();
  hp.mu_d = j.at("mu_d").get<double>();
  hp.sigma_d2 = j.at("sigma_d2").get<double>();
  hp.T = j.at("T").get<int>();
  hp.burn_in = j.at("burn_in").get<int>();
  return hp;
}

inline json to_json(const PosteriorSummary& p) {
  return {{"gamma", to_json(Mat(p.gamma.transpose()))},  // Q rows of length dim
          {"theta", to_json(Mat(p.theta.transpose()))},  // K rows of length dim
          {"Sigma_F", to_json(p.Sigma_F)},
          {"c", to_json(p.c)},
          {"d", to_json(p.d)},
          {"p_freq", to_json(p.p_freq)}};
}

inline PosteriorSummary posterior_from_json(const json& j, int dim, int K, int N, int Q, int cells) {
  PosteriorSummary p;
  p.gamma = matrix_from_json(j.at("gamma"), Q, dim).transpose();
  p.theta = matrix_from_json(j.at("theta"), K, dim).transpose();
  p.Sigma_F = matrix_from_json(j.at("Sigma_F"), dim, dim);
  p.c = matrix_from_json(j.at("c"), K, N);
  p.d = matrix_from_json(j.at("d"), Q, K);
  p.p_freq = matrix_from_json(j.at("p_freq"), cells, K);
  return p;
}

inline json to_json(const LatentState& s) {
  return {{"gamma", to_json(Mat(s.gamma.transpose()))},
          {"theta", to_json(Mat(s.theta.transpose()))},
          {"Sigma_F", to_json(s.Sigma_F)},
          {"c", to_json(s.c)},
          {"d", to_json(s.d)},
          {"P", to_json(s.P)}};
}

inline LatentState state_from_json(const json& j, int dim, int K, int N, int Q, int cells) {
  LatentState s;
  s.gamma = matrix_from_json(j.at("gamma"), Q, dim).transpose();
  s.theta = matrix_from_json(j.at("theta"), K, dim).transpose();
  s.Sigma_F = matrix_from_json(j.at("Sigma_F"), dim, dim);
  s.c = matrix_from_json(j.at("c"), K, N);
  s.d = matrix_from_json(j.at("d"), Q, K);
  s.P = matrix_from_json<Eigen::MatrixXi>(j.at("P"), cells, K);
  s.z = Mat::Zero(cells, K);
  return s;
}

// ---------------------------------------------------------------------------
// Model

struct ModelFile {
  std::string dataset_digest;
  int dim = 0;
  int num_students = 0;
  int num_questions = 0;
  std::vector<std::string> student_ids;
  std::vector<std::string> question_ids;
  std::vector<Cell> cells;  // training cells, row order of p_freq
  Hyperparams hyperparams;
  std::vector<ChainResult> chains;
  json provenance;

  /// Layout carrying only the index structure of the training cells.
  Layout training_layout() const {
    Layout l;
    l.num_students = num_students;
    l.num_questions = num_questions;
    l.dim = dim;
    l.cells = cells;
    l.features = Mat::Zero(dim, static_cast<Eigen::Index>(cells.size()));
    l.labels.assign(cells.size(), 0);
    l.by_question.resize(num_questions);
    l.by_student.resize(num_students);
    for (int n = 0; n < static_cast<int>(cells.size()); ++n) {
      l.by_question[cells[n].question].push_back(n);
      l.by_student[cells[n].student].push_back(n);
    }
    return l;
  }
};

inline json model_to_json(const ModelFile& m) {
  json chains = json::array();
  for (const ChainResult& c : m.chains) {
    json perms = json::array();
    for (const auto& p : c.permutations) perms.push_back(p.mapping);
    json chain = {{"seed", c.seed},
                  {"reference_index", c.reference_index},
                  {"trace", c.trace},
                  {"log_likelihoods", c.log_likelihoods},
                  {"permutations", std::move(perms)},
                  {"posterior", to_json(c.posterior)}};
    if (!c.samples.empty()) {
      json samples = json::array();
      for (const auto& s : c.samples) samples.push_back(to_json(s));
      chain["samples"] = std::move(samples);
    }
    chains.push_back(std::move(chain));
  }
  return {{"format", kModelFormat},
          {"version", kFormatVersion},
          {"dataset_digest", m.dataset_digest},
          {"dim", m.dim},
          {"num_students", m.num_students},
          {"num_questions", m.num_questions},
          {"student_ids", m.student_ids},
          {"question_ids", m.question_ids},
          {"cells", cells_to_json(m.cells)},
          {"hyperparams", to_json(m.hyperparams)},
          {"chains", std::move(chains)},
          {"provenance", m.provenance}};
}

inline ModelFile model_from_json(const json& j) {
  if (j.value("format", "") != kModelFormat) throw Error(ErrorKind::kParse, "not a model file (format field)");
  ModelFile m;
  try {
    m.dataset_digest = j.at("dataset_digest").get<std::string>();
    m.dim = j.at("dim").get<int>();
    m.num_students = j.at("num_students").get<int>();
    m.num_questions = j.at("num_questions").get<int>();
    m.student_ids = j.at("student_ids").get<std::vector<std::string>>();
    m.question_ids = j.at("question_ids").get<std::vector<std::string>>();
    m.cells = cells_from_json(j.at("cells"));
    m.hyperparams = hyperparams_from_json(j.at("hyperparams"));
    m.provenance = j.value("provenance", json::object());
    const int K = m.hyperparams.K;
    const int n_cells = static_cast<int>(m.cells.size());
    for (const auto& jc : j.at("chains")) {
      ChainResult c;
      c.seed = jc.at("seed").get<std::uint64_t>();
      c.hyperparams = m.hyperparams;
      c.reference_index = jc.at("reference_index").get<std::size_t>();
      c.trace = jc.at("trace").get<std::vector<double>>();
      c.log_likelihoods = jc.at("log_likelihoods").get<std::vector<double>>();
      for (const auto& p : jc.at("permutations")) c.permutations.push_back({p.get<std::vector<int>>()});
      c.posterior = posterior_from_json(jc.at("posterior"), m.dim, K, m.num_students, m.num_questions, n_cells);
      if (jc.contains("samples")) {
        for (const auto& s : jc["samples"]) {
          c.samples.push_back(state_from_json(s, m.dim, K, m.num_students, m.num_questions, n_cells));
        }
      }
      m.chains.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("malformed model file: ") + e.what());
  }
  return m;
}

inline ModelFile load_model(const std::string& path) { return model_from_json(read_json(path)); }

// ---------------------------------------------------------------------------
// Ground truth

inline json truth_to_json(const GroundTruth& t, const json& prov) {
  return {{"format", kTruthFormat},
          {"version", kFormatVersion},
          {"dim", t.theta.rows()},
          {"K", t.K()},
          {"num_students", t.c.cols()},
          {"num_questions", t.d.rows()},
          {"gamma", to_json(Mat(t.gamma.transpose()))},
          {"theta", to_json(Mat(t.theta.transpose()))},
          {"Sigma_F", to_json(t.Sigma_F)},
          {"c", to_json(t.c)},
          {"d", to_json(t.d)},
          {"cells", cells_to_json(t.cells)},
          {"P", to_json(t.P)},
          {"M", t.M},
          {"provenance", prov}};
}

inline GroundTruth truth_from_json(const json& j) {
  if (j.value("format", "") != kTruthFormat) throw Error(ErrorKind::kParse, "not a ground-truth file");
  GroundTruth t;
  try {
    const int dim = j.at("dim").get<int>();
    const int K = j.at("K").get<int>();
    const int N = j.at("num_students").get<int>();
    const int Q = j.at("num_questions").get<int>();
    t.gamma = matrix_from_json(j.at("gamma"), Q, dim).transpose();
    t.theta = matrix_from_json(j.at("theta"), K, dim).transpose();
    t.Sigma_F = matrix_from_json(j.at("Sigma_F"), dim, dim);
    t.c = matrix_from_json(j.at("c"), K, N);
    t.d = matrix_from_json(j.at("d"), Q, K);
    t.cells = cells_from_json(j.at("cells"));
    t.P = matrix_from_json<Eigen::MatrixXi>(j.at("P"), static_cast<Eigen::Index>(t.cells.size()), K);
    t.M = j.at("M").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("malformed ground-truth file: ") + e.what());
  }
  return t;
}

}  // namespace misconception::io
