#pragma once

// Loading response corpora, word vectors and precomputed features, bag of
// words embedding, minimum-activity trimming and assembly into
// ObservedData.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "misconception/errors.hpp"
#include "misconception/model.hpp"

namespace misconception {

struct RawResponse {
  std::string student_id;
  std::string question_id;
  std::string text;
  int label = 0;  // -1 when unlabeled
};

/// (student_id, question_id)
using ResponseKey = std::pair<std::string, std::string>;

struct WordVectorTable {
  int dim = 0;
  std::unordered_map<std::string, Vec> vectors;
};

namespace detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kParse, "cannot open file: " + path);
  return in;
}

inline std::string where(const std::string& path, int line) {
  return path + ":" + std::to_string(line) + ": ";
}

inline std::string lowercase(std::string s) {
  for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

inline bool parse_real(std::string_view token, double& out) {
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

inline std::vector<std::string> split_whitespace(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(std::move(tok));
  return out;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline int parse_label(const nlohmann::json& value, const std::string& context) {
  if (value.is_number_integer() && (value.get<int>() == 0 || value.get<int>() == 1)) {
    return value.get<int>();
  }
  if (value.is_string() && (value == "0" || value == "1")) return value == "1" ? 1 : 0;
  throw Error(ErrorKind::kParse, context + "label must be 0 or 1, got " + value.dump());
}

}  // namespace detail

/// Lowercase, split on runs of non-alphanumeric ASCII, drop stopwords.
/// Bytes outside ASCII are kept inside tokens.
inline std::vector<std::string> tokenize(std::string_view text, const std::set<std::string>& stopwords) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty() && !stopwords.contains(current)) tokens.push_back(current);
    current.clear();
  };
  for (char ch : text) {
    const auto byte = static_cast<unsigned char>(ch);
    if (byte >= 0x80 || std::isalnum(byte)) {
      current.push_back(static_cast<char>(std::tolower(byte)));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

inline std::set<std::string> load_stopwords(const std::string& path) {
  auto in = detail::open_input(path);
  std::set<std::string> words;
  for (std::string line; std::getline(in, line);) {
    for (auto& tok : detail::split_whitespace(line)) words.insert(detail::lowercase(tok));
  }
  return words;
}

/// Text format: token followed by dim reals per line. A leading
/// "<count> <dim>" header line, as written by word2vec, is skipped.
inline WordVectorTable load_word_vectors(const std::string& path) {
  auto in = detail::open_input(path);
  WordVectorTable table;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    auto fields = detail::split_whitespace(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2) {
      double a = 0, b = 0;
      if (detail::parse_real(fields[0], a) && detail::parse_real(fields[1], b)) continue;
    }
    if (fields.size() < 2) {
      throw Error(ErrorKind::kParse, detail::where(path, line_no) + "expected token and values");
    }
    const int dim = static_cast<int>(fields.size()) - 1;
    if (table.dim == 0) table.dim = dim;
    if (dim != table.dim) {
      throw Error(ErrorKind::kDimensionMismatch,
                  detail::where(path, line_no) + "vector has " + std::to_string(dim) +
                      " values, expected " + std::to_string(table.dim));
    }
    Vec v(dim);
    for (int d = 0; d < dim; ++d) {
      if (!detail::parse_real(fields[d + 1], v(d))) {
        throw Error(ErrorKind::kParse, detail::where(path, line_no) + "bad number '" + fields[d + 1] + "'");
      }
    }
    table.vectors.try_emplace(detail::lowercase(fields[0]), std::move(v));
  }
  if (table.vectors.empty()) throw Error(ErrorKind::kParse, path + ": no word vectors");
  return table;
}

struct Embedding {
  Vec vector;
  int num_tokens = 0;
  int num_oov = 0;
  bool all_oov = false;  // set when tokens were present but none was known
};

/// Sum of the word vectors of in-vocabulary tokens. With normalize, the
/// sum is divided by the number of in-vocabulary tokens.
inline Embedding embed_sum(const std::vector<std::string>& tokens, const WordVectorTable& table,
                           int dim, bool normalize = false) {
  if (table.dim != dim) {
    throw Error(ErrorKind::kDimensionMismatch, "word vectors have dimension " +
                                                   std::to_string(table.dim) + ", model expects " +
                                                   std::to_string(dim));
  }
  Embedding e;
  e.vector = Vec::Zero(dim);
  e.num_tokens = static_cast<int>(tokens.size());
  for (const auto& tok : tokens) {
    auto it = table.vectors.find(tok);
    if (it == table.vectors.end()) {
      ++e.num_oov;
      continue;
    }
    e.vector += it->second;
  }
  const int known = e.num_tokens - e.num_oov;
  e.all_oov = e.num_tokens > 0 && known == 0;
  if (normalize && known > 0) e.vector /= static_cast<double>(known);
  return e;
}

/// Tab-separated with a header naming student_id, question_id, text and
/// label (any column order), or JSON lines when the path ends in .jsonl.
/// With require_label false the label may be absent and is stored as -1.
inline std::vector<RawResponse> load_responses(const std::string& path, bool require_label = true) {
  auto in = detail::open_input(path);
  std::vector<RawResponse> out;
  std::set<ResponseKey> seen;
  auto add = [&](RawResponse r, int line_no) {
    if (r.student_id.empty() || r.question_id.empty()) {
      throw Error(ErrorKind::kParse, detail::where(path, line_no) + "empty student_id or question_id");
    }
    if (!seen.emplace(r.student_id, r.question_id).second) {
      throw Error(ErrorKind::kParse, detail::where(path, line_no) + "duplicate response for student " +
                                         r.student_id + ", question " + r.question_id);
    }
    out.push_back(std::move(r));
  };

  int line_no = 0;
  if (detail::ends_with(path, ".jsonl")) {
    for (std::string line; std::getline(in, line);) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const std::string ctx = detail::where(path, line_no);
      nlohmann::json row;
      try {
        row = nlohmann::json::parse(line);
        RawResponse r{row.at("student_id").get<std::string>(), row.at("question_id").get<std::string>(),
                      row.value("text", std::string{}),
                      row.contains("label") || require_label ? detail::parse_label(row.at("label"), ctx) : -1};
        add(std::move(r), line_no);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::kParse, ctx + e.what());
      }
    }
    return out;
  }

  std::string header;
  if (!std::getline(in, header)) throw Error(ErrorKind::kParse, path + ": empty file");
  ++line_no;
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const auto names = detail::split_tabs(header);
  std::map<std::string, std::size_t> column;
  for (std::size_t c = 0; c < names.size(); ++c) column[names[c]] = c;
  for (const char* required : {"student_id", "question_id", "text", "label"}) {
    if (!column.contains(required) && (require_label || std::string_view(required) != "label")) {
      throw Error(ErrorKind::kParse, path + ": header lacks column '" + required + "'");
    }
  }
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_tabs(line);
    if (fields.size() != names.size()) {
      throw Error(ErrorKind::kParse, detail::where(path, line_no) + "expected " +
                                         std::to_string(names.size()) + " fields, got " +
                                         std::to_string(fields.size()));
    }
    const std::string label = column.contains("label") ? fields[column["label"]] : "";
    if (label.empty() && !require_label) {
      add({fields[column["student_id"]], fields[column["question_id"]], fields[column["text"]], -1}, line_no);
      continue;
    }
    if (label != "0" && label != "1") {
      throw Error(ErrorKind::kParse, detail::where(path, line_no) + "label must be 0 or 1, got '" + label + "'");
    }
    add({fields[column["student_id"]], fields[column["question_id"]], fields[column["text"]],
         label == "1" ? 1 : 0},
        line_no);
  }
  return out;
}

/// JSON lines of {student_id, question_id, vector}.
inline std::map<ResponseKey, Vec> load_precomputed(const std::string& path) {
  auto in = detail::open_input(path);
  std::map<ResponseKey, Vec> out;
  int dim = 0;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string ctx = detail::where(path, line_no);
    ResponseKey key;
    std::vector<double> values;
    try {
      const auto row = nlohmann::json::parse(line);
      key = {row.at("student_id").get<std::string>(), row.at("question_id").get<std::string>()};
      values = row.at("vector").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kParse, ctx + e.what());
    }
    if (values.empty()) throw Error(ErrorKind::kParse, ctx + "empty vector");
    if (dim == 0) dim = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != dim) {
      throw Error(ErrorKind::kParse, ctx + "row has " + std::to_string(values.size()) +
                                         " values, expected " + std::to_string(dim));
    }
    if (out.contains(key)) {
      throw Error(ErrorKind::kParse, ctx + "duplicate entry for student " + key.first +
                                         ", question " + key.second);
    }
    out.emplace(std::move(key), Eigen::Map<const Vec>(values.data(), dim));
  }
  return out;
}

/// Repeatedly drops students answering fewer than min_per_student questions
/// and questions with fewer than min_per_question responses until neither
/// rule removes anything.
inline std::vector<RawResponse> trim(std::vector<RawResponse> raw, int min_per_student = 5,
                                     int min_per_question = 5) {
  for (;;) {
    std::map<std::string, int> per_student, per_question;
    for (const auto& r : raw) {
      ++per_student[r.student_id];
      ++per_question[r.question_id];
    }
    const auto before = raw.size();
    std::erase_if(raw, [&](const RawResponse& r) {
      return per_student[r.student_id] < min_per_student ||
             per_question[r.question_id] < min_per_question;
    });
    if (raw.size() == before) break;
  }
  if (raw.empty()) throw Error(ErrorKind::kEmptyAfterTrim, "no responses survive trimming");
  return raw;
}

/// ObservedData plus the id maps needed to report results.
struct AssembledData {
  ObservedData data;
  std::vector<std::string> student_ids;   // index -> id
  std::vector<std::string> question_ids;  // index -> id
  std::map<Cell, std::string> texts;
};

/// Indices are assigned in sorted id order.
inline AssembledData assemble(const std::vector<RawResponse>& raw,
                              const std::map<ResponseKey, Vec>& features) {
  AssembledData out;
  std::set<std::string> students, questions;
  for (const auto& r : raw) {
    students.insert(r.student_id);
    questions.insert(r.question_id);
  }
  out.student_ids.assign(students.begin(), students.end());
  out.question_ids.assign(questions.begin(), questions.end());
  std::map<std::string, int> student_index, question_index;
  for (int j = 0; j < static_cast<int>(out.student_ids.size()); ++j) student_index[out.student_ids[j]] = j;
  for (int i = 0; i < static_cast<int>(out.question_ids.size()); ++i) question_index[out.question_ids[i]] = i;

  ObservedData& data = out.data;
  data.num_students = static_cast<int>(students.size());
  data.num_questions = static_cast<int>(questions.size());
  for (const auto& r : raw) {
    auto it = features.find({r.student_id, r.question_id});
    if (it == features.end()) {
      throw Error(ErrorKind::kMissingFeature, "no feature vector for student " + r.student_id +
                                                  ", question " + r.question_id);
    }
    if (data.dim == 0) data.dim = static_cast<int>(it->second.size());
    if (it->second.size() != data.dim) {
      throw Error(ErrorKind::kDimensionMismatch, "feature vector for student " + r.student_id +
                                                     ", question " + r.question_id +
                                                     " has inconsistent dimension");
    }
    const Cell cell{question_index[r.question_id], student_index[r.student_id]};
    data.features[cell] = it->second;
    data.labels[cell] = r.label;
    if (!r.text.empty()) out.texts[cell] = r.text;
  }
  return out;
}

struct EmbedSummary {
  std::map<ResponseKey, Vec> features;
  int num_all_oov = 0;
  int num_oov_tokens = 0;
};

inline EmbedSummary embed_responses(const std::vector<RawResponse>& raw, const WordVectorTable& table,
                                    const std::set<std::string>& stopwords, bool normalize = false) {
  EmbedSummary out;
  for (const auto& r : raw) {
    Embedding e = embed_sum(tokenize(r.text, stopwords), table, table.dim, normalize);
    out.num_oov_tokens += e.num_oov;
    if (e.all_oov || e.num_tokens == 0) ++out.num_all_oov;
    out.features.emplace(ResponseKey{r.student_id, r.question_id}, std::move(e.vector));
  }
  return out;
}

}  // namespace misconception
