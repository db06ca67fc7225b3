#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "misconception/io.hpp"
#include "test_support.hpp"

namespace mc = misconception;
namespace io = misconception::io;
namespace fs = std::filesystem;

namespace {

TEST(Digest, KnownSha256) {
  EXPECT_EQ(io::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(io::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

mc::AssembledData assembled(std::uint64_t seed) {
  mc::SynthConfig cfg;
  cfg.num_students = 7;
  cfg.num_questions = 5;
  cfg.dim = 3;
  cfg.sparsity = 0.7;
  mc::Rng rng(seed);
  mc::AssembledData a;
  a.data = mc::generate(cfg, rng).data;
  for (int j = 0; j < 7; ++j) a.student_ids.push_back("s" + std::to_string(j));
  for (int i = 0; i < 5; ++i) a.question_ids.push_back("q" + std::to_string(i));
  a.texts[a.data.labels.begin()->first] = "The sun \"quoted\"\ttab";
  return a;
}

TEST(DatasetFile, RoundTripIsExact) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = assembled(seed);
    const io::DatasetFile file{a, io::provenance("test", {{"seed", seed}}, io::json::object())};
    const auto text = io::dataset_to_json(file).dump(1);
    const auto back = io::dataset_from_json(io::json::parse(text));
    EXPECT_EQ(back.assembled.data.features, a.data.features);
    EXPECT_EQ(back.assembled.data.labels, a.data.labels);
    EXPECT_EQ(back.assembled.texts, a.texts);
    EXPECT_EQ(back.assembled.student_ids, a.student_ids);
    EXPECT_EQ(io::dataset_digest(back.assembled), io::dataset_digest(a));
  }
}

TEST(DatasetFile, DigestIgnoresProvenanceButNotContent) {
  auto a = assembled(1);
  const auto digest = io::dataset_digest(a);
  a.data.features.begin()->second(0) += 1e-12;
  EXPECT_NE(io::dataset_digest(a), digest);
}

TEST(DatasetFile, RejectsOtherFormats) {
  EXPECT_THROW(io::dataset_from_json({{"format", "misconception-model"}}), mc::Error);
  auto j = io::dataset_to_json({assembled(2), io::json::object()});
  j["student_ids"].erase(0);
  EXPECT_THROW(io::dataset_from_json(j), mc::Error);
}

TEST(Hyperparams, RoundTrip) {
  auto hp = mc::Hyperparams::defaults(3, 4);
  hp.mu_gamma(1) = 0.25;
  hp.V_F(0, 2) = hp.V_F(2, 0) = 0.1;
  hp.sigma_c2 = 2.5;
  hp.T = 123;
  const auto back = io::hyperparams_from_json(io::json::parse(io::to_json(hp).dump()));
  EXPECT_EQ(back.K, 4);
  EXPECT_EQ(back.mu_gamma, hp.mu_gamma);
  EXPECT_EQ(back.V_F, hp.V_F);
  EXPECT_EQ(back.sigma_c2, 2.5);
  EXPECT_EQ(back.T, 123);
  EXPECT_EQ(back.burn_in, hp.burn_in);
  EXPECT_EQ(back.h_F, hp.h_F);
}

TEST(ModelFile, RoundTripWithSamples) {
  const auto a = assembled(3);
  const auto layout = mc::make_layout(a.data);
  auto hp = mc::Hyperparams::defaults(3, 2);
  hp.T = 12;
  hp.burn_in = 8;
  io::ModelFile m;
  m.dataset_digest = io::dataset_digest(a);
  m.dim = 3;
  m.num_students = 7;
  m.num_questions = 5;
  m.student_ids = a.student_ids;
  m.question_ids = a.question_ids;
  m.cells = layout.cells;
  m.hyperparams = hp;
  m.chains.push_back(mc::run_chain(layout, hp, 4));
  m.chains.push_back(mc::run_chain(layout, hp, 5, {.store_samples = false}));
  const auto back = io::model_from_json(io::json::parse(io::model_to_json(m).dump(1)));
  ASSERT_EQ(back.chains.size(), 2u);
  const auto& c = back.chains[0];
  EXPECT_EQ(c.seed, 4u);
  EXPECT_EQ(c.trace, m.chains[0].trace);
  EXPECT_EQ(c.posterior.theta, m.chains[0].posterior.theta);
  EXPECT_EQ(c.posterior.gamma, m.chains[0].posterior.gamma);
  EXPECT_EQ(c.posterior.p_freq, m.chains[0].posterior.p_freq);
  ASSERT_EQ(c.samples.size(), 4u);
  EXPECT_EQ(c.samples[2].P, m.chains[0].samples[2].P);
  EXPECT_EQ(c.permutations[1].mapping, m.chains[0].permutations[1].mapping);
  EXPECT_TRUE(back.chains[1].samples.empty());
  const auto training = back.training_layout();
  EXPECT_EQ(training.cells, layout.cells);
  EXPECT_EQ(training.by_student, layout.by_student);
}

TEST(TruthFile, RoundTrip) {
  mc::SynthConfig cfg;
  cfg.num_students = 8;
  cfg.num_questions = 6;
  cfg.K = 3;
  cfg.dim = 2;
  mc::Rng rng(6);
  const auto r = mc::generate(cfg, rng);
  const auto back = io::truth_from_json(io::json::parse(io::truth_to_json(r.truth, io::json::object()).dump()));
  EXPECT_EQ(back.gamma, r.truth.gamma);
  EXPECT_EQ(back.theta, r.truth.theta);
  EXPECT_EQ(back.Sigma_F, r.truth.Sigma_F);
  EXPECT_EQ(back.c, r.truth.c);
  EXPECT_EQ(back.d, r.truth.d);
  EXPECT_EQ(back.P, r.truth.P);
  EXPECT_EQ(back.M, r.truth.M);
  EXPECT_EQ(back.cells, r.truth.cells);
}

TEST(Files, WriteReadAndMissingPath) {
  const auto path = (fs::temp_directory_path() / "mc_io_test.json").string();
  io::write_json(path, {{"a", 1}});
  EXPECT_EQ(io::read_json(path)["a"], 1);
  EXPECT_EQ(io::file_digest(path), io::sha256_hex(io::read_file(path)));
  fs::remove(path);
  try {
    io::read_file(path);
    FAIL();
  } catch (const mc::Error& e) {
    EXPECT_EQ(e.kind(), mc::ErrorKind::kParse);
    EXPECT_NE(std::string(e.what()).find(path), std::string::npos);
  }
}

}  // namespace
