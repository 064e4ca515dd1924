#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"

#include "llt/error.hpp"
#include "llt/pipeline.hpp"
#include "llt/syngen.hpp"
#include "oracles.hpp"

using namespace llt;
namespace fs = std::filesystem;

namespace {

struct TmpDir {
  fs::path path;
  TmpDir() {
    path = fs::temp_directory_path() / ("llt-pipeline-" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TmpDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

LabeledCorpus small_corpus(std::size_t per_family = 6) {
  return generate_corpus(load_family_specs(LLT_SPEC_DIR), per_family, 3);
}

}  // namespace

TEST_CASE("ARI matches pair counting") {
  std::mt19937_64 rng(17);
  for (int iter = 0; iter < 300; ++iter) {
    std::size_t n = 1 + rng() % 40, kx = 1 + rng() % 5, ky = 1 + rng() % 5;
    std::vector<std::size_t> x(n), y(n);
    for (auto& v : x) v = rng() % kx;
    for (auto& v : y) v = rng() % ky;
    CHECK(adjusted_rand_index(x, y) == doctest::Approx(oracle::ari_by_pairs(x, y)).epsilon(1e-12));
  }
  CHECK(adjusted_rand_index({0, 0, 1, 1}, {5, 5, 2, 2}) == 1.0);
  CHECK(adjusted_rand_index({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(-0.5));
  CHECK_THROWS_AS(adjusted_rand_index({0}, {0, 1}), std::invalid_argument);
}

TEST_CASE("config JSON leaves paths out and validates") {
  PipelineConfig c;
  c.input = "/somewhere/in.jsonl";
  c.threshold = 60;
  c.scoring.match = 2;
  auto j = c.to_json();
  CHECK_FALSE(j.contains("input"));
  CHECK(j.at("ngram_orders") == nlohmann::json({1, 2, 3}));
  auto back = PipelineConfig::from_json(j);
  CHECK(back.threshold == 60);
  CHECK(back.scoring.match == 2);
  CHECK(back.to_json() == j);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"ngram_orders", {1, 2}}}), ParseError);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"host_cap", 0}}), ParseError);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"scoring", {{"match", -1}}}}), ParseError);
}

TEST_CASE("analyze produces consistent stages") {
  auto gen = small_corpus();
  auto s = analyze(gen.corpus, PipelineConfig{});
  const std::size_t n = gen.corpus.logs.size();
  CHECK(s.tokens.size() == n);
  CHECK(s.vectors.size() == n);
  CHECK(s.matrix.size() == n);
  CHECK(s.tree->leaf_count() == n);
  CHECK(s.tree->merges().size() == n - 1);
  CHECK(s.templates.size() == 2 * n - 1);
  CHECK(s.threshold_suggested);
  for (std::size_t i = 0; i < n; ++i) CHECK(s.tree->leaves()[i] == gen.corpus.logs[i].id);
  for (NodeId v = 0; v < s.tree->node_count(); ++v)
    for (auto leaf : s.tree->members(v)) CHECK(literals_are_subsequence(s.templates[v], s.tokens[leaf]));
  CHECK(adjusted_rand_index(gen.labels, s.partition.labels(n)) >= 0.9);

  PipelineConfig fixed;
  fixed.threshold = 0;
  auto singletons = analyze(gen.corpus, fixed);
  CHECK_FALSE(singletons.threshold_suggested);
  CHECK(singletons.partition.groups.size() == n);
  CHECK_THROWS_AS(analyze(Corpus{}, PipelineConfig{}), EmptyCorpus);
}

TEST_CASE("a single log becomes a one-family session") {
  auto gen = generate_corpus({load_family_specs(LLT_SPEC_DIR)[0]}, 1, 1);
  auto s = analyze(gen.corpus, PipelineConfig{});
  CHECK(s.tree->leaf_count() == 1);
  CHECK(s.partition.groups.size() == 1);
  CHECK(s.templates.size() == 1);
}

TEST_CASE("session directory round-trip and manifest determinism") {
  TmpDir a, b;
  auto gen = small_corpus(4);
  PipelineConfig cfg;
  cfg.seed = 9;
  auto s = analyze(gen.corpus, cfg);
  auto h1 = write_session_dir(a.path.string(), s);
  auto h2 = write_session_dir(b.path.string(), analyze(gen.corpus, cfg));
  CHECK(h1 == h2);
  CHECK(h1 == sha256_file(a / "manifest.json"));
  for (const auto& name : session_artifacts()) CHECK(sha256_file(a / name) == sha256_file(b / name));

  auto manifest = nlohmann::json::parse(std::ifstream(a / "manifest.json"));
  CHECK(manifest.at("format") == "llt-session");
  CHECK(manifest.at("artifacts").size() == session_artifacts().size());
  CHECK(manifest.dump().find("captured") == std::string::npos);

  auto loaded = load_session_dir(a.path.string());
  CHECK(*loaded.tree == *s.tree);
  CHECK(loaded.templates == s.templates);
  CHECK(loaded.partition.groups == s.partition.groups);
  CHECK(loaded.vocab == s.vocab);
  CHECK(loaded.corpus.logs.size() == s.corpus.logs.size());
  CHECK(loaded.config.to_json() == cfg.to_json());
  for (std::size_t i = 0; i < s.matrix.condensed().size(); ++i) CHECK(loaded.matrix.condensed()[i] == s.matrix.condensed()[i]);

  // A different config changes the manifest.
  PipelineConfig other = cfg;
  other.seed = 10;
  TmpDir c;
  CHECK(write_session_dir(c.path.string(), analyze(gen.corpus, other)) != h1);
}

TEST_CASE("corrupt or incomplete session directories are rejected") {
  TmpDir a;
  write_session_dir(a.path.string(), analyze(small_corpus(3).corpus, PipelineConfig{}));
  std::ofstream(a / "tree.json", std::ios::app) << " ";
  CHECK_THROWS_WITH_AS(load_session_dir(a.path.string()), doctest::Contains("tree.json"), Error);
  fs::remove(a / "tree.json");
  CHECK_THROWS_AS(load_session_dir(a.path.string()), Error);
  CHECK_THROWS_AS(load_session_dir((a.path / "nope").string()), Error);
}

TEST_CASE("run_pipeline reads, reduces and writes") {
  TmpDir dir;
  auto gen = small_corpus(3);
  Corpus doubled = gen.corpus;
  for (const auto& l : gen.corpus.logs) doubled.logs.push_back(l);  // duplicates are dropped
  {
    std::ofstream out(dir / "in.jsonl", std::ios::binary);
    write_corpus(out, doubled);
  }
  PipelineConfig cfg;
  cfg.input = dir / "in.jsonl";
  cfg.output = dir / "session";
  auto r = run_pipeline(cfg);
  CHECK(r.session.corpus.logs.size() == gen.corpus.logs.size());
  CHECK(r.manifest_hash == sha256_file(dir / "session/manifest.json"));
  cfg.output = dir / "session2";
  CHECK(run_pipeline(cfg).manifest_hash == r.manifest_hash);

  {
    std::ofstream out(dir / "empty.jsonl", std::ios::binary);
    write_corpus(out, Corpus{});
  }
  cfg.input = dir / "empty.jsonl";
  CHECK_THROWS_AS(run_pipeline(cfg), EmptyCorpus);
}
