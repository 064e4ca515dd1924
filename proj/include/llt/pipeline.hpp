#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "llt/alignment.hpp"
#include "llt/clustering.hpp"
#include "llt/corpus.hpp"
#include "llt/error.hpp"
#include "llt/features.hpp"
#include "llt/tokenizer.hpp"

namespace llt {

/// Raised by run_pipeline when the reduced corpus has no logs.
class EmptyCorpus : public Error {
 public:
  EmptyCorpus() : Error("empty corpus") {}
};

/// Raised with the failing stage's name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct PipelineConfig {
  std::string input;
  std::string output;
  std::size_t host_cap = 20;
  ReductionOrder order = ReductionOrder::SampleThenDedup;
  Scoring scoring;
  /// Preliminary cut; suggest_threshold decides when unset.
  std::optional<double> threshold;
  std::string export_format = "json";
  std::uint64_t seed = 0;

  /// The part that determines results. Paths are left out so that moving a
  /// run does not change its manifest.
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults. Throws ParseError.
  static PipelineConfig from_json(const nlohmann::json& j);
};

/// Everything one analysis run produces, in memory.
struct AnalysisSession {
  PipelineConfig config;
  Corpus corpus;
  std::vector<TokenSeq> tokens;
  Vocabulary vocab;
  std::vector<FeatureVector> vectors;
  DistanceMatrix matrix;
  std::shared_ptr<const Dendrogram> tree;
  std::vector<Template> templates;  // indexed by node id
  Partition partition;
  bool threshold_suggested = false;
};

/// Tokenize, vectorize, agglomerate, annotate and cut an already reduced
/// corpus. Throws EmptyCorpus or StageError.
AnalysisSession analyze(Corpus corpus, const PipelineConfig& config);

/// Session directory files, in manifest order.
const std::vector<std::string>& session_artifacts();

/// Writes the session directory and returns the sha256 of manifest.json.
/// Each artifact embeds the config; the manifest lists every artifact's
/// sha256 and carries no timestamps.
std::string write_session_dir(const std::string& dir, const AnalysisSession& session);

/// Reads a session directory back, checking every artifact against the
/// manifest. Throws Error naming the first corrupt or missing file.
AnalysisSession load_session_dir(const std::string& dir);

struct PipelineResult {
  AnalysisSession session;
  std::string manifest_hash;
};

/// load_corpus(config.input), reduce, analyze, write_session_dir(config.output).
PipelineResult run_pipeline(const PipelineConfig& config);

std::string sha256_file(const std::string& path);

/// Adjusted Rand Index between two labelings of the same items.
/// Throws std::invalid_argument when the sizes differ.
double adjusted_rand_index(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted);

}  // namespace llt
