#include "llt/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "llt/error.hpp"

namespace llt {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string_view order_name(ReductionOrder o) {
  return o == ReductionOrder::SampleThenDedup ? "sample_then_dedup" : "dedup_then_sample";
}

ReductionOrder reduction_order_from_string(std::string_view s) {
  if (s == "sample_then_dedup") return ReductionOrder::SampleThenDedup;
  if (s == "dedup_then_sample") return ReductionOrder::DedupThenSample;
  throw ParseError("unknown reduction order: " + std::string(s));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << data;
  if (!out) throw Error("failed writing " + path.string());
}

json with_provenance(json doc, const PipelineConfig& config) {
  doc["provenance"] = config.to_json();
  return doc;
}

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const EmptyCorpus&) {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

json PipelineConfig::to_json() const {
  json j = {{"host_cap", host_cap},
            {"order", order_name(order)},
            {"ngram_orders", {1, 2, 3}},
            {"scoring", {{"match", scoring.match}, {"mismatch", scoring.mismatch}, {"gap", scoring.gap}}},
            {"threshold", threshold ? json(*threshold) : json(nullptr)},
            {"export_format", export_format},
            {"seed", seed}};
  return j;
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  try {
    PipelineConfig c;
    c.input = j.value("input", c.input);
    c.output = j.value("output", c.output);
    c.host_cap = j.value("host_cap", c.host_cap);
    if (j.contains("order")) c.order = reduction_order_from_string(j["order"].get<std::string>());
    if (j.contains("ngram_orders") && j["ngram_orders"] != json({1, 2, 3})) {
      throw ParseError("only n-gram orders [1, 2, 3] are supported");
    }
    if (j.contains("scoring")) {
      const auto& s = j["scoring"];
      c.scoring.match = s.value("match", c.scoring.match);
      c.scoring.mismatch = s.value("mismatch", c.scoring.mismatch);
      c.scoring.gap = s.value("gap", c.scoring.gap);
    }
    if (j.contains("threshold") && !j["threshold"].is_null()) c.threshold = j["threshold"].get<double>();
    c.export_format = j.value("export_format", c.export_format);
    c.seed = j.value("seed", c.seed);
    c.scoring.validate();
    if (c.host_cap == 0) throw ParseError("host_cap must be >= 1");
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
}

AnalysisSession analyze(Corpus corpus, const PipelineConfig& config) {
  if (corpus.logs.empty()) throw EmptyCorpus();
  AnalysisSession s;
  s.config = config;
  s.corpus = std::move(corpus);
  stage("tokenize", [&] {
    s.tokens.reserve(s.corpus.logs.size());
    for (const auto& log : s.corpus.logs) s.tokens.push_back(tokenize(log.raw));
  });
  stage("features", [&] {
    s.vocab = Vocabulary::build(s.tokens);
    for (const auto& t : s.tokens) s.vectors.push_back(vectorize(t, s.vocab));
    s.matrix = distance_matrix(s.vectors);
  });
  stage("cluster", [&] {
    std::vector<std::string> labels;
    for (const auto& log : s.corpus.logs) labels.push_back(log.id);
    s.tree = std::make_shared<const Dendrogram>(agglomerate(s.matrix, std::move(labels)));
  });
  stage("templates", [&] { s.templates = annotate_tree(*s.tree, s.tokens, config.scoring); });
  stage("cut", [&] {
    double t = 0.0;
    if (config.threshold) {
      t = *config.threshold;
    } else if (s.tree->leaf_count() >= 2) {
      t = suggest_threshold(*s.tree);
      s.threshold_suggested = true;
    }
    s.partition = cut(*s.tree, t);
  });
  return s;
}

const std::vector<std::string>& session_artifacts() {
  static const std::vector<std::string> names = {"corpus.jsonl", "vocab.json",    "vectors.jsonl", "matrix.bin",
                                                 "tree.json",    "templates.json", "partition.json"};
  return names;
}

std::string write_session_dir(const std::string& dir, const AnalysisSession& s) {
  return stage("write", [&] {
    fs::path root(dir);
    fs::create_directories(root);
    const json provenance = s.config.to_json();

    Corpus tagged = s.corpus;
    tagged.provenance = provenance.dump();
    std::ostringstream corpus_out;
    write_corpus(corpus_out, tagged);
    write_file(root / "corpus.jsonl", corpus_out.str());

    write_file(root / "vocab.json", with_provenance(s.vocab.to_json(), s.config).dump() + "\n");

    std::ostringstream vec_out;
    vec_out << json{{"provenance", provenance}, {"dims", s.vocab.total_dims()}}.dump() << '\n';
    for (std::size_t i = 0; i < s.vectors.size(); ++i) {
      json entries = json::array();
      for (auto [d, c] : s.vectors[i].entries) entries.push_back({d, c});
      vec_out << json{{"row", i}, {"entries", std::move(entries)}}.dump() << '\n';
    }
    write_file(root / "vectors.jsonl", vec_out.str());

    std::ostringstream mat_out;
    s.matrix.write_binary(mat_out, provenance.dump());
    write_file(root / "matrix.bin", mat_out.str());

    write_file(root / "tree.json", with_provenance(s.tree->to_json(), s.config).dump() + "\n");
    write_file(root / "templates.json",
               with_provenance(templates_to_json(s.templates, *s.tree), s.config).dump() + "\n");
    json part = with_provenance(s.partition.to_json(*s.tree), s.config);
    part["suggested"] = s.threshold_suggested;
    write_file(root / "partition.json", part.dump() + "\n");

    json manifest = {{"format", "llt-session"}, {"version", 1}, {"config", provenance}};
    json files = json::array();
    for (const auto& name : session_artifacts()) {
      files.push_back({{"name", name}, {"sha256", sha256_file((root / name).string())}});
    }
    manifest["artifacts"] = std::move(files);
    std::string body = manifest.dump(2) + "\n";
    write_file(root / "manifest.json", body);
    return sha256_hex(body);
  });
}

AnalysisSession load_session_dir(const std::string& dir) {
  fs::path root(dir);
  auto corrupt = [&](const std::string& what) { return Error("corrupt session directory " + dir + ": " + what); };
  json manifest;
  try {
    manifest = json::parse(read_file(root / "manifest.json"));
  } catch (const json::exception& e) {
    throw corrupt(std::string("manifest.json: ") + e.what());
  } catch (const Error& e) {
    throw corrupt(e.what());
  }
  std::map<std::string, std::string> expected;
  try {
    if (manifest.at("format") != "llt-session" || manifest.at("version") != 1) throw corrupt("unknown manifest format");
    for (const auto& a : manifest.at("artifacts")) expected[a.at("name")] = a.at("sha256");
  } catch (const json::exception& e) {
    throw corrupt(std::string("manifest.json: ") + e.what());
  }
  std::map<std::string, std::string> blobs;
  for (const auto& name : session_artifacts()) {
    auto it = expected.find(name);
    if (it == expected.end()) throw corrupt(name + " missing from manifest");
    std::string data;
    try {
      data = read_file(root / name);
    } catch (const Error&) {
      throw corrupt(name + " is missing");
    }
    if (sha256_hex(data) != it->second) throw corrupt(name + " does not match its manifest hash");
    blobs[name] = std::move(data);
  }

  AnalysisSession s;
  try {
    s.config = PipelineConfig::from_json(manifest.at("config"));
    std::istringstream corpus_in(blobs["corpus.jsonl"]);
    s.corpus = read_corpus(corpus_in);
    for (const auto& log : s.corpus.logs) s.tokens.push_back(tokenize(log.raw));
    s.vocab = Vocabulary::from_json(json::parse(blobs["vocab.json"]));
    for (const auto& t : s.tokens) s.vectors.push_back(vectorize(t, s.vocab));
    std::istringstream mat_in(blobs["matrix.bin"]);
    s.matrix = DistanceMatrix::read_binary(mat_in);
    s.tree = std::make_shared<const Dendrogram>(Dendrogram::from_json(json::parse(blobs["tree.json"])));
    s.templates = templates_from_json(json::parse(blobs["templates.json"]));
    auto part = json::parse(blobs["partition.json"]);
    s.partition = cut(*s.tree, part.at("threshold").get<double>());
    s.threshold_suggested = part.value("suggested", false);
  } catch (const json::exception& e) {
    throw corrupt(e.what());
  } catch (const std::exception& e) {
    throw corrupt(e.what());
  }
  std::size_t n = s.corpus.logs.size();
  if (s.tree->leaf_count() != n || s.matrix.size() != n || s.templates.size() != s.tree->node_count()) {
    throw corrupt("artifact sizes disagree");
  }
  return s;
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  Corpus input = stage("ingest", [&] { return load_corpus(config.input); });
  Corpus reduced = stage("reduce", [&] { return reduce(input, config.host_cap, config.order); });
  PipelineResult r{analyze(std::move(reduced), config), {}};
  r.manifest_hash = write_session_dir(config.output, r.session);
  return r;
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

double adjusted_rand_index(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("labelings differ in length");
  auto pairs = [](double k) { return k * (k - 1.0) / 2.0; };
  std::map<std::pair<std::size_t, std::size_t>, double> cells;
  std::map<std::size_t, double> rows, cols;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    cells[{truth[i], predicted[i]}] += 1;
    rows[truth[i]] += 1;
    cols[predicted[i]] += 1;
  }
  double index = 0, a = 0, b = 0;
  for (const auto& [_, c] : cells) index += pairs(c);
  for (const auto& [_, c] : rows) a += pairs(c);
  for (const auto& [_, c] : cols) b += pairs(c);
  double total = pairs(static_cast<double>(truth.size()));
  double expected = total > 0 ? a * b / total : 0.0;
  double max_index = 0.5 * (a + b);
  if (max_index == expected) return 1.0;  // both labelings trivial
  return (index - expected) / (max_index - expected);
}

}  // namespace llt
