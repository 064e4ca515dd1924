// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>

#include "llt/alignment.hpp"
#include "llt/capture.hpp"
#include "llt/clustering.hpp"
#include "llt/corpus.hpp"
#include "llt/pipeline.hpp"
#include "llt/syngen.hpp"
#include "llt/tokenizer.hpp"

using namespace llt;
namespace fs = std::filesystem;

namespace {

constexpr int kWardCorpora = 200;
constexpr std::size_t kWardMaxN = 64;
constexpr double kWardHeightTol = 1e-9;
constexpr double kWardSeconds = 60;
constexpr int kAlignPairs = 1000;
constexpr std::size_t kAlignMaxLen = 6;
constexpr double kAlignSeconds = 10;
constexpr double kAriMin = 0.9;
constexpr double kRecoverySeconds = 30;
constexpr int kTokenizerStrings = 10000;
constexpr int kCaptureSessions = 20;

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

const std::vector<FamilySpec>& specs() {
  static const auto s = load_family_specs(LLT_SPEC_DIR);
  return s;
}

// The 8 x 25 run is shared by the structural, soundness and recovery checks.
struct Synthetic {
  LabeledCorpus gen;
  AnalysisSession session;
  double seconds = 0;
};

const Synthetic& synthetic() {
  static const Synthetic s = [] {
    Synthetic out;
    auto t0 = std::chrono::steady_clock::now();
    out.gen = generate_corpus(specs(), 25, 7);
    out.session = analyze(out.gen.corpus, PipelineConfig{});
    out.seconds = seconds_since(t0);
    return out;
  }();
  return s;
}

Outcome ward_equivalence() {
  std::mt19937_64 rng(20211114);
  auto t0 = std::chrono::steady_clock::now();
  int mismatches = 0;
  double worst = 0;
  for (int c = 0; c < kWardCorpora; ++c) {
    std::size_t n = 2 + rng() % (kWardMaxN - 1);
    std::size_t dims = 1 + rng() % 12;
    unsigned max_count = 1 + static_cast<unsigned>(rng() % 6);
    std::vector<std::vector<double>> pts(n, std::vector<double>(dims));
    for (auto& p : pts)
      for (auto& v : p) v = static_cast<double>(rng() % (max_count + 1));
    DistanceMatrix d(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        double sq = 0;
        for (std::size_t k = 0; k < dims; ++k) sq += (pts[i][k] - pts[j][k]) * (pts[i][k] - pts[j][k]);
        d.set(i, j, std::sqrt(sq));
      }
    auto fast = agglomerate(d);
    auto slow = naive_agglomerate(pts);
    bool same = fast.merges().size() == slow.merges().size();
    for (std::size_t k = 0; same && k < fast.merges().size(); ++k) {
      const auto &a = fast.merges()[k], &b = slow.merges()[k];
      double err = std::abs(a.height - b.height);
      worst = std::max(worst, err);
      same = a.left == b.left && a.right == b.right && a.size == b.size &&
             err <= kWardHeightTol * std::max(1.0, b.height);
    }
    if (!same) ++mismatches;
  }
  double secs = seconds_since(t0);
  return {mismatches == 0 && secs < kWardSeconds,
          fmt("%.0f corpora, %.0f mismatches, max height diff %.3g", kWardCorpora, mismatches, worst) +
              fmt(", %.2f s (limit %.0f s)", secs, kWardSeconds)};
}

Outcome alignment_oracle() {
  std::mt19937_64 rng(4242);
  static const char* alphabet[] = {"a", "b", "c"};
  auto t0 = std::chrono::steady_clock::now();
  int mismatches = 0;
  for (int p = 0; p < kAlignPairs; ++p) {
    auto make = [&] {
      std::vector<Slot> s(rng() % (kAlignMaxLen + 1));
      for (auto& x : s) x = rng() % 6 == 0 ? Slot::hole() : Slot::lit(alphabet[rng() % 3]);
      return s;
    };
    auto a = make(), b = make();
    if (local_alignment(a, b).score != exhaustive_align_oracle(a, b)) ++mismatches;
  }
  double secs = seconds_since(t0);
  return {mismatches == 0 && secs < kAlignSeconds,
          fmt("%.0f pairs, %.0f score mismatches, %.2f s", kAlignPairs, mismatches, secs) +
              fmt(" (limit %.0f s)", kAlignSeconds)};
}

Outcome structural_identities() {
  std::vector<AnalysisSession> runs;
  runs.push_back(synthetic().session);
  for (std::size_t per : {1, 2, 5}) runs.push_back(analyze(generate_corpus(specs(), per, per).corpus, PipelineConfig{}));
  runs.push_back(analyze(generate_corpus({specs()[0]}, 1, 1).corpus, PipelineConfig{}));
  int bad = 0;
  std::string shape;
  for (const auto& s : runs) {
    std::size_t n = s.tree->leaf_count();
    std::size_t internal = 0;
    for (NodeId v = 0; v < s.templates.size(); ++v) internal += !s.tree->is_leaf(v);
    const auto& vb = s.vocab;
    bool ok = s.tree->merges().size() == n - 1 && internal == n - 1 && s.templates.size() == s.tree->node_count() &&
              vb.total_dims() == vb.unigrams().size() + vb.bigrams().size() + vb.trigrams().size();
    bad += !ok;
    if (shape.empty()) {
      shape = std::to_string(n) + " leaves, " + std::to_string(s.tree->merges().size()) + " merges, " +
              std::to_string(internal) + " internal templates, " + std::to_string(vb.unigrams().size()) + "+" +
              std::to_string(vb.bigrams().size()) + "+" + std::to_string(vb.trigrams().size()) + "=" +
              std::to_string(vb.total_dims()) + " dims";
    }
  }
  return {bad == 0, std::to_string(runs.size()) + " runs, " + std::to_string(bad) + " violations; 8x25: " + shape};
}

Outcome template_soundness() {
  const auto& s = synthetic().session;
  std::size_t checks = 0, bad = 0;
  for (NodeId v = s.tree->leaf_count(); v < s.tree->node_count(); ++v) {
    for (auto leaf : s.tree->members(v)) {
      ++checks;
      if (!literals_are_subsequence(s.templates[v], s.tokens[leaf])) ++bad;
    }
  }
  return {bad == 0 && checks > 0,
          std::to_string(checks) + " (node, member) checks over " + std::to_string(s.tree->leaf_count() - 1) +
              " internal nodes, " + std::to_string(bad) + " unsound"};
}

Outcome family_recovery() {
  const auto& syn = synthetic();
  const auto& s = syn.session;
  double ari = adjusted_rand_index(syn.gen.labels, s.partition.labels(s.tree->leaf_count()));
  // The same experiment under other generator seeds must hold as well.
  double worst = ari;
  for (std::uint64_t seed : {0, 1, 2, 42, 1234}) {
    auto gen = generate_corpus(specs(), 25, seed);
    auto run = analyze(gen.corpus, PipelineConfig{});
    worst = std::min(worst, adjusted_rand_index(gen.labels, run.partition.labels(run.tree->leaf_count())));
  }
  return {s.threshold_suggested && ari >= kAriMin && worst >= kAriMin && syn.seconds < kRecoverySeconds,
          fmt("ARI %.4f (min %.2f), ", ari, kAriMin) + std::to_string(s.partition.groups.size()) + " groups at " +
              fmt("suggested threshold %.3f, end to end %.2f s", s.partition.threshold, syn.seconds) +
              fmt(" (limit %.0f s); worst ARI over 5 more seeds %.4f", kRecoverySeconds, worst)};
}

Outcome tokenizer_losslessness() {
  std::mt19937_64 rng(256);
  int failures_here = 0;
  std::vector<bool> seen(256, false);
  for (int i = 0; i < kTokenizerStrings; ++i) {
    Bytes s;
    if (i == 0) {
      for (int b = 0; b < 256; ++b) s.push_back(static_cast<char>(b));
    } else {
      s.resize(rng() % 200);
      for (auto& c : s) c = static_cast<char>(rng() % 256);
    }
    for (unsigned char c : s) seen[c] = true;
    if (join(tokenize(s)) != s) ++failures_here;
  }
  bool all = std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  return {failures_here == 0 && all, std::to_string(kTokenizerStrings) + " strings, all 256 byte values " +
                                         (all ? "covered" : "NOT covered") + ", " + std::to_string(failures_here) +
                                         " failures"};
}

std::vector<ReplayScript> capture_scripts() {
  auto iac = [](std::initializer_list<int> xs) {
    Bytes b;
    for (int x : xs) b.push_back(static_cast<char>(x));
    return b;
  };
  std::vector<ReplayScript> out;
  auto add = [&](std::vector<Bytes> lines, std::string user = "root", std::string pass = "admin") {
    out.push_back(ReplayScript{std::move(user), std::move(pass), std::move(lines)});
  };
  // Known loader command snippets, one script each.
  add({R"(busybox echo -e '\\x6b\\x61\\x6d\\x69/proc' > /proc/.nippon; )" "\n", "busybox cat /proc/.nippon; \n",
       "busybox rm /proc/.nippon\n"});
  add({">/var/tmp/.file && cd /var/tmp/\n"});
  add({"/bin/busybox cp /bin/echo sefaexecbi; >sefaexecbi; /bin/busybox chmod 777 sefaexecbi; \n"});
  add({"/bin/busybox cat /bin/echo\n"});
  add({"/bin/busybox cat /bin/busybox || while read i; do echo $i; done < /bin/busybox\n"});
  // Telnet negotiation mixed into the payload.
  add({iac({0xFF, 0xFD, 0x01, 0xFF, 0xFB, 0x03}) + "enable\r\n", "system\r\n", "shell\r\n", "sh\r\n"});
  add({"echo " + iac({0xFF, 0xFF}) + "\n", iac({0xFF, 0xFA, 0x18, 0x00, 'x', 't', 0xFF, 0xF0}) + "ps\n"});
  add({iac({0xFF, 0xF1}) + "ls /home\n", "cat /proc/mounts" + iac({0xFF, 0xFE, 0x22}) + "\n"});
  add({}, "admin", "admin");
  // Synthetic-family renders, split into request lines.
  for (std::size_t i = 0; static_cast<int>(out.size()) < kCaptureSessions; ++i) {
    Bytes raw = render(specs()[i % specs().size()], 1000 + i).raw;
    std::vector<Bytes> lines;
    std::size_t at = 0;
    while (at < raw.size()) {
      auto lf = raw.find('\n', at);
      std::size_t end = lf == Bytes::npos ? raw.size() : lf + 1;
      lines.push_back(raw.substr(at, end - at));
      at = end;
    }
    add(std::move(lines), "user" + std::to_string(i), "pw" + std::to_string(i));
  }
  return out;
}

Outcome capture_round_trip() {
  CaptureConfig cfg;
  cfg.bind = {"127.0.0.1", 0};
  CaptureServer server(cfg);
  server.start();
  int mismatches = 0;
  std::size_t bytes = 0;
  auto scripts = capture_scripts();
  for (const auto& script : scripts) {
    auto rec = replay_script(script, server);
    Bytes want = expected_request_bytes(script);
    Bytes got;
    try {
      got = ingest_session(rec).raw;
    } catch (const EmptySession&) {
      got.clear();
    }
    bool creds = rec.credentials_seen && rec.credentials_seen->username == script.username &&
                 rec.credentials_seen->password == script.password;
    if (got != want || !creds) ++mismatches;
    bytes += got.size();
  }
  server.stop();
  return {mismatches == 0 && static_cast<int>(scripts.size()) >= kCaptureSessions,
          std::to_string(scripts.size()) + " sessions, " + std::to_string(bytes) + " request bytes, " +
              std::to_string(mismatches) + " mismatches"};
}

Outcome determinism() {
  auto dir = fs::temp_directory_path() / ("llt-acceptance-" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "corpus.jsonl", std::ios::binary);
    write_corpus(out, generate_corpus(specs(), 25, 7).corpus);
  }
  PipelineConfig cfg;
  cfg.input = (dir / "corpus.jsonl").string();
  cfg.seed = 7;
  cfg.output = (dir / "run1").string();
  auto h1 = run_pipeline(cfg).manifest_hash;
  cfg.output = (dir / "run2").string();
  auto h2 = run_pipeline(cfg).manifest_hash;
  fs::remove_all(dir);
  return {h1 == h2, "manifest " + h1.substr(0, 16) + (h1 == h2 ? " == " : " != ") + h2.substr(0, 16)};
}

}  // namespace

int main() {
  report("ward-oracle-equivalence", ward_equivalence);
  report("alignment-oracle", alignment_oracle);
  report("structural-identities", structural_identities);
  report("template-soundness", template_soundness);
  report("synthetic-family-recovery", family_recovery);
  report("tokenizer-losslessness", tokenizer_losslessness);
  report("capture-round-trip", capture_round_trip);
  report("determinism", determinism);
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
