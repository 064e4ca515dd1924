#include "llt/syngen.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "llt/error.hpp"

namespace llt {

using nlohmann::json;

namespace {

constexpr Stage kStages[] = {Stage::Initialize, Stage::GetWorkingDirectory, Stage::Monopolize,
                             Stage::TestEnvironment, Stage::DropAndRun};

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

SlotSpec::Kind slot_kind_from_string(std::string_view s) {
  if (s == "alnum") return SlotSpec::Kind::Alnum;
  if (s == "digits") return SlotSpec::Kind::Digits;
  if (s == "hex") return SlotSpec::Kind::Hex;
  if (s == "ipv4") return SlotSpec::Kind::Ipv4;
  if (s == "choice") return SlotSpec::Kind::Choice;
  if (s == "hexescape") return SlotSpec::Kind::HexEscape;
  throw ParseError("unknown slot kind: " + std::string(s));
}

std::string_view to_string(SlotSpec::Kind k) {
  switch (k) {
    case SlotSpec::Kind::Alnum:
      return "alnum";
    case SlotSpec::Kind::Digits:
      return "digits";
    case SlotSpec::Kind::Hex:
      return "hex";
    case SlotSpec::Kind::Ipv4:
      return "ipv4";
    case SlotSpec::Kind::Choice:
      return "choice";
    case SlotSpec::Kind::HexEscape:
      return "hexescape";
  }
  return "?";
}

std::string draw(const SlotSpec& slot, Rng& rng) {
  static constexpr std::string_view alnum = "abcdefghijklmnopqrstuvwxyz0123456789";
  static constexpr std::string_view hex = "0123456789abcdef";
  std::string out;
  auto pick = [&](std::string_view pool, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out += pool[rng.below(pool.size())];
  };
  switch (slot.kind) {
    case SlotSpec::Kind::Alnum:
      pick(alnum, slot.length);
      break;
    case SlotSpec::Kind::Digits:
      pick(hex.substr(0, 10), slot.length);
      break;
    case SlotSpec::Kind::Hex:
      pick(hex, slot.length);
      break;
    case SlotSpec::Kind::Ipv4:
      for (int i = 0; i < 4; ++i) {
        if (i) out += '.';
        out += std::to_string(1 + rng.below(254));
      }
      break;
    case SlotSpec::Kind::Choice:
      out = slot.values[rng.below(slot.values.size())];
      break;
    case SlotSpec::Kind::HexEscape:
      for (std::size_t i = 0; i < slot.count; ++i) {
        out += "\\x";
        pick(hex, 2);
      }
      break;
  }
  return out;
}

}  // namespace

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Initialize:
      return "initialize";
    case Stage::GetWorkingDirectory:
      return "get_working_directory";
    case Stage::Monopolize:
      return "monopolize";
    case Stage::TestEnvironment:
      return "test_environment";
    case Stage::DropAndRun:
      return "drop_and_run";
  }
  return "?";
}

Stage stage_from_string(std::string_view s) {
  for (auto st : kStages) {
    if (to_string(st) == s) return st;
  }
  throw ParseError("unknown stage: " + std::string(s));
}

FamilySpec FamilySpec::from_json(const json& j) {
  try {
    FamilySpec spec;
    spec.name = j.at("name").get<std::string>();
    if (spec.name.empty()) throw ParseError("family spec needs a name");
    spec.line_ending = j.value("line_ending", std::string("\r\n"));
    if (j.contains("slots")) {
      for (const auto& [name, s] : j["slots"].items()) {
        SlotSpec slot;
        slot.kind = slot_kind_from_string(s.at("kind").get<std::string>());
        slot.length = s.value("length", std::size_t{8});
        slot.count = s.value("count", std::size_t{6});
        slot.values = s.value("values", std::vector<std::string>{});
        if (slot.kind == SlotSpec::Kind::Choice && slot.values.empty()) {
          throw ParseError("choice slot '" + name + "' has no values");
        }
        if ((slot.kind == SlotSpec::Kind::Alnum || slot.kind == SlotSpec::Kind::Digits ||
             slot.kind == SlotSpec::Kind::Hex) &&
            slot.length == 0) {
          throw ParseError("slot '" + name + "' has zero length");
        }
        spec.slots.emplace(name, std::move(slot));
      }
    }
    int last = -1;
    for (const auto& st : j.at("stages")) {
      StageSpec stage;
      stage.stage = stage_from_string(st.at("stage").get<std::string>());
      if (static_cast<int>(stage.stage) <= last) throw ParseError("stages must appear once each, in order");
      last = static_cast<int>(stage.stage);
      stage.lines = st.at("lines").get<std::vector<std::string>>();
      stage.omit_probability = st.value("omit_probability", 0.0);
      if (!(stage.omit_probability >= 0.0 && stage.omit_probability < 1.0)) {
        throw ParseError("omit_probability must be in [0, 1)");
      }
      spec.stages.push_back(std::move(stage));
    }
    bool has_line = std::any_of(spec.stages.begin(), spec.stages.end(), [](const StageSpec& s) {
      return s.omit_probability == 0.0 && !s.lines.empty();
    });
    if (!has_line) throw ParseError("family spec '" + spec.name + "' needs a stage that always renders a line");
    // Reject references to undeclared slots up front.
    for (const auto& st : spec.stages) {
      for (const auto& line : st.lines) {
        for (std::size_t i = 0; i < line.size(); ++i) {
          if (line[i] != '{') continue;
          if (i + 1 < line.size() && line[i + 1] == '{') {
            ++i;
            continue;
          }
          auto close = line.find('}', i);
          if (close == std::string::npos) throw ParseError("unterminated slot reference in: " + line);
          auto name = line.substr(i + 1, close - i - 1);
          if (!spec.slots.contains(name)) throw ParseError("undeclared slot '" + name + "'");
          i = close;
        }
      }
    }
    return spec;
  } catch (const json::exception& e) {
    throw ParseError(std::string("family spec: ") + e.what());
  }
}

json FamilySpec::to_json() const {
  json slots_json = json::object();
  for (const auto& [name, s] : slots) {
    json sj = {{"kind", to_string(s.kind)}};
    if (s.kind == SlotSpec::Kind::Choice) sj["values"] = s.values;
    if (s.kind == SlotSpec::Kind::HexEscape) sj["count"] = s.count;
    if (s.kind == SlotSpec::Kind::Alnum || s.kind == SlotSpec::Kind::Digits || s.kind == SlotSpec::Kind::Hex) {
      sj["length"] = s.length;
    }
    slots_json[name] = std::move(sj);
  }
  json stages_json = json::array();
  for (const auto& st : stages) {
    json sj = {{"stage", to_string(st.stage)}, {"lines", st.lines}};
    if (st.omit_probability > 0.0) sj["omit_probability"] = st.omit_probability;
    stages_json.push_back(std::move(sj));
  }
  return {{"name", name}, {"line_ending", line_ending}, {"slots", std::move(slots_json)}, {"stages", std::move(stages_json)}};
}

std::vector<FamilySpec> load_family_specs(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<FamilySpec> specs;
  for (const auto& f : files) {
    std::ifstream in(f);
    try {
      specs.push_back(FamilySpec::from_json(json::parse(in)));
    } catch (const json::exception& e) {
      throw ParseError(f.string() + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(f.string() + ": " + e.what());
    }
  }
  if (specs.empty()) throw Error("no family specs found in " + dir);
  return specs;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t s = seed;
  engine_.seed(splitmix64(s));
}

std::uint64_t Rng::next() { return engine_(); }

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("Rng::below needs a positive bound");
  // Reject the incomplete top block so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do {
    v = next();
  } while (v >= limit);
  return v % bound;
}

double Rng::unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

RenderedLog render_detailed(const FamilySpec& spec, std::uint64_t seed) {
  std::uint64_t mix = fnv1a(spec.name) ^ seed;
  Rng rng(splitmix64(mix));
  std::map<std::string, std::string> values;
  RenderedLog out;
  Bytes raw;
  for (const auto& stage : spec.stages) {
    if (stage.omit_probability > 0.0 && rng.unit() < stage.omit_probability) continue;
    for (const auto& line : stage.lines) {
      for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (c == '{' && i + 1 < line.size() && line[i + 1] == '{') {
          raw += '{';
          ++i;
          continue;
        }
        if (c == '}' && i + 1 < line.size() && line[i + 1] == '}') {
          raw += '}';
          ++i;
          continue;
        }
        if (c != '{') {
          raw += c;
          continue;
        }
        auto close = line.find('}', i);
        auto name = line.substr(i + 1, close - i - 1);
        auto it = values.find(name);
        if (it == values.end()) it = values.emplace(name, draw(spec.slots.at(name), rng)).first;
        out.slot_spans.emplace_back(raw.size(), raw.size() + it->second.size());
        raw += it->second;
        i = close;
      }
      raw += spec.line_ending;
    }
  }
  char host[64];
  std::snprintf(host, sizeof host, "-%016llx", static_cast<unsigned long long>(seed));
  // 2021-11-14T00:00:00Z plus a seed-derived offset inside a 48-day window.
  Timestamp base{std::chrono::seconds(1636848000)};
  Timestamp at = base + std::chrono::seconds(static_cast<long long>(seed % (48ull * 86400ull)));
  out.log = make_request_log("syn-" + spec.name + host, at, std::move(raw));
  return out;
}

RequestLog render(const FamilySpec& spec, std::uint64_t seed) { return render_detailed(spec, seed).log; }

LabeledCorpus generate_corpus(const std::vector<FamilySpec>& specs, std::size_t per_family, std::uint64_t seed) {
  if (per_family == 0) throw std::invalid_argument("per_family must be >= 1");
  LabeledCorpus out;
  out.corpus.provenance = "syngen seed=" + std::to_string(seed) + " per_family=" + std::to_string(per_family);
  std::uint64_t state = seed;
  for (std::size_t f = 0; f < specs.size(); ++f) {
    out.family_names.push_back(specs[f].name);
    for (std::size_t k = 0; k < per_family; ++k) {
      out.corpus.logs.push_back(render(specs[f], splitmix64(state)));
      out.labels.push_back(f);
    }
  }
  return out;
}

}  // namespace llt
