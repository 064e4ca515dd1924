#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "llt/corpus.hpp"

namespace llt {

/// Behaviour stages of a loader session, in the order they are rendered.
enum class Stage { Initialize, GetWorkingDirectory, Monopolize, TestEnvironment, DropAndRun };

std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view s);

/// A variable position in a command line. `{name}` in a line refers to a
/// slot; each slot is drawn once per render so repeated uses agree.
struct SlotSpec {
  enum class Kind { Alnum, Digits, Hex, Ipv4, Choice, HexEscape };
  Kind kind = Kind::Alnum;
  std::size_t length = 8;           // Alnum, Digits, Hex
  std::size_t count = 6;            // HexEscape: number of \xHH groups
  std::vector<std::string> values;  // Choice
};

struct StageSpec {
  Stage stage = Stage::Initialize;
  std::vector<std::string> lines;
  double omit_probability = 0.0;
};

struct FamilySpec {
  std::string name;
  std::string line_ending = "\r\n";
  std::map<std::string, SlotSpec> slots;
  std::vector<StageSpec> stages;

  static FamilySpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// All *.json specs in a directory, sorted by file name.
std::vector<FamilySpec> load_family_specs(const std::string& dir);

/// Platform-stable generator: SplitMix64 seeding a std::mt19937_64 whose
/// raw output is reduced by rejection sampling (the standard library's
/// distributions differ between implementations).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  /// Uniform in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  /// Uniform in [0, 1).
  double unit();

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t& state);

struct RenderedLog {
  RequestLog log;
  /// Byte ranges [begin, end) of raw that came from slot values.
  std::vector<std::pair<std::size_t, std::size_t>> slot_spans;
};

RenderedLog render_detailed(const FamilySpec& spec, std::uint64_t seed);
RequestLog render(const FamilySpec& spec, std::uint64_t seed);

struct LabeledCorpus {
  Corpus corpus;
  std::vector<std::size_t> labels;  // index into the spec list, per log
  std::vector<std::string> family_names;
};

/// |specs| * per_family logs, family by family. Throws std::invalid_argument
/// when per_family is 0.
LabeledCorpus generate_corpus(const std::vector<FamilySpec>& specs, std::size_t per_family, std::uint64_t seed);

}  // namespace llt
