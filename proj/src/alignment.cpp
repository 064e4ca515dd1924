#include "llt/alignment.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <stdexcept>

#include "llt/error.hpp"

namespace llt {

using nlohmann::json;

Template Template::from_tokens(const TokenSeq& tokens, NodeId origin) {
  Template t;
  t.origin = origin;
  t.slots.reserve(tokens.size());
  for (const auto& tok : tokens) t.slots.push_back(Slot::lit(tok.bytes));
  return t;
}

std::size_t Template::literal_count() const {
  return static_cast<std::size_t>(std::count_if(slots.begin(), slots.end(), [](const Slot& s) { return !s.placeholder; }));
}

std::vector<Bytes> Template::literals() const {
  std::vector<Bytes> out;
  for (const auto& s : slots) {
    if (!s.placeholder) out.push_back(s.literal);
  }
  return out;
}

void Scoring::validate() const {
  if (!(match > 0.0)) throw std::invalid_argument("match score must be positive");
  if (!(mismatch <= 0.0)) throw std::invalid_argument("mismatch score must be <= 0");
  if (!(gap <= 0.0)) throw std::invalid_argument("gap score must be <= 0");
}

namespace {

bool same_literal(const Slot& x, const Slot& y) { return !x.placeholder && !y.placeholder && x.literal == y.literal; }

double pair_score(const Slot& x, const Slot& y, const Scoring& s) {
  if (x.placeholder || y.placeholder) return s.gap;
  return x.literal == y.literal ? s.match : s.mismatch;
}

enum Move : std::uint8_t { Stop, Diag, Up, Left };

struct Cell {
  double score = 0.0;
  std::size_t matches = 0;
};

bool better(const Cell& x, const Cell& y) {
  return x.score > y.score || (x.score == y.score && x.matches > y.matches);
}

}  // namespace

Alignment local_alignment(const std::vector<Slot>& a, const std::vector<Slot>& b, const Scoring& s) {
  s.validate();
  const std::size_t rows = a.size() + 1;
  const std::size_t cols = b.size() + 1;
  std::vector<std::uint8_t> moves(rows * cols, Stop);
  std::vector<Cell> prev(cols), cur(cols);
  Cell best;
  std::size_t best_i = 0, best_j = 0;
  for (std::size_t i = 1; i < rows; ++i) {
    cur[0] = Cell{};
    for (std::size_t j = 1; j < cols; ++j) {
      const Slot& x = a[i - 1];
      const Slot& y = b[j - 1];
      Cell diag{prev[j - 1].score + pair_score(x, y, s), prev[j - 1].matches + (same_literal(x, y) ? 1u : 0u)};
      Cell up{prev[j].score + s.gap, prev[j].matches};
      Cell left{cur[j - 1].score + s.gap, cur[j - 1].matches};
      Cell pick{};
      std::uint8_t move = Stop;
      // Strictly better candidates win, so earlier ones take ties.
      if (better(diag, pick)) {
        pick = diag;
        move = Diag;
      }
      if (better(up, pick)) {
        pick = up;
        move = Up;
      }
      if (better(left, pick)) {
        pick = left;
        move = Left;
      }
      cur[j] = pick;
      moves[i * cols + j] = move;
      if (better(pick, best)) {
        best = pick;
        best_i = i;
        best_j = j;
      }
    }
    std::swap(prev, cur);
  }

  Alignment out;
  out.score = best.score;
  out.matches = best.matches;
  std::vector<Column> window;
  std::size_t i = best_i, j = best_j;
  if (best.score > 0.0) {
    while (i > 0 && j > 0 && moves[i * cols + j] != Stop) {
      switch (moves[i * cols + j]) {
        case Diag:
          window.push_back({i - 1, j - 1});
          --i;
          --j;
          break;
        case Up:
          window.push_back({i - 1, std::nullopt});
          --i;
          break;
        default:
          window.push_back({std::nullopt, j - 1});
          --j;
          break;
      }
    }
    std::reverse(window.begin(), window.end());
    out.a_begin = i;
    out.b_begin = j;
    out.a_end = best_i;
    out.b_end = best_j;
  } else {
    // No positive-scoring pair: the window is empty and everything is head.
    out.score = 0.0;
    out.matches = 0;
    out.a_begin = out.a_end = a.size();
    out.b_begin = out.b_end = b.size();
  }
  for (std::size_t k = 0; k < out.a_begin; ++k) out.columns.push_back({k, std::nullopt});
  for (std::size_t k = 0; k < out.b_begin; ++k) out.columns.push_back({std::nullopt, k});
  out.columns.insert(out.columns.end(), window.begin(), window.end());
  for (std::size_t k = out.a_end; k < a.size(); ++k) out.columns.push_back({k, std::nullopt});
  for (std::size_t k = out.b_end; k < b.size(); ++k) out.columns.push_back({std::nullopt, k});
  return out;
}

Template align(const Template& a, const Template& b, const Scoring& s) {
  Alignment al = local_alignment(a.slots, b.slots, s);
  Template t;
  for (const auto& c : al.columns) {
    if (c.a && c.b && same_literal(a.slots[*c.a], b.slots[*c.b])) {
      t.slots.push_back(a.slots[*c.a]);
    } else if (t.slots.empty() || !t.slots.back().placeholder) {
      t.slots.push_back(Slot::hole());
    }
  }
  return t;
}

double exhaustive_align_oracle(const std::vector<Slot>& a, const std::vector<Slot>& b, const Scoring& s) {
  constexpr std::size_t kMax = 6;
  if (a.size() > kMax || b.size() > kMax) throw OracleTooLarge("oracle inputs are limited to 6 slots");
  s.validate();
  // Every local alignment is a contiguous stretch of some full path from
  // (0,0) to (|a|,|b|); walk all full paths and take the best stretch of each
  // (maximum-subarray over its column scores).
  double best = 0.0;
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double run) {
    best = std::max(best, run);
    if (i < a.size() && j < b.size()) walk(i + 1, j + 1, std::max(0.0, run) + pair_score(a[i], b[j], s));
    if (i < a.size()) walk(i + 1, j, std::max(0.0, run) + s.gap);
    if (j < b.size()) walk(i, j + 1, std::max(0.0, run) + s.gap);
  };
  walk(0, 0, 0.0);
  return best;
}

std::vector<Template> annotate_tree(const Dendrogram& tree, const std::vector<TokenSeq>& corpus_tokens,
                                    const Scoring& s) {
  if (corpus_tokens.size() != tree.leaf_count()) {
    throw Inconsistent("tree has " + std::to_string(tree.leaf_count()) + " leaves but corpus has " +
                       std::to_string(corpus_tokens.size()) + " logs");
  }
  std::vector<Template> out(tree.node_count());
  for (std::size_t i = 0; i < corpus_tokens.size(); ++i) out[i] = Template::from_tokens(corpus_tokens[i], i);
  const std::size_t n = tree.leaf_count();
  for (std::size_t k = 0; k < tree.merges().size(); ++k) {
    const auto& m = tree.merges()[k];
    out[n + k] = align(out[m.left], out[m.right], s);
    out[n + k].origin = n + k;
  }
  return out;
}

bool literals_are_subsequence(const Template& t, const TokenSeq& tokens) {
  std::size_t pos = 0;
  for (const auto& slot : t.slots) {
    if (slot.placeholder) continue;
    while (pos < tokens.size() && tokens[pos].bytes != slot.literal) ++pos;
    if (pos == tokens.size()) return false;
    ++pos;
  }
  return true;
}

std::string render(const Template& t) {
  std::string out;
  for (const auto& s : t.slots) out += s.placeholder ? std::string("«*»") : escape_bytes(s.literal);
  return out;
}

json slots_to_json(const Template& t) {
  json slots = json::array();
  for (const auto& s : t.slots) {
    if (s.placeholder) {
      slots.push_back(nullptr);
    } else {
      slots.push_back(escape_bytes(s.literal));
    }
  }
  return slots;
}

Template template_from_json(const json& slots, NodeId origin) {
  Template t;
  t.origin = origin;
  for (const auto& s : slots) {
    if (s.is_null()) {
      t.slots.push_back(Slot::hole());
    } else {
      t.slots.push_back(Slot::lit(unescape_bytes(s.get<std::string>())));
    }
  }
  return t;
}

json templates_to_json(const std::vector<Template>& templates, const Dendrogram& tree) {
  json list = json::array();
  for (std::size_t node = 0; node < templates.size(); ++node) {
    list.push_back({{"node", node},
                    {"size", tree.size(node)},
                    {"slots", slots_to_json(templates[node])},
                    {"rendered", render(templates[node])}});
  }
  return {{"format", "llt-templates"}, {"version", 1}, {"templates", std::move(list)}};
}

std::vector<Template> templates_from_json(const json& j) {
  try {
    if (j.at("format") != "llt-templates" || j.at("version") != 1) throw ParseError("not an llt-templates v1 document");
    std::vector<Template> out;
    for (const auto& t : j.at("templates")) {
      auto node = t.at("node").get<NodeId>();
      if (node != out.size()) throw ParseError("templates are not in node order");
      out.push_back(template_from_json(t.at("slots"), node));
    }
    return out;
  } catch (const json::exception& e) {
    throw ParseError(std::string("templates: ") + e.what());
  }
}

}  // namespace llt
