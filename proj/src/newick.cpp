#include "llt/newick.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>

#include "llt/error.hpp"

namespace llt {

std::size_t NewickNode::leaf_count() const {
  if (is_leaf()) return 1;
  std::size_t n = 0;
  for (const auto& c : children) n += c.leaf_count();
  return n;
}

std::vector<std::string> NewickNode::leaf_names() const {
  std::vector<std::string> out;
  std::vector<const NewickNode*> stack{this};
  while (!stack.empty()) {
    const NewickNode* n = stack.back();
    stack.pop_back();
    if (n->is_leaf()) out.push_back(n->name);
    for (const auto& c : n->children) stack.push_back(&c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  NewickNode parse() {
    NewickNode root = subtree();
    skip();
    if (pos_ >= text_.size() || text_[pos_] != ';') fail("expected ';'");
    ++pos_;
    skip();
    if (pos_ != text_.size()) fail("trailing characters after ';'");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("newick: " + what + " at offset " + std::to_string(pos_));
  }

  void skip() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++pos_;
      } else if (c == '[') {
        auto end = text_.find(']', pos_);
        if (end == std::string_view::npos) fail("unterminated comment");
        pos_ = end + 1;
      } else {
        break;
      }
    }
  }

  NewickNode subtree() {
    NewickNode node;
    skip();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      ++pos_;
      while (true) {
        node.children.push_back(subtree());
        skip();
        if (pos_ >= text_.size()) fail("unterminated group");
        if (text_[pos_] == ',') {
          ++pos_;
          continue;
        }
        if (text_[pos_] == ')') {
          ++pos_;
          break;
        }
        fail("expected ',' or ')'");
      }
    }
    skip();
    node.name = label();
    skip();
    if (pos_ < text_.size() && text_[pos_] == ':') {
      ++pos_;
      skip();
      std::size_t start = pos_;
      while (pos_ < text_.size() && std::string_view("0123456789+-.eE").find(text_[pos_]) != std::string_view::npos) {
        ++pos_;
      }
      if (start == pos_) fail("missing branch length");
      std::string num(text_.substr(start, pos_ - start));
      char* end = nullptr;
      double v = std::strtod(num.c_str(), &end);
      if (end != num.c_str() + num.size()) fail("bad branch length");
      node.length = v;
    }
    return node;
  }

  std::string label() {
    std::string out;
    if (pos_ < text_.size() && text_[pos_] == '\'') {
      ++pos_;
      while (true) {
        if (pos_ >= text_.size()) fail("unterminated quoted label");
        char c = text_[pos_++];
        if (c == '\'') {
          if (pos_ < text_.size() && text_[pos_] == '\'') {
            out += '\'';
            ++pos_;
            continue;
          }
          break;
        }
        out += c;
      }
      return out;
    }
    while (pos_ < text_.size() && std::string_view("(),:;[ \t\n\r'").find(text_[pos_]) == std::string_view::npos) {
      out += text_[pos_++];
    }
    return out;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

NewickNode parse_newick(std::string_view text) { return Parser(text).parse(); }

std::string quote_newick_label(std::string_view label) {
  bool plain = !label.empty() &&
               label.find_first_of("(),:;[]' \t\n\r_") == std::string_view::npos;
  if (plain) return std::string(label);
  std::string out = "'";
  for (char c : label) {
    if (c == '\'') out += '\'';
    out += c;
  }
  out += '\'';
  return out;
}

std::string format_newick_length(double length) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", length);
  return buf;
}

}  // namespace llt
