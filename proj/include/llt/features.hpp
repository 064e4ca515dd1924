#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "llt/corpus.hpp"
#include "llt/tokenizer.hpp"

namespace llt {

/// A unigram, bigram or trigram: the token byte strings in sequence order.
using Term = std::vector<Bytes>;

/// Joint token / 2-gram / 3-gram vocabulary over a fixed corpus. Indices in
/// each section are dense and assigned in first-occurrence corpus order;
/// feature dimensions lay the sections out back to back.
class Vocabulary {
 public:
  static constexpr std::size_t kOrders = 3;

  static Vocabulary build(std::span<const TokenSeq> corpus_tokens);

  const std::vector<Term>& section(std::size_t order) const { return sections_.at(order - 1).terms; }
  const std::vector<Term>& unigrams() const { return section(1); }
  const std::vector<Term>& bigrams() const { return section(2); }
  const std::vector<Term>& trigrams() const { return section(3); }

  std::size_t total_dims() const;
  /// First dimension of the section holding n-grams of `order` (1..3).
  std::size_t offset(std::size_t order) const;

  /// Feature dimension of an n-gram made of `tokens`, or nullopt for OOV.
  std::optional<std::uint32_t> dimension(std::span<const Token> tokens) const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

  bool operator==(const Vocabulary& other) const;

 private:
  struct Section {
    std::vector<Term> terms;
    std::unordered_map<std::string, std::uint32_t> index;
  };
  void add(std::size_t order, std::span<const Token> tokens);
  void add_term(std::size_t order, Term term);

  std::array<Section, kOrders> sections_;
};

/// Sparse occurrence counts; entries sorted by dimension, counts > 0.
struct FeatureVector {
  std::size_t dims = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> entries;

  std::uint64_t total() const;
  std::uint32_t count(std::uint32_t dim) const;
  std::vector<double> dense() const;
};

FeatureVector vectorize(const TokenSeq& seq, const Vocabulary& vocab);

/// Throws DimensionMismatch when the vectors come from different vocabularies.
double euclidean(const FeatureVector& u, const FeatureVector& v);

/// Symmetric, zero-diagonal matrix kept in condensed upper-triangle form.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), values_(n < 2 ? 0 : n * (n - 1) / 2, 0.0) {}
  /// Validates a full square matrix. Throws InvalidMatrix when it is not
  /// square, not symmetric, has a non-zero diagonal, or carries negative or
  /// non-finite entries.
  static DistanceMatrix from_square(const std::vector<std::vector<double>>& full);

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const;
  void set(std::size_t i, std::size_t j, double d);
  const std::vector<double>& condensed() const { return values_; }

  // Binary: "LLTDM001", u64 n, u32 header length, header bytes, then the
  // condensed upper triangle as little-endian IEEE-754 doubles.
  void write_binary(std::ostream& out, const std::string& header = {}) const;
  static DistanceMatrix read_binary(std::istream& in, std::string* header = nullptr);
  /// "i,j,distance" rows for i < j.
  void write_csv(std::ostream& out) const;

 private:
  std::size_t index(std::size_t i, std::size_t j) const;
  std::size_t n_ = 0;
  std::vector<double> values_;
};

DistanceMatrix distance_matrix(std::span<const FeatureVector> vectors);
DistanceMatrix distance_matrix(const Corpus& corpus, const Vocabulary& vocab);

}  // namespace llt
