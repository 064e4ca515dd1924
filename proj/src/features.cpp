#include "llt/features.hpp"

#include <algorithm>
#include <cstdio>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "llt/error.hpp"

namespace llt {

using nlohmann::json;

namespace {

// Length-prefixed concatenation, so ("ab","c") and ("a","bc") stay distinct.
std::string term_key(std::span<const Token> tokens) {
  std::string key;
  for (const auto& t : tokens) {
    auto len = static_cast<std::uint32_t>(t.bytes.size());
    key.append(reinterpret_cast<const char*>(&len), sizeof len);
    key += t.bytes;
  }
  return key;
}

std::string term_key(const Term& term) {
  std::string key;
  for (const auto& b : term) {
    auto len = static_cast<std::uint32_t>(b.size());
    key.append(reinterpret_cast<const char*>(&len), sizeof len);
    key += b;
  }
  return key;
}

const char* section_name(std::size_t order) {
  static constexpr const char* names[] = {"unigrams", "bigrams", "trigrams"};
  return names[order - 1];
}

}  // namespace

Vocabulary Vocabulary::build(std::span<const TokenSeq> corpus_tokens) {
  Vocabulary v;
  for (const auto& seq : corpus_tokens) {
    std::span<const Token> all(seq);
    for (std::size_t order = 1; order <= kOrders; ++order) {
      for (std::size_t i = 0; i + order <= all.size(); ++i) v.add(order, all.subspan(i, order));
    }
  }
  return v;
}

void Vocabulary::add(std::size_t order, std::span<const Token> tokens) {
  auto& s = sections_[order - 1];
  auto [it, inserted] = s.index.try_emplace(term_key(tokens), static_cast<std::uint32_t>(s.terms.size()));
  if (!inserted) return;
  Term term;
  term.reserve(tokens.size());
  for (const auto& t : tokens) term.push_back(t.bytes);
  s.terms.push_back(std::move(term));
}

void Vocabulary::add_term(std::size_t order, Term term) {
  auto& s = sections_[order - 1];
  auto [it, inserted] = s.index.try_emplace(term_key(term), static_cast<std::uint32_t>(s.terms.size()));
  if (!inserted) throw ParseError("duplicate vocabulary term");
  s.terms.push_back(std::move(term));
}

std::size_t Vocabulary::total_dims() const {
  std::size_t n = 0;
  for (const auto& s : sections_) n += s.terms.size();
  return n;
}

std::size_t Vocabulary::offset(std::size_t order) const {
  std::size_t off = 0;
  for (std::size_t o = 1; o < order; ++o) off += sections_[o - 1].terms.size();
  return off;
}

std::optional<std::uint32_t> Vocabulary::dimension(std::span<const Token> tokens) const {
  if (tokens.empty() || tokens.size() > kOrders) return std::nullopt;
  const auto& s = sections_[tokens.size() - 1];
  auto it = s.index.find(term_key(tokens));
  if (it == s.index.end()) return std::nullopt;
  return static_cast<std::uint32_t>(offset(tokens.size()) + it->second);
}

json Vocabulary::to_json() const {
  json j = {{"format", "llt-vocab"}, {"version", 1}};
  for (std::size_t order = 1; order <= kOrders; ++order) {
    json terms = json::array();
    for (const auto& term : section(order)) {
      if (order == 1) {
        terms.push_back(escape_bytes(term[0]));
      } else {
        json parts = json::array();
        for (const auto& b : term) parts.push_back(escape_bytes(b));
        terms.push_back(std::move(parts));
      }
    }
    j[section_name(order)] = std::move(terms);
  }
  j["total_dims"] = total_dims();
  return j;
}

Vocabulary Vocabulary::from_json(const json& j) {
  try {
    if (j.at("format") != "llt-vocab" || j.at("version") != 1) throw ParseError("not an llt-vocab v1 document");
    Vocabulary v;
    for (std::size_t order = 1; order <= kOrders; ++order) {
      for (const auto& t : j.at(section_name(order))) {
        Term term;
        if (order == 1) {
          term.push_back(unescape_bytes(t.get<std::string>()));
        } else {
          for (const auto& p : t) term.push_back(unescape_bytes(p.get<std::string>()));
        }
        if (term.size() != order) throw ParseError("vocabulary term has wrong arity");
        v.add_term(order, std::move(term));
      }
    }
    return v;
  } catch (const json::exception& e) {
    throw ParseError(std::string("vocabulary: ") + e.what());
  }
}

bool Vocabulary::operator==(const Vocabulary& other) const {
  for (std::size_t o = 1; o <= kOrders; ++o) {
    if (section(o) != other.section(o)) return false;
  }
  return true;
}

std::uint64_t FeatureVector::total() const {
  std::uint64_t t = 0;
  for (const auto& [dim, c] : entries) t += c;
  return t;
}

std::uint32_t FeatureVector::count(std::uint32_t dim) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), dim,
                             [](const auto& e, std::uint32_t d) { return e.first < d; });
  return it != entries.end() && it->first == dim ? it->second : 0;
}

std::vector<double> FeatureVector::dense() const {
  std::vector<double> out(dims, 0.0);
  for (const auto& [dim, c] : entries) out[dim] = c;
  return out;
}

FeatureVector vectorize(const TokenSeq& seq, const Vocabulary& vocab) {
  FeatureVector fv;
  fv.dims = vocab.total_dims();
  std::unordered_map<std::uint32_t, std::uint32_t> counts;
  std::span<const Token> all(seq);
  for (std::size_t order = 1; order <= Vocabulary::kOrders; ++order) {
    for (std::size_t i = 0; i + order <= all.size(); ++i) {
      if (auto dim = vocab.dimension(all.subspan(i, order))) ++counts[*dim];
    }
  }
  fv.entries.assign(counts.begin(), counts.end());
  std::sort(fv.entries.begin(), fv.entries.end());
  return fv;
}

double euclidean(const FeatureVector& u, const FeatureVector& v) {
  if (u.dims != v.dims) {
    throw DimensionMismatch("feature vectors have " + std::to_string(u.dims) + " and " +
                            std::to_string(v.dims) + " dimensions");
  }
  // Integer accumulation keeps the result exact up to the final sqrt.
  std::uint64_t sum = 0;
  auto square = [](std::int64_t d) { return static_cast<std::uint64_t>(d * d); };
  auto a = u.entries.begin();
  auto b = v.entries.begin();
  while (a != u.entries.end() || b != v.entries.end()) {
    if (b == v.entries.end() || (a != u.entries.end() && a->first < b->first)) {
      sum += square(a->second);
      ++a;
    } else if (a == u.entries.end() || b->first < a->first) {
      sum += square(b->second);
      ++b;
    } else {
      sum += square(static_cast<std::int64_t>(a->second) - static_cast<std::int64_t>(b->second));
      ++a;
      ++b;
    }
  }
  return std::sqrt(static_cast<double>(sum));
}

DistanceMatrix DistanceMatrix::from_square(const std::vector<std::vector<double>>& full) {
  const std::size_t n = full.size();
  DistanceMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (full[i].size() != n) throw InvalidMatrix("distance matrix is not square");
    if (full[i][i] != 0.0) throw InvalidMatrix("distance matrix has a non-zero diagonal");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double a = full[i][j];
      double b = full[j][i];
      if (!std::isfinite(a) || !std::isfinite(b)) throw InvalidMatrix("distance matrix has a non-finite entry");
      if (a < 0.0 || b < 0.0) throw InvalidMatrix("distance matrix has a negative entry");
      if (std::abs(a - b) > 1e-12 * std::max({1.0, a, b})) throw InvalidMatrix("distance matrix is not symmetric");
      m.set(i, j, a);
    }
  }
  return m;
}

std::size_t DistanceMatrix::index(std::size_t i, std::size_t j) const {
  if (i > j) std::swap(i, j);
  // Row-major upper triangle without the diagonal.
  return i * n_ - i * (i + 1) / 2 + (j - i - 1);
}

double DistanceMatrix::operator()(std::size_t i, std::size_t j) const {
  if (i == j) return 0.0;
  return values_[index(i, j)];
}

void DistanceMatrix::set(std::size_t i, std::size_t j, double d) {
  if (i == j) {
    if (d != 0.0) throw InvalidMatrix("diagonal must be zero");
    return;
  }
  if (!std::isfinite(d) || d < 0.0) throw InvalidMatrix("distance must be finite and non-negative");
  values_[index(i, j)] = d;
}

namespace {

constexpr char kMatrixMagic[8] = {'L', 'L', 'T', 'D', 'M', '0', '0', '1'};

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get_le(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) throw ParseError("truncated matrix file");
  return value;
}

}  // namespace

void DistanceMatrix::write_binary(std::ostream& out, const std::string& header) const {
  out.write(kMatrixMagic, sizeof kMatrixMagic);
  put_le<std::uint64_t>(out, n_);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (double d : values_) put_le<double>(out, d);
}

DistanceMatrix DistanceMatrix::read_binary(std::istream& in, std::string* header) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMatrixMagic, sizeof magic) != 0) {
    throw ParseError("not an LLTDM001 matrix file");
  }
  auto n = get_le<std::uint64_t>(in);
  auto hlen = get_le<std::uint32_t>(in);
  std::string h(hlen, '\0');
  if (!in.read(h.data(), hlen)) throw ParseError("truncated matrix header");
  if (header) *header = std::move(h);
  DistanceMatrix m(static_cast<std::size_t>(n));
  for (auto& d : m.values_) {
    d = get_le<double>(in);
    if (!std::isfinite(d) || d < 0.0) throw InvalidMatrix("matrix file holds an invalid distance");
  }
  return m;
}

void DistanceMatrix::write_csv(std::ostream& out) const {
  out << "i,j,distance\n";
  char buf[64];
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", (*this)(i, j));
      out << i << ',' << j << ',' << buf << '\n';
    }
  }
}

DistanceMatrix distance_matrix(std::span<const FeatureVector> vectors) {
  DistanceMatrix m(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t j = i + 1; j < vectors.size(); ++j) m.set(i, j, euclidean(vectors[i], vectors[j]));
  }
  return m;
}

DistanceMatrix distance_matrix(const Corpus& corpus, const Vocabulary& vocab) {
  std::vector<FeatureVector> vectors;
  vectors.reserve(corpus.size());
  for (const auto& log : corpus.logs) vectors.push_back(vectorize(tokenize(log.raw), vocab));
  return distance_matrix(vectors);
}

}  // namespace llt
