#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "llt/bytes.hpp"
#include "llt/session.hpp"

namespace llt {

/// One loader conversation: every client request of a session, concatenated
/// in arrival order. Server responses never appear in `raw`.
struct RequestLog {
  std::string id;  // content_id(raw)
  std::string source_host;
  Timestamp captured_at{};
  Bytes raw;

  bool operator==(const RequestLog&) const = default;
};

/// Deterministic function of the bytes alone: SHA-256, lowercase hex.
std::string content_id(BytesView raw);

RequestLog make_request_log(std::string source_host, Timestamp captured_at, Bytes raw);

struct Corpus {
  std::vector<RequestLog> logs;
  std::string provenance;

  std::size_t size() const { return logs.size(); }
  bool empty() const { return logs.empty(); }
};

/// Request-only concatenation of a session. Throws EmptySession when the
/// session has no client bytes at all.
RequestLog ingest_session(const SessionRecord& session);

/// First occurrence of each distinct raw survives; order preserved.
Corpus dedup(const Corpus& corpus);

/// Keeps the first `cap` logs of every source_host in corpus order.
/// Throws std::invalid_argument when cap is 0.
Corpus sample_per_host(const Corpus& corpus, std::size_t cap = 20);

enum class ReductionOrder { SampleThenDedup, DedupThenSample };

/// sample_per_host and dedup in the configured order (default sample first).
Corpus reduce(const Corpus& corpus, std::size_t cap = 20,
              ReductionOrder order = ReductionOrder::SampleThenDedup);

// Corpus file: JSON lines {id, source_host, captured_at, raw_b64}. Unknown
// fields are ignored on read. A non-empty provenance is written as a leading
// {"provenance": ...} line. A line whose id disagrees with its raw is
// rejected with ParseError.
void write_corpus(std::ostream& out, const Corpus& corpus);
Corpus read_corpus(std::istream& in);
void save_corpus(const std::string& path, const Corpus& corpus);
Corpus load_corpus(const std::string& path);

std::string corpus_line(const RequestLog& log);

}  // namespace llt
