#include "llt/corpus.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "llt/error.hpp"

namespace llt {

using nlohmann::json;

std::size_t SessionRecord::client_chunk_count() const {
  std::size_t n = 0;
  for (const auto& c : chunks) n += c.direction == Direction::Client ? 1 : 0;
  return n;
}

json to_json(const SessionRecord& record) {
  json chunks = json::array();
  for (const auto& c : record.chunks) {
    chunks.push_back({{"dir", c.direction == Direction::Client ? "client" : "server"},
                      {"b64", base64_encode(c.payload)}});
  }
  json j = {{"peer", record.peer},
            {"started_at", format_rfc3339(record.started_at)},
            {"chunks", std::move(chunks)},
            {"truncated", record.truncated}};
  if (record.credentials_seen) {
    j["credentials"] = {{"username", record.credentials_seen->username},
                        {"password", record.credentials_seen->password}};
  } else {
    j["credentials"] = nullptr;
  }
  return j;
}

SessionRecord session_from_json(const json& j) {
  try {
    SessionRecord r;
    r.peer = j.at("peer").get<std::string>();
    r.started_at = parse_rfc3339(j.at("started_at").get<std::string>());
    for (const auto& c : j.at("chunks")) {
      auto dir = c.at("dir").get<std::string>();
      if (dir != "client" && dir != "server") throw ParseError("bad chunk direction: " + dir);
      r.chunks.push_back({dir == "client" ? Direction::Client : Direction::Server,
                          base64_decode(c.at("b64").get<std::string>())});
    }
    if (j.contains("credentials") && !j["credentials"].is_null()) {
      r.credentials_seen = Credentials{j["credentials"].at("username").get<std::string>(),
                                       j["credentials"].at("password").get<std::string>()};
    }
    r.truncated = j.value("truncated", false);
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("session record: ") + e.what());
  }
}

std::vector<SessionRecord> read_session_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open session log " + path);
  std::vector<SessionRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(session_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(std::string("session log: ") + e.what());
    }
  }
  return out;
}

std::string content_id(BytesView raw) { return sha256_hex(raw); }

RequestLog make_request_log(std::string source_host, Timestamp captured_at, Bytes raw) {
  RequestLog log;
  log.id = content_id(raw);
  log.source_host = std::move(source_host);
  log.captured_at = captured_at;
  log.raw = std::move(raw);
  return log;
}

RequestLog ingest_session(const SessionRecord& session) {
  Bytes raw;
  bool any_client = false;
  for (const auto& c : session.chunks) {
    if (c.direction != Direction::Client) continue;
    any_client = any_client || !c.payload.empty();
    raw += c.payload;
  }
  if (!any_client) throw EmptySession();
  // The peer carries an ephemeral port; the host part alone identifies the source.
  std::string host = session.peer;
  if (auto colon = host.rfind(':'); colon != std::string::npos && host.find(':') == colon) {
    host.resize(colon);
  }
  return make_request_log(std::move(host), session.started_at, std::move(raw));
}

Corpus dedup(const Corpus& corpus) {
  Corpus out;
  out.provenance = corpus.provenance;
  std::unordered_set<std::string_view> seen;
  for (const auto& log : corpus.logs) {
    if (seen.insert(log.raw).second) out.logs.push_back(log);
  }
  // string_views in `seen` point into `corpus`, which outlives the loop.
  return out;
}

Corpus sample_per_host(const Corpus& corpus, std::size_t cap) {
  if (cap == 0) throw std::invalid_argument("per-host cap must be >= 1");
  Corpus out;
  out.provenance = corpus.provenance;
  std::unordered_map<std::string, std::size_t> taken;
  for (const auto& log : corpus.logs) {
    auto& n = taken[log.source_host];
    if (n < cap) {
      ++n;
      out.logs.push_back(log);
    }
  }
  return out;
}

Corpus reduce(const Corpus& corpus, std::size_t cap, ReductionOrder order) {
  if (order == ReductionOrder::SampleThenDedup) return dedup(sample_per_host(corpus, cap));
  return sample_per_host(dedup(corpus), cap);
}

std::string corpus_line(const RequestLog& log) {
  json j = {{"id", log.id},
            {"source_host", log.source_host},
            {"captured_at", format_rfc3339(log.captured_at)},
            {"raw_b64", base64_encode(log.raw)}};
  return j.dump();
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  if (!corpus.provenance.empty()) out << json{{"provenance", corpus.provenance}}.dump() << '\n';
  for (const auto& log : corpus.logs) out << corpus_line(log) << '\n';
}

Corpus read_corpus(std::istream& in) {
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      if (!j.contains("raw_b64") && j.contains("provenance")) {
        corpus.provenance = j["provenance"].get<std::string>();
        continue;
      }
      RequestLog log;
      log.raw = base64_decode(j.at("raw_b64").get<std::string>());
      log.id = content_id(log.raw);
      if (j.contains("id") && j["id"].get<std::string>() != log.id) {
        throw ParseError("id does not match raw content");
      }
      log.source_host = j.at("source_host").get<std::string>();
      log.captured_at = parse_rfc3339(j.at("captured_at").get<std::string>());
      corpus.logs.push_back(std::move(log));
    } catch (const json::exception& e) {
      throw ParseError("corpus line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("corpus line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return corpus;
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write corpus " + path);
  write_corpus(out, corpus);
  if (!out) throw Error("failed writing corpus " + path);
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus " + path);
  Corpus c = read_corpus(in);
  if (c.provenance.empty()) c.provenance = path;
  return c;
}

}  // namespace llt
