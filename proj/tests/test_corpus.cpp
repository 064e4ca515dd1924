#include <random>
#include <set>
#include <sstream>

#include "doctest.h"

#include "llt/corpus.hpp"
#include "llt/error.hpp"

using namespace llt;

namespace {

Timestamp at(long long s) { return Timestamp{std::chrono::seconds(s)}; }

RequestLog log_of(const std::string& host, const std::string& raw, long long t = 1636848000) {
  return make_request_log(host, at(t), raw);
}

Corpus corpus_of(std::vector<RequestLog> logs) {
  Corpus c;
  c.logs = std::move(logs);
  return c;
}

std::vector<std::string> raws(const Corpus& c) {
  std::vector<std::string> out;
  for (const auto& l : c.logs) out.push_back(l.raw);
  return out;
}

}  // namespace

TEST_CASE("escape and unescape are inverse over every byte value") {
  std::string all;
  for (int b = 0; b < 256; ++b) all += static_cast<char>(b);
  std::string esc = escape_bytes(all);
  for (char c : esc) CHECK(static_cast<unsigned char>(c) < 0x7f);
  CHECK(unescape_bytes(esc) == all);
  CHECK(escape_bytes("a\\b\n") == "a\\\\b\\x0a");
  CHECK_THROWS_AS(unescape_bytes("\\x4"), ParseError);
  CHECK_THROWS_AS(unescape_bytes("\\q"), ParseError);
}

TEST_CASE("base64 matches the RFC 4648 test vectors") {
  const std::pair<std::string, std::string> vectors[] = {
      {"", ""}, {"f", "Zg=="}, {"fo", "Zm8="}, {"foo", "Zm9v"}, {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="}, {"foobar", "Zm9vYmFy"}};
  for (const auto& [plain, enc] : vectors) {
    CHECK(base64_encode(plain) == enc);
    CHECK(base64_decode(enc) == plain);
  }
  CHECK(base64_decode(base64_encode(std::string("\x00\xff\x10", 3))) == std::string("\x00\xff\x10", 3));
  CHECK_THROWS_AS(base64_decode("Zm9v!"), ParseError);
}

TEST_CASE("sha256 matches the FIPS 180-2 test vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(content_id("abc") == sha256_hex("abc"));
}

TEST_CASE("rfc3339 timestamps") {
  CHECK(format_rfc3339(at(0)) == "1970-01-01T00:00:00Z");
  CHECK(format_rfc3339(at(1636848000)) == "2021-11-14T00:00:00Z");
  CHECK(parse_rfc3339("2021-11-14T00:00:00Z") == at(1636848000));
  CHECK(parse_rfc3339("2021-11-14T02:00:00.250+02:00") == at(1636848000));
  CHECK(parse_rfc3339("2021-11-13T19:00:00-05:00") == at(1636848000));
  CHECK_THROWS_AS(parse_rfc3339("yesterday"), ParseError);
}

TEST_CASE("ingest_session keeps client bytes only") {
  SessionRecord s;
  s.peer = "203.0.113.9:51234";
  s.chunks = {{Direction::Client, "ls\n"}, {Direction::Server, "bin\n"}, {Direction::Client, "id\n"}};
  auto log = ingest_session(s);
  CHECK(log.raw == "ls\nid\n");
  CHECK(log.source_host == "203.0.113.9");
  CHECK(log.id == content_id("ls\nid\n"));

  SessionRecord only_server;
  only_server.chunks = {{Direction::Server, "login:"}};
  CHECK_THROWS_AS(ingest_session(only_server), EmptySession);
  CHECK_THROWS_AS(ingest_session(SessionRecord{}), EmptySession);
}

TEST_CASE("dedup keeps first occurrences in order") {
  auto a = log_of("h1", "A"), a2 = log_of("h2", "A"), b = log_of("h1", "B");
  auto out = dedup(corpus_of({a, a2, b}));
  REQUIRE(out.logs.size() == 2);
  CHECK(out.logs[0] == a);
  CHECK(out.logs[1] == b);
  CHECK(dedup(Corpus{}).logs.empty());
}

TEST_CASE("dedup of draws with replacement leaves exactly the distinct raws") {
  std::mt19937_64 rng(37);
  std::vector<RequestLog> logs;
  for (int i = 0; i < 1000; ++i) logs.push_back(log_of("h" + std::to_string(rng() % 5), "raw-" + std::to_string(i % 37)));
  std::shuffle(logs.begin(), logs.end(), rng);
  auto once = dedup(corpus_of(logs));
  CHECK(once.logs.size() == 37);
  CHECK(raws(dedup(once)) == raws(once));  // idempotent
}

TEST_CASE("sample_per_host keeps the first cap logs per host") {
  std::vector<RequestLog> one_host;
  for (int i = 0; i < 25; ++i) one_host.push_back(log_of("h", "r" + std::to_string(i)));
  auto kept = sample_per_host(corpus_of(one_host), 20);
  REQUIRE(kept.logs.size() == 20);
  CHECK(kept.logs.back().raw == "r19");

  std::vector<RequestLog> three;
  for (int h = 0; h < 3; ++h)
    for (int i = 0; i < 5; ++i) three.push_back(log_of("h" + std::to_string(h), std::to_string(h * 10 + i)));
  CHECK(sample_per_host(corpus_of(three), 20).logs.size() == 15);
  CHECK(sample_per_host(corpus_of(three), 1).logs.size() == 3);
  CHECK_THROWS_AS(sample_per_host(corpus_of(three), 0), std::invalid_argument);
}

TEST_CASE("reduction order matters when duplicates span hosts") {
  // Host h1 fills its cap with a raw that h2 also sent first.
  auto c = corpus_of({log_of("h2", "X"), log_of("h1", "X"), log_of("h1", "Y")});
  auto sample_first = reduce(c, 1, ReductionOrder::SampleThenDedup);
  auto dedup_first = reduce(c, 1, ReductionOrder::DedupThenSample);
  CHECK(raws(sample_first) == std::vector<std::string>{"X"});
  CHECK(raws(dedup_first) == std::vector<std::string>{"X", "Y"});
  // With duplicates confined to one host the orders agree.
  auto same_host = corpus_of({log_of("h1", "X"), log_of("h1", "X"), log_of("h1", "Y"), log_of("h2", "Z")});
  CHECK(raws(reduce(same_host, 5, ReductionOrder::SampleThenDedup)) ==
        raws(reduce(same_host, 5, ReductionOrder::DedupThenSample)));
}

TEST_CASE("corpus files round-trip ids and bytes") {
  std::string binary;
  for (int b = 0; b < 256; ++b) binary += static_cast<char>(b);
  auto c = corpus_of({log_of("h1", "cd /tmp\r\n", 5), log_of("h2", binary, 1636848000)});
  c.provenance = "{\"seed\":7}";
  std::stringstream ss;
  write_corpus(ss, c);
  auto back = read_corpus(ss);
  REQUIRE(back.logs.size() == 2);
  CHECK(back.logs == c.logs);
  CHECK(back.provenance == c.provenance);
}

TEST_CASE("corpus reader rejects ids that disagree with raw") {
  std::stringstream ss;
  ss << R"({"id":"00","source_host":"h","captured_at":"2021-11-14T00:00:00Z","raw_b64":"bHM="})" << "\n";
  CHECK_THROWS_AS(read_corpus(ss), ParseError);
  std::stringstream extra;
  extra << R"({"source_host":"h","captured_at":"2021-11-14T00:00:00Z","raw_b64":"bHM=","future":1})" << "\n";
  CHECK(read_corpus(extra).logs.at(0).raw == "ls");
  std::stringstream junk("not json\n");
  CHECK_THROWS_AS(read_corpus(junk), ParseError);
}

TEST_CASE("session records survive the sidecar JSON form") {
  SessionRecord s;
  s.peer = "127.0.0.1:4000";
  s.started_at = at(1636848000);
  s.chunks = {{Direction::Server, "login: "}, {Direction::Client, std::string("\xff\x00ls\n", 5)}};
  s.credentials_seen = Credentials{"root", "admin"};
  s.truncated = true;
  CHECK(session_from_json(to_json(s)) == s);
  s.credentials_seen.reset();
  CHECK(session_from_json(to_json(s)) == s);
  CHECK(s.client_chunk_count() == 1);
}
