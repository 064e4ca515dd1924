#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <filesystem>
#include <mutex>
#include <random>
#include <thread>

#include "doctest.h"

#include "llt/capture.hpp"
#include "llt/corpus.hpp"
#include "llt/error.hpp"

using namespace llt;
namespace fs = std::filesystem;
using namespace std::chrono_literals;

namespace {

Bytes b(std::initializer_list<int> xs) {
  Bytes out;
  for (int x : xs) out.push_back(static_cast<char>(x));
  return out;
}

CaptureConfig loopback() {
  CaptureConfig c;
  c.bind = {"127.0.0.1", 0};
  return c;
}

Bytes client_bytes(const SessionRecord& r) {
  Bytes out;
  for (const auto& c : r.chunks)
    if (c.direction == Direction::Client) out += c.payload;
  return out;
}

/// Connects, sends `data` in one go, half-closes and drains until the peer
/// closes. Tolerates resets; returns the local "ip:port".
std::string raw_session(std::uint16_t port, const Bytes& data) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(fd >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  sockaddr_in local{};
  socklen_t len = sizeof local;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&local), &len);
  char ip[INET_ADDRSTRLEN];
  ::inet_ntop(AF_INET, &local.sin_addr, ip, sizeof ip);
  std::string peer = std::string(ip) + ":" + std::to_string(ntohs(local.sin_port));
  std::size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n <= 0) break;
    off += static_cast<std::size_t>(n);
  }
  ::shutdown(fd, SHUT_WR);
  char buf[4096];
  while (::recv(fd, buf, sizeof buf, 0) > 0) {
  }
  ::close(fd);
  return peer;
}

struct TmpDir {
  fs::path path;
  TmpDir() {
    path = fs::temp_directory_path() / ("llt-capture-" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TmpDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("strip_telnet_controls examples") {
  CHECK(strip_telnet_controls("ls") == "ls");
  CHECK(strip_telnet_controls(b({0xFF, 0xFB, 0x01, 0x69, 0x64})) == "id");
  CHECK(strip_telnet_controls(b({0xFF, 0xFF})) == b({0xFF}));
  CHECK(strip_telnet_controls("") == "");
}

TEST_CASE("hand-decoded IAC table") {
  struct Row {
    Bytes in, out;
  };
  const Row rows[] = {
      {b({'a', 0xFF, 0xF1, 'b'}), "ab"},                                   // IAC NOP
      {b({0xFF, 0xFD, 0x18, 0xFF, 0xFC, 0x1F, 'x'}), "x"},                 // DO TTYPE, WONT NAWS
      {b({0xFF, 0xFA, 0x18, 0x00, 'V', 'T', 0xFF, 0xF0, 'y'}), "y"},       // SB TTYPE IS VT SE
      {b({0xFF, 0xFA, 0x18, 0xFF, 0xFF, 0x01, 0xFF, 0xF0}), ""},           // IAC IAC inside SB
      {b({'p', 0xFF, 0xFF, 'q'}), b({'p', 0xFF, 'q'})},                     // escaped data byte
      {b({0xFF, 0xFE, 0x01, 0xFF, 0xFB, 0xFF, 'z'}), "z"},                 // option byte 255
      {b({0x80, 0xFE, 0xFB}), b({0x80, 0xFE, 0xFB})},                       // high bytes without IAC
  };
  for (const auto& r : rows) {
    CHECK(strip_telnet_controls(r.in) == r.out);
    // Any read boundary gives the same decoded bytes.
    for (std::size_t split = 0; split <= r.in.size(); ++split) {
      TelnetDecoder d;
      Bytes got = d.feed(BytesView(r.in).substr(0, split));
      got += d.feed(BytesView(r.in).substr(split));
      CHECK(got == r.out);
      CHECK_FALSE(d.mid_sequence());
    }
  }
}

TEST_CASE("truncated sequences report what was decoded") {
  for (const Bytes& s : {b({'i', 'd', 0xFF}), b({'i', 'd', 0xFF, 0xFB}), b({'i', 'd', 0xFF, 0xFA, 0x18, 'x'}),
                         b({'i', 'd', 0xFF, 0xFA, 0x18, 0xFF})}) {
    try {
      strip_telnet_controls(s);
      FAIL("expected TruncatedControl");
    } catch (const TruncatedControl& e) {
      CHECK(e.consumed() == "id");
    }
  }
}

TEST_CASE("stripping is idempotent on its output") {
  std::mt19937_64 rng(3);
  for (int iter = 0; iter < 2000; ++iter) {
    Bytes s(rng() % 40, '\0');
    for (auto& c : s) c = static_cast<char>(rng() % 4 == 0 ? 0xFF : rng() % 256);
    Bytes once;
    try {
      once = strip_telnet_controls(s);
    } catch (const TruncatedControl& e) {
      once = e.consumed();
    }
    // Output may hold single 0xFF bytes from IAC IAC; re-escaping them and
    // stripping again is the identity.
    Bytes escaped;
    for (char c : once) {
      escaped += c;
      if (static_cast<unsigned char>(c) == 0xFF) escaped += c;
    }
    CHECK(strip_telnet_controls(escaped) == once);
    if (once.find('\xFF') == Bytes::npos) CHECK(strip_telnet_controls(once) == once);
  }
}

TEST_CASE("endpoint parsing") {
  auto e = Endpoint::parse("10.0.0.1:23");
  CHECK(e.host == "10.0.0.1");
  CHECK(e.port == 23);
  CHECK(Endpoint::parse("example").port == 2323);
  CHECK(Endpoint::parse(":99").host == "0.0.0.0");
  CHECK(e.to_string() == "10.0.0.1:23");
  CHECK_THROWS_AS(Endpoint::parse("h:notaport"), ParseError);
  CHECK_THROWS_AS(Endpoint::parse("h:70000"), ParseError);
}

TEST_CASE("scripted root/admin session with ls") {
  CaptureServer server(loopback());
  server.start();
  ReplayScript script;
  script.lines = {"ls\n"};
  auto rec = replay_script(script, server);
  REQUIRE(rec.credentials_seen);
  CHECK(rec.credentials_seen->username == "root");
  CHECK(rec.credentials_seen->password == "admin");
  CHECK(rec.client_chunk_count() == 1);
  CHECK(client_bytes(rec) == "ls\n");
  CHECK_FALSE(rec.truncated);
  // Credentials never appear in chunks; server chunks hold only what it sent.
  for (const auto& c : rec.chunks) {
    CHECK(c.payload.find("admin") == Bytes::npos);
    if (c.direction == Direction::Server) CHECK(c.payload.find("ls") == Bytes::npos);
  }
  CHECK(rec.chunks.front().direction == Direction::Server);
  CHECK(rec.chunks.front().payload == "login: ");
  server.stop();
}

TEST_CASE("disconnect before login") {
  CaptureServer server(loopback());
  server.start();
  auto peer = raw_session(server.port(), "");
  auto rec = server.await_record(peer, 5s);
  REQUIRE(rec);
  CHECK_FALSE(rec->credentials_seen);
  CHECK(rec->client_chunk_count() == 0);
  server.stop();
}

TEST_CASE("byte limit truncates exactly") {
  auto cfg = loopback();
  cfg.max_bytes = 100;
  CaptureServer server(cfg);
  server.start();
  Bytes body;
  for (int i = 0; i < 30; ++i) body += "echo " + std::to_string(i) + "\n";
  REQUIRE(body.size() > 100);
  auto peer = raw_session(server.port(), "u\np\n" + body);
  auto rec = server.await_record(peer, 5s);
  REQUIRE(rec);
  CHECK(rec->truncated);
  CHECK(client_bytes(*rec) == body.substr(0, 100));
  server.stop();
}

TEST_CASE("empty script and three lines") {
  CaptureServer server(loopback());
  server.start();
  auto empty = replay_script(ReplayScript{}, server);
  REQUIRE(empty.credentials_seen);
  CHECK(empty.client_chunk_count() == 0);
  CHECK_THROWS_AS(ingest_session(empty), EmptySession);

  ReplayScript three;
  three.lines = {"enable\r\n", "system\r\n", "sh\r\n"};
  auto rec = replay_script(three, server);
  CHECK(rec.client_chunk_count() == 3);
  CHECK(ingest_session(rec).raw == "enable\r\nsystem\r\nsh\r\n");
  server.stop();
}

TEST_CASE("the nippon listing replays byte for byte") {
  CaptureServer server(loopback());
  server.start();
  ReplayScript script;
  script.lines = {R"(busybox echo -e '\\x6b\\x61\\x6d\\x69/proc' > /proc/.nippon; )" "\n",
                  "busybox cat /proc/.nippon; \n", "busybox rm /proc/.nippon\n"};
  auto rec = replay_script(script, server);
  auto log = ingest_session(rec);
  CHECK(log.raw == script.lines[0] + script.lines[1] + script.lines[2]);
  CHECK(log.raw.find(R"('\\x6b\\x61\\x6d\\x69/proc' > /proc/.nippon)") != Bytes::npos);
  server.stop();
}

TEST_CASE("control sequences on the wire are stripped") {
  CaptureServer server(loopback());
  server.start();
  ReplayScript script;
  script.username = "admin";
  script.password = "1234";
  script.lines = {b({0xFF, 0xFD, 0x01}) + "cat /proc/cpuinfo\n", "echo " + b({0xFF, 0xFF}) + "\n",
                  b({0xFF, 0xFA, 0x1F, 0x00, 0x50, 0xFF, 0xF0}) + "ps\n"};
  auto rec = replay_script(script, server);
  CHECK(client_bytes(rec) == expected_request_bytes(script));
  CHECK(client_bytes(rec) == "cat /proc/cpuinfo\necho " + b({0xFF}) + "\nps\n");
  CHECK(rec.credentials_seen->username == "admin");
  server.stop();
}

TEST_CASE("canned responses, partial last line and durable store") {
  TmpDir dir;
  auto cfg = loopback();
  cfg.out_dir = dir.path.string();
  cfg.banner = "Welcome\r\n";
  cfg.responses["uname"] = "Linux\r\n";
  std::mutex mu;
  std::vector<SessionRecord> sunk;
  CaptureServer server(cfg, [&](const SessionRecord& r) {
    std::lock_guard lock(mu);
    sunk.push_back(r);
  });
  server.start();
  ReplayScript script;
  script.lines = {"uname\r\n", "tail"};
  ReplayOptions opts;
  auto rec = replay_script(script, server, opts);
  CHECK(rec.chunks.front().payload == "Welcome\r\nlogin: ");
  bool saw_reply = false;
  for (const auto& c : rec.chunks)
    if (c.direction == Direction::Server && c.payload == "Linux\r\n$ ") saw_reply = true;
  CHECK(saw_reply);
  CHECK(rec.chunks.back().payload == "tail");
  replay_script(ReplayScript{}, server);
  server.stop();
  CHECK(server.sessions_recorded() == 2);
  CHECK(sunk.size() == 2);

  auto sessions = read_session_log((dir.path / "sessions.jsonl").string());
  REQUIRE(sessions.size() == 2);
  CHECK(std::find(sessions.begin(), sessions.end(), rec) != sessions.end());
  // The credentials-only session has no corpus line.
  auto corpus = load_corpus((dir.path / "corpus.jsonl").string());
  REQUIRE(corpus.logs.size() == 1);
  CHECK(corpus.logs[0].raw == "uname\r\ntail");
}

TEST_CASE("concurrent sessions stay independent") {
  CaptureServer server(loopback());
  server.start();
  std::vector<std::thread> threads;
  std::vector<SessionRecord> recs(8);
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] {
      ReplayScript s;
      for (int k = 0; k <= i; ++k) s.lines.push_back("cmd" + std::to_string(i) + "-" + std::to_string(k) + "\n");
      recs[i] = replay_script(s, server);
    });
  }
  for (auto& t : threads) t.join();
  for (int i = 0; i < 8; ++i) {
    CHECK(recs[i].client_chunk_count() == static_cast<std::size_t>(i + 1));
    for (const auto& c : recs[i].chunks)
      if (c.direction == Direction::Client) CHECK(c.payload.rfind("cmd" + std::to_string(i) + "-", 0) == 0);
  }
  server.stop();
}

TEST_CASE("bind failure and unreachable target") {
  CaptureServer first(loopback());
  first.start();
  auto cfg = loopback();
  cfg.bind.port = first.port();
  CaptureServer second(cfg);
  CHECK_THROWS_AS(second.start(), Error);
  first.stop();
  // The port is free again once the first server has stopped.
  ReplayOptions opts;
  opts.timeout = 500ms;
  CHECK_THROWS_AS(replay_client(ReplayScript{}, Endpoint{"127.0.0.1", first.port()}, opts), TransportError);
}
