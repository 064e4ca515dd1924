#include "llt/capture.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <utility>

#include "llt/corpus.hpp"
#include "llt/error.hpp"

namespace llt {

Bytes TelnetDecoder::feed(BytesView input) {
  Bytes out;
  out.reserve(input.size());
  for (char ch : input) {
    auto b = static_cast<std::uint8_t>(ch);
    switch (state_) {
      case State::Data:
        if (b == telnet::IAC) {
          state_ = State::Iac;
        } else {
          out += ch;
        }
        break;
      case State::Iac:
        if (b == telnet::IAC) {
          out += ch;
          state_ = State::Data;
        } else if (b == telnet::WILL || b == telnet::WONT || b == telnet::DO || b == telnet::DONT) {
          state_ = State::Option;
        } else if (b == telnet::SB) {
          state_ = State::Sub;
        } else {
          state_ = State::Data;  // two-byte command
        }
        break;
      case State::Option:
        state_ = State::Data;
        break;
      case State::Sub:
        if (b == telnet::IAC) state_ = State::SubIac;
        break;
      case State::SubIac:
        state_ = b == telnet::SE ? State::Data : State::Sub;
        break;
    }
  }
  return out;
}

Bytes strip_telnet_controls(BytesView stream) {
  TelnetDecoder d;
  Bytes out = d.feed(stream);
  if (d.mid_sequence()) throw TruncatedControl(std::move(out));
  return out;
}

Endpoint Endpoint::parse(std::string_view text) {
  Endpoint e;
  auto colon = text.rfind(':');
  if (colon == std::string_view::npos) {
    e.host = std::string(text);
  } else {
    e.host = std::string(text.substr(0, colon));
    auto port = text.substr(colon + 1);
    unsigned v = 0;
    auto [p, ec] = std::from_chars(port.data(), port.data() + port.size(), v);
    if (ec != std::errc{} || p != port.data() + port.size() || v > 65535) {
      throw ParseError("bad port in endpoint: " + std::string(text));
    }
    e.port = static_cast<std::uint16_t>(v);
  }
  if (e.host.empty()) e.host = "0.0.0.0";
  return e;
}

std::string Endpoint::to_string() const { return host + ":" + std::to_string(port); }

namespace {

class Fd {
 public:
  explicit Fd(int fd = -1) : fd_(fd) {}
  ~Fd() { reset(); }
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  int get() const { return fd_; }
  int release() { return std::exchange(fd_, -1); }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_;
};

void write_all(int fd, BytesView data) {
  while (!data.empty()) {
    ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("send: ") + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

void append_durably(int fd, const std::string& line) {
  BytesView data = line;
  while (!data.empty()) {
    ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(std::string("append: ") + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  if (::fsync(fd) != 0) throw Error(std::string("fsync: ") + std::strerror(errno));
}

std::string peer_name(const sockaddr_in& addr) {
  char buf[INET_ADDRSTRLEN] = {};
  ::inet_ntop(AF_INET, &addr.sin_addr, buf, sizeof buf);
  return std::string(buf) + ":" + std::to_string(ntohs(addr.sin_port));
}

sockaddr_in resolve(const Endpoint& e) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(e.port);
  if (::inet_pton(AF_INET, e.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  addrinfo* res = nullptr;
  if (::getaddrinfo(e.host.c_str(), nullptr, &hints, &res) != 0 || !res) {
    throw TransportError("cannot resolve " + e.host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

// Reads with a deadline. Returns 0 on orderly EOF, -1 on timeout.
ssize_t read_some(int fd, char* buf, std::size_t len, std::chrono::steady_clock::time_point deadline) {
  while (true) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return -1;
    pollfd p{fd, POLLIN, 0};
    int r = ::poll(&p, 1, static_cast<int>(std::min<long long>(left.count(), 1000)));
    if (r < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("poll: ") + std::strerror(errno));
    }
    if (r == 0) continue;
    ssize_t n = ::recv(fd, buf, len, 0);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw TransportError(std::string("recv: ") + std::strerror(errno));
    }
    return n;
  }
}

std::string trim_line(BytesView line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r' || line.back() == '\0')) line.remove_suffix(1);
  return std::string(line);
}

}  // namespace

SessionStore::SessionStore(std::string dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  sessions_fd_ = ::open(sessions_path().c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  corpus_fd_ = ::open(corpus_path().c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (sessions_fd_ < 0 || corpus_fd_ < 0) {
    if (sessions_fd_ >= 0) ::close(sessions_fd_);
    if (corpus_fd_ >= 0) ::close(corpus_fd_);
    throw Error("cannot open capture store in " + dir_);
  }
}

SessionStore::~SessionStore() {
  ::close(sessions_fd_);
  ::close(corpus_fd_);
}

std::string SessionStore::sessions_path() const { return dir_ + "/sessions.jsonl"; }
std::string SessionStore::corpus_path() const { return dir_ + "/corpus.jsonl"; }

void SessionStore::append(const SessionRecord& record) {
  std::lock_guard lock(mu_);
  append_durably(sessions_fd_, to_json(record).dump() + "\n");
  try {
    append_durably(corpus_fd_, corpus_line(ingest_session(record)) + "\n");
  } catch (const EmptySession&) {
    // Nothing to analyze; the sidecar log still has the session.
  }
}

CaptureServer::CaptureServer(CaptureConfig config, SessionSink sink)
    : config_(std::move(config)), sink_(std::move(sink)) {}

CaptureServer::~CaptureServer() { stop(); }

void CaptureServer::start() {
  if (running_) return;
  if (!config_.out_dir.empty()) store_ = std::make_unique<SessionStore>(config_.out_dir);
  Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (fd.get() < 0) throw Error(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  try {
    addr = resolve(config_.bind);
  } catch (const TransportError& e) {
    throw Error(std::string("cannot bind: ") + e.what());
  }
  if (::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    throw Error("cannot bind " + config_.bind.to_string() + ": " + std::strerror(errno));
  }
  if (::listen(fd.get(), 64) != 0) throw Error(std::string("listen: ") + std::strerror(errno));
  socklen_t len = sizeof addr;
  ::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  listen_fd_ = fd.release();
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void CaptureServer::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  listen_fd_ = -1;
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(workers_mu_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
}

void CaptureServer::accept_loop() {
  while (running_) {
    pollfd p{listen_fd_, POLLIN, 0};
    int r = ::poll(&p, 1, 200);
    if (r <= 0) continue;
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    int fd = ::accept4(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len, SOCK_CLOEXEC);
    if (fd < 0) continue;
    std::lock_guard lock(workers_mu_);
    if (!running_) {
      ::close(fd);
      break;
    }
    open_fds_.push_back(fd);
    workers_.emplace_back([this, fd, peer = peer_name(addr)] { serve(fd, peer); });
  }
}

void CaptureServer::serve(int fd, std::string peer) {
  SessionRecord rec;
  rec.peer = std::move(peer);
  rec.started_at = std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
  const auto deadline = std::chrono::steady_clock::now() + config_.max_duration;
  TelnetDecoder decoder;
  Bytes pending;  // decoded bytes not yet consumed
  std::size_t recorded = 0;

  auto say = [&](const std::string& text) {
    if (text.empty()) return;
    write_all(fd, text);
    rec.chunks.push_back({Direction::Server, text});
  };
  // Pulls more decoded bytes; false on EOF or timeout.
  auto fill = [&]() {
    char buf[4096];
    ssize_t n = read_some(fd, buf, sizeof buf, deadline);
    if (n == 0) return false;
    if (n < 0) {
      rec.truncated = true;  // time limit
      return false;
    }
    pending += decoder.feed(BytesView(buf, static_cast<std::size_t>(n)));
    return true;
  };
  auto read_login_line = [&]() -> std::optional<std::string> {
    constexpr std::size_t kMaxLogin = 1024;
    while (true) {
      auto lf = pending.find('\n');
      if (lf != Bytes::npos || pending.size() >= kMaxLogin) {
        std::size_t end = lf != Bytes::npos ? lf + 1 : pending.size();
        std::string line = trim_line(BytesView(pending).substr(0, end));
        pending.erase(0, end);
        return line;
      }
      if (!fill()) return std::nullopt;
    }
  };
  auto record_client = [&](Bytes data) {
    bool over = recorded + data.size() > config_.max_bytes;
    if (over) {
      data.resize(config_.max_bytes - recorded);
      rec.truncated = true;
    }
    recorded += data.size();
    if (!data.empty()) rec.chunks.push_back({Direction::Client, std::move(data)});
    return !over;
  };

  try {
    say(config_.banner + config_.login_prompt);
    auto user = read_login_line();
    if (user) {
      say(config_.password_prompt);
      auto pass = read_login_line();
      if (pass) {
        rec.credentials_seen = Credentials{*user, *pass};
        say(config_.shell_prompt);
        constexpr std::size_t kMaxLine = 64 * 1024;
        bool open = true;
        while (open) {
          auto lf = pending.find('\n');
          if (lf == Bytes::npos && pending.size() < kMaxLine) {
            if (!fill()) break;
            continue;
          }
          std::size_t end = lf != Bytes::npos ? lf + 1 : pending.size();
          Bytes line = pending.substr(0, end);
          pending.erase(0, end);
          std::string key = trim_line(line);
          open = record_client(std::move(line));
          if (!open) break;
          auto reply = config_.responses.find(key);
          say((reply != config_.responses.end() ? reply->second : std::string()) + config_.shell_prompt);
        }
        if (open && !pending.empty()) record_client(std::move(pending));
      }
    }
  } catch (const TransportError&) {
    // The peer went away mid-write; keep what was captured.
  }
  finish(std::move(rec));
  {
    std::lock_guard lock(workers_mu_);
    std::erase(open_fds_, fd);
  }
  ::close(fd);
}

void CaptureServer::finish(SessionRecord record) {
  if (store_) store_->append(record);
  if (sink_) sink_(record);
  {
    std::lock_guard lock(records_mu_);
    records_[record.peer] = std::move(record);
  }
  records_cv_.notify_all();
}

std::optional<SessionRecord> CaptureServer::await_record(const std::string& peer, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(records_mu_);
  if (!records_cv_.wait_for(lock, timeout, [&] { return records_.contains(peer); })) return std::nullopt;
  return records_.at(peer);
}

std::size_t CaptureServer::sessions_recorded() const {
  std::lock_guard lock(records_mu_);
  return records_.size();
}

namespace {

// Reads until `needle` has been seen `times` more times in the stream.
void expect(int fd, Bytes& seen, std::size_t& cursor, const std::string& needle, std::size_t times,
            std::chrono::steady_clock::time_point deadline) {
  while (times > 0) {
    auto at = needle.empty() ? Bytes::npos : seen.find(needle, cursor);
    if (at != Bytes::npos) {
      cursor = at + needle.size();
      --times;
      continue;
    }
    char buf[4096];
    ssize_t n = read_some(fd, buf, sizeof buf, deadline);
    if (n < 0) throw TransportError("timed out waiting for '" + escape_bytes(needle) + "'");
    if (n == 0) throw TransportError("listener closed the connection");
    seen.append(buf, static_cast<std::size_t>(n));
  }
}

}  // namespace

std::string replay_client(const ReplayScript& script, const Endpoint& endpoint, const ReplayOptions& opts) {
  const auto deadline = std::chrono::steady_clock::now() + opts.timeout;
  sockaddr_in addr = resolve(endpoint);
  Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (fd.get() < 0) throw TransportError(std::string("socket: ") + std::strerror(errno));
  if (::connect(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    throw TransportError("connect " + endpoint.to_string() + ": " + std::strerror(errno));
  }
  sockaddr_in local{};
  socklen_t len = sizeof local;
  ::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&local), &len);
  std::string self = peer_name(local);

  Bytes seen;
  std::size_t cursor = 0;
  expect(fd.get(), seen, cursor, opts.login_prompt, 1, deadline);
  write_all(fd.get(), script.username + "\n");
  expect(fd.get(), seen, cursor, opts.password_prompt, 1, deadline);
  write_all(fd.get(), script.password + "\n");
  expect(fd.get(), seen, cursor, opts.shell_prompt, 1, deadline);
  // Mirror the listener's decoder to know how many request lines (and so
  // prompts) each scripted line produces.
  TelnetDecoder mirror;
  for (const auto& line : script.lines) {
    write_all(fd.get(), line);
    Bytes decoded = mirror.feed(line);
    auto lines = static_cast<std::size_t>(std::count(decoded.begin(), decoded.end(), '\n'));
    expect(fd.get(), seen, cursor, opts.shell_prompt, lines, deadline);
  }
  ::shutdown(fd.get(), SHUT_WR);
  // Drain until the listener closes, so its record is complete on return.
  char buf[1024];
  while (read_some(fd.get(), buf, sizeof buf, deadline) > 0) {
  }
  return self;
}

SessionRecord replay_script(const ReplayScript& script, const CaptureServer& server, const ReplayOptions& opts) {
  std::string peer = replay_client(script, Endpoint{"127.0.0.1", server.port()}, opts);
  auto rec = server.await_record(peer, opts.timeout);
  if (!rec) throw TransportError("listener never recorded session " + peer);
  return *rec;
}

Bytes expected_request_bytes(const ReplayScript& script) {
  Bytes all;
  for (const auto& l : script.lines) all += l;
  TelnetDecoder d;
  return d.feed(all);
}

}  // namespace llt
