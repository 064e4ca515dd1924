#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "llt/bytes.hpp"
#include "llt/session.hpp"

namespace llt {

namespace telnet {
inline constexpr std::uint8_t SE = 240;
inline constexpr std::uint8_t SB = 250;
inline constexpr std::uint8_t WILL = 251;
inline constexpr std::uint8_t WONT = 252;
inline constexpr std::uint8_t DO = 253;
inline constexpr std::uint8_t DONT = 254;
inline constexpr std::uint8_t IAC = 255;
}  // namespace telnet

/// Incremental IAC stripper; the wire may split a command sequence across
/// reads, so state carries over between feed() calls.
class TelnetDecoder {
 public:
  /// Data bytes of `input` with every command sequence removed.
  Bytes feed(BytesView input);
  /// True while a command sequence is open (an IAC was seen but not closed).
  bool mid_sequence() const { return state_ != State::Data; }

 private:
  enum class State { Data, Iac, Option, Sub, SubIac };
  State state_ = State::Data;
};

/// Removes IAC command sequences (IAC cmd, IAC WILL/WONT/DO/DONT opt,
/// IAC SB ... IAC SE); IAC IAC becomes one 0xFF data byte. Throws
/// TruncatedControl if the stream ends inside a sequence.
Bytes strip_telnet_controls(BytesView stream);

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 2323;

  /// "host:port" or bare "host" (port 2323). Throws ParseError.
  static Endpoint parse(std::string_view text);
  std::string to_string() const;
};

struct CaptureConfig {
  Endpoint bind{"0.0.0.0", 2323};
  std::string banner;
  std::string login_prompt = "login: ";
  std::string password_prompt = "Password: ";
  std::string shell_prompt = "$ ";
  std::size_t max_bytes = 256 * 1024;
  std::chrono::seconds max_duration{120};
  /// Canned replies keyed by the request line without its line terminator.
  std::map<std::string, std::string> responses;
  /// Directory for sessions.jsonl and corpus.jsonl; empty disables storage.
  std::string out_dir;
};

/// Serialized, durable appender for the capture output directory. Every
/// append is fsync'd before it returns.
class SessionStore {
 public:
  explicit SessionStore(std::string dir);
  ~SessionStore();
  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  void append(const SessionRecord& record);

  std::string sessions_path() const;
  std::string corpus_path() const;

 private:
  std::string dir_;
  std::mutex mu_;
  int sessions_fd_ = -1;
  int corpus_fd_ = -1;
};

using SessionSink = std::function<void(const SessionRecord&)>;

/// Telnet listener that accepts any credentials and records each
/// conversation as a SessionRecord. One thread per connection. Client
/// request lines (split at LF) become client chunks; banner, prompts and
/// canned replies become server chunks. Login lines are not chunks; they
/// land in credentials_seen.
class CaptureServer {
 public:
  explicit CaptureServer(CaptureConfig config, SessionSink sink = {});
  ~CaptureServer();
  CaptureServer(const CaptureServer&) = delete;
  CaptureServer& operator=(const CaptureServer&) = delete;

  /// Binds and starts accepting. Throws Error when the address cannot be bound.
  void start();
  /// Stops accepting, ends open sessions and waits for their records.
  void stop();
  std::uint16_t port() const { return port_; }

  /// Waits until the session from `peer` ("ip:port") has been recorded.
  std::optional<SessionRecord> await_record(const std::string& peer, std::chrono::milliseconds timeout) const;
  std::size_t sessions_recorded() const;

 private:
  void accept_loop();
  void serve(int fd, std::string peer);
  void finish(SessionRecord record);

  CaptureConfig config_;
  SessionSink sink_;
  std::unique_ptr<SessionStore> store_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex workers_mu_;
  std::vector<std::thread> workers_;
  std::vector<int> open_fds_;
  mutable std::mutex records_mu_;
  mutable std::condition_variable records_cv_;
  std::map<std::string, SessionRecord> records_;
};

struct ReplayScript {
  std::string username = "root";
  std::string password = "admin";
  /// Sent verbatim, in order; may carry telnet control sequences.
  std::vector<Bytes> lines;
};

struct ReplayOptions {
  std::string login_prompt = "login: ";
  std::string password_prompt = "Password: ";
  std::string shell_prompt = "$ ";
  std::chrono::milliseconds timeout{5000};
};

/// Plays a script against a listener and returns the client's local
/// "ip:port", which is the peer name the listener records. Throws
/// TransportError on connection failure or timeout.
std::string replay_client(const ReplayScript& script, const Endpoint& endpoint, const ReplayOptions& opts = {});

/// replay_client against an in-process server, returning the listener-side
/// record of that session.
SessionRecord replay_script(const ReplayScript& script, const CaptureServer& server, const ReplayOptions& opts = {});

/// What a control-free-or-not script should leave in the request log: the
/// concatenated lines with controls stripped.
Bytes expected_request_bytes(const ReplayScript& script);

}  // namespace llt
