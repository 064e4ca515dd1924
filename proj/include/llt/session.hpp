#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "llt/bytes.hpp"

namespace llt {

enum class Direction { Client, Server };

struct Chunk {
  Direction direction = Direction::Client;
  Bytes payload;  // telnet controls already stripped

  bool operator==(const Chunk&) const = default;
};

struct Credentials {
  std::string username;
  std::string password;

  bool operator==(const Credentials&) const = default;
};

/// One telnet conversation as seen by the listener, in wire-arrival order.
struct SessionRecord {
  std::string peer;
  Timestamp started_at{};
  std::vector<Chunk> chunks;
  std::optional<Credentials> credentials_seen;
  bool truncated = false;

  std::size_t client_chunk_count() const;

  bool operator==(const SessionRecord&) const = default;
};

// Sidecar session log: one JSON object per line, chunk payloads base64.
nlohmann::json to_json(const SessionRecord& record);
SessionRecord session_from_json(const nlohmann::json& j);

std::vector<SessionRecord> read_session_log(const std::string& path);

}  // namespace llt
