#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace llt {

// Binary-safe byte string. Telnet payloads are not text in any encoding, so
// nothing in the toolkit assumes these hold valid UTF-8.
using Bytes = std::string;
using BytesView = std::string_view;

using Timestamp = std::chrono::sys_seconds;

/// Printable ASCII passes through, backslash doubles, everything else
/// becomes \xHH. The result is plain ASCII and safe to embed in JSON.
std::string escape_bytes(BytesView raw);
/// Inverse of escape_bytes. Throws ParseError on a malformed escape.
Bytes unescape_bytes(std::string_view escaped);

std::string base64_encode(BytesView raw);
/// Throws ParseError on malformed input.
Bytes base64_decode(std::string_view text);

/// SHA-256 of `raw` as 64 lowercase hex digits.
std::string sha256_hex(BytesView raw);

/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_rfc3339(Timestamp t);
/// Accepts a trailing Z or +hh:mm / -hh:mm offset and optional fractional
/// seconds (truncated). Throws ParseError.
Timestamp parse_rfc3339(std::string_view text);

}  // namespace llt
