#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "llt/bytes.hpp"

namespace llt {

enum class ByteClass : std::uint8_t { Alphanumeric, Symbolic, Unprintable };

std::string_view to_string(ByteClass c);

/// Alphanumeric: 0-9 A-Z a-z. Symbolic: printable ASCII punctuation and the
/// space character. Unprintable: control bytes (LF, CR and TAB included),
/// DEL and every byte >= 0x80.
constexpr ByteClass classify_byte(std::uint8_t b) {
  if ((b >= '0' && b <= '9') || (b >= 'A' && b <= 'Z') || (b >= 'a' && b <= 'z')) {
    return ByteClass::Alphanumeric;
  }
  if (b >= 0x20 && b <= 0x7e) return ByteClass::Symbolic;
  return ByteClass::Unprintable;
}

struct Token {
  Bytes bytes;
  ByteClass cls = ByteClass::Unprintable;

  bool operator==(const Token& other) const { return bytes == other.bytes; }
};

using TokenSeq = std::vector<Token>;

/// Maximal runs of same-class bytes. Lossless: joining the token bytes gives
/// back `raw`.
TokenSeq tokenize(BytesView raw);

Bytes join(const TokenSeq& tokens);

/// One "{class}\t{escaped bytes}" line per token, for the tokenize subcommand.
std::string format_tokens(const TokenSeq& tokens);

}  // namespace llt
