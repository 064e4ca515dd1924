#include "llt/tokenizer.hpp"

namespace llt {

std::string_view to_string(ByteClass c) {
  switch (c) {
    case ByteClass::Alphanumeric:
      return "alnum";
    case ByteClass::Symbolic:
      return "symbol";
    case ByteClass::Unprintable:
      return "unprint";
  }
  return "?";
}

TokenSeq tokenize(BytesView raw) {
  TokenSeq out;
  std::size_t start = 0;
  while (start < raw.size()) {
    ByteClass cls = classify_byte(static_cast<std::uint8_t>(raw[start]));
    std::size_t end = start + 1;
    while (end < raw.size() && classify_byte(static_cast<std::uint8_t>(raw[end])) == cls) ++end;
    out.push_back({Bytes(raw.substr(start, end - start)), cls});
    start = end;
  }
  return out;
}

Bytes join(const TokenSeq& tokens) {
  Bytes out;
  for (const auto& t : tokens) out += t.bytes;
  return out;
}

std::string format_tokens(const TokenSeq& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    out += to_string(t.cls);
    out += '\t';
    out += escape_bytes(t.bytes);
    out += '\n';
  }
  return out;
}

}  // namespace llt
