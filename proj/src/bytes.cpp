#include "llt/bytes.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <ctime>
#include <vector>

#include "llt/error.hpp"

namespace llt {

namespace {

constexpr char kHex[] = "0123456789abcdef";

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string escape_bytes(BytesView raw) {
  std::string out;
  out.reserve(raw.size());
  for (unsigned char c : raw) {
    if (c == '\\') {
      out += "\\\\";
    } else if (c >= 0x20 && c <= 0x7e) {
      out += static_cast<char>(c);
    } else {
      out += "\\x";
      out += kHex[c >> 4];
      out += kHex[c & 0xf];
    }
  }
  return out;
}

Bytes unescape_bytes(std::string_view escaped) {
  Bytes out;
  out.reserve(escaped.size());
  for (std::size_t i = 0; i < escaped.size(); ++i) {
    char c = escaped[i];
    if (c != '\\') {
      out += c;
      continue;
    }
    if (i + 1 >= escaped.size()) throw ParseError("dangling backslash in escaped bytes");
    char next = escaped[i + 1];
    if (next == '\\') {
      out += '\\';
      i += 1;
    } else if (next == 'x') {
      if (i + 3 >= escaped.size()) throw ParseError("short \\x escape");
      int hi = hex_value(escaped[i + 2]);
      int lo = hex_value(escaped[i + 3]);
      if (hi < 0 || lo < 0) throw ParseError("bad \\x escape");
      out += static_cast<char>((hi << 4) | lo);
      i += 3;
    } else {
      throw ParseError("unknown escape in escaped bytes");
    }
  }
  return out;
}

std::string base64_encode(BytesView raw) {
  if (raw.empty()) return {};
  std::string out(4 * ((raw.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          reinterpret_cast<const unsigned char*>(raw.data()),
                          static_cast<int>(raw.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(std::string_view text) {
  if (text.empty()) return {};
  if (text.size() % 4 != 0) throw ParseError("base64 length not a multiple of 4");
  Bytes out(3 * (text.size() / 4), '\0');
  int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          reinterpret_cast<const unsigned char*>(text.data()),
                          static_cast<int>(text.size()));
  if (n < 0) throw ParseError("malformed base64");
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  std::size_t pad = 0;
  if (text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string sha256_hex(BytesView raw) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(raw.data(), raw.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

std::string format_rfc3339(Timestamp t) {
  std::time_t secs = static_cast<std::time_t>(t.time_since_epoch().count());
  std::tm tm{};
  gmtime_r(&secs, &tm);
  std::array<char, 32> buf{};
  std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf.data();
}

Timestamp parse_rfc3339(std::string_view text) {
  auto fail = [&]() -> Timestamp { throw ParseError("bad RFC 3339 timestamp: " + std::string(text)); };
  auto num = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    if (pos + len > text.size()) fail();
    auto [p, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
    if (ec != std::errc{} || p != text.data() + pos + len) fail();
    return v;
  };
  if (text.size() < 20) return fail();
  if (text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != 't' && text[10] != ' ') ||
      text[13] != ':' || text[16] != ':') {
    return fail();
  }
  std::tm tm{};
  tm.tm_year = num(0, 4) - 1900;
  tm.tm_mon = num(5, 2) - 1;
  tm.tm_mday = num(8, 2);
  tm.tm_hour = num(11, 2);
  tm.tm_min = num(14, 2);
  tm.tm_sec = num(17, 2);
  std::size_t pos = 19;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
  }
  long offset = 0;
  if (pos < text.size() && (text[pos] == 'Z' || text[pos] == 'z')) {
    ++pos;
  } else if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
    int sign = text[pos] == '+' ? 1 : -1;
    if (pos + 6 > text.size() || text[pos + 3] != ':') return fail();
    offset = sign * (num(pos + 1, 2) * 3600L + num(pos + 4, 2) * 60L);
    pos += 6;
  } else {
    return fail();
  }
  if (pos != text.size()) return fail();
  std::time_t secs = timegm(&tm);
  return Timestamp(std::chrono::seconds(static_cast<long long>(secs) - offset));
}

}  // namespace llt
