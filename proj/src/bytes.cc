#include "rostam/bytes.h"

#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <algorithm>

#include "rostam/error.h"

namespace rostam {

Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

std::string to_string(ByteView b) { return std::string(b.begin(), b.end()); }

std::string base64url_encode(ByteView data) {
  if (data.empty()) return {};
  std::string out(4 * ((data.size() + 2) / 3) + 1, '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          data.data(), static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  while (!out.empty() && out.back() == '=') out.pop_back();
  std::replace(out.begin(), out.end(), '+', '-');
  std::replace(out.begin(), out.end(), '/', '_');
  return out;
}

Bytes base64url_decode(std::string_view text) {
  if (text.empty()) return {};
  if (text.size() % 4 == 1) {
    throw Error(ErrorCode::kEncoding, "base64url: invalid length");
  }
  std::string std64;
  std64.reserve(text.size() + 3);
  for (char c : text) {
    if (c == '-') {
      std64.push_back('+');
    } else if (c == '_') {
      std64.push_back('/');
    } else if ((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
               (c >= '0' && c <= '9')) {
      std64.push_back(c);
    } else {
      throw Error(ErrorCode::kEncoding, "base64url: invalid character");
    }
  }
  std::size_t pad = (4 - std64.size() % 4) % 4;
  std64.append(pad, '=');

  Bytes out(std64.size() / 4 * 3);
  int n = EVP_DecodeBlock(out.data(),
                          reinterpret_cast<const unsigned char*>(std64.data()),
                          static_cast<int>(std64.size()));
  if (n < 0) throw Error(ErrorCode::kEncoding, "base64url: decode failed");
  // EVP_DecodeBlock counts the padding bytes as zero output.
  out.resize(static_cast<std::size_t>(n) - pad);
  if (base64url_encode(out) != text) {
    throw Error(ErrorCode::kEncoding, "base64url: non-canonical encoding");
  }
  return out;
}

std::string hex_encode(ByteView data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

bool secure_equal(ByteView a, ByteView b) {
  if (a.size() != b.size()) return false;
  if (a.empty()) return true;
  return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

void secure_wipe(Bytes& b) {
  if (!b.empty()) OPENSSL_cleanse(b.data(), b.size());
  b.clear();
}

}  // namespace rostam
