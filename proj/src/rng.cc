#include "rostam/rng.h"

#include <openssl/evp.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include <algorithm>
#include <array>

#include "rostam/error.h"

namespace rostam {

struct Rng::Impl {
  struct CtxDeleter {
    void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
  };
  std::unique_ptr<EVP_CIPHER_CTX, CtxDeleter> ctx;  // null for system mode
};

Rng::Rng(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Rng::Rng(Rng&&) noexcept = default;
Rng& Rng::operator=(Rng&&) noexcept = default;
Rng::~Rng() = default;

Rng Rng::system() { return Rng(std::make_unique<Impl>()); }

Rng Rng::seeded(std::uint64_t seed, std::string_view stream) {
  Bytes material = to_bytes("rostam-rng/v1");
  for (int i = 0; i < 8; ++i) {
    material.push_back(static_cast<std::uint8_t>(seed >> (8 * i)));
  }
  material.insert(material.end(), stream.begin(), stream.end());

  std::array<std::uint8_t, SHA256_DIGEST_LENGTH> key{};
  SHA256(material.data(), material.size(), key.data());
  std::array<std::uint8_t, 16> iv{};

  auto impl = std::make_unique<Impl>();
  impl->ctx.reset(EVP_CIPHER_CTX_new());
  if (!impl->ctx ||
      EVP_EncryptInit_ex(impl->ctx.get(), EVP_aes_256_ctr(), nullptr,
                         key.data(), iv.data()) != 1) {
    throw Error(ErrorCode::kRng, "rng: cipher init failed");
  }
  return Rng(std::move(impl));
}

void Rng::fill(std::span<std::uint8_t> out) {
  if (out.empty()) return;
  if (!impl_->ctx) {
    if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
      throw Error(ErrorCode::kRng, "rng: RAND_bytes failed");
    }
    return;
  }
  // Keystream = AES-CTR encryption of zeros.
  std::fill(out.begin(), out.end(), 0);
  int len = 0;
  if (EVP_EncryptUpdate(impl_->ctx.get(), out.data(), &len, out.data(),
                        static_cast<int>(out.size())) != 1 ||
      static_cast<std::size_t>(len) != out.size()) {
    throw Error(ErrorCode::kRng, "rng: keystream generation failed");
  }
}

Bytes Rng::bytes(std::size_t n) {
  Bytes out(n);
  fill(out);
  return out;
}

std::uint64_t Rng::next_u64() {
  std::array<std::uint8_t, 8> b{};
  fill(b);
  std::uint64_t v = 0;
  for (auto x : b) v = (v << 8) | x;
  return v;
}

Rng Rng::fork(std::string_view label) {
  if (!impl_->ctx) return system();
  return seeded(next_u64(), label);
}

bool Rng::is_seeded() const noexcept { return impl_->ctx != nullptr; }

}  // namespace rostam
