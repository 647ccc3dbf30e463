#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>

#include "rostam/bytes.h"

namespace rostam {

// Source of randomness injected into every actor.
//
// A system Rng draws from the OpenSSL CSPRNG. A seeded Rng expands a 64-bit
// seed and a stream label into an AES-256-CTR keystream, so the same seed and
// label always produce the same bytes. Seeded mode exists for tests and
// reproducible scenarios only.
class Rng {
 public:
  static Rng system();
  static Rng seeded(std::uint64_t seed, std::string_view stream = {});

  Rng(Rng&&) noexcept;
  Rng& operator=(Rng&&) noexcept;
  Rng(const Rng&) = delete;
  Rng& operator=(const Rng&) = delete;
  ~Rng();

  // Throws Error(kRng) if the underlying generator fails.
  void fill(std::span<std::uint8_t> out);
  Bytes bytes(std::size_t n);
  std::uint64_t next_u64();

  // Independent child generator. Deterministic for seeded parents.
  Rng fork(std::string_view label);

  bool is_seeded() const noexcept;

 private:
  struct Impl;
  explicit Rng(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace rostam
