#pragma once

// Types shared by the phone and browser-extension actors.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rostam/bytes.h"
#include "rostam/clock.h"
#include "rostam/fixed_bytes.h"

namespace rostam {

inline constexpr std::size_t kQrPayloadBytes =
    PairingToken::kSize + Fingerprint::kSize;
inline constexpr std::string_view kQrTextPrefix = "rostam-qr:v1:";

// Pairing / recovery bootstrap shown by the extension: bytes 0-15 are the
// one-time token, bytes 16-47 the fingerprint of the extension's public key.
struct QrPayload {
  PairingToken token;
  Fingerprint fp;

  Bytes encode() const;
  // Throws Error(kParse) unless exactly 48 bytes.
  static QrPayload parse(ByteView raw);

  // "rostam-qr:v1:" followed by unpadded base64url of the 48 bytes.
  std::string to_text() const;
  static QrPayload from_text(std::string_view text);

  bool operator==(const QrPayload&) const = default;
};

// Outcome of one step of a multi-party exchange.
enum class PollResult { kDone, kRetry, kAbort };

const char* poll_result_name(PollResult r);

// Stand-in for the fingerprint prompt on the phone. Returns true to approve.
using BiometricGate = std::function<bool()>;
// "Save this password?" style confirmation in the browser.
using ConfirmGate = std::function<bool()>;
// Picks one of several usernames for a site, or nullopt if dismissed.
using ChooseGate =
    std::function<std::optional<std::size_t>(const std::vector<std::string>&)>;

inline BiometricGate always_approve() {
  return [] { return true; };
}
inline BiometricGate always_deny() {
  return [] { return false; };
}

// Repeats `step` every `interval` seconds of simulated time until it stops
// returning kRetry or the next attempt would fall after `deadline`.
template <typename Step>
PollResult poll_until(SimClock& clock, std::int64_t interval,
                      Timestamp deadline, Step&& step) {
  for (;;) {
    PollResult r = step();
    if (r != PollResult::kRetry) return r;
    if (interval <= 0 || clock.now() + interval > deadline) return r;
    clock.advance(interval);
  }
}

}  // namespace rostam
