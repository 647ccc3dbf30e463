#include "rostam/protocol.h"

#include "rostam/error.h"

namespace rostam {

Bytes QrPayload::encode() const { return concat(token.value, fp.value); }

QrPayload QrPayload::parse(ByteView raw) {
  if (raw.size() != kQrPayloadBytes) {
    throw Error(ErrorCode::kParse, "qr payload must be 48 bytes, got " +
                                       std::to_string(raw.size()));
  }
  QrPayload p;
  p.token = PairingToken::from(raw.first(PairingToken::kSize));
  p.fp = Fingerprint::from(raw.subspan(PairingToken::kSize));
  return p;
}

std::string QrPayload::to_text() const {
  return std::string(kQrTextPrefix) + base64url_encode(encode());
}

QrPayload QrPayload::from_text(std::string_view text) {
  if (!text.starts_with(kQrTextPrefix)) {
    throw Error(ErrorCode::kParse, "qr text: missing rostam-qr:v1: prefix");
  }
  Bytes raw;
  try {
    raw = base64url_decode(text.substr(kQrTextPrefix.size()));
  } catch (const Error& e) {
    throw Error(ErrorCode::kParse, std::string("qr text: ") + e.what());
  }
  return parse(raw);
}

const char* poll_result_name(PollResult r) {
  switch (r) {
    case PollResult::kDone: return "done";
    case PollResult::kRetry: return "retry";
    case PollResult::kAbort: return "abort";
  }
  return "unknown";
}

}  // namespace rostam
