#include "rostam/url.h"

#include <algorithm>
#include <cctype>

#include "rostam/error.h"

namespace rostam {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

[[noreturn]] void bad_url(std::string_view url, const char* why) {
  throw Error(ErrorCode::kInvalidArgument,
              "invalid url '" + std::string(url) + "': " + why);
}

}  // namespace

std::string canonicalize_url(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) bad_url(url, "missing scheme");
  std::string scheme = lower(url.substr(0, scheme_end));
  if (scheme != "http" && scheme != "https") {
    bad_url(url, "unsupported scheme");
  }

  auto rest = url.substr(scheme_end + 3);
  auto authority_end = rest.find_first_of("/?#");
  auto authority = rest.substr(0, authority_end);
  std::string_view tail =
      authority_end == std::string_view::npos ? "" : rest.substr(authority_end);

  if (authority.find('@') != std::string_view::npos) {
    bad_url(url, "userinfo not allowed");
  }

  std::string_view host = authority;
  std::string_view port;
  auto colon = authority.rfind(':');
  if (colon != std::string_view::npos &&
      authority.find(']') == std::string_view::npos) {
    host = authority.substr(0, colon);
    port = authority.substr(colon + 1);
  }
  if (host.empty()) bad_url(url, "missing host");
  if (!port.empty() &&
      !std::all_of(port.begin(), port.end(),
                   [](unsigned char c) { return std::isdigit(c); })) {
    bad_url(url, "invalid port");
  }
  while (port.size() > 1 && port.front() == '0') port.remove_prefix(1);
  if ((scheme == "http" && port == "80") ||
      (scheme == "https" && port == "443")) {
    port = {};
  }

  auto path_end = tail.find_first_of("?#");
  auto path = tail.substr(0, path_end);

  std::string out = scheme + "://" + lower(host);
  if (!port.empty()) out += ":" + std::string(port);
  out += path.empty() ? std::string_view("/") : path;
  return out;
}

}  // namespace rostam
