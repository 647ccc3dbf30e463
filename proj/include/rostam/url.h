#pragma once

#include <string>
#include <string_view>

namespace rostam {

// Canonical form used for lookup tags: scheme and host lowercased, default
// port (80 for http, 443 for https) removed, path kept verbatim ("/" when
// empty), query and fragment dropped.
//
// Throws Error(kInvalidArgument) for anything other than an absolute http or
// https URL with a host.
std::string canonicalize_url(std::string_view url);

}  // namespace rostam
