#pragma once

#include <string>
#include <string_view>

namespace wmbench {

// SHA-256 digest as a lowercase hex string. Used to key fixture stores and to
// derive stable record ids.
std::string sha256_hex(std::string_view data);

} // namespace wmbench
