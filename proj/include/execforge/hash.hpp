#pragma once

// Content digests (SHA-256, lowercase hex).

#include <string>
#include <string_view>

namespace execforge {

std::string sha256_hex(std::string_view bytes);

}  // namespace execforge
