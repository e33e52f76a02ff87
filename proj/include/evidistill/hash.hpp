#pragma once

#include <string>
#include <string_view>

namespace evidistill {

// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::string_view bytes);

}  // namespace evidistill
