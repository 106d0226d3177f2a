#pragma once

#include <string>
#include <string_view>

namespace mz {

// SHA-1 digest of the bytes in `data`, as 40 lowercase hex characters.
std::string sha1_hex(std::string_view data);

}  // namespace mz
