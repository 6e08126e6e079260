#pragma once

#include <cstdint>
#include <vector>

namespace survrisk {

// Event indicator per subject: 1 = event observed, 0 = censored. Stored as
// bytes so that spans over it are possible (std::vector<bool> is packed).
using EventFlag = std::uint8_t;
using EventFlags = std::vector<EventFlag>;

}  // namespace survrisk
