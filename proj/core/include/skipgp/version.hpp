#pragma once

namespace skipgp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace skipgp
