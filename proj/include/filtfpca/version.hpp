#pragma once

namespace filtfpca {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace filtfpca
