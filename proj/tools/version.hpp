#pragma once

namespace dummf::tools {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSceneFormat = 1;
inline constexpr int kPredictionFormat = 1;
inline constexpr const char* kCheckpointFormat = "DMF1";

}  // namespace dummf::tools
