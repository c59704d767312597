#pragma once

namespace duoadapt {

inline constexpr const char* kArtifactVersion = "0.1.0";

// Bumped when the on-disk layout changes incompatibly.
inline constexpr const char* kDatasetFormatVersion = "1.0.0";
inline constexpr const char* kCheckpointFormatVersion = "1.0.0";

inline constexpr char kDatasetMagic[8] = {'D', 'U', 'O', 'A', 'D', 'S', 'E', 'T'};

}  // namespace duoadapt
