#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "duoadapt/error.hpp"
#include "duoadapt/geometry.hpp"

namespace duoadapt {

inline constexpr int kHeatmapSize = 32;
inline constexpr double kHeatmapSpatialStd = 1.5;  // px

// One joint's 2D confidence map. The hotspot is an isotropic Gaussian bump
// whose height encodes detection confidence; only the peak carries signal
// for attention, the rest is spatial context.
struct Heatmap {
    std::array<float, kHeatmapSize * kHeatmapSize> v{};
    std::uint8_t peak_row = 0;
    std::uint8_t peak_col = 0;
    float peak_value = 0.0f;

    float at(int row, int col) const { return v[static_cast<std::size_t>(row) * kHeatmapSize + col]; }
    float& at(int row, int col) { return v[static_cast<std::size_t>(row) * kHeatmapSize + col]; }

    float max_value() const {
        float m = 0.0f;
        for (float x : v) m = std::max(m, x);
        return m;
    }
};

// Per-joint confidence maps for one view, 21 x 32 x 32.
struct HeatmapStack {
    std::array<Heatmap, kNumJoints> maps;

    const Heatmap& map(int joint) const { return maps[static_cast<std::size_t>(joint)]; }
    Heatmap& map(int joint) { return maps[static_cast<std::size_t>(joint)]; }
};

// Gaussian bump of the given height at an integer pixel location.
inline Heatmap synthesize_bump(int peak_row, int peak_col, double peak_value) {
    if (peak_row < 0 || peak_row >= kHeatmapSize || peak_col < 0 || peak_col >= kHeatmapSize)
        throw InvalidInputError("heatmap peak location outside the 32x32 grid");
    // Quantize to float before the pixel pass: the map is float-valued and
    // regenerating it from the stored float peak must be bit-exact.
    const double peak = static_cast<double>(static_cast<float>(std::clamp(peak_value, 0.0, 1.0)));
    Heatmap h;
    h.peak_row = static_cast<std::uint8_t>(peak_row);
    h.peak_col = static_cast<std::uint8_t>(peak_col);
    h.peak_value = static_cast<float>(peak);
    const double inv_two_var = 1.0 / (2.0 * kHeatmapSpatialStd * kHeatmapSpatialStd);
    for (int r = 0; r < kHeatmapSize; ++r) {
        for (int c = 0; c < kHeatmapSize; ++c) {
            const double d2 = static_cast<double>((r - peak_row) * (r - peak_row) + (c - peak_col) * (c - peak_col));
            h.at(r, c) = static_cast<float>(peak * std::exp(-d2 * inv_two_var));
        }
    }
    // The center pixel is exp(0) * peak, so the stored peak is the map maximum.
    return h;
}

// Confidence law: the hotspot height decays exponentially with the joint's
// 3D estimation error. error 0 -> 1.0, error sigma_conf -> 1/e.
inline Heatmap synthesize_heatmap(double joint_error_mm, int peak_row, int peak_col, double sigma_conf_mm) {
    if (!(joint_error_mm >= 0.0)) throw InvalidInputError("joint error must be nonnegative");
    if (!(sigma_conf_mm > 0.0)) throw InvalidParameterError("sigma_conf must be positive");
    return synthesize_bump(peak_row, peak_col, std::exp(-joint_error_mm / sigma_conf_mm));
}

}  // namespace duoadapt
