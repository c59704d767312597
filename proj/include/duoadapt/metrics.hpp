#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "duoadapt/error.hpp"
#include "duoadapt/geometry.hpp"

namespace duoadapt {

// Root-relative mean per-joint position error, millimeters. Both sets are
// wrist-aligned first, so any global translation of either input cancels.
inline double mpjpe(const JointSet& pred, const JointSet& gt) {
    const JointSet p = wrist_align(pred);
    const JointSet g = wrist_align(gt);
    double sum = 0.0;
    for (int j = 0; j < kNumJoints; ++j) sum += (p.joint(j) - g.joint(j)).norm();
    return sum / static_cast<double>(kNumJoints);
}

// Single-view errors from both views pooled into one average.
inline double mono_m(const std::vector<JointSet>& pred_v1, const std::vector<JointSet>& pred_v2,
                     const std::vector<JointSet>& gt_v1, const std::vector<JointSet>& gt_v2) {
    if (pred_v1.size() != gt_v1.size() || pred_v2.size() != gt_v2.size())
        throw InvalidInputError("mono_m: prediction/ground-truth counts differ");
    if (pred_v1.empty() && pred_v2.empty()) throw InvalidInputError("mono_m: no samples");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred_v1.size(); ++i) sum += mpjpe(pred_v1[i], gt_v1[i]);
    for (std::size_t i = 0; i < pred_v2.size(); ++i) sum += mpjpe(pred_v2[i], gt_v2[i]);
    return sum / static_cast<double>(pred_v1.size() + pred_v2.size());
}

// Dual-view metric: both predictions fused with R in each view's frame,
//   fused_v1 = (align(J1) + R^T align(J2)) / 2
//   fused_v2 = (R align(J1) + align(J2)) / 2
// then MPJPE of the fused predictions against each frame's ground truth,
// pooled over both frames.
inline double dual_m(const std::vector<JointSet>& pred_v1, const std::vector<JointSet>& pred_v2,
                     const std::vector<JointSet>& gt_v1, const std::vector<JointSet>& gt_v2,
                     const Rotation& r) {
    if (pred_v1.size() != pred_v2.size() || pred_v1.size() != gt_v1.size() || pred_v1.size() != gt_v2.size())
        throw InvalidInputError("dual_m: mismatched sample counts");
    if (pred_v1.empty()) throw InvalidInputError("dual_m: no samples");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred_v1.size(); ++i) {
        const JointSet a1 = wrist_align(pred_v1[i]);
        const JointSet a2 = wrist_align(pred_v2[i]);
        JointSet fused_v1, fused_v2;
        fused_v1.pts = 0.5 * (a1.pts + a2.pts * r.matrix());
        fused_v2.pts = 0.5 * (a1.pts * r.matrix().transpose() + a2.pts);
        sum += mpjpe(fused_v1, gt_v1[i]) + mpjpe(fused_v2, gt_v2[i]);
    }
    return sum / static_cast<double>(2 * pred_v1.size());
}

inline constexpr int kComplementarityBuckets = 7;

struct ComplementarityBucket {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
    double mean_error_fused = 0.0;     // pseudo-label error with the RGR term
    double mean_error_abm_only = 0.0;  // pseudo-label error without it
};

struct ComplementarityTable {
    std::array<ComplementarityBucket, kComplementarityBuckets> buckets{};
    double min_error = 0.0;
    double max_error = 0.0;
    bool degenerate = false;  // fewer than 7 distinct prediction errors
};

// Bucket pseudo-label errors by the prediction error that produced them:
// seven equal-width intervals spanning [min, max] of the per-point
// prediction error. Each entry of the three vectors describes one
// (sample, view) point.
inline ComplementarityTable complementarity_table(const std::vector<double>& prediction_error,
                                                  const std::vector<double>& pseudo_error_fused,
                                                  const std::vector<double>& pseudo_error_abm_only) {
    if (prediction_error.empty()) throw InvalidInputError("complementarity_table: no samples");
    if (prediction_error.size() != pseudo_error_fused.size() ||
        prediction_error.size() != pseudo_error_abm_only.size())
        throw InvalidInputError("complementarity_table: mismatched series lengths");

    ComplementarityTable t;
    const auto [lo_it, hi_it] = std::minmax_element(prediction_error.begin(), prediction_error.end());
    t.min_error = *lo_it;
    t.max_error = *hi_it;

    std::vector<double> distinct = prediction_error;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    t.degenerate = distinct.size() < kComplementarityBuckets;

    const double width = (t.max_error - t.min_error) / kComplementarityBuckets;
    for (int b = 0; b < kComplementarityBuckets; ++b) {
        t.buckets[static_cast<std::size_t>(b)].lower = t.min_error + b * width;
        t.buckets[static_cast<std::size_t>(b)].upper = t.min_error + (b + 1) * width;
    }
    for (std::size_t i = 0; i < prediction_error.size(); ++i) {
        int b = 0;
        if (width > 0.0)
            b = std::min(kComplementarityBuckets - 1,
                         static_cast<int>((prediction_error[i] - t.min_error) / width));
        auto& bucket = t.buckets[static_cast<std::size_t>(b)];
        bucket.count += 1;
        bucket.mean_error_fused += pseudo_error_fused[i];
        bucket.mean_error_abm_only += pseudo_error_abm_only[i];
    }
    for (auto& bucket : t.buckets) {
        if (bucket.count > 0) {
            bucket.mean_error_fused /= static_cast<double>(bucket.count);
            bucket.mean_error_abm_only /= static_cast<double>(bucket.count);
        }
    }
    return t;
}

struct EvalReport {
    double mono_m_mm = 0.0;
    double dual_m_mm = 0.0;
    double mpjpe_v1_mm = 0.0;
    double mpjpe_v2_mm = 0.0;
    std::size_t sample_count = 0;
    ComplementarityTable complementarity;
    std::vector<std::string> warnings;
};

}  // namespace duoadapt
