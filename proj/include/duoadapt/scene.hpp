#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "duoadapt/error.hpp"
#include "duoadapt/geometry.hpp"
#include "duoadapt/hash.hpp"
#include "duoadapt/heatmap.hpp"

namespace duoadapt {

inline constexpr int kNumBones = 20;

struct Bone {
    int parent;
    int child;
};

// Canonical neutral hand: 21 joints, 20 bones forming a tree rooted at the
// wrist. Joint order: wrist, then four joints per finger
// (thumb, index, middle, ring, pinky), knuckle to tip.
struct HandTemplate {
    JointSet joints;
    std::array<Bone, kNumBones> bones{};

    double bone_length(int b) const {
        return (joints.joint(bones[b].child) - joints.joint(bones[b].parent)).norm();
    }

    std::uint64_t content_hash() const {
        Fnv1a64 h;
        for (int i = 0; i < kNumJoints; ++i)
            for (int c = 0; c < 3; ++c) h.update_value(joints.pts(i, c));
        for (const Bone& b : bones) {
            h.update_value(b.parent);
            h.update_value(b.child);
        }
        return h.digest();
    }
};

// Neutral right hand, palm in the xy plane, fingers along +y, sizes in mm.
// All bone lengths sit in the anatomically plausible [15, 110] band.
inline HandTemplate default_hand_template() {
    HandTemplate t;
    struct Finger {
        Vec3 dir;
        std::array<double, 4> seg;  // wrist->knuckle, then three phalanges
    };
    const std::array<Finger, 5> fingers = {{
        {{0.80, 0.55, 0.15}, {45.0, 35.0, 30.0, 25.0}},   // thumb
        {{0.25, 0.95, 0.05}, {85.0, 40.0, 25.0, 20.0}},   // index
        {{0.00, 1.00, 0.00}, {88.0, 45.0, 28.0, 22.0}},   // middle
        {{-0.20, 0.95, 0.02}, {80.0, 40.0, 26.0, 20.0}},  // ring
        {{-0.42, 0.88, 0.04}, {72.0, 30.0, 20.0, 18.0}},  // pinky
    }};
    t.joints.pts.row(kWristIndex).setZero();
    int joint = 1;
    int bone = 0;
    for (const Finger& f : fingers) {
        const Vec3 dir = f.dir.normalized();
        Vec3 pos = Vec3::Zero();
        int parent = kWristIndex;
        for (double seg : f.seg) {
            pos += seg * dir;
            t.joints.pts.row(joint) = pos.transpose();
            t.bones[static_cast<std::size_t>(bone)] = {parent, joint};
            parent = joint;
            ++joint;
            ++bone;
        }
    }
    return t;
}

// Per-view systematic corruption applied to ground truth to fake an imperfect
// detector: a constant per-joint bias field, isotropic Gaussian noise scaled
// by a visibility factor (less visible -> noisier), and the confidence decay
// constant that links per-joint error to heatmap peak height. A fraction of
// samples are "hard" (blur, occlusion, an awkward pose) and get their noise
// inflated in both views at once; confidence drops with it through the decay
// law, so these are the frames where per-joint attention has little to pick
// from.
struct CorruptionModel {
    std::array<JointMatrix, 2> bias = {JointMatrix::Zero(), JointMatrix::Zero()};  // mm, per view
    double noise_sigma_mm = 8.0;
    std::array<double, 2> visibility = {1.0, 1.0};  // in (0, 1]; noise std is sigma / visibility
    double sigma_conf_mm = 30.0;
    double hard_probability = 0.0;        // per-sample chance of a hard frame pair
    double hard_noise_multiplier = 1.0;   // noise inflation on hard samples, both views

    void validate() const {
        if (!(noise_sigma_mm >= 0.0)) throw InvalidParameterError("noise sigma must be >= 0");
        for (double v : visibility)
            if (!(v > 0.0 && v <= 1.0)) throw InvalidParameterError("visibility must be in (0, 1]");
        if (!(sigma_conf_mm > 0.0)) throw InvalidParameterError("sigma_conf must be > 0");
        if (!(hard_probability >= 0.0 && hard_probability <= 1.0))
            throw InvalidParameterError("hard probability must be in [0, 1]");
        if (!(hard_noise_multiplier >= 1.0))
            throw InvalidParameterError("hard noise multiplier must be >= 1");
        if (!bias[0].allFinite() || !bias[1].allFinite())
            throw InvalidParameterError("bias fields must be finite");
    }

    double noise_std(int view) const { return noise_sigma_mm / visibility[static_cast<std::size_t>(view)]; }

    // Standard deviation of the per-coordinate noise marginalized over the
    // hard/easy mixture. Hard frames use m * sigma in both views.
    double effective_noise_std(int view) const {
        const double easy = noise_std(view);
        const double hard = hard_noise_multiplier * noise_sigma_mm;
        return std::sqrt((1.0 - hard_probability) * easy * easy + hard_probability * hard * hard);
    }
};

// Draw the per-view constant bias fields once per dataset, uniform per
// coordinate in [-range, range].
template <typename URBG>
CorruptionModel draw_corruption(URBG& rng, double bias_range_v1_mm, double bias_range_v2_mm,
                                double noise_sigma_mm, double visibility_v1, double visibility_v2,
                                double sigma_conf_mm, double hard_probability = 0.0,
                                double hard_noise_multiplier = 1.0) {
    CorruptionModel c;
    c.noise_sigma_mm = noise_sigma_mm;
    c.visibility = {visibility_v1, visibility_v2};
    c.sigma_conf_mm = sigma_conf_mm;
    c.hard_probability = hard_probability;
    c.hard_noise_multiplier = hard_noise_multiplier;
    const std::array<double, 2> range = {bias_range_v1_mm, bias_range_v2_mm};
    for (int v = 0; v < 2; ++v) {
        std::uniform_real_distribution<double> u(-range[static_cast<std::size_t>(v)],
                                                 range[static_cast<std::size_t>(v)]);
        for (int j = 0; j < kNumJoints; ++j)
            for (int ccol = 0; ccol < 3; ++ccol) c.bias[static_cast<std::size_t>(v)](j, ccol) = u(rng);
    }
    c.validate();
    return c;
}

// The fixed camera pair: world->view1 rotation plus offsets, and the hidden
// view1->view2 rotation every sample obeys.
struct SceneRig {
    Rotation world_to_v1;
    Vec3 v1_offset_mm = Vec3::Zero();
    Rotation gt_rotation;  // view1 -> view2, wrist-aligned frames
    Vec3 v2_wrist_offset_mm = Vec3::Zero();
};

template <typename URBG>
SceneRig draw_rig(URBG& rng) {
    SceneRig rig;
    rig.world_to_v1 = random_rotation(rng);
    rig.gt_rotation = random_rotation(rng);
    std::uniform_real_distribution<double> u(-300.0, 300.0);
    rig.v1_offset_mm = Vec3(u(rng), u(rng), u(rng));
    rig.v2_wrist_offset_mm = Vec3(u(rng), u(rng), u(rng));
    return rig;
}

struct PoseOptions {
    double jitter_deg = 15.0;       // cap on the per-bone articulation angle
    double translation_mm = 100.0;  // global placement range
    bool random_global_rotation = true;
};

// One synchronized dual-view record. Ground truth per view, the corrupted
// raw detector output per view, and confidence heatmaps whose peaks shrink
// with per-joint corruption error.
struct DualViewSample {
    std::uint64_t id = 0;
    std::uint64_t seed = 0;
    std::array<JointSet, 2> gt;        // view1/view2 camera frames
    std::array<JointSet, 2> raw;       // corrupted detector estimates
    std::array<HeatmapStack, 2> heat;  // detection confidence per view
};

// Template pose with per-bone articulation jitter (rotations about the parent
// joint, so every bone length is preserved exactly) and a random global rigid
// placement. jitter_deg = 0 and random_global_rotation = false with
// translation 0 reproduces the template verbatim.
template <typename URBG>
JointSet sample_pose(const HandTemplate& tpl, URBG& rng, const PoseOptions& opts = {}) {
    JointSet pose = tpl.joints;
    if (opts.jitter_deg > 0.0) {
        // Bones are stored parent-first per finger chain, so rotating the
        // child-side remainder of the chain at each step jitters a subtree.
        for (int b = 0; b < kNumBones; ++b) {
            const Bone bone = tpl.bones[static_cast<std::size_t>(b)];
            const Rotation q = random_small_rotation(rng, deg_to_rad(opts.jitter_deg));
            const Vec3 pivot = pose.joint(bone.parent);
            // Finger chains are contiguous: every joint from bone.child to the
            // end of its finger is a descendant.
            const int finger_end = ((bone.child - 1) / 4) * 4 + 4;
            for (int j = bone.child; j <= finger_end; ++j) {
                const Vec3 p = pose.joint(j);
                pose.pts.row(j) = (pivot + q.matrix() * (p - pivot)).transpose();
            }
        }
    }
    if (opts.random_global_rotation) {
        const Rotation g = random_rotation(rng);
        pose.pts = pose.pts * g.matrix().transpose();
    }
    if (opts.translation_mm > 0.0) {
        std::uniform_real_distribution<double> u(-opts.translation_mm, opts.translation_mm);
        const Vec3 t(u(rng), u(rng), u(rng));
        pose.pts.rowwise() += t.transpose();
    }
    return pose;
}

namespace detail {

// Peak pixel for a joint: its in-plane position normalized over the hand's
// bounding box, snapped to the grid with a 4 px margin.
inline void peak_pixel(const JointSet& view_joints, int joint, int* row, int* col) {
    const double min_x = view_joints.pts.col(0).minCoeff();
    const double max_x = view_joints.pts.col(0).maxCoeff();
    const double min_y = view_joints.pts.col(1).minCoeff();
    const double max_y = view_joints.pts.col(1).maxCoeff();
    const double span_x = std::max(max_x - min_x, 1e-9);
    const double span_y = std::max(max_y - min_y, 1e-9);
    const double u = (view_joints.pts(joint, 0) - min_x) / span_x;
    const double w = (view_joints.pts(joint, 1) - min_y) / span_y;
    *col = 4 + static_cast<int>(std::lround(u * (kHeatmapSize - 9)));
    *row = 4 + static_cast<int>(std::lround(w * (kHeatmapSize - 9)));
}

}  // namespace detail

// Express a world pose in both camera frames, corrupt each view's estimate,
// and synthesize confidence maps from the per-joint corruption errors.
template <typename URBG>
DualViewSample make_sample(const JointSet& world_pose, const SceneRig& rig, const CorruptionModel& corruption,
                           std::uint64_t id, URBG& rng) {
    if (!world_pose.is_finite()) throw InvalidInputError("make_sample: non-finite pose");
    corruption.validate();

    DualViewSample s;
    s.id = id;

    JointSet gt_v1;
    gt_v1.pts = world_pose.pts * rig.world_to_v1.matrix().transpose();
    gt_v1.pts.rowwise() += rig.v1_offset_mm.transpose();

    // view2 ground truth is the rotated wrist-aligned view1 pose plus the
    // view2 wrist position, so gt_v2 aligns to R_gt * align(gt_v1) exactly.
    const JointSet gt_v1_aligned = wrist_align(gt_v1);
    JointSet gt_v2;
    gt_v2.pts = gt_v1_aligned.pts * rig.gt_rotation.matrix().transpose();
    gt_v2.pts.rowwise() += rig.v2_wrist_offset_mm.transpose();

    s.gt = {gt_v1, gt_v2};

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const bool hard = u01(rng) < corruption.hard_probability;
    for (int v = 0; v < 2; ++v) {
        // A hard frame pair degrades both views alike; the per-camera
        // visibility advantage only differentiates ordinary frames.
        const double noise_std = hard ? corruption.hard_noise_multiplier * corruption.noise_sigma_mm
                                      : corruption.noise_std(v);
        JointSet raw = s.gt[static_cast<std::size_t>(v)];
        raw.pts += corruption.bias[static_cast<std::size_t>(v)];
        for (int j = 0; j < kNumJoints; ++j)
            for (int c = 0; c < 3; ++c) raw.pts(j, c) += noise_std * gauss(rng);
        s.raw[static_cast<std::size_t>(v)] = raw;

        for (int j = 0; j < kNumJoints; ++j) {
            const double err = (raw.joint(j) - s.gt[static_cast<std::size_t>(v)].joint(j)).norm();
            int row = 0, col = 0;
            detail::peak_pixel(raw, j, &row, &col);
            s.heat[static_cast<std::size_t>(v)].map(j) =
                synthesize_heatmap(err, row, col, corruption.sigma_conf_mm);
        }
    }
    return s;
}

}  // namespace duoadapt
