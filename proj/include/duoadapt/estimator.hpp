#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "duoadapt/error.hpp"
#include "duoadapt/geometry.hpp"
#include "duoadapt/heatmap.hpp"
#include "duoadapt/scene.hpp"

namespace duoadapt {

struct Prediction {
    JointSet joints;
    HeatmapStack heatmaps;
};

// Linear correction head on top of the raw detector output, one per view:
// joints = gain * raw + offset. The gain is shared across joints within a
// view; offsets are per joint. Initialized to the identity correction.
struct ViewCorrection {
    Mat3 gain = Mat3::Identity();
    JointMatrix offset = JointMatrix::Zero();
};

struct EstimatorParams {
    static constexpr double kGainBound = 2.0;  // |G - I|_F ceiling

    std::array<ViewCorrection, 2> view;

    bool is_finite() const {
        return view[0].gain.allFinite() && view[0].offset.allFinite() && view[1].gain.allFinite() &&
               view[1].offset.allFinite();
    }

    // Projects the gain back inside the sanity ball. Called after each
    // optimizer step.
    void enforce_gain_bound() {
        for (auto& v : view) {
            const Mat3 delta = v.gain - Mat3::Identity();
            const double norm = delta.norm();
            if (norm > kGainBound) v.gain = Mat3::Identity() + delta * (kGainBound / norm);
        }
    }
};

// Slowly trailing copy of the estimator parameters (the pseudo-label source).
struct MomentumState {
    EstimatorParams params;
    double eta = 0.99;        // ensembling momentum
    std::uint64_t steps = 0;  // completed updates

    void validate() const {
        if (!(eta >= 0.0 && eta < 1.0)) throw InvalidParameterError("momentum eta must be in [0, 1)");
        if (!params.is_finite()) throw InvalidInputError("momentum parameters must be finite");
    }
};

// Apply the correction head to one view's raw estimate. Heatmaps pass
// through untouched: confidence belongs to the detection, not the correction.
inline Prediction predict(const EstimatorParams& params, const DualViewSample& sample, int view) {
    if (!params.is_finite()) throw InvalidInputError("predict: non-finite parameters");
    const ViewCorrection& c = params.view[static_cast<std::size_t>(view)];
    Prediction p;
    p.joints.pts = sample.raw[static_cast<std::size_t>(view)].pts * c.gain.transpose() + c.offset;
    p.heatmaps = sample.heat[static_cast<std::size_t>(view)];
    return p;
}

// Squared-L2 pseudo-label loss over both views, mm^2. Inputs are expected
// wrist-aligned.
inline double loss(const JointSet& pred_v1, const JointSet& pred_v2, const JointSet& pseudo_v1,
                   const JointSet& pseudo_v2) {
    return (pred_v1.pts - pseudo_v1.pts).squaredNorm() + (pred_v2.pts - pseudo_v2.pts).squaredNorm();
}

// Gradient of `loss` w.r.t. the correction-head parameters, with the chain
// through wrist alignment of the prediction included. Matches monotone
// central finite differences of the same scalar.
struct ParamGradient {
    std::array<ViewCorrection, 2> view;  // same shapes, zero-initialized

    ParamGradient() {
        view[0].gain.setZero();
        view[1].gain.setZero();
    }
};

inline ParamGradient loss_gradient(const EstimatorParams& params, const DualViewSample& sample,
                                   const JointSet& pseudo_v1, const JointSet& pseudo_v2) {
    ParamGradient g;
    const std::array<const JointSet*, 2> pseudo = {&pseudo_v1, &pseudo_v2};
    for (int v = 0; v < 2; ++v) {
        const JointSet pred = predict(params, sample, v).joints;
        const JointSet aligned = wrist_align(pred);
        const JointMatrix resid = aligned.pts - pseudo[static_cast<std::size_t>(v)]->pts;

        // aligned_j = G (r_j - r_0) + (o_j - o_0), so each offset row gets its
        // own residual and the wrist row collects the counter-term.
        ViewCorrection& gv = g.view[static_cast<std::size_t>(v)];
        gv.offset = 2.0 * resid;
        gv.offset.row(kWristIndex) -= 2.0 * resid.colwise().sum();

        const JointMatrix raw_aligned =
            sample.raw[static_cast<std::size_t>(v)].pts.rowwise() - sample.raw[static_cast<std::size_t>(v)].pts.row(kWristIndex);
        gv.gain = 2.0 * resid.transpose() * raw_aligned;
    }
    return g;
}

inline MomentumState momentum_update(const MomentumState& state, const EstimatorParams& params) {
    state.validate();
    if (!params.is_finite()) throw InvalidInputError("momentum_update: non-finite parameters");
    MomentumState out = state;
    for (int v = 0; v < 2; ++v) {
        out.params.view[static_cast<std::size_t>(v)].gain =
            state.eta * state.params.view[static_cast<std::size_t>(v)].gain +
            (1.0 - state.eta) * params.view[static_cast<std::size_t>(v)].gain;
        out.params.view[static_cast<std::size_t>(v)].offset =
            state.eta * state.params.view[static_cast<std::size_t>(v)].offset +
            (1.0 - state.eta) * params.view[static_cast<std::size_t>(v)].offset;
    }
    out.steps = state.steps + 1;
    return out;
}

}  // namespace duoadapt
