#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "duoadapt/dataset.hpp"
#include "duoadapt/error.hpp"
#include "duoadapt/estimator.hpp"
#include "duoadapt/geometry.hpp"
#include "duoadapt/metrics.hpp"
#include "duoadapt/pseudolabel.hpp"

namespace duoadapt {

enum class PseudoMode { kFull, kAbmOnly, kRgrOnly, kSelfDistill };

inline const char* pseudo_mode_name(PseudoMode m) {
    switch (m) {
        case PseudoMode::kFull: return "full";
        case PseudoMode::kAbmOnly: return "abm-only";
        case PseudoMode::kRgrOnly: return "rgr-only";
        case PseudoMode::kSelfDistill: return "self-distill";
    }
    return "?";
}

struct AdaptationConfig {
    double alpha = 0.7;                  // pseudo-label fusion weight
    double beta = std::numeric_limits<double>::infinity();  // attention softness
    double eta_theta = 0.99;             // parameter ensembling momentum
    double eta_rotation = 0.999;         // rotation ensembling momentum
    std::uint64_t init_pairs = 1000;     // N for rotation initialization
    int batch_size = 32;
    int epochs = 20;
    double learning_rate = 1e-2;
    double grad_momentum = 0.0;          // optional heavy-ball term
    PseudoMode mode = PseudoMode::kFull;
    RefineSettings refine;
    std::uint64_t seed = 7;

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidParameterError("alpha must be in [0, 1]");
        if (std::isnan(beta) || beta <= 0.0) throw InvalidParameterError("beta must be positive or infinity");
        if (!(eta_theta >= 0.0 && eta_theta < 1.0)) throw InvalidParameterError("eta_theta must be in [0, 1)");
        if (!(eta_rotation >= 0.0 && eta_rotation <= 1.0))
            throw InvalidParameterError("eta_rotation must be in [0, 1]");
        if (init_pairs < 1) throw InvalidParameterError("init_pairs must be >= 1");
        if (batch_size < 1) throw InvalidParameterError("batch_size must be >= 1");
        if (epochs < 0) throw InvalidParameterError("epochs must be >= 0");
        if (!(learning_rate >= 0.0)) throw InvalidParameterError("learning_rate must be >= 0");
        if (!(grad_momentum >= 0.0 && grad_momentum < 1.0))
            throw InvalidParameterError("grad_momentum must be in [0, 1)");
        refine.validate();
    }
};

// One line of the adaptation event log.
struct AdaptEvent {
    std::uint64_t iteration = 0;
    int epoch = 0;
    int batch = 0;
    double loss_mm2 = 0.0;
    double rotation_step_rad = 0.0;          // geodesic(R_before, R_after)
    double geodesic_to_gt_rad = -1.0;        // -1 when no ground truth was supplied
    double pseudo_label_error_mm = -1.0;     // mean vs GT, -1 when unavailable
    double rgr_objective_initial = 0.0;      // batch means
    double rgr_objective_final = 0.0;
    int rgr_fallbacks = 0;
};

struct AdaptState {
    EstimatorParams theta;
    MomentumState momentum;
    Rotation rotation;
    EstimatorParams theta_init;
    Rotation rotation_init;
    std::array<ViewCorrection, 2> velocity;  // heavy-ball state, zero by default
    std::uint64_t iterations = 0;            // completed batch updates
    std::vector<AdaptEvent> events;

    AdaptState() {
        velocity[0].gain.setZero();
        velocity[1].gain.setZero();
    }
};

// Eq.-1-style initialization: chordal mean of per-pair Kabsch rotations over
// the first N prediction pairs of the (pre-adaptation) estimator. Degenerate
// pairs are skipped and counted; if every pair degenerates the initialization
// fails outright.
inline Rotation initialize_rotation(const EstimatorParams& params, const Dataset& ds, std::uint64_t n_pairs,
                                    std::uint64_t* skipped = nullptr) {
    if (ds.samples.empty()) throw InitializationError("initialize_rotation: empty dataset");
    const std::uint64_t n = std::min<std::uint64_t>(n_pairs, ds.samples.size());
    std::vector<Rotation> rots;
    rots.reserve(n);
    std::uint64_t skip_count = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        const JointSet p1 = predict(params, ds.samples[i], 0).joints;
        const JointSet p2 = predict(params, ds.samples[i], 1).joints;
        try {
            rots.push_back(kabsch_rotation(p1, p2));
        } catch (const DegenerateConfigError&) {
            ++skip_count;
        }
    }
    if (skipped) *skipped = skip_count;
    if (rots.empty())
        throw InitializationError("initialize_rotation: all " + std::to_string(n) + " pairs degenerate");
    return so3_mean(rots);
}

namespace detail {

struct BatchPseudo {
    std::vector<JointSet> y1, y2;           // wrist-aligned labels per sample
    std::vector<std::pair<JointSet, JointSet>> teacher_pairs;  // aligned momentum predictions
    double rgr_obj_initial = 0.0;
    double rgr_obj_final = 0.0;
    int rgr_fallbacks = 0;
};

inline BatchPseudo make_batch_pseudo(const AdaptationConfig& cfg, const MomentumState& momentum,
                                     const Dataset& ds, std::size_t begin, std::size_t end,
                                     const Rotation& rotation) {
    BatchPseudo out;
    const std::size_t count = end - begin;
    out.y1.reserve(count);
    out.y2.reserve(count);
    out.teacher_pairs.reserve(count);
    int rgr_runs = 0;
    for (std::size_t i = begin; i < end; ++i) {
        const DualViewSample& s = ds.samples[i];
        const Prediction t1 = predict(momentum.params, s, 0);
        const Prediction t2 = predict(momentum.params, s, 1);
        const JointSet a1 = wrist_align(t1.joints);
        const JointSet a2 = wrist_align(t2.joints);
        out.teacher_pairs.emplace_back(a1, a2);

        JointSet y1, y2;
        switch (cfg.mode) {
            case PseudoMode::kSelfDistill: {
                y1 = a1;
                y2 = a2;
                break;
            }
            case PseudoMode::kAbmOnly: {
                const AttentionWeights w = joint_attention(t1.heatmaps, t2.heatmaps, cfg.beta);
                const auto abm = abm_merge(a1, a2, w, rotation);
                y1 = abm.first;
                y2 = abm.second;
                break;
            }
            case PseudoMode::kRgrOnly: {
                RefineDiagnostics diag;
                const auto rgr = rgr_refine(a1, a2, rotation, cfg.refine, &diag);
                y1 = rgr.first;
                y2 = rgr.second;
                out.rgr_obj_initial += diag.objective_initial;
                out.rgr_obj_final += diag.objective_final;
                out.rgr_fallbacks += diag.degenerate_fallback ? 1 : 0;
                ++rgr_runs;
                break;
            }
            case PseudoMode::kFull: {
                const AttentionWeights w = joint_attention(t1.heatmaps, t2.heatmaps, cfg.beta);
                const auto abm = abm_merge(a1, a2, w, rotation);
                RefineDiagnostics diag;
                const auto rgr = rgr_refine(a1, a2, rotation, cfg.refine, &diag);
                const PseudoLabelPair fused = combine_pseudo(abm, rgr, cfg.alpha);
                y1 = fused.v1;
                y2 = fused.v2;
                out.rgr_obj_initial += diag.objective_initial;
                out.rgr_obj_final += diag.objective_final;
                out.rgr_fallbacks += diag.degenerate_fallback ? 1 : 0;
                ++rgr_runs;
                break;
            }
        }
        out.y1.push_back(std::move(y1));
        out.y2.push_back(std::move(y2));
    }
    if (rgr_runs > 0) {
        out.rgr_obj_initial /= rgr_runs;
        out.rgr_obj_final /= rgr_runs;
    }
    return out;
}

}  // namespace detail

// Run (or continue) the adaptation loop. `state` must either be fresh
// (iterations == 0, state initialized from `init_adapt_state`) or restored
// from a checkpoint of the same config/dataset. `gt_rotation_for_logging`
// only feeds the event log; no update reads ground truth.
inline void run_adaptation(AdaptState& state, const Dataset& ds, const AdaptationConfig& cfg,
                           std::uint64_t target_iterations,
                           const Rotation* gt_rotation_for_logging = nullptr) {
    cfg.validate();
    if (ds.samples.empty()) throw InvalidInputError("adapt: empty dataset");

    const std::size_t n = ds.samples.size();
    const std::uint64_t batches_per_epoch =
        (n + static_cast<std::size_t>(cfg.batch_size) - 1) / static_cast<std::size_t>(cfg.batch_size);

    while (state.iterations < target_iterations) {
        const std::uint64_t t = state.iterations;
        const int epoch = static_cast<int>(t / batches_per_epoch);
        const int batch = static_cast<int>(t % batches_per_epoch);
        const std::size_t begin = static_cast<std::size_t>(batch) * static_cast<std::size_t>(cfg.batch_size);
        const std::size_t end = std::min(n, begin + static_cast<std::size_t>(cfg.batch_size));
        const std::size_t count = end - begin;

        // (1)-(2) momentum predictions and pseudo-labels at pre-update theta_bar
        detail::BatchPseudo pl = detail::make_batch_pseudo(cfg, state.momentum, ds, begin, end, state.rotation);

        // (3) loss and gradient of the live estimator against the labels
        double batch_loss = 0.0;
        ParamGradient grad;
        double raw_sq_scale = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            const DualViewSample& s = ds.samples[begin + i];
            const JointSet p1 = wrist_align(predict(state.theta, s, 0).joints);
            const JointSet p2 = wrist_align(predict(state.theta, s, 1).joints);
            batch_loss += loss(p1, p2, pl.y1[i], pl.y2[i]);
            const ParamGradient g = loss_gradient(state.theta, s, pl.y1[i], pl.y2[i]);
            for (int v = 0; v < 2; ++v) {
                grad.view[static_cast<std::size_t>(v)].gain += g.view[static_cast<std::size_t>(v)].gain;
                grad.view[static_cast<std::size_t>(v)].offset += g.view[static_cast<std::size_t>(v)].offset;
                raw_sq_scale += (wrist_align(s.raw[static_cast<std::size_t>(v)]).pts).squaredNorm();
            }
        }
        batch_loss /= static_cast<double>(count);
        if (!std::isfinite(batch_loss))
            throw NumericalError("adapt: non-finite loss at iteration " + std::to_string(t));
        raw_sq_scale /= static_cast<double>(count * 2 * kNumJoints);

        // (4) gradient step; the gain block is normalized by the input second
        // moment so one learning rate covers both parameter groups.
        const double inv_count = 1.0 / static_cast<double>(count);
        const double gain_scale = 1.0 / std::max(raw_sq_scale, 1.0);
        for (int v = 0; v < 2; ++v) {
            auto& vel = state.velocity[static_cast<std::size_t>(v)];
            const Mat3 gain_step = cfg.learning_rate * gain_scale * inv_count * grad.view[static_cast<std::size_t>(v)].gain;
            const JointMatrix offset_step = cfg.learning_rate * inv_count * grad.view[static_cast<std::size_t>(v)].offset;
            vel.gain = cfg.grad_momentum * vel.gain + gain_step;
            vel.offset = cfg.grad_momentum * vel.offset + offset_step;
            state.theta.view[static_cast<std::size_t>(v)].gain -= vel.gain;
            state.theta.view[static_cast<std::size_t>(v)].offset -= vel.offset;
        }
        state.theta.enforce_gain_bound();
        if (!state.theta.is_finite())
            throw NumericalError("adapt: parameters became non-finite at iteration " + std::to_string(t));

        // (5) trail the momentum estimator
        state.momentum = momentum_update(state.momentum, state.theta);

        // (6) rolling rotation update from the batch's momentum predictions
        const Rotation r_before = state.rotation;
        state.rotation = update_rotation(state.rotation, pl.teacher_pairs, cfg.eta_rotation);

        AdaptEvent ev;
        ev.iteration = t;
        ev.epoch = epoch;
        ev.batch = batch;
        ev.loss_mm2 = batch_loss;
        ev.rotation_step_rad = geodesic_angle(r_before, state.rotation);
        ev.rgr_objective_initial = pl.rgr_obj_initial;
        ev.rgr_objective_final = pl.rgr_obj_final;
        ev.rgr_fallbacks = pl.rgr_fallbacks;
        if (gt_rotation_for_logging) {
            ev.geodesic_to_gt_rad = geodesic_angle(state.rotation, *gt_rotation_for_logging);
            double pl_err = 0.0;
            for (std::size_t i = 0; i < count; ++i) {
                pl_err += mpjpe(pl.y1[i], ds.samples[begin + i].gt[0]);
                pl_err += mpjpe(pl.y2[i], ds.samples[begin + i].gt[1]);
            }
            ev.pseudo_label_error_mm = pl_err / static_cast<double>(2 * count);
        }
        state.events.push_back(ev);
        state.iterations = t + 1;
    }
}

// Fresh state: live and momentum estimators both at theta_0, rotation from
// the initialization step (Eq.-1 style) unless one is supplied.
inline AdaptState init_adapt_state(const EstimatorParams& theta0, const Dataset& ds,
                                   const AdaptationConfig& cfg,
                                   const Rotation* rotation_override = nullptr) {
    cfg.validate();
    AdaptState st;
    st.theta = theta0;
    st.theta_init = theta0;
    st.momentum.params = theta0;
    st.momentum.eta = cfg.eta_theta;
    st.rotation = rotation_override ? *rotation_override : initialize_rotation(theta0, ds, cfg.init_pairs);
    st.rotation_init = st.rotation;
    return st;
}

// Full run: initialization plus `epochs` passes over the dataset.
inline AdaptState adapt(const EstimatorParams& theta0, const Dataset& ds, const AdaptationConfig& cfg,
                        const Rotation* gt_rotation_for_logging = nullptr) {
    AdaptState st = init_adapt_state(theta0, ds, cfg);
    const std::uint64_t batches_per_epoch =
        (ds.samples.size() + static_cast<std::size_t>(cfg.batch_size) - 1) /
        static_cast<std::size_t>(cfg.batch_size);
    run_adaptation(st, ds, cfg, batches_per_epoch * static_cast<std::uint64_t>(cfg.epochs),
                   gt_rotation_for_logging);
    return st;
}

}  // namespace duoadapt
