#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "duoadapt/bfgs.hpp"
#include "duoadapt/error.hpp"
#include "duoadapt/estimator.hpp"
#include "duoadapt/geometry.hpp"
#include "duoadapt/heatmap.hpp"

namespace duoadapt {

// Joint-wise view weights; each joint's pair sums to exactly 1.
struct AttentionWeights {
    Eigen::Matrix<double, kNumJoints, 1> v1 = Eigen::Matrix<double, kNumJoints, 1>::Constant(0.5);
    Eigen::Matrix<double, kNumJoints, 1> v2 = Eigen::Matrix<double, kNumJoints, 1>::Constant(0.5);
};

enum class PseudoSource { kAbmOnly, kRgrOnly, kFused };

struct RefineDiagnostics {
    double objective_initial = 0.0;
    double objective_final = 0.0;
    int iterations = 0;
    bool degenerate_fallback = false;
};

// A pair of wrist-aligned pseudo-labels, one per view frame.
struct PseudoLabelPair {
    JointSet v1;
    JointSet v2;
    PseudoSource source = PseudoSource::kFused;
    RefineDiagnostics refine;
};

struct RefineSettings {
    int max_iterations = 50;
    double tolerance = 1e-8;
    double fd_step_mm = 1e-4;
    double proximity_weight = 1e-6;  // lambda, per mm^2

    void validate() const {
        if (max_iterations < 1) throw InvalidParameterError("refine max_iterations must be >= 1");
        if (!(tolerance > 0.0)) throw InvalidParameterError("refine tolerance must be > 0");
        if (!(fd_step_mm > 0.0)) throw InvalidParameterError("refine fd step must be > 0");
        if (!(proximity_weight >= 0.0)) throw InvalidParameterError("refine proximity weight must be >= 0");
    }
};

// Confidence softness: w_j^v = beta^peak_j^v / sum_v beta^peak_j^v.
// beta = 1 degenerates to a plain average, beta = inf to per-joint argmax
// (ties split 0.5/0.5), beta = e to a two-way softmax over peak heights.
inline AttentionWeights joint_attention(const HeatmapStack& h1, const HeatmapStack& h2, double beta) {
    if (std::isnan(beta) || beta <= 0.0)
        throw InvalidParameterError("attention beta must be positive (or infinity)");
    AttentionWeights w;
    for (int j = 0; j < kNumJoints; ++j) {
        const double p1 = static_cast<double>(h1.map(j).max_value());
        const double p2 = static_cast<double>(h2.map(j).max_value());
        double w1;
        if (std::isinf(beta)) {
            w1 = p1 > p2 ? 1.0 : (p2 > p1 ? 0.0 : 0.5);
        } else {
            // 1 / (1 + beta^(p2 - p1)) is the stable two-way form.
            w1 = 1.0 / (1.0 + std::exp((p2 - p1) * std::log(beta)));
        }
        w.v1(j) = w1;
        w.v2(j) = 1.0 - w1;
    }
    return w;
}

namespace detail {

inline void require_aligned(const JointSet& j, const char* who) {
    if (!j.is_finite()) throw InvalidInputError(std::string(who) + ": non-finite joints");
    if (j.wrist().norm() > 1e-9)
        throw InvalidInputError(std::string(who) + ": input is not wrist-aligned");
}

}  // namespace detail

// Attention-based merging. Both inputs transported into each frame with the
// shared weights:
//   y^v1 = w1 . j1 + w2 . (R^T j2)
//   y^v2 = w1 . (R j1) + w2 . j2
// so that y^v2 = R y^v1 holds identically.
inline std::pair<JointSet, JointSet> abm_merge(const JointSet& j1, const JointSet& j2,
                                               const AttentionWeights& w, const Rotation& r) {
    detail::require_aligned(j1, "abm_merge view1");
    detail::require_aligned(j2, "abm_merge view2");
    const JointMatrix j2_in_v1 = j2.pts * r.matrix();             // R^T applied per joint row
    const JointMatrix j1_in_v2 = j1.pts * r.matrix().transpose();  // R applied per joint row
    JointSet out1, out2;
    out1.pts = w.v1.asDiagonal() * j1.pts + w.v2.asDiagonal() * j2_in_v1;
    out2.pts = w.v1.asDiagonal() * j1_in_v2 + w.v2.asDiagonal() * j2.pts;
    return {out1, out2};
}

namespace detail {

// Refinement objective over the 2 x 20 x 3 non-wrist coordinates:
// |R_target - rot(J1, J2)|_F^2 plus a proximity tether to the inputs.
class RefineObjective {
public:
    RefineObjective(const JointSet& j1, const JointSet& j2, const Rotation& target, double lambda)
        : j1_(j1), j2_(j2), target_(target), lambda_(lambda) {}

    static constexpr int kVars = 2 * (kNumJoints - 1) * 3;

    Eigen::VectorXd pack(const JointSet& a, const JointSet& b) const {
        Eigen::VectorXd x(kVars);
        int k = 0;
        for (int j = 1; j < kNumJoints; ++j)
            for (int c = 0; c < 3; ++c) x(k++) = a.pts(j, c);
        for (int j = 1; j < kNumJoints; ++j)
            for (int c = 0; c < 3; ++c) x(k++) = b.pts(j, c);
        return x;
    }

    void unpack(const Eigen::VectorXd& x, JointSet* a, JointSet* b) const {
        a->pts.setZero();
        b->pts.setZero();
        int k = 0;
        for (int j = 1; j < kNumJoints; ++j)
            for (int c = 0; c < 3; ++c) a->pts(j, c) = x(k++);
        for (int j = 1; j < kNumJoints; ++j)
            for (int c = 0; c < 3; ++c) b->pts(j, c) = x(k++);
    }

    double operator()(const Eigen::VectorXd& x) const {
        JointSet a, b;
        unpack(x, &a, &b);
        double rot_term;
        try {
            const Rotation r = kabsch_rotation(a, b);
            rot_term = (target_.matrix() - r.matrix()).squaredNorm();
        } catch (const DegenerateConfigError&) {
            return std::numeric_limits<double>::infinity();
        }
        const double prox = (a.pts - j1_.pts).squaredNorm() + (b.pts - j2_.pts).squaredNorm();
        return rot_term + lambda_ * prox;
    }

private:
    const JointSet& j1_;
    const JointSet& j2_;
    Rotation target_;
    double lambda_;
};

}  // namespace detail

// Rotation-guided refinement: nudge both predictions so their implied
// rotation matches the reference R. Warm-started at the inputs, quasi-Newton
// on the non-wrist coordinates, never returns a point with a higher
// objective than the inputs. A degenerate starting configuration falls back
// to the inputs with a flagged diagnostic instead of aborting.
inline std::pair<JointSet, JointSet> rgr_refine(const JointSet& j1, const JointSet& j2,
                                                const Rotation& r_target, const RefineSettings& settings,
                                                RefineDiagnostics* diag = nullptr) {
    settings.validate();
    detail::require_aligned(j1, "rgr_refine view1");
    detail::require_aligned(j2, "rgr_refine view2");

    RefineDiagnostics local;
    detail::RefineObjective objective(j1, j2, r_target, settings.proximity_weight);
    const Eigen::VectorXd x0 = objective.pack(j1, j2);
    const double f0 = objective(x0);
    local.objective_initial = f0;
    local.objective_final = f0;

    if (!std::isfinite(f0)) {
        local.degenerate_fallback = true;
        if (diag) *diag = local;
        return {j1, j2};
    }
    if (f0 <= settings.tolerance) {  // already consistent, nothing to refine
        if (diag) *diag = local;
        return {j1, j2};
    }

    BfgsOptions opts;
    opts.max_iterations = settings.max_iterations;
    opts.tolerance = settings.tolerance;
    opts.fd_step = settings.fd_step_mm;
    const BfgsResult res = minimize_bfgs(objective, x0, opts);

    local.objective_final = res.f_final;
    local.iterations = res.iterations;
    JointSet out1, out2;
    objective.unpack(res.x, &out1, &out2);
    if (diag) *diag = local;
    return {out1, out2};
}

// Final pseudo-label: y = alpha * y_abm + (1 - alpha) * y_rgr, per view.
inline PseudoLabelPair combine_pseudo(const std::pair<JointSet, JointSet>& abm,
                                      const std::pair<JointSet, JointSet>& rgr, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidParameterError("alpha must be in [0, 1]");
    PseudoLabelPair out;
    out.v1.pts = alpha * abm.first.pts + (1.0 - alpha) * rgr.first.pts;
    out.v2.pts = alpha * abm.second.pts + (1.0 - alpha) * rgr.second.pts;
    out.source = PseudoSource::kFused;
    return out;
}

// Rolling update of the inter-view rotation: chordal blend of the previous
// estimate (weight eta) with the batch mean of per-pair Kabsch rotations.
// Pairs that are degenerate for Kabsch are skipped; if every pair is, the
// previous estimate is returned untouched.
inline Rotation update_rotation(const Rotation& r_prev, const std::vector<std::pair<JointSet, JointSet>>& batch,
                                double eta, int* skipped = nullptr) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw InvalidParameterError("rotation momentum must be in [0, 1]");
    if (batch.empty()) throw InvalidInputError("update_rotation: empty batch");

    std::vector<Rotation> per_pair;
    per_pair.reserve(batch.size());
    int skip_count = 0;
    for (const auto& [a, b] : batch) {
        try {
            per_pair.push_back(kabsch_rotation(a, b));
        } catch (const DegenerateConfigError&) {
            ++skip_count;
        }
    }
    if (skipped) *skipped = skip_count;
    if (per_pair.empty()) return r_prev;

    const Rotation batch_mean = so3_mean(per_pair);
    const std::vector<Rotation> pair = {r_prev, batch_mean};
    const std::vector<double> weights = {eta, 1.0 - eta};
    return so3_mean(pair, &weights);
}

}  // namespace duoadapt
