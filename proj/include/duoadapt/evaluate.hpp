#pragma once

#include <string>
#include <utility>
#include <vector>

#include "duoadapt/adapt.hpp"
#include "duoadapt/dataset.hpp"
#include "duoadapt/estimator.hpp"
#include "duoadapt/metrics.hpp"
#include "duoadapt/pseudolabel.hpp"

namespace duoadapt {

struct MetricSummary {
    double mono_m_mm = 0.0;
    double dual_m_mm = 0.0;
    double mpjpe_v1_mm = 0.0;
    double mpjpe_v2_mm = 0.0;
};

inline MetricSummary evaluate_metrics(const Dataset& ds, const EstimatorParams& params, const Rotation& r) {
    if (ds.samples.empty()) throw InvalidInputError("evaluate: empty dataset");
    std::vector<JointSet> p1, p2, g1, g2;
    p1.reserve(ds.samples.size());
    p2.reserve(ds.samples.size());
    g1.reserve(ds.samples.size());
    g2.reserve(ds.samples.size());
    for (const DualViewSample& s : ds.samples) {
        p1.push_back(predict(params, s, 0).joints);
        p2.push_back(predict(params, s, 1).joints);
        g1.push_back(s.gt[0]);
        g2.push_back(s.gt[1]);
    }
    MetricSummary m;
    m.mono_m_mm = mono_m(p1, p2, g1, g2);
    m.dual_m_mm = dual_m(p1, p2, g1, g2, r);
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < p1.size(); ++i) {
        s1 += mpjpe(p1[i], g1[i]);
        s2 += mpjpe(p2[i], g2[i]);
    }
    m.mpjpe_v1_mm = s1 / static_cast<double>(p1.size());
    m.mpjpe_v2_mm = s2 / static_cast<double>(p2.size());
    return m;
}

// Pseudo-label quality vs prediction quality, bucketed. Labels are computed
// from the given estimator's predictions (one point per sample and view):
// fused = alpha*ABM + (1-alpha)*RGR against ABM alone.
inline ComplementarityTable complementarity_analysis(const Dataset& ds, const EstimatorParams& params,
                                                     const Rotation& r, const AdaptationConfig& cfg) {
    if (ds.samples.empty()) throw InvalidInputError("complementarity_analysis: empty dataset");
    std::vector<double> pred_err, fused_err, abm_err;
    pred_err.reserve(ds.samples.size() * 2);
    fused_err.reserve(ds.samples.size() * 2);
    abm_err.reserve(ds.samples.size() * 2);
    for (const DualViewSample& s : ds.samples) {
        const Prediction t1 = predict(params, s, 0);
        const Prediction t2 = predict(params, s, 1);
        const JointSet a1 = wrist_align(t1.joints);
        const JointSet a2 = wrist_align(t2.joints);
        const AttentionWeights w = joint_attention(t1.heatmaps, t2.heatmaps, cfg.beta);
        const auto abm = abm_merge(a1, a2, w, r);
        const auto rgr = rgr_refine(a1, a2, r, cfg.refine);
        const PseudoLabelPair fused = combine_pseudo(abm, rgr, cfg.alpha);

        pred_err.push_back(mpjpe(a1, s.gt[0]));
        pred_err.push_back(mpjpe(a2, s.gt[1]));
        fused_err.push_back(mpjpe(fused.v1, s.gt[0]));
        fused_err.push_back(mpjpe(fused.v2, s.gt[1]));
        abm_err.push_back(mpjpe(abm.first, s.gt[0]));
        abm_err.push_back(mpjpe(abm.second, s.gt[1]));
    }
    return complementarity_table(pred_err, fused_err, abm_err);
}

// Full report for one parameter set. The complementarity analysis is run
// with `analysis_params`/`analysis_rotation` (normally the pre-adaptation
// state, where pseudo-labeling actually operates on a wide error spread).
inline EvalReport evaluate(const Dataset& ds, const EstimatorParams& params, const Rotation& r,
                           const EstimatorParams& analysis_params, const Rotation& analysis_rotation,
                           const AdaptationConfig& cfg, bool with_complementarity = true) {
    EvalReport rep;
    const MetricSummary m = evaluate_metrics(ds, params, r);
    rep.mono_m_mm = m.mono_m_mm;
    rep.dual_m_mm = m.dual_m_mm;
    rep.mpjpe_v1_mm = m.mpjpe_v1_mm;
    rep.mpjpe_v2_mm = m.mpjpe_v2_mm;
    rep.sample_count = ds.samples.size();
    if (with_complementarity)
        rep.complementarity = complementarity_analysis(ds, analysis_params, analysis_rotation, cfg);
    if (rep.dual_m_mm > std::max(rep.mpjpe_v1_mm, rep.mpjpe_v2_mm))
        rep.warnings.push_back("Dual-M exceeds both per-view MPJPEs; rotation estimate is likely poor");
    return rep;
}

}  // namespace duoadapt
