#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "duoadapt/adapt.hpp"
#include "duoadapt/config.hpp"
#include "duoadapt/error.hpp"
#include "duoadapt/hash.hpp"
#include "duoadapt/metrics.hpp"
#include "duoadapt/version.hpp"

namespace duoadapt {

inline constexpr const char* kCheckpointFormatName = "duoadapt-checkpoint";
inline constexpr const char* kManifestFormatName = "duoadapt-manifest";
inline constexpr const char* kReportFormatName = "duoadapt-report";

namespace detail {

inline json matrix3_to_json(const Mat3& m) {
    json a = json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
    return a;
}

inline Mat3 matrix3_from_json(const json& a) {
    if (!a.is_array() || a.size() != 9) throw FormatVersionError("bad 3x3 matrix in checkpoint");
    Mat3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = a.at(static_cast<std::size_t>(r * 3 + c)).get<double>();
    return m;
}

inline json joints_to_json(const JointMatrix& m) {
    json a = json::array();
    for (int j = 0; j < kNumJoints; ++j)
        for (int c = 0; c < 3; ++c) a.push_back(m(j, c));
    return a;
}

inline JointMatrix joints_from_json(const json& a) {
    if (!a.is_array() || a.size() != kNumJoints * 3) throw FormatVersionError("bad 21x3 matrix in checkpoint");
    JointMatrix m;
    for (int j = 0; j < kNumJoints; ++j)
        for (int c = 0; c < 3; ++c) m(j, c) = a.at(static_cast<std::size_t>(j * 3 + c)).get<double>();
    return m;
}

inline json params_to_json(const EstimatorParams& p) {
    return json{{"gain_v1", matrix3_to_json(p.view[0].gain)},
                {"offset_v1", joints_to_json(p.view[0].offset)},
                {"gain_v2", matrix3_to_json(p.view[1].gain)},
                {"offset_v2", joints_to_json(p.view[1].offset)}};
}

inline EstimatorParams params_from_json(const json& j) {
    EstimatorParams p;
    p.view[0].gain = matrix3_from_json(j.at("gain_v1"));
    p.view[0].offset = joints_from_json(j.at("offset_v1"));
    p.view[1].gain = matrix3_from_json(j.at("gain_v2"));
    p.view[1].offset = joints_from_json(j.at("offset_v2"));
    return p;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << content;
    if (!out) throw IoError("write failure: " + path);
}

}  // namespace detail

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

// --------------------------------------------------------------------------
// Checkpoint: full adaptation state, versioned, full-precision doubles.
// --------------------------------------------------------------------------

struct Checkpoint {
    AdaptationConfig config;
    std::uint64_t config_hash = 0;
    std::uint64_t template_hash = 0;
    std::uint64_t dataset_hash = 0;
    EstimatorParams theta;
    EstimatorParams theta_bar;
    EstimatorParams theta_init;
    Mat3 rotation = Mat3::Identity();
    Mat3 rotation_init = Mat3::Identity();
    std::array<ViewCorrection, 2> velocity;
    std::uint64_t iterations = 0;
    std::uint64_t momentum_steps = 0;

    Checkpoint() {
        velocity[0].gain.setZero();
        velocity[1].gain.setZero();
    }
};

inline Checkpoint make_checkpoint(const AdaptState& st, const AdaptationConfig& cfg,
                                  std::uint64_t template_hash, std::uint64_t dataset_hash) {
    Checkpoint c;
    c.config = cfg;
    c.config_hash = adapt_config_hash(cfg);
    c.template_hash = template_hash;
    c.dataset_hash = dataset_hash;
    c.theta = st.theta;
    c.theta_bar = st.momentum.params;
    c.theta_init = st.theta_init;
    c.rotation = st.rotation.matrix();
    c.rotation_init = st.rotation_init.matrix();
    c.velocity = st.velocity;
    c.iterations = st.iterations;
    c.momentum_steps = st.momentum.steps;
    return c;
}

inline AdaptState restore_adapt_state(const Checkpoint& c) {
    AdaptState st;
    st.theta = c.theta;
    st.theta_init = c.theta_init;
    st.momentum.params = c.theta_bar;
    st.momentum.eta = c.config.eta_theta;
    st.momentum.steps = c.momentum_steps;
    st.rotation = Rotation::from_matrix(c.rotation);
    st.rotation_init = Rotation::from_matrix(c.rotation_init);
    st.velocity = c.velocity;
    st.iterations = c.iterations;
    return st;
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
    json j{{"format", kCheckpointFormatName},
           {"version", kCheckpointFormatVersion},
           {"config", adapt_config_to_json(c.config)},
           {"config_hash", hash_hex(c.config_hash)},
           {"template_hash", hash_hex(c.template_hash)},
           {"dataset_hash", hash_hex(c.dataset_hash)},
           {"iterations", c.iterations},
           {"momentum_steps", c.momentum_steps},
           {"theta", detail::params_to_json(c.theta)},
           {"theta_bar", detail::params_to_json(c.theta_bar)},
           {"theta_init", detail::params_to_json(c.theta_init)},
           {"rotation", detail::matrix3_to_json(c.rotation)},
           {"rotation_init", detail::matrix3_to_json(c.rotation_init)},
           {"velocity_gain_v1", detail::matrix3_to_json(c.velocity[0].gain)},
           {"velocity_offset_v1", detail::joints_to_json(c.velocity[0].offset)},
           {"velocity_gain_v2", detail::matrix3_to_json(c.velocity[1].gain)},
           {"velocity_offset_v2", detail::joints_to_json(c.velocity[1].offset)}};
    detail::write_text_file(path, j.dump(2) + "\n");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatVersionError("checkpoint " + path + " is not valid JSON: " + e.what());
    }
    if (detail::get_or<std::string>(j, "format", "", "") != kCheckpointFormatName)
        throw FormatVersionError("not a checkpoint file: " + path);
    if (detail::get_or<std::string>(j, "version", "", "") != kCheckpointFormatVersion)
        throw FormatVersionError("unsupported checkpoint version in " + path);
    Checkpoint c;
    c.config = adapt_config_from_json(j.at("config"));
    c.config_hash = adapt_config_hash(c.config);
    if (hash_hex(c.config_hash) != j.at("config_hash").get<std::string>())
        throw ChecksumError("checkpoint config hash mismatch (file edited?): " + path);
    c.template_hash = std::stoull(j.at("template_hash").get<std::string>(), nullptr, 16);
    c.dataset_hash = std::stoull(j.at("dataset_hash").get<std::string>(), nullptr, 16);
    c.iterations = j.at("iterations").get<std::uint64_t>();
    c.momentum_steps = j.at("momentum_steps").get<std::uint64_t>();
    c.theta = detail::params_from_json(j.at("theta"));
    c.theta_bar = detail::params_from_json(j.at("theta_bar"));
    c.theta_init = detail::params_from_json(j.at("theta_init"));
    c.rotation = detail::matrix3_from_json(j.at("rotation"));
    c.rotation_init = detail::matrix3_from_json(j.at("rotation_init"));
    c.velocity[0].gain = detail::matrix3_from_json(j.at("velocity_gain_v1"));
    c.velocity[0].offset = detail::joints_from_json(j.at("velocity_offset_v1"));
    c.velocity[1].gain = detail::matrix3_from_json(j.at("velocity_gain_v2"));
    c.velocity[1].offset = detail::joints_from_json(j.at("velocity_offset_v2"));
    return c;
}

// Resume = restore + config compatibility gate.
inline AdaptState resume_from_checkpoint(const Checkpoint& c, const AdaptationConfig& cfg,
                                         std::uint64_t template_hash) {
    if (adapt_config_hash(cfg) != c.config_hash)
        throw IncompatibleCheckpointError("checkpoint was produced under a different configuration");
    if (template_hash != c.template_hash)
        throw IncompatibleCheckpointError("checkpoint template hash does not match the dataset");
    return restore_adapt_state(c);
}

// --------------------------------------------------------------------------
// Event log: one JSON record per line.
// --------------------------------------------------------------------------

inline json event_to_json(const AdaptEvent& e) {
    json j{{"iter", e.iteration},
           {"epoch", e.epoch},
           {"batch", e.batch},
           {"loss_mm2", e.loss_mm2},
           {"rotation_step_rad", e.rotation_step_rad},
           {"rgr_objective_initial", e.rgr_objective_initial},
           {"rgr_objective_final", e.rgr_objective_final},
           {"rgr_fallbacks", e.rgr_fallbacks}};
    if (e.geodesic_to_gt_rad >= 0.0) j["geodesic_to_gt_rad"] = e.geodesic_to_gt_rad;
    if (e.pseudo_label_error_mm >= 0.0) j["pseudo_label_error_mm"] = e.pseudo_label_error_mm;
    return j;
}

inline std::string events_to_jsonl(const std::vector<AdaptEvent>& events) {
    std::string out;
    for (const AdaptEvent& e : events) {
        out += event_to_json(e).dump();
        out += '\n';
    }
    return out;
}

inline void write_event_log(const std::vector<AdaptEvent>& events, const std::string& path) {
    detail::write_text_file(path, events_to_jsonl(events));
}

// --------------------------------------------------------------------------
// Evaluation report
// --------------------------------------------------------------------------

inline json complementarity_to_json(const ComplementarityTable& t) {
    json buckets = json::array();
    for (const auto& b : t.buckets) {
        buckets.push_back(json{{"lower_mm", b.lower},
                               {"upper_mm", b.upper},
                               {"count", b.count},
                               {"mean_error_fused_mm", b.mean_error_fused},
                               {"mean_error_abm_only_mm", b.mean_error_abm_only}});
    }
    return json{{"buckets", buckets},
                {"min_error_mm", t.min_error},
                {"max_error_mm", t.max_error},
                {"degenerate", t.degenerate}};
}

inline json report_to_json(const EvalReport& r) {
    return json{{"mono_m_mm", r.mono_m_mm},
                {"dual_m_mm", r.dual_m_mm},
                {"mpjpe_v1_mm", r.mpjpe_v1_mm},
                {"mpjpe_v2_mm", r.mpjpe_v2_mm},
                {"sample_count", r.sample_count},
                {"complementarity", complementarity_to_json(r.complementarity)},
                {"warnings", r.warnings}};
}

inline std::string report_to_text(const EvalReport& r, const std::string& title) {
    std::ostringstream os;
    os << title << "\n";
    os << std::string(title.size(), '-') << "\n";
    os << std::fixed << std::setprecision(3);
    os << "samples        " << r.sample_count << "\n";
    os << "Mono-M  [mm]   " << r.mono_m_mm << "\n";
    os << "Dual-M  [mm]   " << r.dual_m_mm << "\n";
    os << "view1 MPJPE    " << r.mpjpe_v1_mm << "\n";
    os << "view2 MPJPE    " << r.mpjpe_v2_mm << "\n";
    os << "\npseudo-label error by prediction-error bucket [mm]\n";
    os << "  bucket            count   fused    abm-only\n";
    for (const auto& b : r.complementarity.buckets) {
        os << "  [" << std::setw(7) << b.lower << "," << std::setw(7) << b.upper << ")  " << std::setw(6)
           << b.count << "  ";
        if (b.count > 0)
            os << std::setw(7) << b.mean_error_fused << "  " << std::setw(7) << b.mean_error_abm_only << "\n";
        else
            os << "      -        -\n";
    }
    for (const std::string& w : r.warnings) os << "warning: " << w << "\n";
    return os.str();
}

// --------------------------------------------------------------------------
// Run manifest: the record that ties artifacts of one command together.
// --------------------------------------------------------------------------

inline json make_manifest(const std::string& command, const json& config_snapshot,
                          const std::string& dataset_path, std::uint64_t dataset_hash,
                          const std::vector<std::pair<std::string, std::string>>& outputs) {
    json out_list = json::array();
    for (const auto& [kind, p] : outputs) out_list.push_back(json{{"kind", kind}, {"path", p}});
    return json{{"format", kManifestFormatName},
                {"version", kArtifactVersion},
                {"command", command},
                {"config", config_snapshot},
                {"dataset", {{"path", dataset_path}, {"hash", hash_hex(dataset_hash)}}},
                {"outputs", out_list},
                {"created_utc", utc_timestamp()}};
}

inline void write_manifest(const json& manifest, const std::string& path) {
    detail::write_text_file(path, manifest.dump(2) + "\n");
}

inline json load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatVersionError("manifest " + path + " is not valid JSON: " + e.what());
    }
    if (detail::get_or<std::string>(j, "format", "", "") != kManifestFormatName)
        throw FormatVersionError("not a manifest file: " + path);
    return j;
}

}  // namespace duoadapt
