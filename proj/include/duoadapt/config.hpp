#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "duoadapt/adapt.hpp"
#include "duoadapt/dataset.hpp"
#include "duoadapt/error.hpp"

namespace duoadapt {

using nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& known, const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!known.count(it.key()))
            throw ConfigError("unknown config field: " + path + it.key());
    }
}

template <typename T>
T get_or(const json& obj, const std::string& key, const std::string& path, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad value type for config field: " + path + key);
    }
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
}

}  // namespace detail

// beta serializes as the string "inf" at the argmax operating point,
// otherwise as a plain number.
inline json beta_to_json(double beta) {
    if (std::isinf(beta)) return json("inf");
    return json(beta);
}

inline double beta_from_json(const json& v, const std::string& path) {
    if (v.is_string()) {
        if (v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
        throw ConfigError("bad value for config field " + path + ": only \"inf\" is accepted as a string");
    }
    if (v.is_number()) return v.get<double>();
    throw ConfigError("bad value type for config field: " + path);
}

// --------------------------------------------------------------------------
// Scene configuration (synth command)
// --------------------------------------------------------------------------

inline SceneConfig scene_config_from_json(const json& root) {
    if (!root.is_object()) throw ConfigError("scene config must be a JSON object");
    detail::reject_unknown_keys(root, {"seed", "count", "corruption", "pose"}, "");
    SceneConfig c;
    c.seed = detail::get_or<std::uint64_t>(root, "seed", "", c.seed);
    c.count = detail::get_or<std::uint64_t>(root, "count", "", c.count);
    if (root.contains("corruption")) {
        const json& cr = root.at("corruption");
        if (!cr.is_object()) throw ConfigError("corruption must be an object");
        detail::reject_unknown_keys(cr,
                                    {"bias_range_mm", "noise_sigma_mm", "visibility", "confidence_sigma_mm",
                                     "hard_probability", "hard_noise_multiplier"},
                                    "corruption.");
        if (cr.contains("bias_range_mm")) {
            const json& b = cr.at("bias_range_mm");
            if (!b.is_array() || b.size() != 2)
                throw ConfigError("corruption.bias_range_mm must be a two-element array");
            c.bias_range_v1_mm = b.at(0).get<double>();
            c.bias_range_v2_mm = b.at(1).get<double>();
        }
        c.noise_sigma_mm = detail::get_or<double>(cr, "noise_sigma_mm", "corruption.", c.noise_sigma_mm);
        if (cr.contains("visibility")) {
            const json& v = cr.at("visibility");
            if (!v.is_array() || v.size() != 2)
                throw ConfigError("corruption.visibility must be a two-element array");
            c.visibility_v1 = v.at(0).get<double>();
            c.visibility_v2 = v.at(1).get<double>();
        }
        c.sigma_conf_mm = detail::get_or<double>(cr, "confidence_sigma_mm", "corruption.", c.sigma_conf_mm);
        c.hard_probability = detail::get_or<double>(cr, "hard_probability", "corruption.", c.hard_probability);
        c.hard_noise_multiplier =
            detail::get_or<double>(cr, "hard_noise_multiplier", "corruption.", c.hard_noise_multiplier);
    }
    if (root.contains("pose")) {
        const json& p = root.at("pose");
        if (!p.is_object()) throw ConfigError("pose must be an object");
        detail::reject_unknown_keys(p, {"jitter_deg", "translation_mm", "random_global_rotation"}, "pose.");
        c.pose.jitter_deg = detail::get_or<double>(p, "jitter_deg", "pose.", c.pose.jitter_deg);
        c.pose.translation_mm = detail::get_or<double>(p, "translation_mm", "pose.", c.pose.translation_mm);
        c.pose.random_global_rotation =
            detail::get_or<bool>(p, "random_global_rotation", "pose.", c.pose.random_global_rotation);
    }
    try {
        c.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("scene config invalid: ") + e.what());
    }
    return c;
}

inline json scene_config_to_json(const SceneConfig& c) {
    return json{{"seed", c.seed},
                {"count", c.count},
                {"corruption",
                 {{"bias_range_mm", {c.bias_range_v1_mm, c.bias_range_v2_mm}},
                  {"noise_sigma_mm", c.noise_sigma_mm},
                  {"visibility", {c.visibility_v1, c.visibility_v2}},
                  {"confidence_sigma_mm", c.sigma_conf_mm},
                  {"hard_probability", c.hard_probability},
                  {"hard_noise_multiplier", c.hard_noise_multiplier}}},
                {"pose",
                 {{"jitter_deg", c.pose.jitter_deg},
                  {"translation_mm", c.pose.translation_mm},
                  {"random_global_rotation", c.pose.random_global_rotation}}}};
}

inline SceneConfig load_scene_config(const std::string& path) {
    return scene_config_from_json(detail::load_json_file(path));
}

// --------------------------------------------------------------------------
// Adaptation configuration (adapt/eval commands)
// --------------------------------------------------------------------------

inline PseudoMode pseudo_mode_from_string(const std::string& s) {
    if (s == "full" || s == "none") return PseudoMode::kFull;  // "none" = no ablation
    if (s == "abm-only") return PseudoMode::kAbmOnly;
    if (s == "rgr-only") return PseudoMode::kRgrOnly;
    if (s == "self-distill") return PseudoMode::kSelfDistill;
    throw ConfigError("unknown pseudo-label mode: " + s);
}

inline AdaptationConfig adapt_config_from_json(const json& root) {
    if (!root.is_object()) throw ConfigError("adapt config must be a JSON object");
    detail::reject_unknown_keys(root,
                                {"seed", "alpha", "beta", "eta_theta", "eta_rotation", "init_pairs",
                                 "batch_size", "epochs", "learning_rate", "grad_momentum", "mode", "refine"},
                                "");
    AdaptationConfig c;
    c.seed = detail::get_or<std::uint64_t>(root, "seed", "", c.seed);
    c.alpha = detail::get_or<double>(root, "alpha", "", c.alpha);
    if (root.contains("beta")) c.beta = beta_from_json(root.at("beta"), "beta");
    c.eta_theta = detail::get_or<double>(root, "eta_theta", "", c.eta_theta);
    c.eta_rotation = detail::get_or<double>(root, "eta_rotation", "", c.eta_rotation);
    c.init_pairs = detail::get_or<std::uint64_t>(root, "init_pairs", "", c.init_pairs);
    c.batch_size = detail::get_or<int>(root, "batch_size", "", c.batch_size);
    c.epochs = detail::get_or<int>(root, "epochs", "", c.epochs);
    c.learning_rate = detail::get_or<double>(root, "learning_rate", "", c.learning_rate);
    c.grad_momentum = detail::get_or<double>(root, "grad_momentum", "", c.grad_momentum);
    if (root.contains("mode")) c.mode = pseudo_mode_from_string(root.at("mode").get<std::string>());
    if (root.contains("refine")) {
        const json& r = root.at("refine");
        if (!r.is_object()) throw ConfigError("refine must be an object");
        detail::reject_unknown_keys(r, {"max_iterations", "tolerance", "fd_step_mm", "proximity_weight"},
                                    "refine.");
        c.refine.max_iterations = detail::get_or<int>(r, "max_iterations", "refine.", c.refine.max_iterations);
        c.refine.tolerance = detail::get_or<double>(r, "tolerance", "refine.", c.refine.tolerance);
        c.refine.fd_step_mm = detail::get_or<double>(r, "fd_step_mm", "refine.", c.refine.fd_step_mm);
        c.refine.proximity_weight =
            detail::get_or<double>(r, "proximity_weight", "refine.", c.refine.proximity_weight);
    }
    try {
        c.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("adapt config invalid: ") + e.what());
    }
    return c;
}

inline json adapt_config_to_json(const AdaptationConfig& c) {
    return json{{"seed", c.seed},
                {"alpha", c.alpha},
                {"beta", beta_to_json(c.beta)},
                {"eta_theta", c.eta_theta},
                {"eta_rotation", c.eta_rotation},
                {"init_pairs", c.init_pairs},
                {"batch_size", c.batch_size},
                {"epochs", c.epochs},
                {"learning_rate", c.learning_rate},
                {"grad_momentum", c.grad_momentum},
                {"mode", pseudo_mode_name(c.mode)},
                {"refine",
                 {{"max_iterations", c.refine.max_iterations},
                  {"tolerance", c.refine.tolerance},
                  {"fd_step_mm", c.refine.fd_step_mm},
                  {"proximity_weight", c.refine.proximity_weight}}}};
}

inline AdaptationConfig load_adapt_config(const std::string& path) {
    return adapt_config_from_json(detail::load_json_file(path));
}

// Hash of the fully-defaulted config; checkpoints refuse to resume under a
// different one.
inline std::uint64_t adapt_config_hash(const AdaptationConfig& c) {
    return fnv1a64(adapt_config_to_json(c).dump());
}

}  // namespace duoadapt
