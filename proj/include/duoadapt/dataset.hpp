#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "duoadapt/error.hpp"
#include "duoadapt/geometry.hpp"
#include "duoadapt/hash.hpp"
#include "duoadapt/heatmap.hpp"
#include "duoadapt/scene.hpp"
#include "duoadapt/version.hpp"

namespace duoadapt {

// Everything needed to regenerate a dataset bit-identically.
struct SceneConfig {
    std::uint64_t seed = 1;
    std::uint64_t count = 1000;
    double bias_range_v1_mm = 6.0;
    double bias_range_v2_mm = 30.0;
    double noise_sigma_mm = 8.0;
    double visibility_v1 = 1.0;
    double visibility_v2 = 0.6;
    double sigma_conf_mm = 30.0;
    double hard_probability = 0.1;
    double hard_noise_multiplier = 4.0;
    PoseOptions pose;

    void validate() const {
        if (bias_range_v1_mm < 0.0 || bias_range_v2_mm < 0.0)
            throw InvalidParameterError("bias ranges must be >= 0");
        if (noise_sigma_mm < 0.0) throw InvalidParameterError("noise sigma must be >= 0");
        if (!(visibility_v1 > 0.0 && visibility_v1 <= 1.0) || !(visibility_v2 > 0.0 && visibility_v2 <= 1.0))
            throw InvalidParameterError("visibility must be in (0, 1]");
        if (!(sigma_conf_mm > 0.0)) throw InvalidParameterError("sigma_conf must be > 0");
        if (!(hard_probability >= 0.0 && hard_probability <= 1.0))
            throw InvalidParameterError("hard_probability must be in [0, 1]");
        if (!(hard_noise_multiplier >= 1.0))
            throw InvalidParameterError("hard_noise_multiplier must be >= 1");
        if (pose.jitter_deg < 0.0 || pose.jitter_deg > 90.0)
            throw InvalidParameterError("jitter must be in [0, 90] degrees");
    }
};

struct Dataset {
    SceneConfig config;
    HandTemplate hand;
    CorruptionModel corruption;
    SceneRig rig;  // rig.gt_rotation is stored for evaluation only; the
                   // adaptation path never reads it.
    std::vector<DualViewSample> samples;

    std::uint64_t template_hash() const { return hand.content_hash(); }
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    // splitmix64 step, decorrelates per-sample streams from the master seed.
    std::uint64_t z = seed + salt * 0x9e3779b97f4a7c15ULL + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

inline Dataset generate_dataset(const SceneConfig& cfg) {
    cfg.validate();
    Dataset ds;
    ds.config = cfg;
    ds.hand = default_hand_template();

    std::mt19937_64 rig_rng(detail::mix_seed(cfg.seed, 0xA11CE));
    ds.rig = draw_rig(rig_rng);
    std::mt19937_64 corr_rng(detail::mix_seed(cfg.seed, 0xB0B));
    ds.corruption = draw_corruption(corr_rng, cfg.bias_range_v1_mm, cfg.bias_range_v2_mm, cfg.noise_sigma_mm,
                                    cfg.visibility_v1, cfg.visibility_v2, cfg.sigma_conf_mm,
                                    cfg.hard_probability, cfg.hard_noise_multiplier);

    ds.samples.reserve(cfg.count);
    for (std::uint64_t i = 0; i < cfg.count; ++i) {
        const std::uint64_t sample_seed = detail::mix_seed(cfg.seed, 2 + i);
        std::mt19937_64 rng(sample_seed);
        const JointSet pose = sample_pose(ds.hand, rng, cfg.pose);
        DualViewSample s = make_sample(pose, ds.rig, ds.corruption, i, rng);
        s.seed = sample_seed;
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// On-disk container.
//
// Layout: 8-byte magic, semantic version string, a little-endian binary
// header (corruption model, rig, template, config), per-sample records, and
// a trailing FNV-1a 64 checksum over everything before it. Heatmaps are
// stored as their bump parameters (peak row/col/value); the dense 32x32 maps
// are regenerated on read, which reproduces them bit-exactly because the
// synthesis is deterministic.
// ---------------------------------------------------------------------------

namespace detail {

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void bytes(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        hash_.update(p, n);
    }
    template <typename T>
    void value(const T& v) {
        static_assert(std::is_trivially_copyable_v<T>);
        bytes(&v, sizeof(T));
    }
    void str(const std::string& s) {
        value<std::uint64_t>(s.size());
        bytes(s.data(), s.size());
    }
    void matrix(const double* p, std::size_t count) { bytes(p, count * sizeof(double)); }
    std::uint64_t digest() const { return hash_.digest(); }

private:
    std::ostream& out_;
    Fnv1a64 hash_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n))
            throw ChecksumError("dataset file truncated");
        hash_.update(p, n);
    }
    template <typename T>
    T value() {
        static_assert(std::is_trivially_copyable_v<T>);
        T v;
        bytes(&v, sizeof(T));
        return v;
    }
    std::string str(std::size_t max_len = 1 << 20) {
        const auto n = value<std::uint64_t>();
        if (n > max_len) throw ChecksumError("dataset file corrupt: oversized string");
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    std::uint64_t digest() const { return hash_.digest(); }

private:
    std::istream& in_;
    Fnv1a64 hash_;
};

inline void write_joint_set(Writer& w, const JointSet& j) { w.matrix(j.pts.data(), kNumJoints * 3); }

inline JointSet read_joint_set(Reader& r) {
    JointSet j;
    r.bytes(j.pts.data(), kNumJoints * 3 * sizeof(double));
    return j;
}

inline void write_rotation(Writer& w, const Rotation& r) { w.matrix(r.matrix().data(), 9); }

inline Rotation read_rotation(Reader& r) {
    Mat3 m;
    r.bytes(m.data(), 9 * sizeof(double));
    return Rotation::from_matrix(m);
}

inline void write_heat_stack(Writer& w, const HeatmapStack& h) {
    for (int j = 0; j < kNumJoints; ++j) {
        w.value(h.map(j).peak_row);
        w.value(h.map(j).peak_col);
        w.value(h.map(j).peak_value);
    }
}

inline HeatmapStack read_heat_stack(Reader& r) {
    HeatmapStack h;
    for (int j = 0; j < kNumJoints; ++j) {
        const auto row = r.value<std::uint8_t>();
        const auto col = r.value<std::uint8_t>();
        const auto peak = r.value<float>();
        if (row >= kHeatmapSize || col >= kHeatmapSize || !(peak >= 0.0f && peak <= 1.0f))
            throw ChecksumError("dataset file corrupt: heatmap record out of range");
        h.map(j) = synthesize_bump(row, col, static_cast<double>(peak));
    }
    return h;
}

}  // namespace detail

inline void write_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open dataset file for writing: " + path);
    detail::Writer w(out);

    w.bytes(kDatasetMagic, sizeof(kDatasetMagic));
    w.str(kDatasetFormatVersion);

    const SceneConfig& c = ds.config;
    w.value(c.seed);
    w.value(c.count);
    w.value(c.bias_range_v1_mm);
    w.value(c.bias_range_v2_mm);
    w.value(c.noise_sigma_mm);
    w.value(c.visibility_v1);
    w.value(c.visibility_v2);
    w.value(c.sigma_conf_mm);
    w.value(c.hard_probability);
    w.value(c.hard_noise_multiplier);
    w.value(c.pose.jitter_deg);
    w.value(c.pose.translation_mm);
    w.value<std::uint8_t>(c.pose.random_global_rotation ? 1 : 0);

    w.value(ds.template_hash());
    detail::write_joint_set(w, ds.hand.joints);
    for (const Bone& b : ds.hand.bones) {
        w.value<std::int32_t>(b.parent);
        w.value<std::int32_t>(b.child);
    }

    detail::write_joint_set(w, JointSet{ds.corruption.bias[0]});
    detail::write_joint_set(w, JointSet{ds.corruption.bias[1]});
    w.value(ds.corruption.noise_sigma_mm);
    w.value(ds.corruption.visibility[0]);
    w.value(ds.corruption.visibility[1]);
    w.value(ds.corruption.sigma_conf_mm);
    w.value(ds.corruption.hard_probability);
    w.value(ds.corruption.hard_noise_multiplier);

    detail::write_rotation(w, ds.rig.world_to_v1);
    w.matrix(ds.rig.v1_offset_mm.data(), 3);
    detail::write_rotation(w, ds.rig.gt_rotation);
    w.matrix(ds.rig.v2_wrist_offset_mm.data(), 3);

    w.value<std::uint64_t>(ds.samples.size());
    for (const DualViewSample& s : ds.samples) {
        w.value(s.id);
        w.value(s.seed);
        for (int v = 0; v < 2; ++v) detail::write_joint_set(w, s.gt[static_cast<std::size_t>(v)]);
        for (int v = 0; v < 2; ++v) detail::write_joint_set(w, s.raw[static_cast<std::size_t>(v)]);
        for (int v = 0; v < 2; ++v) detail::write_heat_stack(w, s.heat[static_cast<std::size_t>(v)]);
    }

    const std::uint64_t digest = w.digest();
    out.write(reinterpret_cast<const char*>(&digest), sizeof(digest));
    if (!out) throw IoError("write failure on dataset file: " + path);
}

inline Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset file: " + path);
    detail::Reader r(in);

    char magic[sizeof(kDatasetMagic)];
    r.bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kDatasetMagic, sizeof(magic)) != 0)
        throw FormatVersionError("not a dataset file (bad magic): " + path);
    const std::string version = r.str(64);
    if (version != kDatasetFormatVersion)
        throw FormatVersionError("unsupported dataset format version " + version + " (expected " +
                                 kDatasetFormatVersion + ")");

    Dataset ds;
    SceneConfig& c = ds.config;
    c.seed = r.value<std::uint64_t>();
    c.count = r.value<std::uint64_t>();
    c.bias_range_v1_mm = r.value<double>();
    c.bias_range_v2_mm = r.value<double>();
    c.noise_sigma_mm = r.value<double>();
    c.visibility_v1 = r.value<double>();
    c.visibility_v2 = r.value<double>();
    c.sigma_conf_mm = r.value<double>();
    c.hard_probability = r.value<double>();
    c.hard_noise_multiplier = r.value<double>();
    c.pose.jitter_deg = r.value<double>();
    c.pose.translation_mm = r.value<double>();
    c.pose.random_global_rotation = r.value<std::uint8_t>() != 0;

    const std::uint64_t stored_template_hash = r.value<std::uint64_t>();
    ds.hand.joints = detail::read_joint_set(r);
    for (Bone& b : ds.hand.bones) {
        b.parent = r.value<std::int32_t>();
        b.child = r.value<std::int32_t>();
        if (b.parent < 0 || b.parent >= kNumJoints || b.child <= 0 || b.child >= kNumJoints)
            throw ChecksumError("dataset file corrupt: bone index out of range");
    }
    if (ds.template_hash() != stored_template_hash)
        throw ChecksumError("dataset file corrupt: template hash mismatch");

    ds.corruption.bias[0] = detail::read_joint_set(r).pts;
    ds.corruption.bias[1] = detail::read_joint_set(r).pts;
    ds.corruption.noise_sigma_mm = r.value<double>();
    ds.corruption.visibility[0] = r.value<double>();
    ds.corruption.visibility[1] = r.value<double>();
    ds.corruption.sigma_conf_mm = r.value<double>();
    ds.corruption.hard_probability = r.value<double>();
    ds.corruption.hard_noise_multiplier = r.value<double>();

    ds.rig.world_to_v1 = detail::read_rotation(r);
    r.bytes(ds.rig.v1_offset_mm.data(), 3 * sizeof(double));
    ds.rig.gt_rotation = detail::read_rotation(r);
    r.bytes(ds.rig.v2_wrist_offset_mm.data(), 3 * sizeof(double));

    const auto n = r.value<std::uint64_t>();
    if (n != c.count) throw ChecksumError("dataset file corrupt: sample count mismatch");
    ds.samples.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        DualViewSample s;
        s.id = r.value<std::uint64_t>();
        s.seed = r.value<std::uint64_t>();
        for (int v = 0; v < 2; ++v) s.gt[static_cast<std::size_t>(v)] = detail::read_joint_set(r);
        for (int v = 0; v < 2; ++v) s.raw[static_cast<std::size_t>(v)] = detail::read_joint_set(r);
        for (int v = 0; v < 2; ++v) s.heat[static_cast<std::size_t>(v)] = detail::read_heat_stack(r);
        ds.samples.push_back(std::move(s));
    }

    const std::uint64_t computed = r.digest();
    std::uint64_t stored = 0;
    in.read(reinterpret_cast<char*>(&stored), sizeof(stored));
    if (in.gcount() != sizeof(stored)) throw ChecksumError("dataset file truncated (missing checksum)");
    if (stored != computed) throw ChecksumError("dataset checksum mismatch");
    return ds;
}

}  // namespace duoadapt
