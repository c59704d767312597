#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "duoadapt/adapt.hpp"
#include "duoadapt/run_io.hpp"
#include "test_helpers.hpp"

using namespace duoadapt;
using testutil::TempDir;
using Catch::Approx;

namespace {

Dataset clean_dataset(std::uint64_t seed, std::uint64_t count) {
    SceneConfig cfg;
    cfg.seed = seed;
    cfg.count = count;
    cfg.bias_range_v1_mm = 0.0;
    cfg.bias_range_v2_mm = 0.0;
    cfg.noise_sigma_mm = 0.0;
    return generate_dataset(cfg);
}

Dataset biased_dataset(std::uint64_t seed, std::uint64_t count) {
    SceneConfig cfg;
    cfg.seed = seed;
    cfg.count = count;
    return generate_dataset(cfg);
}

AdaptationConfig small_config(PseudoMode mode) {
    AdaptationConfig cfg;
    cfg.mode = mode;
    cfg.init_pairs = 16;
    cfg.batch_size = 8;
    cfg.epochs = 2;
    return cfg;
}

bool params_equal(const EstimatorParams& a, const EstimatorParams& b) {
    for (int v = 0; v < 2; ++v) {
        if ((a.view[v].gain - b.view[v].gain).cwiseAbs().maxCoeff() != 0.0) return false;
        if ((a.view[v].offset - b.view[v].offset).cwiseAbs().maxCoeff() != 0.0) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("initialize_rotation recovers the rig exactly without corruption") {
    const Dataset ds = clean_dataset(31, 64);
    std::uint64_t skipped = 123;
    const Rotation r = initialize_rotation(EstimatorParams{}, ds, 64, &skipped);
    REQUIRE(skipped == 0);
    REQUIRE(geodesic_angle(r, ds.rig.gt_rotation) < 1e-9);
}

TEST_CASE("initialize_rotation fails when every pair is degenerate") {
    Dataset ds = clean_dataset(32, 4);
    for (DualViewSample& s : ds.samples) {
        for (int v = 0; v < 2; ++v)
            for (int j = 0; j < kNumJoints; ++j) s.raw[v].pts.row(j) << static_cast<double>(j), 0.0, 0.0;
    }
    REQUIRE_THROWS_AS(initialize_rotation(EstimatorParams{}, ds, 4), InitializationError);
    Dataset empty;
    REQUIRE_THROWS_AS(initialize_rotation(EstimatorParams{}, empty, 4), InitializationError);
}

TEST_CASE("adaptation on an uncorrupted dataset is a no-op") {
    const Dataset ds = clean_dataset(33, 32);
    const AdaptationConfig cfg = small_config(PseudoMode::kFull);
    const AdaptState st = adapt(EstimatorParams{}, ds, cfg);
    REQUIRE_FALSE(st.events.empty());
    REQUIRE(st.events.front().loss_mm2 < 1e-6);
    for (int v = 0; v < 2; ++v) {
        REQUIRE((st.theta.view[v].gain - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-6);
        REQUIRE(st.theta.view[v].offset.cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("degenerate knobs freeze the loop") {
    const Dataset ds = biased_dataset(34, 32);
    AdaptationConfig cfg = small_config(PseudoMode::kSelfDistill);
    cfg.eta_theta = 0.0;   // momentum copy tracks theta exactly
    cfg.eta_rotation = 1.0;  // rotation never moves
    cfg.learning_rate = 0.0;
    const AdaptState st = adapt(EstimatorParams{}, ds, cfg);
    REQUIRE(params_equal(st.momentum.params, st.theta));
    REQUIRE(geodesic_angle(st.rotation, st.rotation_init) < 1e-12);
    REQUIRE(params_equal(st.theta, st.theta_init));
}

TEST_CASE("self-distillation closes the student-teacher gap") {
    const Dataset ds = biased_dataset(35, 64);
    AdaptationConfig cfg = small_config(PseudoMode::kSelfDistill);
    cfg.epochs = 40;
    cfg.batch_size = 32;
    cfg.learning_rate = 0.02;

    AdaptState st = init_adapt_state(EstimatorParams{}, ds, cfg);
    // open a gap: the student starts away from the momentum copy (non-uniform
    // rows, a constant shift would vanish under wrist alignment)
    st.theta.view[0].offset.row(5) += Eigen::RowVector3d(10.0, -6.0, 4.0);
    st.theta.view[0].offset.row(12) += Eigen::RowVector3d(-3.0, 8.0, 2.0);
    st.theta.view[1].offset.row(9) += Eigen::RowVector3d(5.0, 5.0, -7.0);

    const std::uint64_t batches = (ds.samples.size() + 31) / 32;
    run_adaptation(st, ds, cfg, batches * static_cast<std::uint64_t>(cfg.epochs));
    REQUIRE(st.events.front().loss_mm2 > 1.0);
    REQUIRE(st.events.back().loss_mm2 < 0.01 * st.events.front().loss_mm2);
}

TEST_CASE("identical seeds give bit-identical event logs") {
    const Dataset ds = biased_dataset(36, 16);
    const AdaptationConfig cfg = small_config(PseudoMode::kFull);
    const AdaptState a = adapt(EstimatorParams{}, ds, cfg, &ds.rig.gt_rotation);
    const AdaptState b = adapt(EstimatorParams{}, ds, cfg, &ds.rig.gt_rotation);
    REQUIRE(events_to_jsonl(a.events) == events_to_jsonl(b.events));
}

TEST_CASE("rotation tracking converges monotonically on clean data") {
    const Dataset ds = clean_dataset(37, 160);
    AdaptationConfig cfg;
    cfg.mode = PseudoMode::kAbmOnly;
    cfg.learning_rate = 0.0;  // isolate the rotation update
    cfg.eta_rotation = 0.99;
    cfg.batch_size = 16;
    cfg.epochs = 30;
    cfg.init_pairs = 160;

    std::mt19937_64 rng(38);
    Vec3 axis(1.0, 0.4, -0.2);
    const Rotation perturbed =
        Rotation::from_matrix(Rotation::from_axis_angle(axis, deg_to_rad(5.0)).matrix() *
                              ds.rig.gt_rotation.matrix());
    AdaptState st = init_adapt_state(EstimatorParams{}, ds, cfg, &perturbed);
    REQUIRE(geodesic_angle(st.rotation, ds.rig.gt_rotation) == Approx(deg_to_rad(5.0)).margin(1e-9));

    const std::uint64_t batches = (ds.samples.size() + 15) / 16;
    double prev = geodesic_angle(st.rotation, ds.rig.gt_rotation);
    for (int e = 0; e < cfg.epochs; ++e) {
        run_adaptation(st, ds, cfg, batches * static_cast<std::uint64_t>(e + 1));
        const double now = geodesic_angle(st.rotation, ds.rig.gt_rotation);
        REQUIRE(now <= prev + 1e-12);
        prev = now;
    }
    REQUIRE(prev < deg_to_rad(0.5));
}

TEST_CASE("the adaptation path never reads the stored ground-truth rotation") {
    Dataset ds = biased_dataset(39, 16);
    const AdaptationConfig cfg = small_config(PseudoMode::kFull);
    const AdaptState a = adapt(EstimatorParams{}, ds, cfg);
    ds.rig.gt_rotation = testutil::rot_z(123.0);  // sabotage the eval-only field
    const AdaptState b = adapt(EstimatorParams{}, ds, cfg);
    REQUIRE(params_equal(a.theta, b.theta));
    REQUIRE((a.rotation.matrix() - b.rotation.matrix()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoint round-trip and split-run equivalence") {
    const Dataset ds = biased_dataset(40, 16);
    AdaptationConfig cfg = small_config(PseudoMode::kFull);
    cfg.epochs = 6;  // 12 iterations at batch_size 8

    SECTION("save/load restores the exact state") {
        TempDir tmp("ckpt");
        AdaptState st = init_adapt_state(EstimatorParams{}, ds, cfg);
        run_adaptation(st, ds, cfg, 4);
        const std::string path = (tmp.path() / "c.json").string();
        save_checkpoint(make_checkpoint(st, cfg, ds.template_hash(), 0x1234), path);
        const Checkpoint back = load_checkpoint(path);
        const AdaptState restored = resume_from_checkpoint(back, cfg, ds.template_hash());
        REQUIRE(params_equal(restored.theta, st.theta));
        REQUIRE(params_equal(restored.momentum.params, st.momentum.params));
        REQUIRE((restored.rotation.matrix() - st.rotation.matrix()).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE(restored.iterations == st.iterations);
        REQUIRE(restored.momentum.steps == st.momentum.steps);
    }

    SECTION("run 12 equals run 6 + resume + 6, bit for bit") {
        AdaptState full = init_adapt_state(EstimatorParams{}, ds, cfg);
        run_adaptation(full, ds, cfg, 12);

        TempDir tmp("ckpt_split");
        AdaptState half = init_adapt_state(EstimatorParams{}, ds, cfg);
        run_adaptation(half, ds, cfg, 6);
        const std::string path = (tmp.path() / "half.json").string();
        save_checkpoint(make_checkpoint(half, cfg, ds.template_hash(), 7), path);
        AdaptState resumed = resume_from_checkpoint(load_checkpoint(path), cfg, ds.template_hash());
        run_adaptation(resumed, ds, cfg, 12);

        REQUIRE(params_equal(resumed.theta, full.theta));
        REQUIRE(params_equal(resumed.momentum.params, full.momentum.params));
        REQUIRE((resumed.rotation.matrix() - full.rotation.matrix()).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE(resumed.iterations == full.iterations);
    }

    SECTION("resume under a different config is rejected") {
        TempDir tmp("ckpt_cfg");
        AdaptState st = init_adapt_state(EstimatorParams{}, ds, cfg);
        run_adaptation(st, ds, cfg, 2);
        const std::string path = (tmp.path() / "c.json").string();
        save_checkpoint(make_checkpoint(st, cfg, ds.template_hash(), 7), path);
        AdaptationConfig altered = cfg;
        altered.alpha = 0.5;
        REQUIRE_THROWS_AS(resume_from_checkpoint(load_checkpoint(path), altered, ds.template_hash()),
                          IncompatibleCheckpointError);
        REQUIRE_THROWS_AS(resume_from_checkpoint(load_checkpoint(path), cfg, 0xdead),
                          IncompatibleCheckpointError);
    }
}

TEST_CASE("an exploding step reports a numerical failure") {
    const Dataset ds = biased_dataset(41, 16);
    AdaptationConfig cfg = small_config(PseudoMode::kSelfDistill);
    cfg.learning_rate = 1e30;
    cfg.epochs = 4;

    AdaptState st = init_adapt_state(EstimatorParams{}, ds, cfg);
    st.theta.view[0].offset.row(5) += Eigen::RowVector3d(10.0, 0.0, 0.0);  // nonzero gradient to blow up
    REQUIRE_THROWS_AS(run_adaptation(st, ds, cfg, 8), NumericalError);
}
