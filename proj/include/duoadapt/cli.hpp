#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "duoadapt/adapt.hpp"
#include "duoadapt/config.hpp"
#include "duoadapt/dataset.hpp"
#include "duoadapt/error.hpp"
#include "duoadapt/evaluate.hpp"
#include "duoadapt/run_io.hpp"

namespace duoadapt::cli {

namespace fs = std::filesystem;

// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
// failure, 1 anything else.
inline constexpr int kExitOk = 0;
inline constexpr int kExitOther = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

template <typename Fn>
int run_guarded(Fn&& fn) {
    try {
        fn();
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InvalidParameterError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const FormatVersionError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const ChecksumError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const IncompatibleCheckpointError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const InvalidInputError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const InitializationError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const DegenerateConfigError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const DegenerateMeanError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitOther;
    }
}

inline std::string resolve_out_dir(const std::string& out_flag, const std::string& command) {
    if (!out_flag.empty()) return out_flag;
    if (const char* root = std::getenv("DUOADAPT_OUT_ROOT"); root && *root)
        return (fs::path(root) / command).string();
    throw ConfigError("--out is required (or set DUOADAPT_OUT_ROOT)");
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// synth --config F --out D [--force]
// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string config_path;
    std::string out_dir;
    bool force = false;
};

inline int cmd_synth(const SynthArgs& args) {
    return run_guarded([&] {
        const SceneConfig cfg = load_scene_config(args.config_path);
        const std::string out = resolve_out_dir(args.out_dir, "synth");
        ensure_dir(out);
        const std::string data_path = (fs::path(out) / "dataset.bin").string();
        if (fs::exists(data_path) && !args.force)
            throw IoError("refusing to overwrite " + data_path + " (pass --force)");

        const Dataset ds = generate_dataset(cfg);
        write_dataset(ds, data_path);
        const std::uint64_t data_hash = hash_file(data_path);

        json manifest = make_manifest("synth", scene_config_to_json(cfg), data_path, data_hash,
                                      {{"dataset", data_path}});
        manifest["dataset_header"] = json{{"format_version", kDatasetFormatVersion},
                                          {"sample_count", ds.samples.size()},
                                          {"template_hash", hash_hex(ds.template_hash())},
                                          {"corruption", scene_config_to_json(cfg).at("corruption")},
                                          {"gt_rotation", detail::matrix3_to_json(ds.rig.gt_rotation.matrix())}};
        write_manifest(manifest, (fs::path(out) / "manifest.json").string());
        std::cout << "wrote " << ds.samples.size() << " samples to " << data_path << "\n";
    });
}

// ---------------------------------------------------------------------------
// adapt --data F --config F --out D [--ablate MODE]
// ---------------------------------------------------------------------------

struct AdaptArgs {
    std::string data_path;
    std::string config_path;
    std::string out_dir;
    std::string ablate;  // "", "none", "abm-only", "rgr-only", "self-distill"
    bool quiet = false;
};

inline int cmd_adapt(const AdaptArgs& args) {
    return run_guarded([&] {
        AdaptationConfig cfg = load_adapt_config(args.config_path);
        if (!args.ablate.empty()) cfg.mode = pseudo_mode_from_string(args.ablate);
        const std::string out = resolve_out_dir(args.out_dir, "adapt");
        ensure_dir(out);

        const Dataset ds = read_dataset(args.data_path);
        const std::uint64_t data_hash = hash_file(args.data_path);
        const Rotation gt_rotation = ds.rig.gt_rotation;  // logging only

        if (!args.quiet)
            std::cerr << "adapting (" << pseudo_mode_name(cfg.mode) << ") on " << ds.samples.size()
                      << " samples, " << cfg.epochs << " epochs\n";
        const EstimatorParams theta0;  // identity correction head
        AdaptState st = init_adapt_state(theta0, ds, cfg);
        const std::uint64_t batches_per_epoch =
            (ds.samples.size() + static_cast<std::size_t>(cfg.batch_size) - 1) /
            static_cast<std::size_t>(cfg.batch_size);
        for (int e = 0; e < cfg.epochs; ++e) {
            run_adaptation(st, ds, cfg, static_cast<std::uint64_t>(e + 1) * batches_per_epoch, &gt_rotation);
            if (!args.quiet && !st.events.empty())
                std::cerr << "epoch " << e << "  loss " << st.events.back().loss_mm2 << " mm^2\n";
        }

        const std::string ckpt_path = (fs::path(out) / "checkpoint.json").string();
        const std::string events_path = (fs::path(out) / "events.jsonl").string();
        save_checkpoint(make_checkpoint(st, cfg, ds.template_hash(), data_hash), ckpt_path);
        write_event_log(st.events, events_path);
        const json manifest =
            make_manifest("adapt", adapt_config_to_json(cfg), args.data_path, data_hash,
                          {{"checkpoint", ckpt_path}, {"events", events_path}});
        write_manifest(manifest, (fs::path(out) / "manifest.json").string());
        std::cout << "checkpoint written to " << ckpt_path << "\n";
    });
}

// ---------------------------------------------------------------------------
// eval --data F --ckpt F --out D [--sweep-n LIST]
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string data_path;
    std::string ckpt_path;
    std::string out_dir;
    std::vector<std::uint64_t> sweep_n;
    bool quiet = false;
};

inline json eval_pair_to_json(const MetricSummary& m) {
    return json{{"mono_m_mm", m.mono_m_mm},
                {"dual_m_mm", m.dual_m_mm},
                {"mpjpe_v1_mm", m.mpjpe_v1_mm},
                {"mpjpe_v2_mm", m.mpjpe_v2_mm}};
}

inline int cmd_eval(const EvalArgs& args) {
    return run_guarded([&] {
        const std::string out = resolve_out_dir(args.out_dir, "eval");
        ensure_dir(out);
        const Dataset ds = read_dataset(args.data_path);
        const std::uint64_t data_hash = hash_file(args.data_path);
        const Checkpoint ckpt = load_checkpoint(args.ckpt_path);
        if (ckpt.template_hash != ds.template_hash())
            throw IncompatibleCheckpointError("checkpoint/dataset template-hash mismatch");

        const Rotation r_final = Rotation::from_matrix(ckpt.rotation);
        const Rotation r_init = Rotation::from_matrix(ckpt.rotation_init);
        const MetricSummary base = evaluate_metrics(ds, ckpt.theta_init, r_init);
        const MetricSummary adapted = evaluate_metrics(ds, ckpt.theta, r_final);
        // Pseudo-label analysis runs at the pre-adaptation state, where the
        // prediction-error spread the buckets need actually exists.
        const ComplementarityTable table = complementarity_analysis(ds, ckpt.theta_init, r_init, ckpt.config);

        EvalReport rep;
        rep.mono_m_mm = adapted.mono_m_mm;
        rep.dual_m_mm = adapted.dual_m_mm;
        rep.mpjpe_v1_mm = adapted.mpjpe_v1_mm;
        rep.mpjpe_v2_mm = adapted.mpjpe_v2_mm;
        rep.sample_count = ds.samples.size();
        rep.complementarity = table;
        if (rep.dual_m_mm > std::max(rep.mpjpe_v1_mm, rep.mpjpe_v2_mm))
            rep.warnings.push_back("Dual-M exceeds both per-view MPJPEs; rotation estimate is likely poor");
        if (ckpt.dataset_hash != data_hash)
            rep.warnings.push_back("evaluating on a different dataset file than the adaptation used");

        json rj = report_to_json(rep);
        rj["format"] = kReportFormatName;
        rj["version"] = kArtifactVersion;
        rj["dataset"] = json{{"path", args.data_path}, {"hash", hash_hex(data_hash)}};
        rj["baseline"] = eval_pair_to_json(base);
        rj["adapted"] = eval_pair_to_json(adapted);
        rj["improvement_pct"] =
            json{{"mono_m", base.mono_m_mm > 0.0 ? 100.0 * (base.mono_m_mm - adapted.mono_m_mm) / base.mono_m_mm
                                                 : 0.0},
                 {"dual_m", base.dual_m_mm > 0.0 ? 100.0 * (base.dual_m_mm - adapted.dual_m_mm) / base.dual_m_mm
                                                 : 0.0}};

        // Optional Fig.-6-style sweep: re-adapt on the first n pairs, score on
        // the full set.
        std::string sweep_path;
        if (!args.sweep_n.empty()) {
            std::ostringstream csv;
            csv << "n,mono_m_mm,dual_m_mm\n";
            json sweep = json::array();
            for (std::uint64_t n : args.sweep_n) {
                if (n == 0 || n > ds.samples.size())
                    throw ConfigError("sweep size " + std::to_string(n) + " outside [1, dataset size]");
                Dataset subset;
                subset.config = ds.config;
                subset.hand = ds.hand;
                subset.corruption = ds.corruption;
                subset.rig = ds.rig;
                subset.samples.assign(ds.samples.begin(), ds.samples.begin() + static_cast<long>(n));
                AdaptationConfig sweep_cfg = ckpt.config;
                sweep_cfg.init_pairs = std::min<std::uint64_t>(sweep_cfg.init_pairs, n);
                if (!args.quiet) std::cerr << "sweep: adapting on " << n << " pairs\n";
                const AdaptState st = adapt(ckpt.theta_init, subset, sweep_cfg);
                const MetricSummary m = evaluate_metrics(ds, st.theta, st.rotation);
                csv << n << "," << m.mono_m_mm << "," << m.dual_m_mm << "\n";
                sweep.push_back(json{{"n", n}, {"mono_m_mm", m.mono_m_mm}, {"dual_m_mm", m.dual_m_mm}});
            }
            sweep_path = (fs::path(out) / "sweep.csv").string();
            detail::write_text_file(sweep_path, csv.str());
            rj["sweep"] = sweep;
        }

        const std::string json_path = (fs::path(out) / "report.json").string();
        const std::string text_path = (fs::path(out) / "report.txt").string();
        detail::write_text_file(json_path, rj.dump(2) + "\n");
        std::ostringstream text;
        text << report_to_text(rep, "evaluation: " + args.data_path);
        text << "\nbaseline  Mono-M " << base.mono_m_mm << "  Dual-M " << base.dual_m_mm << "\n";
        text << "adapted   Mono-M " << adapted.mono_m_mm << "  Dual-M " << adapted.dual_m_mm << "\n";
        detail::write_text_file(text_path, text.str());

        std::vector<std::pair<std::string, std::string>> outputs = {{"report_json", json_path},
                                                                    {"report_text", text_path}};
        if (!sweep_path.empty()) outputs.emplace_back("sweep_csv", sweep_path);
        write_manifest(make_manifest("eval", json{{"checkpoint", args.ckpt_path}}, args.data_path, data_hash,
                                     outputs),
                       (fs::path(out) / "manifest.json").string());
        std::cout << text.str();
    });
}

// ---------------------------------------------------------------------------
// report RUN_DIR... [--out D]
// ---------------------------------------------------------------------------

struct ReportArgs {
    std::vector<std::string> run_dirs;
    std::string out_dir;  // optional; stdout only when empty
};

inline int cmd_report(const ReportArgs& args) {
    return run_guarded([&] {
        if (args.run_dirs.empty()) throw ConfigError("report needs at least one run directory");
        struct Row {
            std::string name;
            json report;
        };
        std::vector<Row> rows;
        std::string dataset_hash;
        for (const std::string& dir : args.run_dirs) {
            const std::string path = (fs::path(dir) / "report.json").string();
            std::ifstream in(path);
            if (!in) throw IoError("no report.json in run dir " + dir + " (run `eval` first)");
            json r;
            try {
                r = json::parse(in);
            } catch (const json::parse_error& e) {
                throw FormatVersionError(path + " is not valid JSON: " + e.what());
            }
            if (detail::get_or<std::string>(r, "format", "", "") != kReportFormatName)
                throw FormatVersionError(path + " is not an eval report");
            const std::string h = r.at("dataset").at("hash").get<std::string>();
            if (dataset_hash.empty())
                dataset_hash = h;
            else if (dataset_hash != h)
                throw InvalidInputError("runs evaluate different datasets; refusing to compare (" + dir + ")");
            rows.push_back({fs::path(dir).filename().string(), std::move(r)});
        }

        std::ostringstream table;
        table << std::fixed << std::setprecision(2);
        table << std::left << std::setw(24) << "run" << std::right << std::setw(12) << "Mono-M base"
              << std::setw(12) << "Mono-M" << std::setw(9) << "gain%" << std::setw(12) << "Dual-M base"
              << std::setw(12) << "Dual-M" << std::setw(9) << "gain%" << "\n";
        json machine = json::array();
        for (const Row& row : rows) {
            const json& b = row.report.at("baseline");
            const json& a = row.report.at("adapted");
            const json& imp = row.report.at("improvement_pct");
            table << std::left << std::setw(24) << row.name << std::right << std::setw(12)
                  << b.at("mono_m_mm").get<double>() << std::setw(12) << a.at("mono_m_mm").get<double>()
                  << std::setw(9) << imp.at("mono_m").get<double>() << std::setw(12)
                  << b.at("dual_m_mm").get<double>() << std::setw(12) << a.at("dual_m_mm").get<double>()
                  << std::setw(9) << imp.at("dual_m").get<double>() << "\n";
            machine.push_back(json{{"run", row.name},
                                   {"baseline", b},
                                   {"adapted", a},
                                   {"improvement_pct", imp}});
        }
        std::cout << table.str();
        if (!args.out_dir.empty()) {
            ensure_dir(args.out_dir);
            const json cj = json{{"format", "duoadapt-comparison"},
                                 {"version", kArtifactVersion},
                                 {"dataset_hash", dataset_hash},
                                 {"runs", machine}};
            detail::write_text_file((fs::path(args.out_dir) / "comparison.json").string(), cj.dump(2) + "\n");
            detail::write_text_file((fs::path(args.out_dir) / "comparison.txt").string(), table.str());
        }
    });
}

}  // namespace duoadapt::cli
