// Command-line front end: dataset synthesis, dual-view adaptation runs,
// evaluation, and run comparison reports.

#include <CLI11.hpp>

#include "duoadapt/cli.hpp"
#include "duoadapt/version.hpp"

int main(int argc, char** argv) {
    CLI::App app{"duoadapt - unsupervised dual-view adaptation for 3D hand pose estimators"};
    app.set_version_flag("--version", duoadapt::kArtifactVersion);
    app.require_subcommand(1);

    duoadapt::cli::SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dual-view dataset");
    synth->add_option("--config", synth_args.config_path, "scene config file (JSON)")->required();
    synth->add_option("--out", synth_args.out_dir, "output directory (default: $DUOADAPT_OUT_ROOT/synth)");
    synth->add_flag("--force", synth_args.force, "overwrite an existing dataset");

    duoadapt::cli::AdaptArgs adapt_args;
    CLI::App* adapt = app.add_subcommand("adapt", "adapt the estimator to a dual-view dataset");
    adapt->add_option("--data", adapt_args.data_path, "dataset file")->required();
    adapt->add_option("--config", adapt_args.config_path, "adaptation config file (JSON)")->required();
    adapt->add_option("--out", adapt_args.out_dir, "output directory (default: $DUOADAPT_OUT_ROOT/adapt)");
    adapt->add_option("--ablate", adapt_args.ablate, "pseudo-label ablation: abm-only, rgr-only or none")
        ->check(CLI::IsMember({"abm-only", "rgr-only", "none", "self-distill"}));
    adapt->add_flag("--quiet", adapt_args.quiet, "suppress progress output");

    duoadapt::cli::EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint against a dataset");
    eval->add_option("--data", eval_args.data_path, "dataset file")->required();
    eval->add_option("--ckpt", eval_args.ckpt_path, "checkpoint file")->required();
    eval->add_option("--out", eval_args.out_dir, "output directory (default: $DUOADAPT_OUT_ROOT/eval)");
    eval->add_option("--sweep-n", eval_args.sweep_n,
                     "adaptation-set sizes for the convergence sweep (comma separated)")
        ->delimiter(',');
    eval->add_flag("--quiet", eval_args.quiet, "suppress progress output");

    duoadapt::cli::ReportArgs report_args;
    CLI::App* report = app.add_subcommand("report", "side-by-side comparison of evaluated runs");
    report->add_option("run_dirs", report_args.run_dirs, "run directories containing report.json")
        ->required();
    report->add_option("--out", report_args.out_dir, "also write comparison.{json,txt} here");

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed()) return duoadapt::cli::cmd_synth(synth_args);
    if (adapt->parsed()) return duoadapt::cli::cmd_adapt(adapt_args);
    if (eval->parsed()) return duoadapt::cli::cmd_eval(eval_args);
    if (report->parsed()) return duoadapt::cli::cmd_report(report_args);
    return duoadapt::cli::kExitOther;
}
