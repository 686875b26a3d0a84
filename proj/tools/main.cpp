#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bfc/pipelines.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<std::string> out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("-c,--config", opts.config_path, "run configuration file")->required();
    cmd->add_option("-s,--seed", [&opts](const CLI::results_t& res) {
        opts.seed = std::stoull(res[0]);
        return true;
    }, "seed override");
    cmd->add_option("-o,--out", [&opts](const CLI::results_t& res) {
        opts.out_dir = res[0];
        return true;
    }, "output directory override (default: config, then $BFCSIM_OUTPUT_DIR)");
}

bfc::RunConfig load(const CommonOpts& opts) {
    return bfc::RunConfig::load(opts.config_path, opts.seed, opts.out_dir);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bfcsim: cavity-enhanced SPDC biphoton frequency comb toolkit"};
    app.require_subcommand(1);

    CommonOpts synth_cross_opts, synth_auto_opts, fit_opts, mode_opts, tomo_opts, run_opts,
        table_opts, regime_opts;
    std::string fit_hist, fit_model, mode_hist, verify_dir;

    CLI::App* synth_cross = app.add_subcommand("synth-cross", "synthesize a cross-correlation histogram");
    add_common(synth_cross, synth_cross_opts);

    CLI::App* synth_auto = app.add_subcommand("synth-auto", "synthesize an autocorrelation histogram");
    add_common(synth_auto, synth_auto_opts);

    CLI::App* fit_cmd = app.add_subcommand("fit", "fit a histogram file to a correlation model");
    add_common(fit_cmd, fit_opts);
    fit_cmd->add_option("--hist", fit_hist, "histogram CSV to fit")->required();
    fit_cmd->add_option("--model", fit_model,
                        "cross_single | cross_multi | cross_sum | auto_single");

    CLI::App* mode_cmd = app.add_subcommand(
        "mode-count", "integrate an autocorrelation histogram and estimate the mode number");
    add_common(mode_cmd, mode_opts);
    mode_cmd->add_option("--hist", mode_hist, "existing auto histogram (default: synthesize)");

    CLI::App* tomo_cmd =
        app.add_subcommand("tomo", "simulate tomography of the Sagnac state and reconstruct it");
    add_common(tomo_cmd, tomo_opts);

    CLI::App* table_cmd =
        app.add_subcommand("table-s1", "finesse / Q table from per-window FWHM values");
    add_common(table_cmd, table_opts);

    CommonOpts model_opts;
    std::string eval_model = "cross_sum";
    double eval_tau_min = -5e-9, eval_tau_max = 5e-9;
    int eval_points = 1001;
    CLI::App* model_cmd =
        app.add_subcommand("model-eval", "correlation model curve on a user-specified grid");
    add_common(model_cmd, model_opts);
    model_cmd->add_option("--model", eval_model,
                          "cross_sum | cross_single | cross_multi | g2_auto");
    model_cmd->add_option("--tau-min", eval_tau_min, "grid start, s");
    model_cmd->add_option("--tau-max", eval_tau_max, "grid end, s");
    model_cmd->add_option("--points", eval_points, "number of grid points");

    CLI::App* regime_cmd =
        app.add_subcommand("regime", "classify the pump regime from the squeezing parameter");
    add_common(regime_cmd, regime_opts);

    CLI::App* run_cmd = app.add_subcommand("run", "run the pipeline named in [run] pipeline");
    add_common(run_cmd, run_opts);

    CLI::App* verify_cmd =
        app.add_subcommand("verify", "re-check the hashes recorded in an output directory");
    verify_cmd->add_option("-d,--dir", verify_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        bfc::cli::RunOutcome outcome;
        if (synth_cross->parsed()) {
            outcome = bfc::cli::run_synth_cross(load(synth_cross_opts));
        } else if (synth_auto->parsed()) {
            outcome = bfc::cli::run_synth_auto(load(synth_auto_opts));
        } else if (fit_cmd->parsed()) {
            outcome = bfc::cli::run_fit_file(load(fit_opts), fit_hist, fit_model);
        } else if (mode_cmd->parsed()) {
            outcome = bfc::cli::run_mode_count(load(mode_opts), mode_hist);
        } else if (tomo_cmd->parsed()) {
            outcome = bfc::cli::run_tomography(load(tomo_opts));
        } else if (table_cmd->parsed()) {
            outcome = bfc::cli::run_table_s1(load(table_opts));
        } else if (model_cmd->parsed()) {
            outcome = bfc::cli::run_model_eval(load(model_opts), eval_model, eval_tau_min,
                                               eval_tau_max, eval_points);
        } else if (regime_cmd->parsed()) {
            outcome = bfc::cli::run_regime_report(load(regime_opts));
        } else if (run_cmd->parsed()) {
            outcome = bfc::cli::run_pipeline(load(run_opts));
        } else if (verify_cmd->parsed()) {
            return bfc::cli::verify_output_dir(verify_dir);
        }
        if (!outcome.summary_path.empty()) {
            std::printf("%s\n", outcome.summary_path.c_str());
        }
        return outcome.exit_code;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "bfcsim: %s\n", e.what());
        return 1;
    }
}
