#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bfc/config.hpp"
#include "bfc/fitting.hpp"
#include "bfc/tomography.hpp"

namespace bfc::cli {

inline constexpr int kSummarySchemaVersion = 1;
inline constexpr const char* kToolName = "bfcsim";
inline constexpr const char* kToolVersion = "0.1.0";

uint64_t fnv1a64(const std::string& bytes);
uint64_t fnv1a64_file(const std::string& path);
std::string hex64(uint64_t v);

struct RunOutcome {
    int exit_code = 0;
    std::string summary_path;
};

// Executes the configured pipeline, writes all artifacts plus summary.json
// into the output directory.
RunOutcome run_pipeline(const RunConfig& run);

// Individual pipelines (also reachable through dedicated subcommands).
RunOutcome run_synth_cross(const RunConfig& run);
RunOutcome run_synth_auto(const RunConfig& run);
RunOutcome run_cross_fit(const RunConfig& run);
RunOutcome run_fit_file(const RunConfig& run, const std::string& histogram_path,
                        const std::string& model_name);
RunOutcome run_mode_count(const RunConfig& run, const std::string& histogram_path = "");
RunOutcome run_tomography(const RunConfig& run);
RunOutcome run_regime_report(const RunConfig& run);
RunOutcome run_table_s1(const RunConfig& run);

// (tau, value) CSV of a correlation model on a user-specified grid.
RunOutcome run_model_eval(const RunConfig& run, const std::string& model_name, double tau_min,
                          double tau_max, int points);

// Re-checks every file hash recorded in <dir>/summary.json plus the summary's
// own payload hash; returns 0 when everything matches.
int verify_output_dir(const std::string& dir);

// Plot-ready CSV emitters ('histogram', 'fit-overlay', 'density-matrix').
void emit_plotdata(const std::string& kind, const Histogram& hist,
                   const std::vector<double>* overlay, const DensityMatrix* rho,
                   const std::string& path);

}  // namespace bfc::cli
