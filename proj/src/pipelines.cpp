#include "bfc/pipelines.hpp"

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bfc/rng.hpp"

namespace bfc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

uint64_t fnv1a64(const std::string& bytes) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open for hashing: " + path);
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return fnv1a64(ss.str());
}

std::string hex64(uint64_t v) {
    char buf[20];
    snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

namespace {

std::string timestamp_utc() {
    char buf[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Accumulates artifacts and results, then writes summary.json whose payload
// (everything except the timestamp) is hashed for later verification.
class Summary {
  public:
    Summary(const RunConfig& run, const std::string& command) : run_(run) {
        payload_["schema_version"] = kSummarySchemaVersion;
        payload_["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
        payload_["command"] = command;
        payload_["config_hash"] = hex64(fnv1a64(run.file.canonical()));
        payload_["seed"] = run.seed;
        payload_["rng"] = kRngName;
        payload_["outputs"] = json::array();
        fs::create_directories(run.output_dir);
    }

    const std::string& dir() const { return run_.output_dir; }

    std::string path_of(const std::string& name) const {
        return (fs::path(run_.output_dir) / name).string();
    }

    void add_output(const std::string& name) {
        payload_["outputs"].push_back(
            {{"path", name}, {"fnv64", hex64(fnv1a64_file(path_of(name)))}});
    }

    json& results() { return payload_["results"]; }

    std::string write() {
        json top;
        top["payload"] = payload_;
        top["payload_fnv64"] = hex64(fnv1a64(payload_.dump()));
        top["generated_at"] = timestamp_utc();
        const std::string path = path_of("summary.json");
        std::ofstream f(path);
        if (!f) {
            throw std::runtime_error("cannot write " + path);
        }
        f << top.dump(2) << "\n";
        return path;
    }

  private:
    const RunConfig& run_;
    json payload_;
};

json histogram_result(const Histogram& h) {
    json j;
    j["kind"] = h.kind == HistogramKind::cross ? "cross" : "auto";
    j["bins"] = h.n_bins();
    j["total_counts"] = h.total();
    j["warnings"] = h.warnings;
    return j;
}

// [fit] model plus optional init_* / min_* / max_* overrides; everything not
// listed falls back to the documented heuristics.
FitProblem build_fit_problem(const RunConfig& run, const Histogram& hist,
                             const std::string& model_override = "") {
    const ConfigFile& cfg = run.file;
    FitProblem prob;
    prob.histogram = hist;
    const std::string model_name = !model_override.empty()
                                       ? model_override
                                       : cfg.get_string_or("fit", "model", "cross_sum");
    prob.model = fit_model_from_name(model_name);
    prob.fixed["sigma"] = hist.det.jitter_sigma_s;

    const bool unconfined = hist.comb.lw.idler_unconfined;
    const double bg0 = estimate_background(hist);

    auto add_free = [&](const std::string& name, double init, double lo, double hi) {
        prob.initial[name] = cfg.get_double_or("fit", "init_" + name, init);
        Bounds b{lo, hi};
        b.lo = cfg.get_double_or("fit", "min_" + name, b.lo);
        b.hi = cfg.get_double_or("fit", "max_" + name, b.hi);
        prob.bounds[name] = b;
    };
    const double inf = std::numeric_limits<double>::infinity();

    double gs0 = hist.comb.lw.gamma_s;
    if (hist.kind == HistogramKind::cross) {
        try {
            gs0 = estimate_gamma_s_from_tail(hist);
        } catch (const std::exception&) {
            // fall back to the comb value recorded in the histogram
        }
    }
    add_free("gamma_s", gs0, gs0 / 10.0, gs0 * 10.0);

    if (unconfined) {
        prob.fixed["gamma_i"] = inf;
    } else {
        add_free("gamma_i", hist.comb.lw.gamma_i, hist.comb.lw.gamma_i / 10.0,
                 hist.comb.lw.gamma_i * 10.0);
    }

    if (prob.model == FitModelKind::cross_multi || prob.model == FitModelKind::cross_sum) {
        double t00 = hist.comb.round_trip_time_s();
        try {
            t00 = estimate_t0_from_beat(hist);
        } catch (const std::exception&) {
        }
        add_free("t0", t00, t00 / 2.0, t00 * 2.0);
    }
    if (prob.model == FitModelKind::cross_sum) {
        add_free("p", 0.9, 0.0, 1.0);
    }
    if (prob.model == FitModelKind::auto_single) {
        add_free("amplitude", hist.total() / hist.n_bins(), 0.0, inf);
    } else {
        add_free("amplitude", std::max(1.0, hist.total() - bg0 * hist.n_bins()), 0.0, inf);
    }
    add_free("background", bg0, 0.0, inf);
    prob.max_iterations = cfg.get_int_or("fit", "max_iterations", 500);
    return prob;
}

json fit_result_json(const FitResult& r) {
    json j;
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["reduced_chi2"] = r.reduced_chi2;
    for (const auto& [name, v] : r.estimates) {
        j["estimates"][name] = v;
    }
    for (const auto& [name, v] : r.fixed) {
        j["fixed"][name] = std::isinf(v) ? json("inf") : json(v);
    }
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) {
        throw std::runtime_error("cannot write " + path);
    }
    f << text;
}

RunOutcome fit_and_report(const RunConfig& run, const Histogram& hist, Summary& summary,
                          const std::string& model_override = "") {
    const FitProblem prob = build_fit_problem(run, hist, model_override);
    const FitResult result = fit(prob);

    write_text(summary.path_of("fit_report.txt"), format_fit_report(prob, result));
    summary.add_output("fit_report.txt");

    std::map<std::string, double> params = result.estimates;
    params.insert(result.fixed.begin(), result.fixed.end());
    const std::vector<double> overlay = fit_model_curve(prob, params);
    emit_plotdata("fit-overlay", hist, &overlay, nullptr, summary.path_of("fit_overlay.csv"));
    summary.add_output("fit_overlay.csv");

    summary.results()["fit"] = fit_result_json(result);
    summary.results()["histogram"] = histogram_result(hist);

    if (run.file.has("fit", "wavelength_nm") && result.converged) {
        const double wl = run.file.get_double("fit", "wavelength_nm");
        const CavityReport report = derive_cavity_report(result, wl, hist.comb.fsr_hz);
        char buf[256];
        snprintf(buf, sizeof buf,
                 "wavelength_nm,fwhm_hz,fsr_hz,finesse,q_factor\n%.17g,%.17g,%.17g,%.17g,%.17g\n",
                 report.wavelength_nm, report.fwhm_hz, report.fsr_hz, report.finesse,
                 report.q_factor);
        write_text(summary.path_of("cavity_report.csv"), buf);
        summary.add_output("cavity_report.csv");
        summary.results()["cavity"] = {{"wavelength_nm", report.wavelength_nm},
                                       {"fwhm_hz", report.fwhm_hz},
                                       {"fsr_hz", report.fsr_hz},
                                       {"finesse", report.finesse},
                                       {"q_factor", report.q_factor}};
    }
    return {result.converged ? 0 : 3, summary.write()};
}

}  // namespace

void emit_plotdata(const std::string& kind, const Histogram& hist,
                   const std::vector<double>* overlay, const DensityMatrix* rho,
                   const std::string& path) {
    std::ofstream f(path);
    if (!f) {
        throw std::runtime_error("emit_plotdata: cannot write " + path);
    }
    char buf[96];
    if (kind == "histogram") {
        f << "tau_s,counts\n";
        for (int b = 0; b < hist.n_bins(); ++b) {
            snprintf(buf, sizeof buf, "%.17g,%.17g\n", hist.center(b), hist.counts[b]);
            f << buf;
        }
    } else if (kind == "fit-overlay") {
        if (overlay == nullptr || static_cast<int>(overlay->size()) != hist.n_bins()) {
            throw std::invalid_argument("emit_plotdata: overlay does not match the histogram grid");
        }
        f << "tau_s,model_value\n";
        for (int b = 0; b < hist.n_bins(); ++b) {
            snprintf(buf, sizeof buf, "%.17g,%.17g\n", hist.center(b), (*overlay)[b]);
            f << buf;
        }
    } else if (kind == "density-matrix") {
        if (rho == nullptr) {
            throw std::invalid_argument("emit_plotdata: density matrix required");
        }
        static const char* basis[4] = {"HH", "HV", "VH", "VV"};
        f << "basis,re,im\n";
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                snprintf(buf, sizeof buf, "%s%s,%.17g,%.17g\n", basis[r], basis[c],
                         (*rho)(r, c).real(), (*rho)(r, c).imag());
                f << buf;
            }
        }
    } else {
        throw std::invalid_argument("emit_plotdata: unknown kind '" + kind +
                                    "' (valid: histogram, fit-overlay, density-matrix)");
    }
}

RunOutcome run_synth_cross(const RunConfig& run) {
    Summary summary(run, "synth-cross");
    const CombSpec comb = comb_from_config(run.file);
    const DetectorSpec det = detector_from_config(run.file);
    const double purity = run.file.get_double_or("synth", "purity", 1.0);
    const Histogram h = synthesize_cross(comb, det, purity, run.seed);
    write_histogram_csv(h, summary.path_of("cross_hist.csv"));
    summary.add_output("cross_hist.csv");
    summary.results() = histogram_result(h);
    summary.results()["purity"] = purity;
    return {0, summary.write()};
}

RunOutcome run_synth_auto(const RunConfig& run) {
    Summary summary(run, "synth-auto");
    const CombSpec comb = comb_from_config(run.file);
    const DetectorSpec det = detector_from_config(run.file);
    const Histogram h = synthesize_auto(comb, det, run.seed);
    write_histogram_csv(h, summary.path_of("auto_hist.csv"));
    summary.add_output("auto_hist.csv");
    summary.results() = histogram_result(h);
    return {0, summary.write()};
}

RunOutcome run_cross_fit(const RunConfig& run) {
    Summary summary(run, "cross-fit");
    const CombSpec comb = comb_from_config(run.file);
    const DetectorSpec det = detector_from_config(run.file);
    const double purity = run.file.get_double_or("synth", "purity", 1.0);
    const Histogram h = synthesize_cross(comb, det, purity, run.seed);
    write_histogram_csv(h, summary.path_of("cross_hist.csv"));
    summary.add_output("cross_hist.csv");
    summary.results()["purity"] = purity;
    return fit_and_report(run, h, summary);
}

RunOutcome run_fit_file(const RunConfig& run, const std::string& histogram_path,
                        const std::string& model_name) {
    Summary summary(run, "fit");
    const Histogram h = read_histogram_csv_file(histogram_path);
    summary.results()["input"] = histogram_path;
    return fit_and_report(run, h, summary, model_name);
}

RunOutcome run_mode_count(const RunConfig& run, const std::string& histogram_path) {
    Summary summary(run, "mode-count");
    Histogram h = histogram_path.empty()
                      ? synthesize_auto(comb_from_config(run.file),
                                        detector_from_config(run.file), run.seed)
                      : read_histogram_csv_file(histogram_path);
    if (histogram_path.empty()) {
        write_histogram_csv(h, summary.path_of("auto_hist.csv"));
        summary.add_output("auto_hist.csv");
    }
    const double baseline_fraction =
        run.file.get_double_or("mode_count", "baseline_fraction", 0.1);
    const double delta_g2 = integrate_delta_g2(h, baseline_fraction);

    AutoCorrelationResult result;
    result.delta_g2_s = delta_g2;
    result.mode_estimate = estimate_mode_count(delta_g2, h.comb.lw);

    summary.results()["delta_g2_s"] = result.delta_g2_s;
    summary.results()["mode_estimate"] = result.mode_estimate;
    summary.results()["closed_form_delta_g2_s"] = delta_g2_closed_form(h.comb);
    summary.results()["histogram"] = histogram_result(h);
    return {0, summary.write()};
}

RunOutcome run_tomography(const RunConfig& run) {
    Summary summary(run, "tomo");
    const SagnacSpec sagnac = sagnac_from_config(run.file);
    const double scale = run.file.get_double_or("tomo", "scale", 1e4);

    const DensityMatrix rho_true = postselected_state(sagnac, PumpBalance::solve_for_gv);
    const TomographyRecord rec = simulate_counts(rho_true, scale, run.seed);
    write_tomography_csv(rec, summary.path_of("tomo_counts.csv"));
    summary.add_output("tomo_counts.csv");

    const MleResult mle = mle_reconstruct(rec);
    write_density_matrix(rho_true, summary.path_of("rho_true.txt"));
    summary.add_output("rho_true.txt");
    write_density_matrix(mle.rho, summary.path_of("rho_mle.txt"));
    summary.add_output("rho_mle.txt");
    emit_plotdata("density-matrix", Histogram{}, nullptr, &mle.rho,
                  summary.path_of("rho_mle_plot.csv"));
    summary.add_output("rho_mle_plot.csv");

    const FidelityResult f_true = fidelity_max_theta(rho_true);
    const FidelityResult f_mle = fidelity_max_theta(mle.rho);
    const CorrectedFidelity corrected = corrected_fidelity(f_mle.fidelity, sagnac);

    summary.results()["scale"] = scale;
    summary.results()["contamination_weight"] = contamination_weight(sagnac);
    summary.results()["fidelity_true"] = f_true.fidelity;
    summary.results()["fidelity_mle"] = f_mle.fidelity;
    summary.results()["theta_star"] = f_mle.theta_star;
    summary.results()["fidelity_corrected"] = corrected.value;
    summary.results()["corrected_clamped"] = corrected.clamped;
    summary.results()["mle_converged"] = mle.converged;
    return {mle.converged ? 0 : 3, summary.write()};
}

RunOutcome run_regime_report(const RunConfig& run) {
    Summary summary(run, "regime");
    const PumpRegime pump = pump_from_config(run.file);
    const double threshold = run.file.get_double_or("pump", "threshold", 0.1);
    const Regime regime = classify_regime(pump, threshold);
    summary.results()["zeta_abs_sq"] = std::norm(pump.zeta);
    summary.results()["mode_count"] = pump.mode_count;
    summary.results()["threshold"] = threshold;
    summary.results()["two_m_zeta_sq"] = 2.0 * pump.mode_count * std::norm(pump.zeta);
    summary.results()["two_zeta_sq"] = 2.0 * std::norm(pump.zeta);
    summary.results()["regime"] = regime_name(regime);
    return {0, summary.write()};
}

RunOutcome run_table_s1(const RunConfig& run) {
    Summary summary(run, "table-s1");
    // reported FWHM per filter window; overridable through [table_s1] rows
    struct Row {
        double wavelength_nm;
        double fwhm_hz;
    };
    std::vector<Row> rows = {{1560.0, 516e6},
                             {1570.0, 243e6},
                             {1580.0, 126e6},
                             {1590.0, 85e6},
                             {1600.0, 57e6}};
    const double fsr = run.file.get_double_or("table_s1", "fsr_hz", 3.5e9);
    if (run.file.has("table_s1", "rows")) {
        rows.clear();
        std::istringstream in(run.file.get_string("table_s1", "rows"));
        std::string item;
        while (std::getline(in, item, ',')) {
            const auto colon = item.find(':');
            if (colon == std::string::npos) {
                throw ConfigError("[table_s1] rows: expected wavelength_nm:fwhm_hz pairs");
            }
            rows.push_back({std::strtod(item.substr(0, colon).c_str(), nullptr),
                            std::strtod(item.c_str() + colon + 1, nullptr)});
        }
    }

    std::string csv = "wavelength_nm,fsr_hz,fwhm_hz,finesse,q_factor\n";
    json jrows = json::array();
    char buf[256];
    for (const Row& row : rows) {
        const CavityReport r = make_cavity_report(row.fwhm_hz, fsr, row.wavelength_nm);
        snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", r.wavelength_nm, r.fsr_hz,
                 r.fwhm_hz, r.finesse, r.q_factor);
        csv += buf;
        jrows.push_back({{"wavelength_nm", r.wavelength_nm},
                         {"fwhm_hz", r.fwhm_hz},
                         {"fsr_hz", r.fsr_hz},
                         {"finesse", r.finesse},
                         {"q_factor", r.q_factor}});
    }
    write_text(summary.path_of("table_s1.csv"), csv);
    summary.add_output("table_s1.csv");
    summary.results()["rows"] = jrows;
    return {0, summary.write()};
}

RunOutcome run_model_eval(const RunConfig& run, const std::string& model_name, double tau_min,
                          double tau_max, int points) {
    if (!(tau_max > tau_min) || points < 2) {
        throw std::invalid_argument("model-eval: need tau_max > tau_min and at least 2 points");
    }
    Summary summary(run, "model-eval");
    const CombSpec comb = comb_from_config(run.file);
    const double sigma = run.file.get_double("detector", "jitter_sigma_s");

    CrossCorrelationModel model;
    model.comb = comb;
    model.sigma = sigma;
    model.purity = run.file.get_double_or("synth", "purity", 1.0);
    model.amplitude = run.file.get_double_or("model", "amplitude", 1.0);
    model.background = run.file.get_double_or("model", "background", 0.0);

    const double t0 = comb.round_trip_time_s();
    const int j_max = default_j_max(comb.lw, t0);
    auto value_at = [&](double tau) {
        if (model_name == "cross_sum") {
            return cross_sum(model, tau);
        }
        if (model_name == "cross_single") {
            return model.amplitude * cross_single(comb.lw, sigma, tau) + model.background;
        }
        if (model_name == "cross_multi") {
            return model.amplitude * cross_multi(comb.lw, sigma, tau, t0, j_max) +
                   model.background;
        }
        if (model_name == "g2_auto") {
            return model.amplitude * (1.0 + g2_auto_excess_conv(comb.lw, sigma, tau)) +
                   model.background;
        }
        throw std::invalid_argument(
            "model-eval: unknown model '" + model_name +
            "' (valid: cross_sum, cross_single, cross_multi, g2_auto)");
    };

    std::string csv = "tau_s,value\n";
    char buf[80];
    for (int k = 0; k < points; ++k) {
        const double tau = tau_min + (tau_max - tau_min) * k / (points - 1);
        snprintf(buf, sizeof buf, "%.17g,%.17g\n", tau, value_at(tau));
        csv += buf;
    }
    write_text(summary.path_of("model_curve.csv"), csv);
    summary.add_output("model_curve.csv");
    summary.results()["model"] = model_name;
    summary.results()["points"] = points;
    summary.results()["tau_min_s"] = tau_min;
    summary.results()["tau_max_s"] = tau_max;
    return {0, summary.write()};
}

RunOutcome run_pipeline(const RunConfig& run) {
    switch (run.pipeline) {
        case Pipeline::cross_fit: return run_cross_fit(run);
        case Pipeline::auto_mode_count: return run_mode_count(run);
        case Pipeline::tomography: return run_tomography(run);
        case Pipeline::regime_report: return run_regime_report(run);
        case Pipeline::table_s1: return run_table_s1(run);
    }
    throw std::logic_error("run_pipeline: unknown pipeline");
}

int verify_output_dir(const std::string& dir) {
    const std::string summary_path = (fs::path(dir) / "summary.json").string();
    std::ifstream f(summary_path);
    if (!f) {
        std::fprintf(stderr, "verify: cannot open %s\n", summary_path.c_str());
        return 1;
    }
    json top;
    try {
        f >> top;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "verify: malformed summary: %s\n", e.what());
        return 1;
    }
    int failures = 0;
    const std::string recorded = top.value("payload_fnv64", "");
    const std::string recomputed = hex64(fnv1a64(top["payload"].dump()));
    if (recorded != recomputed) {
        std::fprintf(stderr, "verify: payload hash mismatch (%s != %s)\n", recorded.c_str(),
                     recomputed.c_str());
        ++failures;
    } else {
        std::printf("verify: payload hash ok\n");
    }
    for (const auto& out : top["payload"]["outputs"]) {
        const std::string rel = out["path"];
        const std::string want = out["fnv64"];
        const std::string path = (fs::path(dir) / rel).string();
        try {
            const std::string got = hex64(fnv1a64_file(path));
            if (got != want) {
                std::fprintf(stderr, "verify: %s hash mismatch (%s != %s)\n", rel.c_str(),
                             got.c_str(), want.c_str());
                ++failures;
            } else {
                std::printf("verify: %s ok\n", rel.c_str());
            }
        } catch (const std::exception& e) {
            std::fprintf(stderr, "verify: %s: %s\n", rel.c_str(), e.what());
            ++failures;
        }
    }
    return failures == 0 ? 0 : 1;
}

}  // namespace bfc::cli
