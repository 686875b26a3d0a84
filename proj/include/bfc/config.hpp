#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bfc/comb.hpp"
#include "bfc/histogram.hpp"
#include "bfc/sagnac.hpp"

namespace bfc {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// INI-style sections of key = value pairs; '#' and ';' start comments.
class ConfigFile {
  public:
    static ConfigFile parse_string(const std::string& text, const std::string& origin = "<string>");
    static ConfigFile parse_file(const std::string& path);

    bool has_section(const std::string& section) const;
    bool has(const std::string& section, const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key) const;
    double get_double(const std::string& section, const std::string& key) const;
    int get_int(const std::string& section, const std::string& key) const;
    uint64_t get_u64(const std::string& section, const std::string& key) const;
    bool get_bool(const std::string& section, const std::string& key) const;

    std::string get_string_or(const std::string& section, const std::string& key,
                              const std::string& fallback) const;
    double get_double_or(const std::string& section, const std::string& key,
                         double fallback) const;
    int get_int_or(const std::string& section, const std::string& key, int fallback) const;
    uint64_t get_u64_or(const std::string& section, const std::string& key,
                        uint64_t fallback) const;
    bool get_bool_or(const std::string& section, const std::string& key, bool fallback) const;

    // Deterministic canonical rendering (sorted sections and keys) used for
    // the config hash in the run summary.
    std::string canonical() const;

  private:
    struct Entry {
        std::string value;
        int line = 0;
    };
    const Entry& lookup(const std::string& section, const std::string& key) const;
    [[noreturn]] void fail(const std::string& section, const std::string& key,
                           const std::string& what) const;

    std::string origin_;
    std::map<std::string, std::map<std::string, Entry>> sections_;
};

// [comb] fsr_hz, fwhm_signal_hz, fwhm_idler_hz | idler_unconfined, center_nm,
// mode_count, pump_nm (default: half the center wavelength).
CombSpec comb_from_config(const ConfigFile& cfg);
std::string comb_to_config(const CombSpec& spec);

// [detector] jitter_sigma_s, bin_width_s, tau_min_s, tau_max_s,
// accidental_rate, total_counts.
DetectorSpec detector_from_config(const ConfigFile& cfg);

// [sagnac] r_power (or r_power_l / r_power_r), eta_sl, eta_sr, eta_il,
// eta_ir, delta_tau_s, gamma, phase_phi, delta_theta; the face convention is
// t real, r = i |r| unless explicit *_re/*_im parts are given.
SagnacSpec sagnac_from_config(const ConfigFile& cfg);

// [pump] zeta_abs, zeta_phase, mode_count (defaults to [comb] mode_count),
// threshold.
PumpRegime pump_from_config(const ConfigFile& cfg);

enum class Pipeline { cross_fit, auto_mode_count, tomography, regime_report, table_s1 };

Pipeline pipeline_from_name(const std::string& name);
const char* pipeline_name(Pipeline p);

struct RunConfig {
    ConfigFile file;
    Pipeline pipeline = Pipeline::cross_fit;
    uint64_t seed = 0;
    std::string output_dir;

    // flags override the config for seed and output_dir only
    static RunConfig load(const std::string& path, std::optional<uint64_t> seed_override,
                          std::optional<std::string> output_override);
};

}  // namespace bfc
