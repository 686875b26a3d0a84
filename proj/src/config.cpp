#include "bfc/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace bfc {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0;
    size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) {
        ++a;
    }
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) {
        --b;
    }
    return s.substr(a, b - a);
}

std::string strip_comment(const std::string& s) {
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '#' || s[i] == ';') {
            return s.substr(0, i);
        }
    }
    return s;
}

}  // namespace

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& origin) {
    ConfigFile cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string body = trim(strip_comment(line));
        if (body.empty()) {
            continue;
        }
        if (body.front() == '[') {
            if (body.back() != ']' || body.size() < 3) {
                throw ConfigError(origin + ":" + std::to_string(line_no) +
                                  ": malformed section header '" + body + "'");
            }
            section = trim(body.substr(1, body.size() - 2));
            cfg.sections_[section];
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected key = value, got '" + body + "'");
        }
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
        }
        if (section.empty()) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": key '" + key +
                              "' outside any [section]");
        }
        auto& entries = cfg.sections_[section];
        if (entries.count(key)) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" +
                              key + "' in [" + section + "]");
        }
        entries[key] = Entry{value, line_no};
    }
    return cfg;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw ConfigError("cannot open config file: " + path);
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_string(ss.str(), path);
}

bool ConfigFile::has_section(const std::string& section) const {
    return sections_.count(section) > 0;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key) > 0;
}

const ConfigFile::Entry& ConfigFile::lookup(const std::string& section,
                                            const std::string& key) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) {
        throw ConfigError(origin_ + ": missing section [" + section + "]");
    }
    auto kt = it->second.find(key);
    if (kt == it->second.end()) {
        throw ConfigError(origin_ + ": missing key '" + key + "' in [" + section + "]");
    }
    return kt->second;
}

void ConfigFile::fail(const std::string& section, const std::string& key,
                      const std::string& what) const {
    const Entry& e = lookup(section, key);
    throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": [" + section + "] " + key +
                      ": " + what + " (got '" + e.value + "')");
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key) const {
    return lookup(section, key).value;
}

double ConfigFile::get_double(const std::string& section, const std::string& key) const {
    const Entry& e = lookup(section, key);
    char* end = nullptr;
    const double v = std::strtod(e.value.c_str(), &end);
    if (end == e.value.c_str() || *end != '\0') {
        fail(section, key, "expected a number");
    }
    return v;
}

int ConfigFile::get_int(const std::string& section, const std::string& key) const {
    const Entry& e = lookup(section, key);
    char* end = nullptr;
    const long v = std::strtol(e.value.c_str(), &end, 10);
    if (end == e.value.c_str() || *end != '\0') {
        fail(section, key, "expected an integer");
    }
    return static_cast<int>(v);
}

uint64_t ConfigFile::get_u64(const std::string& section, const std::string& key) const {
    const Entry& e = lookup(section, key);
    char* end = nullptr;
    const unsigned long long v = std::strtoull(e.value.c_str(), &end, 10);
    if (end == e.value.c_str() || *end != '\0') {
        fail(section, key, "expected an unsigned integer");
    }
    return v;
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key) const {
    const std::string v = lookup(section, key).value;
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no" || v == "off") {
        return false;
    }
    fail(section, key, "expected a boolean");
}

std::string ConfigFile::get_string_or(const std::string& section, const std::string& key,
                                      const std::string& fallback) const {
    return has(section, key) ? get_string(section, key) : fallback;
}
double ConfigFile::get_double_or(const std::string& section, const std::string& key,
                                 double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
}
int ConfigFile::get_int_or(const std::string& section, const std::string& key,
                           int fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
}
uint64_t ConfigFile::get_u64_or(const std::string& section, const std::string& key,
                                uint64_t fallback) const {
    return has(section, key) ? get_u64(section, key) : fallback;
}
bool ConfigFile::get_bool_or(const std::string& section, const std::string& key,
                             bool fallback) const {
    return has(section, key) ? get_bool(section, key) : fallback;
}

std::string ConfigFile::canonical() const {
    std::string out;
    for (const auto& [section, entries] : sections_) {
        out += "[" + section + "]\n";
        for (const auto& [key, entry] : entries) {
            out += key + "=" + entry.value + "\n";
        }
    }
    return out;
}

CombSpec comb_from_config(const ConfigFile& cfg) {
    CombSpec spec;
    spec.fsr_hz = cfg.get_double("comb", "fsr_hz");
    spec.lw.gamma_s = kPi * cfg.get_double("comb", "fwhm_signal_hz");
    spec.lw.idler_unconfined = cfg.get_bool_or("comb", "idler_unconfined", false);
    if (spec.lw.idler_unconfined) {
        if (cfg.has("comb", "fwhm_idler_hz")) {
            throw ConfigError("[comb]: give either fwhm_idler_hz or idler_unconfined, not both");
        }
        spec.lw.gamma_i = 0.0;
    } else {
        spec.lw.gamma_i = kPi * cfg.get_double("comb", "fwhm_idler_hz");
    }
    const double center_nm = cfg.get_double("comb", "center_nm");
    spec.center_freq_hz = frequency_from_nm(center_nm);
    spec.mode_count = cfg.get_int("comb", "mode_count");
    const double pump_nm = cfg.get_double_or("comb", "pump_nm", 0.5 * center_nm);
    spec.pump_omega = omega_from_nm(pump_nm);
    spec.validate();
    return spec;
}

std::string comb_to_config(const CombSpec& spec) {
    char buf[512];
    const double center_nm = kSpeedOfLight / spec.center_freq_hz * 1e9;
    const double pump_nm = kTwoPi * kSpeedOfLight / spec.pump_omega * 1e9;
    if (spec.lw.idler_unconfined) {
        snprintf(buf, sizeof buf,
                 "[comb]\nfsr_hz = %.17g\nfwhm_signal_hz = %.17g\nidler_unconfined = true\n"
                 "center_nm = %.17g\nmode_count = %d\npump_nm = %.17g\n",
                 spec.fsr_hz, spec.lw.fwhm_signal_hz(), center_nm, spec.mode_count, pump_nm);
    } else {
        snprintf(buf, sizeof buf,
                 "[comb]\nfsr_hz = %.17g\nfwhm_signal_hz = %.17g\nfwhm_idler_hz = %.17g\n"
                 "center_nm = %.17g\nmode_count = %d\npump_nm = %.17g\n",
                 spec.fsr_hz, spec.lw.fwhm_signal_hz(), spec.lw.fwhm_idler_hz(), center_nm,
                 spec.mode_count, pump_nm);
    }
    return buf;
}

DetectorSpec detector_from_config(const ConfigFile& cfg) {
    DetectorSpec det;
    det.jitter_sigma_s = cfg.get_double("detector", "jitter_sigma_s");
    det.bin_width_s = cfg.get_double("detector", "bin_width_s");
    det.tau_min_s = cfg.get_double("detector", "tau_min_s");
    det.tau_max_s = cfg.get_double("detector", "tau_max_s");
    det.accidental_rate = cfg.get_double_or("detector", "accidental_rate", 0.0);
    det.total_counts = cfg.get_double("detector", "total_counts");
    det.validate();
    return det;
}

SagnacSpec sagnac_from_config(const ConfigFile& cfg) {
    SagnacSpec s;
    const bool explicit_faces = cfg.has("sagnac", "r_l_re");
    if (explicit_faces) {
        s.r_l = {cfg.get_double("sagnac", "r_l_re"), cfg.get_double("sagnac", "r_l_im")};
        s.r_r = {cfg.get_double("sagnac", "r_r_re"), cfg.get_double("sagnac", "r_r_im")};
        s.t_l = {cfg.get_double("sagnac", "t_l_re"), cfg.get_double("sagnac", "t_l_im")};
        s.t_r = {cfg.get_double("sagnac", "t_r_re"), cfg.get_double("sagnac", "t_r_im")};
    } else {
        const double rp = cfg.get_double("sagnac", "r_power");
        const double rp_l = cfg.get_double_or("sagnac", "r_power_l", rp);
        const double rp_r = cfg.get_double_or("sagnac", "r_power_r", rp);
        s.r_l = {0.0, std::sqrt(rp_l)};
        s.r_r = {0.0, std::sqrt(rp_r)};
        s.t_l = std::sqrt(1.0 - rp_l);
        s.t_r = std::sqrt(1.0 - rp_r);
    }
    s.eta_sl = cfg.get_double_or("sagnac", "eta_sl", 1.0);
    s.eta_sr = cfg.get_double_or("sagnac", "eta_sr", 1.0);
    s.eta_il = cfg.get_double_or("sagnac", "eta_il", 1.0);
    s.eta_ir = cfg.get_double_or("sagnac", "eta_ir", 1.0);
    s.delta_tau_s = cfg.get_double_or("sagnac", "delta_tau_s", 0.0);
    s.gamma = cfg.get_double("sagnac", "gamma");
    s.phase_phi = cfg.get_double_or("sagnac", "phase_phi", 0.0);
    s.delta_theta = cfg.get_double_or("sagnac", "delta_theta", 0.0);
    s.g_h = {cfg.get_double_or("sagnac", "g_h_re", 1.0),
             cfg.get_double_or("sagnac", "g_h_im", 0.0)};
    const std::string balance = cfg.get_string_or("sagnac", "balance", "solve");
    if (balance == "solve") {
        s.g_v = s.g_h * (s.eta_ir * s.t_l * s.eta_sr) / (s.eta_il * s.t_r * s.eta_sl);
    } else if (balance == "assert") {
        s.g_v = {cfg.get_double("sagnac", "g_v_re"), cfg.get_double_or("sagnac", "g_v_im", 0.0)};
    } else {
        throw ConfigError("[sagnac] balance: expected 'solve' or 'assert'");
    }
    s.validate();
    return s;
}

PumpRegime pump_from_config(const ConfigFile& cfg) {
    PumpRegime r;
    const double zeta_abs = cfg.get_double("pump", "zeta_abs");
    const double zeta_phase = cfg.get_double_or("pump", "zeta_phase", 0.0);
    r.zeta = std::polar(zeta_abs, zeta_phase);
    if (cfg.has("pump", "mode_count")) {
        r.mode_count = cfg.get_int("pump", "mode_count");
    } else {
        r.mode_count = cfg.get_int("comb", "mode_count");
    }
    return r;
}

Pipeline pipeline_from_name(const std::string& name) {
    if (name == "CrossFit") return Pipeline::cross_fit;
    if (name == "AutoModeCount") return Pipeline::auto_mode_count;
    if (name == "Tomography") return Pipeline::tomography;
    if (name == "RegimeReport") return Pipeline::regime_report;
    if (name == "TableS1") return Pipeline::table_s1;
    throw ConfigError("unknown pipeline '" + name +
                      "' (expected CrossFit, AutoModeCount, Tomography, RegimeReport, TableS1)");
}

const char* pipeline_name(Pipeline p) {
    switch (p) {
        case Pipeline::cross_fit: return "CrossFit";
        case Pipeline::auto_mode_count: return "AutoModeCount";
        case Pipeline::tomography: return "Tomography";
        case Pipeline::regime_report: return "RegimeReport";
        case Pipeline::table_s1: return "TableS1";
    }
    return "unknown";
}

RunConfig RunConfig::load(const std::string& path, std::optional<uint64_t> seed_override,
                          std::optional<std::string> output_override) {
    RunConfig run;
    run.file = ConfigFile::parse_file(path);
    run.pipeline = pipeline_from_name(run.file.get_string("run", "pipeline"));
    run.seed = seed_override.value_or(run.file.get_u64_or("run", "seed", 0));
    if (output_override) {
        run.output_dir = *output_override;
    } else if (run.file.has("run", "output_dir")) {
        run.output_dir = run.file.get_string("run", "output_dir");
    } else if (const char* env = std::getenv("BFCSIM_OUTPUT_DIR")) {
        run.output_dir = env;
    } else {
        run.output_dir = ".";
    }
    return run;
}

}  // namespace bfc
