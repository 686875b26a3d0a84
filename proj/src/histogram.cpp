#include "bfc/histogram.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "bfc/rng.hpp"

namespace bfc {

namespace {

// 5-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr double kGl5Node[5] = {-0.906179845938663992797626878299,
                                -0.538469310105683091036314420700, 0.0,
                                0.538469310105683091036314420700,
                                0.906179845938663992797626878299};
constexpr double kGl5Weight[5] = {0.236926885056189087514264040720,
                                  0.478628670499366468041291514836,
                                  0.568888888888888888888888888889,
                                  0.478628670499366468041291514836,
                                  0.236926885056189087514264040720};

template <class F>
double gl5_integral(F&& f, double a, double b) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double acc = 0.0;
    for (int i = 0; i < 5; ++i) {
        acc += kGl5Weight[i] * f(mid + half * kGl5Node[i]);
    }
    return acc * half;
}

double phi_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

void append_fmt(std::string& s, const char* fmt, ...) {
    char buf[256];
    va_list args;
    va_start(args, fmt);
    vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    s += buf;
}

}  // namespace

int DetectorSpec::bin_count() const {
    return static_cast<int>(std::llround((tau_max_s - tau_min_s) / bin_width_s));
}

void DetectorSpec::validate() const {
    if (!(jitter_sigma_s > 0.0)) {
        throw std::invalid_argument("DetectorSpec: jitter_sigma_s must be positive");
    }
    if (!(bin_width_s > 0.0)) {
        throw std::invalid_argument("DetectorSpec: bin_width_s must be positive");
    }
    if (!(tau_min_s < tau_max_s)) {
        throw std::invalid_argument("DetectorSpec: tau_min_s must be below tau_max_s");
    }
    if (!(accidental_rate >= 0.0) || !(total_counts >= 0.0)) {
        throw std::invalid_argument("DetectorSpec: counts must be nonnegative");
    }
    if (bin_count() < 1) {
        throw std::invalid_argument("DetectorSpec: window shorter than one bin");
    }
}

double Histogram::total() const {
    return std::accumulate(counts.begin(), counts.end(), 0.0);
}

namespace {

std::vector<double> sample_counts(const std::vector<double>& mu, uint64_t seed,
                                  NoiseModel noise) {
    std::vector<double> counts(mu.size());
    for (size_t b = 0; b < mu.size(); ++b) {
        if (noise == NoiseModel::none) {
            counts[b] = mu[b];
        } else {
            CounterRng rng(seed, b);
            counts[b] = poisson_sample(mu[b], rng);
        }
    }
    return counts;
}

}  // namespace

Histogram synthesize_cross(const CombSpec& comb, const DetectorSpec& det, double purity,
                           uint64_t seed, NoiseModel noise) {
    comb.validate();
    det.validate();
    if (!(purity >= 0.0) || !(purity <= 1.0)) {
        throw std::invalid_argument("synthesize_cross: purity must be in [0,1]");
    }

    Histogram h;
    h.kind = HistogramKind::cross;
    h.tau_min_s = det.tau_min_s;
    h.bin_width_s = det.bin_width_s;
    h.comb = comb;
    h.det = det;
    h.purity = purity;
    h.seed = seed;
    h.rng_name = kRngName;

    const int n = det.bin_count();
    const double t0 = comb.round_trip_time_s();
    const CrossPrefactors pre = cross_norm_prefactors(comb.lw, t0);
    const int j_max = default_j_max(comb.lw, t0);
    auto shape = [&](double tau) {
        return purity * pre.multi * cross_multi(comb.lw, det.jitter_sigma_s, tau, t0, j_max) +
               (1.0 - purity) * pre.single * cross_single(comb.lw, det.jitter_sigma_s, tau);
    };

    std::vector<double> bin_integral(n);
    for (int b = 0; b < n; ++b) {
        bin_integral[b] = gl5_integral(shape, h.edge(b), h.edge(b + 1));
    }
    const double window_mass = std::accumulate(bin_integral.begin(), bin_integral.end(), 0.0);
    // The normalized components integrate to exactly 1 over all delays.
    if (window_mass < 0.99) {
        h.warnings.push_back("window contains less than 99% of the model mass");
    }
    if (det.jitter_sigma_s < 0.5 * det.bin_width_s) {
        h.warnings.push_back("jitter narrower than half a bin; bin integrals may be coarse");
    }

    std::vector<double> mu(n);
    for (int b = 0; b < n; ++b) {
        mu[b] = (window_mass > 0.0 ? det.total_counts * bin_integral[b] / window_mass : 0.0) +
                det.accidental_rate;
    }
    h.counts = sample_counts(mu, seed, noise);
    return h;
}

namespace {

// Bin means of the jitter-convolved excess for a multi-mode comb: the excess
// is sampled on a fine grid and the Gaussian kernel x bin box is applied in
// one pass through normal CDF weights.
std::vector<double> auto_excess_bin_means_grid(const CombSpec& comb, const DetectorSpec& det) {
    const int n = det.bin_count();
    const double w = det.bin_width_s;
    const double s = std::numbers::sqrt2 * det.jitter_sigma_s;
    const double reach = 10.0 * s;
    const double t_lobe = comb.round_trip_time_s() / comb.mode_count;
    const double h_target = std::min(s / 6.0, t_lobe / 12.0);
    const double t_lo = det.tau_min_s - reach - w;
    const double t_hi = det.tau_min_s + n * w + reach + w;
    const size_t n_grid = static_cast<size_t>(std::ceil((t_hi - t_lo) / h_target));
    if (n_grid > 20'000'000) {
        throw std::invalid_argument(
            "synthesize_auto: window too wide to resolve the comb structure on a grid");
    }
    const double h = (t_hi - t_lo) / static_cast<double>(n_grid);

    std::vector<double> q(n_grid);
    for (size_t j = 0; j < n_grid; ++j) {
        q[j] = g2_auto_excess(comb, t_lo + (j + 0.5) * h);
    }

    std::vector<double> means(n);
    for (int b = 0; b < n; ++b) {
        const double lo = det.tau_min_s + b * w;
        const double hi = lo + w;
        const size_t j0 = static_cast<size_t>(
            std::max(0.0, std::floor((lo - reach - t_lo) / h)));
        const size_t j1 = std::min(n_grid, static_cast<size_t>(std::max(
                                               0.0, std::ceil((hi + reach - t_lo) / h))));
        double acc = 0.0;
        for (size_t j = j0; j < j1; ++j) {
            const double t = t_lo + (j + 0.5) * h;
            acc += q[j] * (phi_cdf((hi - t) / s) - phi_cdf((lo - t) / s));
        }
        means[b] = acc * h / w;
    }
    return means;
}

}  // namespace

Histogram synthesize_auto(const CombSpec& comb, const DetectorSpec& det, uint64_t seed,
                          NoiseModel noise) {
    comb.validate();
    det.validate();

    Histogram h;
    h.kind = HistogramKind::autocorr;
    h.tau_min_s = det.tau_min_s;
    h.bin_width_s = det.bin_width_s;
    h.comb = comb;
    h.det = det;
    h.purity = 1.0;
    h.seed = seed;
    h.rng_name = kRngName;

    const int n = det.bin_count();
    std::vector<double> excess_mean(n);
    if (comb.mode_count == 1) {
        auto qc = [&](double tau) {
            return g2_auto_excess_conv(comb.lw, det.jitter_sigma_s, tau);
        };
        for (int b = 0; b < n; ++b) {
            excess_mean[b] = gl5_integral(qc, h.edge(b), h.edge(b + 1)) / det.bin_width_s;
        }
    } else {
        excess_mean = auto_excess_bin_means_grid(comb, det);
    }

    const double edge_env = std::max(auto_envelope(comb.lw, det.tau_min_s),
                                     auto_envelope(comb.lw, det.tau_max_s));
    if (edge_env * edge_env > 0.01) {
        h.warnings.push_back("window edges not at baseline; delta_g2 integration will be biased");
    }

    const double baseline = det.total_counts / n;
    std::vector<double> mu(n);
    for (int b = 0; b < n; ++b) {
        mu[b] = baseline * (1.0 + excess_mean[b]) + det.accidental_rate;
    }
    h.counts = sample_counts(mu, seed, noise);
    return h;
}

double integrate_delta_g2(const Histogram& h, double baseline_fraction) {
    if (h.kind != HistogramKind::autocorr) {
        throw std::invalid_argument("integrate_delta_g2: histogram kind must be auto");
    }
    const int n = h.n_bins();
    const int n_out = std::max(1, static_cast<int>(std::floor(baseline_fraction * n)));
    if (2 * n_out >= n) {
        throw std::invalid_argument("integrate_delta_g2: window too narrow for baseline bins");
    }

    double left = 0.0;
    double right = 0.0;
    for (int b = 0; b < n_out; ++b) {
        left += h.counts[b];
        right += h.counts[n - 1 - b];
    }
    const double baseline = (left + right) / (2.0 * n_out);
    if (!(baseline > 0.0)) {
        throw std::runtime_error("integrate_delta_g2: baseline estimate is zero");
    }
    const double sigma_side = 2.0 * std::sqrt(baseline / n_out);
    if (std::fabs(left / n_out - baseline) > sigma_side) {
        throw std::runtime_error(
            "integrate_delta_g2: left edge not at baseline (widen the window)");
    }
    if (std::fabs(right / n_out - baseline) > sigma_side) {
        throw std::runtime_error(
            "integrate_delta_g2: right edge not at baseline (widen the window)");
    }

    return (h.total() / baseline - n) * h.bin_width_s;
}

// --------------------------------------------------------------------------
// CSV
// --------------------------------------------------------------------------

void write_histogram_csv(const Histogram& h, std::ostream& out) {
    std::string s;
    s += "# bfcsim histogram v1\n";
    append_fmt(s, "# kind=%s\n", h.kind == HistogramKind::cross ? "cross" : "auto");
    append_fmt(s, "# seed=%llu\n", static_cast<unsigned long long>(h.seed));
    append_fmt(s, "# rng=%s\n", h.rng_name.c_str());
    append_fmt(s, "# comb.fsr_hz=%.17g\n", h.comb.fsr_hz);
    append_fmt(s, "# comb.gamma_s=%.17g\n", h.comb.lw.gamma_s);
    append_fmt(s, "# comb.gamma_i=%.17g\n", h.comb.lw.idler_unconfined ? 0.0 : h.comb.lw.gamma_i);
    append_fmt(s, "# comb.idler_unconfined=%d\n", h.comb.lw.idler_unconfined ? 1 : 0);
    append_fmt(s, "# comb.center_freq_hz=%.17g\n", h.comb.center_freq_hz);
    append_fmt(s, "# comb.mode_count=%d\n", h.comb.mode_count);
    append_fmt(s, "# comb.pump_omega=%.17g\n", h.comb.pump_omega);
    append_fmt(s, "# det.jitter_sigma_s=%.17g\n", h.det.jitter_sigma_s);
    append_fmt(s, "# det.bin_width_s=%.17g\n", h.det.bin_width_s);
    append_fmt(s, "# det.tau_min_s=%.17g\n", h.det.tau_min_s);
    append_fmt(s, "# det.tau_max_s=%.17g\n", h.det.tau_max_s);
    append_fmt(s, "# det.accidental_rate=%.17g\n", h.det.accidental_rate);
    append_fmt(s, "# det.total_counts=%.17g\n", h.det.total_counts);
    append_fmt(s, "# purity=%.17g\n", h.purity);
    for (const auto& w : h.warnings) {
        append_fmt(s, "# warning=%s\n", w.c_str());
    }
    s += "tau_s,counts\n";
    for (int b = 0; b < h.n_bins(); ++b) {
        append_fmt(s, "%.17g,%.17g\n", h.center(b), h.counts[b]);
    }
    out << s;
}

void write_histogram_csv(const Histogram& h, const std::string& path) {
    std::ofstream f(path);
    if (!f) {
        throw std::runtime_error("write_histogram_csv: cannot open " + path);
    }
    write_histogram_csv(h, f);
}

Histogram read_histogram_csv(std::istream& in) {
    std::map<std::string, std::string> meta;
    std::vector<std::string> warnings;
    std::vector<double> counts;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq != std::string::npos) {
                std::string key = line.substr(2, eq - 2);
                std::string value = line.substr(eq + 1);
                if (key == "warning") {
                    warnings.push_back(value);
                } else {
                    meta[key] = value;
                }
            }
            continue;
        }
        if (!header_seen) {
            if (line.rfind("tau_s", 0) != 0) {
                throw std::runtime_error("read_histogram_csv: missing tau_s,counts header");
            }
            header_seen = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw std::runtime_error("read_histogram_csv: malformed data row: " + line);
        }
        counts.push_back(std::strtod(line.c_str() + comma + 1, nullptr));
    }

    auto need = [&](const std::string& key) -> const std::string& {
        auto it = meta.find(key);
        if (it == meta.end()) {
            throw std::runtime_error("read_histogram_csv: missing metadata key " + key);
        }
        return it->second;
    };
    auto need_d = [&](const std::string& key) { return std::strtod(need(key).c_str(), nullptr); };

    Histogram h;
    h.kind = need("kind") == "cross" ? HistogramKind::cross : HistogramKind::autocorr;
    h.seed = std::strtoull(need("seed").c_str(), nullptr, 10);
    h.rng_name = need("rng");
    h.comb.fsr_hz = need_d("comb.fsr_hz");
    h.comb.lw.gamma_s = need_d("comb.gamma_s");
    h.comb.lw.idler_unconfined = need("comb.idler_unconfined") == "1";
    h.comb.lw.gamma_i = h.comb.lw.idler_unconfined ? 0.0 : need_d("comb.gamma_i");
    h.comb.center_freq_hz = need_d("comb.center_freq_hz");
    h.comb.mode_count = static_cast<int>(std::strtol(need("comb.mode_count").c_str(), nullptr, 10));
    h.comb.pump_omega = need_d("comb.pump_omega");
    h.det.jitter_sigma_s = need_d("det.jitter_sigma_s");
    h.det.bin_width_s = need_d("det.bin_width_s");
    h.det.tau_min_s = need_d("det.tau_min_s");
    h.det.tau_max_s = need_d("det.tau_max_s");
    h.det.accidental_rate = need_d("det.accidental_rate");
    h.det.total_counts = need_d("det.total_counts");
    h.purity = need_d("purity");
    h.warnings = warnings;
    h.tau_min_s = h.det.tau_min_s;
    h.bin_width_s = h.det.bin_width_s;
    h.counts = std::move(counts);
    if (h.n_bins() != h.det.bin_count()) {
        throw std::runtime_error("read_histogram_csv: row count does not match the bin grid");
    }
    return h;
}

Histogram read_histogram_csv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw std::runtime_error("read_histogram_csv: cannot open " + path);
    }
    return read_histogram_csv(f);
}

}  // namespace bfc
