#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bfc/comb.hpp"
#include "bfc/correlation.hpp"

namespace bfc {

enum class HistogramKind { cross, autocorr };
enum class NoiseModel { poisson, none };

struct DetectorSpec {
    double jitter_sigma_s = 0.0;   // per-detector Gaussian timing jitter
    double bin_width_s = 0.0;
    double tau_min_s = 0.0;
    double tau_max_s = 0.0;        // snapped to tau_min + n_bins * bin_width
    double accidental_rate = 0.0;  // flat background, counts per bin
    double total_counts = 0.0;     // expected integrated true coincidences

    int bin_count() const;
    void validate() const;
};

// Binned delayed-coincidence histogram with full generating provenance.
// Counts are stored as doubles: integer-valued when Poisson-sampled, real
// when synthesized noiseless (NoiseModel::none).
struct Histogram {
    HistogramKind kind = HistogramKind::cross;
    double tau_min_s = 0.0;
    double bin_width_s = 0.0;
    std::vector<double> counts;

    CombSpec comb;
    DetectorSpec det;
    double purity = 1.0;  // cross only
    uint64_t seed = 0;
    std::string rng_name;
    std::vector<std::string> warnings;

    int n_bins() const { return static_cast<int>(counts.size()); }
    double edge(int k) const { return tau_min_s + k * bin_width_s; }
    double center(int k) const { return tau_min_s + (k + 0.5) * bin_width_s; }
    double total() const;
};

// Expected counts per bin = total_counts * (bin integral of the cross_sum
// shape) / (window integral) + accidental_rate, then Poisson-sampled per bin
// from an independent counter stream (deterministic and order-free).
Histogram synthesize_cross(const CombSpec& comb, const DetectorSpec& det, double purity,
                           uint64_t seed, NoiseModel noise = NoiseModel::poisson);

// Same count model around the jitter-convolved autocorrelation
// 1 + (g2 - 1) * g_{sqrt(2) sigma}; the baseline level is total_counts /
// n_bins so the normalized histogram tends to 1 at large delay.
Histogram synthesize_auto(const CombSpec& comb, const DetectorSpec& det, uint64_t seed,
                          NoiseModel noise = NoiseModel::poisson);

// Baseline-normalized integral  sum_bins (N_b / baseline - 1) * bin_width.
// The baseline is the mean of the outer `baseline_fraction` of bins on each
// side; each side must sit within 2 Poisson sigma of the joint baseline or
// the offending edge is reported.
double integrate_delta_g2(const Histogram& h, double baseline_fraction = 0.1);

// CSV with '# key=value' metadata header rows, then 'tau_s,counts'.
// write(read(file)) is byte-identical.
void write_histogram_csv(const Histogram& h, std::ostream& out);
void write_histogram_csv(const Histogram& h, const std::string& path);
Histogram read_histogram_csv(std::istream& in);
Histogram read_histogram_csv_file(const std::string& path);

}  // namespace bfc
