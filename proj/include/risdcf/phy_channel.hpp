#pragma once

// Link-level channel model: Friis path loss, Nakagami-m fading, conventional and
// RIS-assisted SNR, Monte-Carlo ergodic rates and the RIS efficiency eta.
//
// All powers enter in dBm and are converted to linear units once, in
// link_budget(); everything downstream works in linear units.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "risdcf/errors.hpp"

namespace risdcf::phy {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s

struct ChannelParams {
    double frequency_hz = 5.8e9;
    double distance_m = 1000.0;  // every hop, node to node
    double nakagami_m = 2.5;
    double nakagami_omega = 1.0;
    double noise_power_dbm = -85.0;
    double transmit_power_dbm = 0.0;
    int num_elements = 16;

    double wavelength_m() const { return kSpeedOfLight / frequency_hz; }

    // Throws DomainError on any violated invariant, including the far-field
    // guard distance >= 10 * N * lambda.
    void validate() const;
};

// Linear-unit view of a validated ChannelParams.
struct LinkBudget {
    double wavelength_m;
    double distance_m;
    double path_loss_amplitude;  // lambda / (4 pi d)
    double snr_scale;            // P_s / N_0, linear
};

LinkBudget link_budget(const ChannelParams& params);

struct ChannelRealization {
    double direct_gain = 0.0;
    std::vector<double> sr_gains;
    std::vector<double> rd_gains;
    std::vector<double> sr_phases;
    std::vector<double> rd_phases;
    std::vector<double> ris_phases;

    std::size_t size() const { return sr_gains.size(); }
    // ShapeError if the six lists disagree in length; DomainError on a
    // negative or non-finite gain.
    void validate() const;
};

double dbm_to_watts(double dbm);

double path_loss_amplitude(double wavelength_m, double distance_m);

template <class Urbg>
double sample_nakagami_magnitude(double m, double omega, Urbg& rng) {
    if (!(m >= 0.5) || !(omega > 0.0)) {
        throw DomainError("nakagami parameters require m >= 0.5 and omega > 0");
    }
    std::gamma_distribution<double> power(m, omega / m);
    return std::sqrt(power(rng));
}

double snr_conventional(const ChannelParams& params, double direct_gain);

double snr_ris_general(const ChannelParams& params, const ChannelRealization& real);

// Ideal phase matching: theta_n = -(phi_n + omega_n). Phases in `real` are ignored.
double snr_ris_matched(const ChannelParams& params, const ChannelRealization& real);

// Per-sample random stream used by every Monte-Carlo estimator. Sample i of a
// run with seed s always sees the same stream, independent of N, the SNR model
// or the number of samples, which is what couples estimates across
// configurations (common random numbers).
std::mt19937_64 sample_stream(std::uint64_t seed, std::uint64_t sample_index);

// Draw order inside a sample: direct gain, then (sr_n, rd_n) for n = 1..N,
// then the phase triples. The gains of an N-element draw are therefore a
// prefix of those of any larger N.
ChannelRealization draw_realization(const ChannelParams& params, std::mt19937_64& rng);

enum class RateMode { Conventional, RisMatched, RisRandomPhase };

struct RateEstimate {
    double mean = 0.0;       // bits/s/Hz
    double std_error = 0.0;  // of the mean
    std::uint64_t samples = 0;
};

RateEstimate ergodic_rate_estimate(const ChannelParams& params, RateMode mode,
                                   std::uint64_t num_samples, std::uint64_t seed);

double ergodic_rate(const ChannelParams& params, RateMode mode, std::uint64_t num_samples,
                    std::uint64_t seed);

enum class RisSnrModel {
    Matched,
    RandomPhase,
    // Test hook: the "RIS" SNR of each sample is the conventional SNR of the
    // same sample, so eta must come out exactly 1.
    MirrorConventional,
};

struct EfficiencyEstimate {
    double eta = 0.0;
    RateEstimate ris;
    RateEstimate conventional;
};

EfficiencyEstimate ris_efficiency_estimate(const ChannelParams& params, std::uint64_t num_samples,
                                           std::uint64_t seed,
                                           RisSnrModel model = RisSnrModel::Matched);

double ris_efficiency(const ChannelParams& params, std::uint64_t num_samples, std::uint64_t seed,
                      RisSnrModel model = RisSnrModel::Matched);

// Payload airtime over the RIS link: T_data / eta.
double ris_transmission_time(double t_data_us, double eta);

}  // namespace risdcf::phy
