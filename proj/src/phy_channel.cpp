#include "risdcf/phy_channel.hpp"

#include <complex>
#include <numbers>

namespace risdcf::phy {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double log2_1p(double snr) { return std::log1p(snr) / std::numbers::ln2; }

// Welford accumulator for a sample mean and its standard error.
class MeanAccumulator {
public:
    void add(double x) {
        ++n_;
        const double delta = x - mean_;
        mean_ += delta / static_cast<double>(n_);
        m2_ += delta * (x - mean_);
    }

    RateEstimate estimate() const {
        RateEstimate out;
        out.mean = mean_;
        out.samples = n_;
        if (n_ > 1) {
            const double variance = m2_ / static_cast<double>(n_ - 1);
            out.std_error = std::sqrt(variance / static_cast<double>(n_));
        }
        return out;
    }

private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

double matched_amplitude_sum(const ChannelRealization& real) {
    double sum = 0.0;
    for (std::size_t n = 0; n < real.size(); ++n) {
        sum += real.sr_gains[n] * real.rd_gains[n];
    }
    return sum;
}

}  // namespace

void ChannelParams::validate() const {
    if (!(frequency_hz > 0.0)) throw DomainError("frequency_hz must be positive");
    if (!(distance_m > 0.0)) throw DomainError("distance_m must be positive");
    if (!(nakagami_m >= 0.5)) throw DomainError("nakagami_m must be >= 0.5");
    if (!(nakagami_omega > 0.0)) throw DomainError("nakagami_omega must be positive");
    if (num_elements < 1) throw DomainError("num_elements must be >= 1");
    if (!std::isfinite(noise_power_dbm) || !std::isfinite(transmit_power_dbm)) {
        throw DomainError("power levels must be finite");
    }
    const double far_field = 10.0 * num_elements * wavelength_m();
    if (distance_m < far_field) {
        throw DomainError("far-field condition violated: distance_m < 10 * N * wavelength");
    }
}

LinkBudget link_budget(const ChannelParams& params) {
    params.validate();
    LinkBudget budget{};
    budget.wavelength_m = params.wavelength_m();
    budget.distance_m = params.distance_m;
    budget.path_loss_amplitude = path_loss_amplitude(budget.wavelength_m, params.distance_m);
    budget.snr_scale = dbm_to_watts(params.transmit_power_dbm) / dbm_to_watts(params.noise_power_dbm);
    return budget;
}

void ChannelRealization::validate() const {
    const std::size_t n = sr_gains.size();
    if (rd_gains.size() != n || sr_phases.size() != n || rd_phases.size() != n ||
        ris_phases.size() != n) {
        throw ShapeError("channel realization lists differ in length");
    }
    auto bad = [](double g) { return !std::isfinite(g) || g < 0.0; };
    if (bad(direct_gain)) throw DomainError("direct gain must be finite and nonnegative");
    for (std::size_t i = 0; i < n; ++i) {
        if (bad(sr_gains[i]) || bad(rd_gains[i])) {
            throw DomainError("element gains must be finite and nonnegative");
        }
    }
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double path_loss_amplitude(double wavelength_m, double distance_m) {
    if (!(wavelength_m > 0.0) || !(distance_m > 0.0)) {
        throw DomainError("path loss requires positive wavelength and distance");
    }
    return wavelength_m / (4.0 * std::numbers::pi * distance_m);
}

double snr_conventional(const ChannelParams& params, double direct_gain) {
    if (!(direct_gain >= 0.0)) throw DomainError("direct gain must be nonnegative");
    const LinkBudget b = link_budget(params);
    return b.snr_scale * b.path_loss_amplitude * b.path_loss_amplitude * direct_gain * direct_gain;
}

double snr_ris_general(const ChannelParams& params, const ChannelRealization& real) {
    real.validate();
    const LinkBudget b = link_budget(params);
    const double d2 = b.distance_m * b.distance_m;
    std::complex<double> sum{0.0, 0.0};
    for (std::size_t n = 0; n < real.size(); ++n) {
        const double phase = real.sr_phases[n] + real.rd_phases[n] + real.ris_phases[n];
        sum += std::polar(real.sr_gains[n] * real.rd_gains[n] / d2, phase);
    }
    const double k = b.wavelength_m / (4.0 * std::numbers::pi);
    return b.snr_scale * k * k * k * k * std::norm(sum);
}

double snr_ris_matched(const ChannelParams& params, const ChannelRealization& real) {
    real.validate();
    const LinkBudget b = link_budget(params);
    const double a = b.path_loss_amplitude;
    const double s = matched_amplitude_sum(real);
    return b.snr_scale * a * a * a * a * s * s;
}

std::mt19937_64 sample_stream(std::uint64_t seed, std::uint64_t sample_index) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(~sample_index)));
}

ChannelRealization draw_realization(const ChannelParams& params, std::mt19937_64& rng) {
    const auto n = static_cast<std::size_t>(params.num_elements);
    const double m = params.nakagami_m;
    const double omega = params.nakagami_omega;

    ChannelRealization real;
    real.direct_gain = sample_nakagami_magnitude(m, omega, rng);
    real.sr_gains.resize(n);
    real.rd_gains.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        real.sr_gains[i] = sample_nakagami_magnitude(m, omega, rng);
        real.rd_gains[i] = sample_nakagami_magnitude(m, omega, rng);
    }
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    real.sr_phases.resize(n);
    real.rd_phases.resize(n);
    real.ris_phases.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        real.sr_phases[i] = phase(rng);
        real.rd_phases[i] = phase(rng);
        real.ris_phases[i] = phase(rng);
    }
    return real;
}

namespace {

// One pass over the per-sample streams; both SNRs of a sample come from the
// same draw.
template <class Fn>
void for_each_sample(const ChannelParams& params, std::uint64_t num_samples, std::uint64_t seed,
                     Fn&& fn) {
    for (std::uint64_t i = 0; i < num_samples; ++i) {
        auto rng = sample_stream(seed, i);
        fn(draw_realization(params, rng));
    }
}

// The hot loop skips re-validating params per sample; link_budget() already did.
struct SnrEvaluator {
    LinkBudget b;

    double conventional(const ChannelRealization& r) const {
        const double a = b.path_loss_amplitude;
        return b.snr_scale * a * a * r.direct_gain * r.direct_gain;
    }
    double matched(const ChannelRealization& r) const {
        const double a = b.path_loss_amplitude;
        const double s = matched_amplitude_sum(r);
        return b.snr_scale * a * a * a * a * s * s;
    }
    double random_phase(const ChannelRealization& r) const {
        const double d2 = b.distance_m * b.distance_m;
        std::complex<double> sum{0.0, 0.0};
        for (std::size_t n = 0; n < r.size(); ++n) {
            sum += std::polar(r.sr_gains[n] * r.rd_gains[n] / d2,
                              r.sr_phases[n] + r.rd_phases[n] + r.ris_phases[n]);
        }
        const double k = b.wavelength_m / (4.0 * std::numbers::pi);
        return b.snr_scale * k * k * k * k * std::norm(sum);
    }
};

}  // namespace

RateEstimate ergodic_rate_estimate(const ChannelParams& params, RateMode mode,
                                   std::uint64_t num_samples, std::uint64_t seed) {
    if (num_samples < 1) throw DomainError("num_samples must be >= 1");
    const SnrEvaluator eval{link_budget(params)};
    MeanAccumulator acc;
    for_each_sample(params, num_samples, seed, [&](const ChannelRealization& r) {
        double snr = 0.0;
        switch (mode) {
            case RateMode::Conventional: snr = eval.conventional(r); break;
            case RateMode::RisMatched: snr = eval.matched(r); break;
            case RateMode::RisRandomPhase: snr = eval.random_phase(r); break;
        }
        acc.add(log2_1p(snr));
    });
    return acc.estimate();
}

double ergodic_rate(const ChannelParams& params, RateMode mode, std::uint64_t num_samples,
                    std::uint64_t seed) {
    return ergodic_rate_estimate(params, mode, num_samples, seed).mean;
}

EfficiencyEstimate ris_efficiency_estimate(const ChannelParams& params, std::uint64_t num_samples,
                                           std::uint64_t seed, RisSnrModel model) {
    if (num_samples < 1) throw DomainError("num_samples must be >= 1");
    const SnrEvaluator eval{link_budget(params)};
    MeanAccumulator ris;
    MeanAccumulator conv;
    for_each_sample(params, num_samples, seed, [&](const ChannelRealization& r) {
        const double snr_c = eval.conventional(r);
        double snr_r = 0.0;
        switch (model) {
            case RisSnrModel::Matched: snr_r = eval.matched(r); break;
            case RisSnrModel::RandomPhase: snr_r = eval.random_phase(r); break;
            case RisSnrModel::MirrorConventional: snr_r = snr_c; break;
        }
        conv.add(log2_1p(snr_c));
        ris.add(log2_1p(snr_r));
    });

    EfficiencyEstimate out;
    out.ris = ris.estimate();
    out.conventional = conv.estimate();
    if (!(out.conventional.mean > 0.0)) {
        throw NumericalError("conventional ergodic rate estimate is zero; eta undefined");
    }
    out.eta = out.ris.mean / out.conventional.mean;
    return out;
}

double ris_efficiency(const ChannelParams& params, std::uint64_t num_samples, std::uint64_t seed,
                      RisSnrModel model) {
    return ris_efficiency_estimate(params, num_samples, seed, model).eta;
}

double ris_transmission_time(double t_data_us, double eta) {
    if (!(t_data_us > 0.0)) throw DomainError("t_data must be positive");
    if (!(eta > 0.0)) throw DomainError("eta must be positive");
    return t_data_us / eta;
}

}  // namespace risdcf::phy
