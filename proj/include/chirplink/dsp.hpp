#ifndef CHIRPLINK_DSP_HPP
#define CHIRPLINK_DSP_HPP

#include <complex>
#include <cstdint>
#include <vector>

#include "chirplink/config.hpp"
#include "chirplink/laser.hpp"

namespace chirplink {

/// Normalized full scale of both converters: the interval [-0.5, +0.5].
inline constexpr double kFullScale = 1.0;

struct SampledWaveform {
  std::vector<double> samples;
  int samples_per_symbol = 1;
  double symbol_rate = 0.0;  // baud

  double sample_rate() const { return symbol_rate * samples_per_symbol; }
  void validate() const;  // sps in {1, 2, 4}, length divisible by sps
};

struct NoiseCalibration {
  double sigma = -1.0;  // W, std of the additive power-domain noise
  double reference_snr_db = 0.0;
  double reference_ipp_ma = 0.0;
  bool calibrated() const { return sigma > 0.0; }
};

// Smooth stand-in for the mid-rise quantizer: the staircase's Fourier
// expansion truncated after cfg.fourier_order harmonics,
//   Q(x) = x + sum_k (delta / (k pi)) sin(2 pi k x / delta),
// delta = kFullScale / 2^bits. Inputs are hard-clipped to full scale
// first. Q is odd, fixes every multiple of delta and repeats across code
// steps; the truncation ripples between steps (Gibbs), so exact
// monotonicity holds at code-step granularity, not pointwise.
SampledWaveform smooth_quantize(const SampledWaveform& x,
                                const ConverterConfig& cfg);
double smooth_quantize_scalar(double x, int bits, int fourier_order);

// Zero-order-hold upsampling / keep-first-of-group downsampling between
// the {1, 2, 4} SpS rates. Throws IncompatibleRates otherwise.
SampledWaveform resample(const SampledWaveform& x, int target_sps);

// Super-Gaussian low-pass |H(f)| = exp(-ln2 (f/fc)^(2 order)) with
// fc = lpf_cutoff_ratio * symbol rate, realized as a zero-phase FIR.
// Taps come from an inverse DFT of the sampled response, truncated to the
// shortest odd length capturing 1 - 1e-8 of the kernel energy (far past
// the 99.9% budget) and normalized to unit sum for exact DC gain.
std::vector<double> supergaussian_taps(const ConverterConfig& cfg,
                                       int samples_per_symbol);
SampledWaveform supergaussian_lpf(const SampledWaveform& x,
                                  const ConverterConfig& cfg);

// Zero-phase FIR with centered taps (odd length), zero-padded edges,
// output length preserved.
std::vector<double> convolve_same(const std::vector<double>& x,
                                  const std::vector<double>& taps);

// current[k] = ibias + ipp * x[k], milliamps in, amps out. Throws
// NegativeCurrent when the combination would drive the laser negative.
DriveWaveform current_scale(const SampledWaveform& x, double ipp_ma,
                            double ibias_ma);

// Truncated complex FIR for the all-pass dispersion response
// H(f) = exp(-j pi lambda0^2 D_acc f^2 / c). The quadratic phase is kept
// exact for |f| <= 0.6 of Nyquist (the signal band ends well below) and
// tapered to zero at Nyquist by a bump window, so the periodized phase is
// smooth to all orders and the tap tail decays fast enough that the
// truncated response stays all-pass to ~1e-12 pointwise. Taps are
// centered (zero group delay). Throws TruncationError if the truncation
// captures < 99.99% of the kernel energy.
std::vector<std::complex<double>> fiber_kernel(const FiberConfig& cfg,
                                               double sample_rate);
ComplexField fiber_dispersion(const ComplexField& field, const FiberConfig& cfg);

// Square-law detection plus frozen additive Gaussian noise in the power
// domain; the phase is discarded. Reproducible via (seed, stream_index).
SampledWaveform photodetect(const ComplexField& field, const NoiseCalibration& cal,
                            std::uint64_t seed, std::uint64_t stream_index = 0,
                            int samples_per_symbol = 4);

// std of the (noise-free, transient-trimmed) received power, in dBm;
// population normalization (divide by N).
double measure_prf_dbm(const SampledWaveform& power);

// Runs the reference transmitter (equispaced rectangular 4PAM at the
// reference ipp/ibias) through the laser oracle and the fiber, then sets
// sigma so the power waveform's std over sigma matches the target SNR.
// The result is frozen for every ipp in the experiment.
NoiseCalibration calibrate_noise(const LinkConfig& link);

// Removes the mean and rescales to the target std so the ADC quantizer
// sees a consistent loading regardless of drive settings.
SampledWaveform agc_normalize(const SampledWaveform& x, double target_std);

// Rectangular PAM waveform from symbol indices: level per symbol held for
// samples_per_symbol samples. Levels are the equispaced 4PAM set
// {-1/2, -1/6, +1/6, +1/2} scaled to full scale.
SampledWaveform rect_pam_waveform(const std::vector<int>& symbols,
                                  double symbol_rate, int samples_per_symbol);
extern const double kPam4Levels[4];

}  // namespace chirplink

#endif  // CHIRPLINK_DSP_HPP
