#include "chirplink/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include <doctest.h>

#include "chirplink/errors.hpp"
#include "chirplink/rng.hpp"
#include "oracles.hpp"

using namespace chirplink;

namespace {

constexpr double kPi = 3.14159265358979323846;

SampledWaveform wave(std::vector<double> samples, int sps, double rs = 70e9) {
  SampledWaveform x;
  x.samples = std::move(samples);
  x.samples_per_symbol = sps;
  x.symbol_rate = rs;
  return x;
}

ConverterConfig default_converter() { return ConverterConfig{}; }

// Coherent single-bin demodulation over an interior window whose length
// makes the tone an exact integer number of cycles.
struct ToneGain {
  double amplitude;
  double phase;
};

ToneGain demod(const std::vector<double>& y, double cycles_per_sample,
               std::size_t start, std::size_t len) {
  double re = 0.0, im = 0.0;
  for (std::size_t n = 0; n < len; ++n) {
    const double ang = 2.0 * kPi * cycles_per_sample * double(start + n);
    re += y[start + n] * std::cos(ang);
    im += y[start + n] * std::sin(ang);
  }
  re *= 2.0 / double(len);
  im *= 2.0 / double(len);
  return {std::hypot(re, im), std::atan2(-im, re)};
}

}  // namespace

TEST_CASE("smooth quantizer fixes code multiples and the origin") {
  const ConverterConfig cfg = default_converter();
  const double delta = kFullScale / 32.0;
  CHECK(smooth_quantize_scalar(0.0, cfg.bits, cfg.fourier_order) == 0.0);
  for (int m = -32; m <= 32; ++m) {
    // Multiples of delta/2 are fixed points: every sine argument is a
    // multiple of pi there (riser corners and tread centers alike).
    const double x = m * delta / 2.0;
    CHECK(std::abs(smooth_quantize_scalar(x, cfg.bits, cfg.fourier_order) - x) <
          1e-13);
  }
}

TEST_CASE("smooth quantizer evaluates the truncated series") {
  const ConverterConfig cfg = default_converter();
  const double delta = kFullScale / 32.0;
  // Direct evaluation of the two-harmonic series at delta/4.
  const double expected = delta / 4.0 + (delta / kPi) * std::sin(kPi / 2.0) +
                          (delta / (2.0 * kPi)) * std::sin(kPi);
  CHECK(smooth_quantize_scalar(delta / 4.0, cfg.bits, cfg.fourier_order) ==
        doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("smooth quantizer is odd, clips, and repeats across code steps") {
  const ConverterConfig cfg = default_converter();
  const double delta = kFullScale / 32.0;
  RngStream rng(3, "quantizer-prop");
  for (int t = 0; t < 500; ++t) {
    const double x = rng.uniform(-0.5, 0.5);
    const double q = smooth_quantize_scalar(x, cfg.bits, cfg.fourier_order);
    CHECK(std::abs(smooth_quantize_scalar(-x, cfg.bits, cfg.fourier_order) + q) <
          1e-15);
    if (x < 0.5 - delta)
      CHECK(std::abs(smooth_quantize_scalar(x + delta, cfg.bits,
                                            cfg.fourier_order) -
                     (q + delta)) < 1e-13);
    // Quantization error stays below the truncated-series bound
    // (delta/pi)(1 + 1/2), a little under half an LSB above the ideal.
    CHECK(std::abs(q - x) < 0.48 * delta);
  }
  // Out of range hard-clips to the rails first.
  CHECK(smooth_quantize_scalar(0.7, cfg.bits, cfg.fourier_order) ==
        smooth_quantize_scalar(0.5, cfg.bits, cfg.fourier_order));
  CHECK(smooth_quantize_scalar(-3.0, cfg.bits, cfg.fourier_order) ==
        smooth_quantize_scalar(-0.5, cfg.bits, cfg.fourier_order));
  // Code-step granularity is where monotonicity is exact.
  double prev = smooth_quantize_scalar(-16 * delta, cfg.bits, cfg.fourier_order);
  for (int m = -15; m <= 16; ++m) {
    const double q = smooth_quantize_scalar(m * delta, cfg.bits, cfg.fourier_order);
    CHECK(q > prev);
    prev = q;
  }
}

TEST_CASE("resampling repeats and decimates with aligned phase") {
  const SampledWaveform x = wave({1.0, 2.0}, 2);
  const SampledWaveform up = resample(x, 4);
  REQUIRE(up.samples.size() == 4);
  CHECK(up.samples == std::vector<double>{1.0, 1.0, 2.0, 2.0});
  CHECK(up.samples_per_symbol == 4);

  const SampledWaveform back = resample(up, 2);
  CHECK(back.samples == x.samples);

  SampledWaveform impulse = wave({1.0, 0.0, 0.0, 0.0}, 2);
  const SampledWaveform imp4 = resample(impulse, 4);
  CHECK(imp4.samples == std::vector<double>{1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0});

  RngStream rng(4, "resample-prop");
  SampledWaveform r = wave(rng.normal_vec(64), 2);
  CHECK(resample(resample(r, 4), 2).samples == r.samples);
  CHECK_THROWS_AS(resample(r, 3), IncompatibleRates);
}

TEST_CASE("super-Gaussian low-pass hits its design points") {
  const ConverterConfig cfg = default_converter();
  const double cutoff_per_fs = cfg.lpf_cutoff_ratio / 4.0;  // 17/80 at 4 SpS

  SampledWaveform dc = wave(std::vector<double>(1024, 1.0), 4);
  const SampledWaveform dc_out = supergaussian_lpf(dc, cfg);
  for (std::size_t k = 100; k < 924; ++k)
    CHECK(dc_out.samples[k] == doctest::Approx(1.0).epsilon(1e-6));

  const std::size_t n = 4096;
  std::vector<double> tone(n), slow(n);
  for (std::size_t k = 0; k < n; ++k) {
    tone[k] = std::cos(2.0 * kPi * cutoff_per_fs * double(k));
    slow[k] = std::cos(2.0 * kPi * 0.02 * double(k));
  }
  const SampledWaveform cut_out = supergaussian_lpf(wave(tone, 4), cfg);
  const ToneGain at_cut = demod(cut_out.samples, cutoff_per_fs, 448, 3200);
  CHECK(at_cut.amplitude == doctest::Approx(0.5).epsilon(0.02));
  CHECK(std::abs(at_cut.phase) < 1e-6);  // zero phase, no group delay

  const SampledWaveform slow_out = supergaussian_lpf(wave(slow, 4), cfg);
  const ToneGain at_slow = demod(slow_out.samples, 0.02, 448, 3200);
  CHECK(at_slow.amplitude == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("current scaling is the documented affine map") {
  const DriveWaveform flat = current_scale(wave({0.0, 0.0, 0.0, 0.0}, 4), 20.0, 30.0);
  for (double c : flat.current) CHECK(c == doctest::Approx(30e-3).epsilon(1e-15));

  const DriveWaveform rect =
      current_scale(wave({-0.5, 0.5, -0.5, 0.5}, 4), 20.0, 30.0);
  CHECK(rect.current[0] == doctest::Approx(20e-3));
  CHECK(rect.current[1] == doctest::Approx(40e-3));

  const DriveWaveform pam = current_scale(
      wave({-0.5, -1.0 / 6.0, 1.0 / 6.0, 0.5}, 4), 12.0, 30.0);
  CHECK(pam.current[0] == doctest::Approx(24e-3));
  CHECK(pam.current[1] == doctest::Approx(28e-3));
  CHECK(pam.current[2] == doctest::Approx(32e-3));
  CHECK(pam.current[3] == doctest::Approx(36e-3));

  RngStream rng(5, "scale-prop");
  std::vector<double> s = rng.normal_vec(64);
  for (double& v : s) v = std::clamp(v * 0.2, -0.5, 0.5);
  const DriveWaveform once = current_scale(wave(s, 4), 7.0, 30.0);
  const DriveWaveform twice = current_scale(wave(s, 4), 14.0, 30.0);
  for (std::size_t k = 0; k < s.size(); ++k)
    CHECK(std::abs((twice.current[k] - 30e-3) -
                   2.0 * (once.current[k] - 30e-3)) < 2e-17);

  CHECK_THROWS_AS(current_scale(wave({-0.5, 0.5}, 2), 80.0, 30.0), NegativeCurrent);
}

namespace {

// margin > fir_length / 2 zeroes both ends, so the full linear response of
// the finite-support input fits inside the length-preserving output window.
ComplexField random_field(std::size_t n, double sample_rate, std::uint64_t seed,
                          bool bandlimit = false, std::size_t margin = 0) {
  RngStream rng(seed, "field-gen");
  ComplexField f;
  f.sample_period = 1.0 / sample_rate;
  f.amplitude.resize(n);
  f.phase.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const bool active = k >= margin && k < n - margin;
    f.amplitude[k] = active ? 0.03 + 0.01 * rng.uniform() : 0.0;
    f.phase[k] = active ? rng.uniform(-kPi, kPi) : 0.0;
  }
  if (bandlimit) {
    // Smooth both quadratures so the spectrum concentrates in-band.
    std::vector<double> re(n), im(n);
    for (std::size_t k = 0; k < n; ++k) {
      re[k] = f.amplitude[k] * std::cos(f.phase[k]);
      im[k] = f.amplitude[k] * std::sin(f.phase[k]);
    }
    const std::vector<double> kernel = {0.25, 0.5, 0.25};
    re = convolve_same(re, kernel);
    im = convolve_same(im, kernel);
    for (std::size_t k = 0; k < n; ++k) {
      f.amplitude[k] = std::hypot(re[k], im[k]);
      f.phase[k] = std::atan2(im[k], re[k]);
    }
  }
  return f;
}

double field_energy(const ComplexField& f) {
  double e = 0.0;
  for (double a : f.amplitude) e += a * a;
  return e;
}

}  // namespace

TEST_CASE("zero dispersion is the identity") {
  FiberConfig cfg;
  cfg.dispersion_ps_per_nm = 0.0;
  const ComplexField in = random_field(4096, 4 * 70e9, 21);
  const ComplexField out = fiber_dispersion(in, cfg);
  for (std::size_t k = 0; k < in.amplitude.size(); ++k) {
    const std::complex<double> zi =
        in.amplitude[k] * std::complex<double>(std::cos(in.phase[k]),
                                               std::sin(in.phase[k]));
    const std::complex<double> zo =
        out.amplitude[k] * std::complex<double>(std::cos(out.phase[k]),
                                                std::sin(out.phase[k]));
    CHECK(std::abs(zo - zi) < 1e-12);
  }
}

TEST_CASE("dispersion conserves energy to the all-pass budget") {
  const FiberConfig cfg;
  for (double rate : {70e9, 80e9, 90e9}) {
    for (std::uint64_t seed : {22u, 23u}) {
      const ComplexField in =
          random_field(8192, 4 * rate, seed, false, std::size_t(cfg.fir_length));
      const ComplexField out = fiber_dispersion(in, cfg);
      const double ratio = field_energy(out) / field_energy(in);
      CHECK(std::abs(ratio - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("dispersion rotates a complex tone by the quadratic phase") {
  const FiberConfig cfg;
  const double rate = 70e9;
  const double fs = 4 * rate;
  const std::size_t n = 8192;
  const double f0 = 0.15 * fs;  // well inside the exact-phase band

  ComplexField in;
  in.sample_period = 1.0 / fs;
  in.amplitude.assign(n, 1.0);
  in.phase.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    in.phase[k] = std::remainder(2.0 * kPi * (f0 / fs) * double(k), 2.0 * kPi);
  const ComplexField out = fiber_dispersion(in, cfg);

  const double lambda0 = cfg.wavelength_nm * 1e-9;
  const double d_acc = cfg.dispersion_ps_per_nm * 1e-3;
  const double expected =
      -kPi * lambda0 * lambda0 * d_acc * f0 * f0 / 299792458.0;
  for (std::size_t k = 1024; k < n - 1024; k += 251) {
    const double got = std::remainder(out.phase[k] - in.phase[k], 2.0 * kPi);
    CHECK(std::abs(got - std::remainder(expected, 2.0 * kPi)) < 1e-9);
    CHECK(out.amplitude[k] == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("opposite dispersion inverts the fiber") {
  FiberConfig fwd;
  FiberConfig bwd;
  bwd.dispersion_ps_per_nm = -fwd.dispersion_ps_per_nm;
  const ComplexField in = random_field(8192, 4 * 90e9, 24, true);
  const ComplexField round = fiber_dispersion(fiber_dispersion(in, fwd), bwd);

  double err = 0.0, ref = 0.0;
  for (std::size_t k = 1024; k < in.amplitude.size() - 1024; ++k) {
    const std::complex<double> zi =
        in.amplitude[k] * std::complex<double>(std::cos(in.phase[k]),
                                               std::sin(in.phase[k]));
    const std::complex<double> zr =
        round.amplitude[k] * std::complex<double>(std::cos(round.phase[k]),
                                                  std::sin(round.phase[k]));
    err += std::norm(zr - zi);
    ref += std::norm(zi);
  }
  CHECK(std::sqrt(err / ref) < 1e-6);
}

TEST_CASE("too short a dispersion FIR is rejected") {
  FiberConfig cfg;
  cfg.fir_length = 3;
  const ComplexField in = random_field(1024, 4 * 70e9, 25);
  CHECK_THROWS_AS(fiber_dispersion(in, cfg), TruncationError);
}

TEST_CASE("photodetection squares the field and adds frozen noise") {
  NoiseCalibration cal;
  cal.sigma = 1e-300;  // negligible against any real power level
  cal.reference_snr_db = 20.0;
  cal.reference_ipp_ma = 20.0;

  const ComplexField in = random_field(1024, 4 * 70e9, 26);
  const SampledWaveform clean = photodetect(in, cal, 1);
  for (std::size_t k = 0; k < in.amplitude.size(); ++k)
    CHECK(clean.samples[k] == in.amplitude[k] * in.amplitude[k]);

  NoiseCalibration uncal;
  CHECK_THROWS_AS(photodetect(in, uncal, 1), NotCalibrated);

  cal.sigma = 2.5e-4;
  const SampledWaveform a = photodetect(in, cal, 7, 3);
  const SampledWaveform b = photodetect(in, cal, 7, 3);
  CHECK(a.samples == b.samples);
  const SampledWaveform c = photodetect(in, cal, 7, 4);
  CHECK(a.samples != c.samples);

  ComplexField dark;
  dark.sample_period = 1.0 / (4 * 70e9);
  dark.amplitude.assign(1u << 20, 0.0);
  dark.phase.assign(1u << 20, 0.0);
  const SampledWaveform noise = photodetect(dark, cal, 8);
  double mean = 0.0;
  for (double v : noise.samples) mean += v;
  mean /= double(noise.samples.size());
  double var = 0.0;
  for (double v : noise.samples) var += (v - mean) * (v - mean);
  var /= double(noise.samples.size());
  CHECK(var == doctest::Approx(cal.sigma * cal.sigma).epsilon(0.005));

  ComplexField flat;
  flat.sample_period = dark.sample_period;
  flat.amplitude.assign(1u << 20, 0.03);
  flat.phase.assign(1u << 20, 0.0);
  const SampledWaveform detected = photodetect(flat, cal, 9);
  double dmean = 0.0;
  for (double v : detected.samples) dmean += v;
  dmean /= double(detected.samples.size());
  CHECK(std::abs(dmean - 0.03 * 0.03) <
        3.0 * cal.sigma / std::sqrt(double(detected.samples.size())));
}

TEST_CASE("RF power is the std of the power waveform in dBm") {
  SampledWaveform constant = wave(std::vector<double>(256, 2e-3), 4);
  CHECK_THROWS_AS(measure_prf_dbm(constant), DegenerateInput);

  std::vector<double> two_level(1024);
  for (std::size_t k = 0; k < two_level.size(); ++k)
    two_level[k] = 5e-3 + (k % 2 ? 1e-3 : -1e-3);
  CHECK(measure_prf_dbm(wave(two_level, 4)) == doctest::Approx(0.0).epsilon(1e-12));

  for (double& v : two_level) v = 5e-3 + (&v - two_level.data()) % 2 * 2 * 0.631e-3;
  CHECK(measure_prf_dbm(wave(two_level, 4)) == doctest::Approx(-2.0).epsilon(0.005));
}

TEST_CASE("noise calibration freezes sigma at the reference SNR") {
  LinkConfig link;
  link.symbol_rate_gbd = 70.0;
  link.seed = 99;
  link.laser = oracles::default_laser();

  const NoiseCalibration cal20 = calibrate_noise(link);
  CHECK(cal20.calibrated());

  LinkConfig link0 = link;
  link0.noise.snr_db = 0.0;
  const NoiseCalibration cal0 = calibrate_noise(link0);
  CHECK(cal0.sigma == doctest::Approx(10.0 * cal20.sigma).epsilon(1e-12));

  // Recomputed SNR on the reference run comes back at the target.
  RngStream rng(link.seed, "noise-calibration");
  const SampledWaveform tx = rect_pam_waveform(rng.symbols(8192), 70e9, 4);
  const DriveWaveform drive = current_scale(tx, 20.0, 30.0);
  const RateTrajectory traj = integrate_rate_equations(drive, link.laser);
  const ComplexField field =
      fiber_dispersion(field_from_trajectory(traj, link.laser), link.fiber);
  std::vector<double> power(field.amplitude.begin() + 512,
                            field.amplitude.end() - 512);
  for (double& v : power) v *= v;
  double mean = 0.0;
  for (double v : power) mean += v;
  mean /= double(power.size());
  double var = 0.0;
  for (double v : power) var += (v - mean) * (v - mean);
  var /= double(power.size());
  const double snr_db = 10.0 * std::log10(var / (cal20.sigma * cal20.sigma));
  CHECK(snr_db == doctest::Approx(20.0).epsilon(0.005));
}

TEST_CASE("AGC centers and rescales without shape change") {
  RngStream rng(6, "agc-prop");
  SampledWaveform x = wave(rng.normal_vec(512), 4);
  const SampledWaveform y = agc_normalize(x, 0.16);
  double mean = 0.0;
  for (double v : y.samples) mean += v;
  CHECK(std::abs(mean / 512.0) < 1e-15);
  double var = 0.0;
  for (double v : y.samples) var += v * v;
  CHECK(std::sqrt(var / 512.0) == doctest::Approx(0.16).epsilon(1e-12));

  SampledWaveform shifted = x;
  for (double& v : shifted.samples) v = 3.0 * v + 0.7;
  const SampledWaveform z = agc_normalize(shifted, 0.16);
  for (std::size_t k = 0; k < z.samples.size(); ++k)
    CHECK(std::abs(z.samples[k] - y.samples[k]) < 1e-12);
}
