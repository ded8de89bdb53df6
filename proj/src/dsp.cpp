#include "chirplink/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "chirplink/errors.hpp"
#include "chirplink/rng.hpp"

namespace chirplink {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kLightSpeed = 299792458.0;  // m/s
constexpr int kLpfDesignGrid = 4096;
constexpr double kFiberEdgeBlend = 0.6;  // fraction of Nyquist kept exact
constexpr std::size_t kCalibrationSymbols = 8192;

using cplx = std::complex<double>;

void fft_inplace(std::vector<cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
    const cplx wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (std::size_t k = 0; k + k < len; ++k) {
        const cplx u = a[i + k];
        const cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse)
    for (auto& z : a) z /= static_cast<double>(n);
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Linear convolution with centered odd-length complex taps, same length.
std::vector<cplx> fft_convolve_same(const std::vector<cplx>& x,
                                    const std::vector<cplx>& taps) {
  const std::size_t n = x.size();
  const std::size_t l = taps.size();
  const std::size_t half = l / 2;
  const std::size_t m = next_pow2(n + l - 1);
  std::vector<cplx> fx(m, cplx(0.0)), fh(m, cplx(0.0));
  std::copy(x.begin(), x.end(), fx.begin());
  std::copy(taps.begin(), taps.end(), fh.begin());
  fft_inplace(fx, false);
  fft_inplace(fh, false);
  for (std::size_t i = 0; i < m; ++i) fx[i] *= fh[i];
  fft_inplace(fx, true);
  std::vector<cplx> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = fx[i + half];
  return y;
}

}  // namespace

void SampledWaveform::validate() const {
  if (samples_per_symbol != 1 && samples_per_symbol != 2 && samples_per_symbol != 4)
    throw IncompatibleRates("samples_per_symbol must be 1, 2 or 4, got " +
                            std::to_string(samples_per_symbol));
  if (!(symbol_rate > 0.0))
    throw ConfigError("waveform symbol_rate must be positive");
  if (samples.size() % static_cast<std::size_t>(samples_per_symbol) != 0)
    throw LengthMismatch("waveform length not divisible by samples_per_symbol");
}

double smooth_quantize_scalar(double x, int bits, int fourier_order) {
  const double clipped = std::clamp(x, -0.5 * kFullScale, 0.5 * kFullScale);
  const double delta = kFullScale / static_cast<double>(1 << bits);
  double q = clipped;
  for (int k = 1; k <= fourier_order; ++k)
    q += delta / (k * kPi) * std::sin(2.0 * kPi * k * clipped / delta);
  return q;
}

SampledWaveform smooth_quantize(const SampledWaveform& x, const ConverterConfig& cfg) {
  x.validate();
  SampledWaveform y = x;
  for (double& v : y.samples)
    v = smooth_quantize_scalar(v, cfg.bits, cfg.fourier_order);
  return y;
}

SampledWaveform resample(const SampledWaveform& x, int target_sps) {
  x.validate();
  if (target_sps != 1 && target_sps != 2 && target_sps != 4)
    throw IncompatibleRates("target samples_per_symbol must be 1, 2 or 4");
  if (target_sps == x.samples_per_symbol) return x;

  SampledWaveform y;
  y.symbol_rate = x.symbol_rate;
  y.samples_per_symbol = target_sps;
  if (target_sps > x.samples_per_symbol) {
    const int ratio = target_sps / x.samples_per_symbol;
    y.samples.reserve(x.samples.size() * ratio);
    for (double v : x.samples)
      for (int r = 0; r < ratio; ++r) y.samples.push_back(v);
  } else {
    const int ratio = x.samples_per_symbol / target_sps;
    y.samples.reserve(x.samples.size() / ratio);
    for (std::size_t k = 0; k < x.samples.size(); k += ratio)
      y.samples.push_back(x.samples[k]);
  }
  return y;
}

std::vector<double> supergaussian_taps(const ConverterConfig& cfg,
                                       int samples_per_symbol) {
  const int n = kLpfDesignGrid;
  const double cutoff_per_fs =
      cfg.lpf_cutoff_ratio / static_cast<double>(samples_per_symbol);
  std::vector<cplx> h(n);
  for (int m = 0; m < n; ++m) {
    const double u = (m <= n / 2 ? m : m - n) / static_cast<double>(n);
    h[m] = std::exp(-std::log(2.0) *
                    std::pow(std::abs(u) / cutoff_per_fs, 2.0 * cfg.lpf_order));
  }
  fft_inplace(h, true);

  const auto tap = [&](int lag) { return h[(lag + n) % n].real(); };
  double total = 0.0;
  for (const cplx& z : h) total += z.real() * z.real();
  double captured = tap(0) * tap(0);
  int half = 0;
  while (captured < (1.0 - 1e-8) * total && half < n / 4) {
    ++half;
    captured += tap(half) * tap(half) + tap(-half) * tap(-half);
  }
  std::vector<double> taps(2 * half + 1);
  double sum = 0.0;
  for (int lag = -half; lag <= half; ++lag) sum += taps[lag + half] = tap(lag);
  for (double& t : taps) t /= sum;
  return taps;
}

std::vector<double> convolve_same(const std::vector<double>& x,
                                  const std::vector<double>& taps) {
  if (taps.size() % 2 == 0) throw ShapeMismatch("centered FIR needs odd length");
  const int half = static_cast<int>(taps.size()) / 2;
  const int n = static_cast<int>(x.size());
  std::vector<double> y(x.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    const int lo = std::max(-half, i - n + 1);
    const int hi = std::min(half, i);
    for (int lag = lo; lag <= hi; ++lag) acc += taps[lag + half] * x[i - lag];
    y[i] = acc;
  }
  return y;
}

SampledWaveform supergaussian_lpf(const SampledWaveform& x, const ConverterConfig& cfg) {
  x.validate();
  if (x.samples_per_symbol != 4)
    throw IncompatibleRates("the analog-domain low-pass runs at 4 SpS");
  SampledWaveform y = x;
  y.samples = convolve_same(x.samples, supergaussian_taps(cfg, x.samples_per_symbol));
  return y;
}

DriveWaveform current_scale(const SampledWaveform& x, double ipp_ma, double ibias_ma) {
  x.validate();
  DriveWaveform drive;
  drive.sample_period = 1.0 / x.sample_rate();
  drive.current.reserve(x.samples.size());
  double lowest = ibias_ma;
  for (double v : x.samples) {
    const double ma = ibias_ma + ipp_ma * v;
    lowest = std::min(lowest, ma);
    drive.current.push_back(ma * 1e-3);
  }
  if (lowest < 0.0)
    throw NegativeCurrent("ipp " + std::to_string(ipp_ma) + " mA around ibias " +
                          std::to_string(ibias_ma) + " mA dips to " +
                          std::to_string(lowest) + " mA");
  return drive;
}

namespace {

// Kernel phase: exact quadratic in-band, tapered to zero at Nyquist by a
// bump-function window so the periodized phase is smooth to all orders and
// the tap tail decays fast enough for a short truncation. The window never
// touches |f| <= kFiberEdgeBlend * Nyquist, well clear of the signal band.
double bump_step(double s) {  // 0 at s<=0, 1 at s>=1, C-infinity
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / s);
  const double b = std::exp(-1.0 / (1.0 - s));
  return a / (a + b);
}

double fiber_phase(double f, double b, double f_edge, double f_nyq) {
  const double af = std::abs(f);
  if (af <= f_edge) return -b * f * f;
  const double s = (af - f_edge) / (f_nyq - f_edge);
  return -b * f * f * (1.0 - bump_step(s));
}

}  // namespace

std::vector<cplx> fiber_kernel(const FiberConfig& cfg, double sample_rate) {
  const int n = cfg.design_grid;
  const double lambda0 = cfg.wavelength_nm * 1e-9;
  const double d_acc = cfg.dispersion_ps_per_nm * 1e-3;  // s/m
  const double b = kPi * lambda0 * lambda0 * d_acc / kLightSpeed;
  const double f_nyq = 0.5 * sample_rate;
  const double f_edge = kFiberEdgeBlend * f_nyq;

  std::vector<cplx> h(n);
  for (int m = 0; m < n; ++m) {
    const double f = (m <= n / 2 ? m : m - n) * sample_rate / n;
    const double phi = fiber_phase(f, b, f_edge, f_nyq);
    h[m] = cplx(std::cos(phi), std::sin(phi));
  }
  fft_inplace(h, true);

  const int half = cfg.fir_length / 2;
  std::vector<cplx> taps(cfg.fir_length);
  double captured = 0.0;
  for (int lag = -half; lag <= half; ++lag) {
    const cplx t = h[(lag + n) % n];
    taps[lag + half] = t;
    captured += std::norm(t);
  }
  // Parseval: the untruncated kernel has unit energy since |H| = 1.
  if (captured < 0.9999)
    throw TruncationError("dispersion FIR of length " +
                          std::to_string(cfg.fir_length) + " captures only " +
                          std::to_string(captured * 100.0) + "% of the kernel energy");
  return taps;
}

ComplexField fiber_dispersion(const ComplexField& field, const FiberConfig& cfg) {
  const std::size_t n = field.amplitude.size();
  if (n == 0) throw DegenerateInput("empty field");
  if (field.phase.size() != n)
    throw LengthMismatch("field amplitude/phase length mismatch");
  if (!(field.sample_period > 0.0))
    throw ConfigError("field sample_period must be positive");

  const std::vector<cplx> taps = fiber_kernel(cfg, 1.0 / field.sample_period);
  std::vector<cplx> z(n);
  for (std::size_t k = 0; k < n; ++k)
    z[k] = field.amplitude[k] *
           cplx(std::cos(field.phase[k]), std::sin(field.phase[k]));
  const std::vector<cplx> y = fft_convolve_same(z, taps);

  ComplexField out;
  out.sample_period = field.sample_period;
  out.amplitude.resize(n);
  out.phase.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.amplitude[k] = std::abs(y[k]);
    out.phase[k] = std::atan2(y[k].imag(), y[k].real());
  }
  return out;
}

SampledWaveform photodetect(const ComplexField& field, const NoiseCalibration& cal,
                            std::uint64_t seed, std::uint64_t stream_index,
                            int samples_per_symbol) {
  if (!cal.calibrated())
    throw NotCalibrated("photodetector noise has not been calibrated");
  const std::size_t n = field.amplitude.size();
  if (n == 0) throw DegenerateInput("empty field");

  RngStream rng(seed, "photodetect-noise", stream_index);
  SampledWaveform p;
  p.samples_per_symbol = samples_per_symbol;
  p.symbol_rate = 1.0 / (field.sample_period * samples_per_symbol);
  p.samples.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    p.samples[k] = field.amplitude[k] * field.amplitude[k] + cal.sigma * rng.normal();
  return p;
}

double measure_prf_dbm(const SampledWaveform& power) {
  const std::size_t n = power.samples.size();
  if (n == 0) throw DegenerateInput("empty power waveform");
  double mean = 0.0;
  for (double v : power.samples) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : power.samples) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double sd = std::sqrt(var);
  // Relative floor: accumulation rounding leaves a constant waveform with
  // a tiny nonzero variance, which is still degenerate for a dBm reading.
  if (!(sd > 1e-12 * std::max(std::abs(mean), 1e-300)))
    throw DegenerateInput("power waveform has zero standard deviation");
  return 10.0 * std::log10(sd / 1e-3);
}

NoiseCalibration calibrate_noise(const LinkConfig& link) {
  RngStream rng(link.seed, "noise-calibration");
  const SampledWaveform tx = rect_pam_waveform(
      rng.symbols(kCalibrationSymbols), link.symbol_rate_hz(), link.samples_per_symbol);
  const DriveWaveform drive =
      current_scale(tx, link.noise.reference_ipp_ma, link.noise.reference_ibias_ma);
  const RateTrajectory traj =
      integrate_rate_equations(drive, link.laser, {link.solver.rel_tol,
                                                   link.solver.abs_tol});
  const ComplexField field =
      fiber_dispersion(field_from_trajectory(traj, link.laser), link.fiber);

  // Noise-free received power, solver transient and fiber edges trimmed.
  const std::size_t guard =
      std::max(kTransientSamples, static_cast<std::size_t>(link.fiber.fir_length / 2));
  if (field.amplitude.size() < 4 * guard)
    throw DegenerateInput("calibration run too short for the trim guards");
  SampledWaveform power;
  power.samples_per_symbol = link.samples_per_symbol;
  power.symbol_rate = link.symbol_rate_hz();
  power.samples.assign(field.amplitude.begin() + guard, field.amplitude.end() - guard);
  for (double& v : power.samples) v *= v;
  const std::size_t keep =
      power.samples.size() -
      power.samples.size() % static_cast<std::size_t>(link.samples_per_symbol);
  power.samples.resize(keep);

  const double prf_dbm = measure_prf_dbm(power);
  const double std_ref = 1e-3 * std::pow(10.0, prf_dbm / 10.0);
  NoiseCalibration cal;
  cal.reference_snr_db = link.noise.snr_db;
  cal.reference_ipp_ma = link.noise.reference_ipp_ma;
  cal.sigma = std_ref / std::pow(10.0, link.noise.snr_db / 20.0);
  return cal;
}

SampledWaveform agc_normalize(const SampledWaveform& x, double target_std) {
  x.validate();
  const std::size_t n = x.samples.size();
  if (n == 0) throw DegenerateInput("empty waveform");
  double mean = 0.0;
  for (double v : x.samples) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x.samples) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  if (!(var > 0.0)) throw DegenerateInput("AGC input has zero variance");
  const double gain = target_std / std::sqrt(var);
  SampledWaveform y = x;
  for (double& v : y.samples) v = (v - mean) * gain;
  return y;
}

const double kPam4Levels[4] = {-0.5, -1.0 / 6.0, 1.0 / 6.0, 0.5};

SampledWaveform rect_pam_waveform(const std::vector<int>& symbols,
                                  double symbol_rate, int samples_per_symbol) {
  SampledWaveform x;
  x.symbol_rate = symbol_rate;
  x.samples_per_symbol = samples_per_symbol;
  x.samples.reserve(symbols.size() * samples_per_symbol);
  for (int s : symbols) {
    if (s < 0 || s > 3) throw DegenerateInput("4PAM symbol index out of range");
    for (int k = 0; k < samples_per_symbol; ++k)
      x.samples.push_back(kPam4Levels[s]);
  }
  return x;
}

}  // namespace chirplink
