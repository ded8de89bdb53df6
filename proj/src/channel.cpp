#include "chirplink/channel.hpp"

#include <algorithm>
#include <cmath>

#include "chirplink/errors.hpp"

namespace chirplink {

OracleChainResult oracle_chain(const LinkConfig& link,
                               const SampledWaveform& x2, double ipp_ma,
                               double ibias_ma, const NoiseCalibration& cal,
                               std::uint64_t noise_stream) {
  if (x2.samples_per_symbol != 2)
    throw IncompatibleRates("oracle_chain expects a 2-SpS drive waveform");
  const SampledWaveform quantized = smooth_quantize(x2, link.converter);
  const SampledWaveform upsampled =
      resample(quantized, link.samples_per_symbol);
  const SampledWaveform shaped = supergaussian_lpf(upsampled, link.converter);
  const DriveWaveform drive = current_scale(shaped, ipp_ma, ibias_ma);

  const SolverTolerances tol{link.solver.rel_tol, link.solver.abs_tol};
  const RateTrajectory traj = integrate_rate_equations(drive, link.laser, tol);
  const ComplexField emitted = field_from_trajectory(traj, link.laser);
  const ComplexField received = fiber_dispersion(emitted, link.fiber);

  SampledWaveform power;
  power.samples.resize(received.amplitude.size());
  for (std::size_t k = 0; k < power.samples.size(); ++k)
    power.samples[k] = received.amplitude[k] * received.amplitude[k];
  power.samples_per_symbol = link.samples_per_symbol;
  power.symbol_rate = link.symbol_rate_hz();
  const auto guard = std::min(
      power.samples.size() / 2,
      std::max<std::size_t>(kTransientSamples,
                            static_cast<std::size_t>(link.fiber.fir_length) / 2));
  SampledWaveform trimmed;
  trimmed.samples_per_symbol = power.samples_per_symbol;
  trimmed.symbol_rate = power.symbol_rate;
  trimmed.samples.assign(
      power.samples.begin() + static_cast<std::ptrdiff_t>(guard),
      power.samples.end() - static_cast<std::ptrdiff_t>(guard));

  OracleChainResult out;
  out.prf_dbm = measure_prf_dbm(trimmed);
  const SampledWaveform detected =
      photodetect(received, cal, link.seed, noise_stream,
                  link.samples_per_symbol);
  const SampledWaveform leveled =
      agc_normalize(detected, link.converter.agc_target_std);
  const SampledWaveform filtered = supergaussian_lpf(leveled, link.converter);
  const SampledWaveform down = resample(filtered, 2);
  out.rx = smooth_quantize(down, link.converter);
  return out;
}

int chain_trim_symbols(const LinkConfig& link) {
  const int edge = std::max(static_cast<int>(kTransientSamples),
                            link.fiber.fir_length / 2 + 64);
  return (edge + link.samples_per_symbol - 1) / link.samples_per_symbol + 16;
}

}  // namespace chirplink
