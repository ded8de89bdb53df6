#ifndef CHIRPLINK_CHANNEL_HPP
#define CHIRPLINK_CHANNEL_HPP

#include <cstdint>

#include "chirplink/config.hpp"
#include "chirplink/dsp.hpp"
#include "chirplink/laser.hpp"

namespace chirplink {

// One pass of the physical link: full-scale 2-SpS waveform through DAC,
// drive scaling, the rate-equation laser, fiber, square-law detection
// with calibrated noise, AGC and the ADC. The returned waveform is the
// 2-SpS receiver stream; prf_dbm is the RF power of the noiseless
// detected signal, measured with the calibration trim.
struct OracleChainResult {
  SampledWaveform rx;
  double prf_dbm = 0.0;
};

OracleChainResult oracle_chain(const LinkConfig& link,
                               const SampledWaveform& x2, double ipp_ma,
                               double ibias_ma, const NoiseCalibration& cal,
                               std::uint64_t noise_stream);

// Symbols to drop from each end of a chain run before fitting or scoring:
// covers the solver transient plus the fiber kernel's edge spill, with
// padding for the receiver filters.
int chain_trim_symbols(const LinkConfig& link);

}  // namespace chirplink

#endif  // CHIRPLINK_CHANNEL_HPP
