#ifndef CHIRPLINK_CONFIG_HPP
#define CHIRPLINK_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "chirplink/laser.hpp"

namespace chirplink {

// DAC and ADC settings, shared by both converters.
struct ConverterConfig {
  int bits = 5;
  int fourier_order = 2;        // harmonics kept in the smooth quantizer
  double lpf_cutoff_ratio = 0.85;  // cutoff as a fraction of the symbol rate
  int lpf_order = 2;               // super-Gaussian order
  double agc_target_std = 0.16;    // ADC input loading within full scale 1.0
};

struct FiberConfig {
  double dispersion_ps_per_nm = -4.0;  // accumulated dispersion D*L
  double wavelength_nm = 1286.0;
  int fir_length = 513;    // odd taps for the truncated all-pass kernel
  int design_grid = 8192;  // DFT size used to sample the transfer function
};

// Receiver noise calibrated so the stated SNR holds at the reference drive.
struct NoiseConfig {
  double snr_db = 20.0;
  double reference_ipp_ma = 20.0;
  double reference_ibias_ma = 30.0;
};

struct TapsConfig {
  int dpd = 15;
  int eq = 5;
  int fir = 20;
  int vnle_linear = 20;
  int vnle_squares = 20;
};

struct SolverConfig {
  double rel_tol = 1e-7;
  double abs_tol = 1e-9;
};

struct DatasetConfig {
  int train_sequences = 400;
  int test_sequences = 100;
  int symbols_per_sequence = 256;
  int pulse_taps = 16;  // random pulse-shaping filter length per sequence
};

struct SurrogateConfig {
  int channels = 32;
  int blocks = 7;
  int kernel = 3;
  int epochs = 60;
  int batch_sequences = 8;
  double learning_rate = 2e-3;
};

struct AeConfig {
  int epochs = 200;
  int steps_per_epoch = 20;
  int batch_symbols = 256;
  int trim_symbols = 16;  // edge symbols excluded from the training loss
  int val_sequences = 4;
  int patience = 25;  // epochs without validation CE progress before stopping
  double learning_rate = 1e-3;
  double sat_knee = 0.9;  // onset of encoder saturation, fraction of the rail
};

struct EvalConfig {
  long n_symbols = 200000;
  int chunk_symbols = 4096;
};

struct BaselineConfig {
  std::vector<double> ipp_sweep_ma = {4, 8, 12, 16, 20};
  double ibias_ma = 30.0;
  long train_symbols = 40000;
  long test_symbols = 200000;
  int align_window = 32;
};

// One experiment = one config file; everything an experiment needs is
// resolved here, including the laser parameters pulled from their own file.
struct LinkConfig {
  int schema_version = 1;
  double symbol_rate_gbd = 0.0;  // required key
  int samples_per_symbol = 4;
  std::uint64_t seed = 1234;
  std::string laser_params_path;  // required key, relative to the config file
  LaserParams laser{};

  ConverterConfig converter;
  FiberConfig fiber;
  NoiseConfig noise;
  TapsConfig taps;
  SolverConfig solver;
  DatasetConfig dataset;
  SurrogateConfig surrogate;
  AeConfig ae;
  EvalConfig evaluation;
  BaselineConfig baseline;

  double symbol_rate_hz() const { return symbol_rate_gbd * 1e9; }
  double sample_rate_hz() const { return symbol_rate_hz() * samples_per_symbol; }
  double sample_period() const { return 1.0 / sample_rate_hz(); }

  void validate() const;  // throws ConfigError naming the offending key
};

LaserParams load_laser_params(const std::string& path);

// Parses and validates a config file; unknown keys are rejected so typos
// cannot silently fall back to defaults. Keys starting with "_" are
// treated as comments everywhere.
LinkConfig load_link_config(const std::string& path);

// FNV-1a over the canonical serialization of the resolved config (laser
// parameter values included, seed excluded so reruns with a different
// seed can share artifacts knowingly).
std::uint64_t config_hash(const LinkConfig& config);

std::string config_hash_hex(const LinkConfig& config);

}  // namespace chirplink

#endif  // CHIRPLINK_CONFIG_HPP
