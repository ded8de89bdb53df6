#include "chirplink/config.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "chirplink/errors.hpp"
#include "chirplink/rng.hpp"

namespace chirplink {
namespace {

using nlohmann::json;

json parse_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::string(what) + " file not found: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(what) + " file " + path + " is not valid JSON: " +
                      e.what());
  }
  if (!j.is_object())
    throw ConfigError(std::string(what) + " file " + path + " must hold a JSON object");
  return j;
}

[[noreturn]] void bad_key(const std::string& ctx, const std::string& key,
                          const char* what) {
  throw ConfigError("config key " + (ctx.empty() ? key : ctx + "." + key) + " " + what);
}

double get_number(const json& j, const std::string& ctx, const std::string& key) {
  const auto& v = j.at(key);
  if (!v.is_number()) bad_key(ctx, key, "must be a number");
  return v.get<double>();
}

int get_int(const json& j, const std::string& ctx, const std::string& key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) bad_key(ctx, key, "must be an integer");
  return v.get<int>();
}

// Pulls recognized keys out of an object and complains about leftovers.
// Holds its own copy of the object so sub-sections built from temporaries
// (see object()) stay valid.
class Section {
 public:
  Section(json j, std::string ctx) : j_(std::move(j)), ctx_(std::move(ctx)) {}

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  double number(const std::string& key, double fallback) {
    return has(key) ? get_number(j_, ctx_, key) : fallback;
  }
  double required_number(const std::string& key) {
    if (!has(key)) bad_key(ctx_, key, "is required");
    return get_number(j_, ctx_, key);
  }
  int integer(const std::string& key, int fallback) {
    return has(key) ? get_int(j_, ctx_, key) : fallback;
  }
  long integer(const std::string& key, long fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) bad_key(ctx_, key, "must be an integer");
    return v.get<long>();
  }
  std::string required_string(const std::string& key) {
    if (!has(key)) bad_key(ctx_, key, "is required");
    const auto& v = j_.at(key);
    if (!v.is_string()) bad_key(ctx_, key, "must be a string");
    return v.get<std::string>();
  }
  std::vector<double> number_list(const std::string& key, std::vector<double> fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_array()) bad_key(ctx_, key, "must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) bad_key(ctx_, key, "must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  json object(const std::string& key) {
    if (!has(key)) return json::object();
    const auto& v = j_.at(key);
    if (!v.is_object()) bad_key(ctx_, key, "must be an object");
    return v;
  }
  std::uint64_t unsigned64(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0))
      bad_key(ctx_, key, "must be a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      const std::string& key = it.key();
      if (!key.empty() && key.front() == '_') continue;
      if (!seen_.count(key))
        bad_key(ctx_, key, "is not a recognized key");
    }
  }

 private:
  json j_;
  std::string ctx_;
  std::set<std::string> seen_;
};

void check_positive(double v, const char* key) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw ConfigError(std::string("config key ") + key + " must be positive");
}

}  // namespace

LaserParams load_laser_params(const std::string& path) {
  const json j = parse_file(path, "laser parameter");
  Section s(j, "laser");
  LaserParams p;
  p.active_volume = s.required_number("active_volume_m3");
  p.confinement_factor = s.required_number("confinement_factor");
  p.gain_coefficient = s.required_number("gain_coefficient_m3_per_s");
  p.transparency_density = s.required_number("transparency_density_per_m3");
  p.carrier_lifetime = s.required_number("carrier_lifetime_s");
  p.photon_lifetime = s.required_number("photon_lifetime_s");
  p.gain_compression = s.required_number("gain_compression_m3");
  p.spontaneous_emission_factor = s.required_number("spontaneous_emission_factor");
  p.linewidth_enhancement_alpha = s.required_number("linewidth_enhancement_alpha");
  p.power_per_photon_density = s.required_number("power_per_photon_density_w_m3");
  s.finish();
  p.validate();
  return p;
}

LinkConfig load_link_config(const std::string& path) {
  const json j = parse_file(path, "config");
  Section s(j, "");

  LinkConfig c;
  c.schema_version = s.integer("schema_version", 1);
  if (c.schema_version != 1)
    throw ConfigError("config key schema_version must be 1, got " +
                      std::to_string(c.schema_version));
  c.symbol_rate_gbd = s.required_number("symbol_rate_gbd");
  c.samples_per_symbol = s.integer("samples_per_symbol", 4);
  c.seed = s.unsigned64("seed", 1234);
  c.laser_params_path = s.required_string("laser_params");

  {
    Section sub(s.object("converter"), "converter");
    c.converter.bits = sub.integer("bits", c.converter.bits);
    c.converter.fourier_order = sub.integer("fourier_order", c.converter.fourier_order);
    c.converter.lpf_cutoff_ratio =
        sub.number("lpf_cutoff_ratio", c.converter.lpf_cutoff_ratio);
    c.converter.lpf_order = sub.integer("lpf_order", c.converter.lpf_order);
    c.converter.agc_target_std =
        sub.number("agc_target_std", c.converter.agc_target_std);
    sub.finish();
  }
  {
    Section sub(s.object("fiber"), "fiber");
    c.fiber.dispersion_ps_per_nm =
        sub.number("dispersion_ps_per_nm", c.fiber.dispersion_ps_per_nm);
    c.fiber.wavelength_nm = sub.number("wavelength_nm", c.fiber.wavelength_nm);
    c.fiber.fir_length = sub.integer("fir_length", c.fiber.fir_length);
    c.fiber.design_grid = sub.integer("design_grid", c.fiber.design_grid);
    sub.finish();
  }
  {
    Section sub(s.object("noise"), "noise");
    c.noise.snr_db = sub.number("snr_db", c.noise.snr_db);
    c.noise.reference_ipp_ma = sub.number("reference_ipp_ma", c.noise.reference_ipp_ma);
    c.noise.reference_ibias_ma =
        sub.number("reference_ibias_ma", c.noise.reference_ibias_ma);
    sub.finish();
  }
  {
    Section sub(s.object("taps"), "taps");
    c.taps.dpd = sub.integer("dpd", c.taps.dpd);
    c.taps.eq = sub.integer("eq", c.taps.eq);
    c.taps.fir = sub.integer("fir", c.taps.fir);
    c.taps.vnle_linear = sub.integer("vnle_linear", c.taps.vnle_linear);
    c.taps.vnle_squares = sub.integer("vnle_squares", c.taps.vnle_squares);
    sub.finish();
  }
  {
    Section sub(s.object("solver"), "solver");
    c.solver.rel_tol = sub.number("rel_tol", c.solver.rel_tol);
    c.solver.abs_tol = sub.number("abs_tol", c.solver.abs_tol);
    sub.finish();
  }
  {
    Section sub(s.object("dataset"), "dataset");
    c.dataset.train_sequences = sub.integer("train_sequences", c.dataset.train_sequences);
    c.dataset.test_sequences = sub.integer("test_sequences", c.dataset.test_sequences);
    c.dataset.symbols_per_sequence =
        sub.integer("symbols_per_sequence", c.dataset.symbols_per_sequence);
    c.dataset.pulse_taps = sub.integer("pulse_taps", c.dataset.pulse_taps);
    sub.finish();
  }
  {
    Section sub(s.object("surrogate"), "surrogate");
    c.surrogate.channels = sub.integer("channels", c.surrogate.channels);
    c.surrogate.blocks = sub.integer("blocks", c.surrogate.blocks);
    c.surrogate.kernel = sub.integer("kernel", c.surrogate.kernel);
    c.surrogate.epochs = sub.integer("epochs", c.surrogate.epochs);
    c.surrogate.batch_sequences =
        sub.integer("batch_sequences", c.surrogate.batch_sequences);
    c.surrogate.learning_rate = sub.number("learning_rate", c.surrogate.learning_rate);
    sub.finish();
  }
  {
    Section sub(s.object("ae"), "ae");
    c.ae.epochs = sub.integer("epochs", c.ae.epochs);
    c.ae.steps_per_epoch = sub.integer("steps_per_epoch", c.ae.steps_per_epoch);
    c.ae.batch_symbols = sub.integer("batch_symbols", c.ae.batch_symbols);
    c.ae.trim_symbols = sub.integer("trim_symbols", c.ae.trim_symbols);
    c.ae.val_sequences = sub.integer("val_sequences", c.ae.val_sequences);
    c.ae.patience = sub.integer("patience", c.ae.patience);
    c.ae.learning_rate = sub.number("learning_rate", c.ae.learning_rate);
    c.ae.sat_knee = sub.number("sat_knee", c.ae.sat_knee);
    sub.finish();
  }
  {
    Section sub(s.object("evaluation"), "evaluation");
    c.evaluation.n_symbols = sub.integer("n_symbols", c.evaluation.n_symbols);
    c.evaluation.chunk_symbols = sub.integer("chunk_symbols", c.evaluation.chunk_symbols);
    sub.finish();
  }
  {
    Section sub(s.object("baseline"), "baseline");
    c.baseline.ipp_sweep_ma = sub.number_list("ipp_sweep_ma", c.baseline.ipp_sweep_ma);
    c.baseline.ibias_ma = sub.number("ibias_ma", c.baseline.ibias_ma);
    c.baseline.train_symbols = sub.integer("train_symbols", c.baseline.train_symbols);
    c.baseline.test_symbols = sub.integer("test_symbols", c.baseline.test_symbols);
    c.baseline.align_window = sub.integer("align_window", c.baseline.align_window);
    sub.finish();
  }
  s.finish();

  // Laser parameters resolve relative to the config file they came from.
  std::filesystem::path laser_path(c.laser_params_path);
  if (laser_path.is_relative())
    laser_path = std::filesystem::path(path).parent_path() / laser_path;
  try {
    c.laser = load_laser_params(laser_path.string());
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(e.what()) + " (key laser_params)");
  }

  c.validate();
  return c;
}

void LinkConfig::validate() const {
  check_positive(symbol_rate_gbd, "symbol_rate_gbd");
  if (samples_per_symbol < 2)
    throw ConfigError("config key samples_per_symbol must be at least 2");
  if (converter.bits < 2 || converter.bits > 16)
    throw ConfigError("config key converter.bits must be in [2, 16]");
  if (converter.fourier_order < 1)
    throw ConfigError("config key converter.fourier_order must be at least 1");
  if (!(converter.lpf_cutoff_ratio > 0.0) ||
      converter.lpf_cutoff_ratio > 0.5 * samples_per_symbol)
    throw ConfigError("config key converter.lpf_cutoff_ratio must lie inside the "
                      "simulated band");
  if (converter.lpf_order < 1)
    throw ConfigError("config key converter.lpf_order must be at least 1");
  check_positive(converter.agc_target_std, "converter.agc_target_std");
  check_positive(fiber.wavelength_nm, "fiber.wavelength_nm");
  if (fiber.fir_length < 3 || fiber.fir_length % 2 == 0)
    throw ConfigError("config key fiber.fir_length must be odd and at least 3");
  if (fiber.design_grid < 2 * fiber.fir_length ||
      (fiber.design_grid & (fiber.design_grid - 1)) != 0)
    throw ConfigError("config key fiber.design_grid must be a power of two at "
                      "least twice fir_length");
  check_positive(noise.reference_ipp_ma, "noise.reference_ipp_ma");
  check_positive(noise.reference_ibias_ma, "noise.reference_ibias_ma");
  if (taps.dpd < 1 || taps.eq < 1 || taps.fir < 1 || taps.vnle_linear < 1 ||
      taps.vnle_squares < 1)
    throw ConfigError("config key taps.* must all be at least 1");
  if (taps.dpd + taps.eq != taps.fir)
    throw ConfigError("config keys taps.dpd + taps.eq must equal taps.fir so the "
                      "schemes share one memory budget");
  check_positive(solver.rel_tol, "solver.rel_tol");
  check_positive(solver.abs_tol, "solver.abs_tol");
  if (dataset.train_sequences < 1 || dataset.test_sequences < 1)
    throw ConfigError("config keys dataset.*_sequences must be at least 1");
  if (dataset.symbols_per_sequence < 8)
    throw ConfigError("config key dataset.symbols_per_sequence must be at least 8");
  if (dataset.pulse_taps < 1)
    throw ConfigError("config key dataset.pulse_taps must be at least 1");
  if (surrogate.channels < 1 || surrogate.blocks < 1 || surrogate.kernel < 2 ||
      surrogate.epochs < 1 || surrogate.batch_sequences < 1)
    throw ConfigError("config keys surrogate.* are out of range");
  check_positive(surrogate.learning_rate, "surrogate.learning_rate");
  if (ae.epochs < 1 || ae.steps_per_epoch < 1 || ae.batch_symbols < 8 ||
      ae.trim_symbols < 0 || 2 * ae.trim_symbols >= ae.batch_symbols ||
      ae.val_sequences < 1 || ae.patience < 1)
    throw ConfigError("config keys ae.* are out of range");
  check_positive(ae.learning_rate, "ae.learning_rate");
  if (!(ae.sat_knee > 0.0) || !(ae.sat_knee < 1.0))
    throw ConfigError("config key ae.sat_knee must lie in (0, 1)");
  if (evaluation.n_symbols < 100)
    throw ConfigError("config key evaluation.n_symbols must be at least 100");
  if (evaluation.chunk_symbols < 64)
    throw ConfigError("config key evaluation.chunk_symbols must be at least 64");
  if (baseline.ipp_sweep_ma.empty())
    throw ConfigError("config key baseline.ipp_sweep_ma must be nonempty");
  for (double ipp : baseline.ipp_sweep_ma)
    if (!(ipp > 0.0))
      throw ConfigError("config key baseline.ipp_sweep_ma must be positive throughout");
  check_positive(baseline.ibias_ma, "baseline.ibias_ma");
  if (baseline.train_symbols < 100 || baseline.test_symbols < 100)
    throw ConfigError("config keys baseline.*_symbols must be at least 100");
  if (baseline.align_window < 1)
    throw ConfigError("config key baseline.align_window must be at least 1");
}

namespace {

json canonical_json(const LinkConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["symbol_rate_gbd"] = c.symbol_rate_gbd;
  j["samples_per_symbol"] = c.samples_per_symbol;
  j["laser"] = {
      {"active_volume_m3", c.laser.active_volume},
      {"confinement_factor", c.laser.confinement_factor},
      {"gain_coefficient_m3_per_s", c.laser.gain_coefficient},
      {"transparency_density_per_m3", c.laser.transparency_density},
      {"carrier_lifetime_s", c.laser.carrier_lifetime},
      {"photon_lifetime_s", c.laser.photon_lifetime},
      {"gain_compression_m3", c.laser.gain_compression},
      {"spontaneous_emission_factor", c.laser.spontaneous_emission_factor},
      {"linewidth_enhancement_alpha", c.laser.linewidth_enhancement_alpha},
      {"power_per_photon_density_w_m3", c.laser.power_per_photon_density}};
  j["converter"] = {{"bits", c.converter.bits},
                    {"fourier_order", c.converter.fourier_order},
                    {"lpf_cutoff_ratio", c.converter.lpf_cutoff_ratio},
                    {"lpf_order", c.converter.lpf_order},
                    {"agc_target_std", c.converter.agc_target_std}};
  j["fiber"] = {{"dispersion_ps_per_nm", c.fiber.dispersion_ps_per_nm},
                {"wavelength_nm", c.fiber.wavelength_nm},
                {"fir_length", c.fiber.fir_length},
                {"design_grid", c.fiber.design_grid}};
  j["noise"] = {{"snr_db", c.noise.snr_db},
                {"reference_ipp_ma", c.noise.reference_ipp_ma},
                {"reference_ibias_ma", c.noise.reference_ibias_ma}};
  j["taps"] = {{"dpd", c.taps.dpd},
               {"eq", c.taps.eq},
               {"fir", c.taps.fir},
               {"vnle_linear", c.taps.vnle_linear},
               {"vnle_squares", c.taps.vnle_squares}};
  j["solver"] = {{"rel_tol", c.solver.rel_tol}, {"abs_tol", c.solver.abs_tol}};
  j["dataset"] = {{"train_sequences", c.dataset.train_sequences},
                  {"test_sequences", c.dataset.test_sequences},
                  {"symbols_per_sequence", c.dataset.symbols_per_sequence},
                  {"pulse_taps", c.dataset.pulse_taps}};
  j["surrogate"] = {{"channels", c.surrogate.channels},
                    {"blocks", c.surrogate.blocks},
                    {"kernel", c.surrogate.kernel},
                    {"epochs", c.surrogate.epochs},
                    {"batch_sequences", c.surrogate.batch_sequences},
                    {"learning_rate", c.surrogate.learning_rate}};
  j["ae"] = {{"epochs", c.ae.epochs},
             {"steps_per_epoch", c.ae.steps_per_epoch},
             {"batch_symbols", c.ae.batch_symbols},
             {"trim_symbols", c.ae.trim_symbols},
             {"val_sequences", c.ae.val_sequences},
             {"patience", c.ae.patience},
             {"learning_rate", c.ae.learning_rate},
             {"sat_knee", c.ae.sat_knee}};
  j["evaluation"] = {{"n_symbols", c.evaluation.n_symbols},
                     {"chunk_symbols", c.evaluation.chunk_symbols}};
  j["baseline"] = {{"ipp_sweep_ma", c.baseline.ipp_sweep_ma},
                   {"ibias_ma", c.baseline.ibias_ma},
                   {"train_symbols", c.baseline.train_symbols},
                   {"test_symbols", c.baseline.test_symbols},
                   {"align_window", c.baseline.align_window}};
  return j;
}

}  // namespace

std::uint64_t config_hash(const LinkConfig& config) {
  return hash_tag(canonical_json(config).dump());
}

std::string config_hash_hex(const LinkConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(config_hash(config)));
  return std::string(buf);
}

}  // namespace chirplink
