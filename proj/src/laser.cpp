#include "chirplink/laser.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "chirplink/errors.hpp"

namespace chirplink {
namespace {

constexpr double kElementaryCharge = 1.602176634e-19;  // [C]

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw ConfigError(std::string("laser parameter ") + name +
                      " must be positive and finite");
}

}  // namespace

void LaserParams::validate() const {
  require_positive(active_volume, "active_volume");
  require_positive(confinement_factor, "confinement_factor");
  require_positive(gain_coefficient, "gain_coefficient");
  require_positive(transparency_density, "transparency_density");
  require_positive(carrier_lifetime, "carrier_lifetime");
  require_positive(photon_lifetime, "photon_lifetime");
  require_positive(gain_compression, "gain_compression");
  require_positive(spontaneous_emission_factor, "spontaneous_emission_factor");
  require_positive(power_per_photon_density, "power_per_photon_density");
  if (confinement_factor > 1.0)
    throw ConfigError("laser parameter confinement_factor must be <= 1");
  if (spontaneous_emission_factor > 1.0)
    throw ConfigError("laser parameter spontaneous_emission_factor must be <= 1");
  if (!std::isfinite(linewidth_enhancement_alpha))
    throw ConfigError("laser parameter linewidth_enhancement_alpha must be finite");
}

double LaserParams::gain(double carrier_density, double photon_density) const {
  return gain_coefficient * (carrier_density - transparency_density) /
         (1.0 + gain_compression * photon_density);
}

double LaserParams::threshold_carrier_density() const {
  return transparency_density +
         1.0 / (confinement_factor * gain_coefficient * photon_lifetime);
}

double LaserParams::threshold_current() const {
  // Carrier recombination alone at the clamped density; good to a few
  // percent since the photon density is still tiny at threshold.
  return kElementaryCharge * active_volume * threshold_carrier_density() /
         carrier_lifetime;
}

void DriveWaveform::validate() const {
  if (current.empty()) throw DegenerateInput("drive waveform is empty");
  if (!(sample_period > 0.0) || !std::isfinite(sample_period))
    throw ConfigError("drive sample_period must be positive");
  for (double c : current) {
    if (!std::isfinite(c)) throw NonFinite("drive current contains non-finite samples");
    if (c < 0.0) throw NegativeCurrent("drive current has negative samples");
  }
}

namespace {

// Rate-equation right-hand side; state is (S, N).
struct RateRhs {
  const LaserParams& p;
  double pump_per_ampere;  // 1/(qV)

  explicit RateRhs(const LaserParams& params)
      : p(params),
        pump_per_ampere(1.0 / (kElementaryCharge * params.active_volume)) {}

  void operator()(double current, const double y[2], double f[2]) const {
    const double s = y[0];
    const double n = y[1];
    const double g = p.gain(n, s);
    const double stim = g * s;
    const double spont = p.spontaneous_emission_factor * n / p.carrier_lifetime;
    f[0] = p.confinement_factor * (stim + spont) - s / p.photon_lifetime;
    f[1] = current * pump_per_ampere - n / p.carrier_lifetime - stim;
  }
};

struct Residual {
  double f[2];
  double scaled;  // max over equations of |f| / per-equation scale
};

Residual steady_residual(const LaserParams& p, const RateRhs& rhs,
                         double bias, double s, double n) {
  Residual r;
  const double y[2] = {s, n};
  rhs(bias, y, r.f);
  const double g = p.gain(n, s);
  const double scale_s = std::max(
      {p.confinement_factor * std::abs(g) * s, s / p.photon_lifetime,
       p.confinement_factor * p.spontaneous_emission_factor * n / p.carrier_lifetime,
       1.0});
  const double scale_n =
      std::max({bias * rhs.pump_per_ampere, n / p.carrier_lifetime,
                std::abs(g) * s, 1.0});
  r.scaled = std::max(std::abs(r.f[0]) / scale_s, std::abs(r.f[1]) / scale_n);
  return r;
}

}  // namespace

SteadyState steady_state(const LaserParams& params, double bias_current) {
  params.validate();
  if (!(bias_current >= 0.0) || !std::isfinite(bias_current))
    throw ConfigError("bias current must be nonnegative and finite");

  const RateRhs rhs(params);
  const double pump = bias_current * rhs.pump_per_ampere;
  const double n_th = params.threshold_carrier_density();

  // Start from the linearized fixed point on the relevant side of threshold.
  double n = std::min(params.carrier_lifetime * pump, n_th);
  double s = params.confinement_factor * params.photon_lifetime *
             (pump - n_th / params.carrier_lifetime);
  if (s <= 0.0) {
    const double loss =
        1.0 / params.photon_lifetime - params.confinement_factor * params.gain(n, 0.0);
    s = loss > 0.0 ? params.confinement_factor * params.spontaneous_emission_factor *
                         n / (params.carrier_lifetime * loss)
                   : 0.0;
  }

  Residual res = steady_residual(params, rhs, bias_current, s, n);
  double best_s = s, best_n = n, best = res.scaled;

  const int max_iter = 100;
  int iter = 0;
  for (; iter < max_iter && res.scaled > 1e-12; ++iter) {
    const double comp = 1.0 + params.gain_compression * s;
    const double g = params.gain(n, s);
    const double dg_dn = params.gain_coefficient / comp;
    // d(gS)/dS with compression folded in.
    const double dstim_ds = g / comp;
    const double j00 = params.confinement_factor * dstim_ds - 1.0 / params.photon_lifetime;
    const double j01 = params.confinement_factor *
                       (s * dg_dn + params.spontaneous_emission_factor / params.carrier_lifetime);
    const double j10 = -dstim_ds;
    const double j11 = -1.0 / params.carrier_lifetime - s * dg_dn;
    const double det = j00 * j11 - j01 * j10;
    if (det == 0.0 || !std::isfinite(det))
      throw NoConvergence("steady_state: singular Jacobian");
    const double ds = (-res.f[0] * j11 + res.f[1] * j01) / det;
    const double dn = (-res.f[1] * j00 + res.f[0] * j10) / det;

    double lambda = 1.0;
    bool accepted = false;
    for (int halve = 0; halve < 60; ++halve) {
      const double cand_s = std::max(s + lambda * ds, 0.0);
      const double cand_n = std::max(n + lambda * dn, 0.0);
      const Residual cand = steady_residual(params, rhs, bias_current, cand_s, cand_n);
      if (cand.scaled < res.scaled) {
        s = cand_s;
        n = cand_n;
        res = cand;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (res.scaled < best) {
      best = res.scaled;
      best_s = s;
      best_n = n;
    }
    if (!accepted) break;  // at the numerical floor
  }

  if (best > 1e-10)
    throw NoConvergence("steady_state: residual " + std::to_string(best) +
                        " after " + std::to_string(iter) + " iterations");

  SteadyState out;
  out.photon_density = best_s;
  out.carrier_density = best_n;
  out.lasing = params.confinement_factor * params.gain(best_n, best_s) *
                   params.photon_lifetime >
               0.9;
  return out;
}

SteadyState steady_state_lasing(const LaserParams& params, double bias_current) {
  SteadyState ss = steady_state(params, bias_current);
  if (!ss.lasing)
    throw BelowThreshold("bias " + std::to_string(bias_current * 1e3) +
                         " mA is below the lasing threshold (about " +
                         std::to_string(params.threshold_current() * 1e3) + " mA)");
  return ss;
}

namespace {

// Dormand-Prince 5(4) tableau with the first-same-as-last property.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// Difference between the 5th- and embedded 4th-order weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

struct DriveInterp {
  const std::vector<double>& current;
  double inv_period;

  double operator()(double t) const {
    const double u = t * inv_period;
    if (u <= 0.0) return current.front();
    const std::size_t last = current.size() - 1;
    if (u >= static_cast<double>(last)) return current.back();
    const auto k = static_cast<std::size_t>(u);
    const double frac = u - static_cast<double>(k);
    return current[k] + frac * (current[k + 1] - current[k]);
  }
};

}  // namespace

RateTrajectory integrate_rate_equations(const DriveWaveform& drive,
                                        const LaserParams& params,
                                        const SolverTolerances& tol) {
  drive.validate();
  params.validate();
  if (!(tol.rel_tol > 0.0) || !(tol.abs_tol > 0.0))
    throw ConfigError("solver tolerances must be positive");

  const std::size_t n_samples = drive.current.size();
  const SteadyState init = steady_state(params, drive.current.front());

  RateTrajectory traj;
  traj.sample_period = drive.sample_period;
  traj.transient_samples = std::min(kTransientSamples, n_samples);
  traj.photon_density.resize(n_samples);
  traj.carrier_density.resize(n_samples);
  traj.photon_density[0] = init.photon_density;
  traj.carrier_density[0] = init.carrier_density;
  if (n_samples == 1) return traj;

  const RateRhs rhs(params);
  const DriveInterp drive_at{drive.current, 1.0 / drive.sample_period};
  // Error weights relative to the initial steady-state magnitude, floored
  // so a spontaneous-emission start does not zero the photon scale.
  const double scale[2] = {
      std::max(init.photon_density, 1e-6 * init.carrier_density * params.confinement_factor *
                                        params.photon_lifetime / params.carrier_lifetime),
      std::max(init.carrier_density, 1e-3 * params.transparency_density)};

  constexpr double h_min = 1e-18;

  double t = 0.0;
  double y[2] = {init.photon_density, init.carrier_density};
  double k1[2], k2[2], k3[2], k4[2], k5[2], k6[2], k7[2];
  rhs(drive_at(0.0), y, k1);

  double h = drive.sample_period / 4.0;
  std::size_t emitted = 1;
  bool previous_rejected = false;

  // Steps land exactly on the sample grid: the interpolated drive is
  // smooth within a sample interval but kinked at its ends, so letting a
  // step straddle a kink would leave uncontrolled error in the output.
  while (emitted < n_samples) {
    const double t_boundary = static_cast<double>(emitted) * drive.sample_period;
    bool lands = false;
    // Stretch by up to 10% rather than leave a sliver before the boundary.
    if (t + 1.1 * h >= t_boundary) {
      h = t_boundary - t;
      lands = true;
    }
    if (h < h_min) throw StepUnderflow("rate-equation solver step underflow at t = " +
                                       std::to_string(t));

    double yt[2];
    for (int i = 0; i < 2; ++i) yt[i] = y[i] + h * a21 * k1[i];
    rhs(drive_at(t + c2 * h), yt, k2);
    for (int i = 0; i < 2; ++i) yt[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    rhs(drive_at(t + c3 * h), yt, k3);
    for (int i = 0; i < 2; ++i)
      yt[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    rhs(drive_at(t + c4 * h), yt, k4);
    for (int i = 0; i < 2; ++i)
      yt[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    rhs(drive_at(t + c5 * h), yt, k5);
    for (int i = 0; i < 2; ++i)
      yt[i] = y[i] +
              h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    rhs(drive_at(t + h), yt, k6);
    double y_new[2];
    for (int i = 0; i < 2; ++i)
      y_new[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] +
                             b6 * k6[i]);
    rhs(drive_at(t + h), y_new, k7);

    if (!std::isfinite(y_new[0]) || !std::isfinite(y_new[1]))
      throw NonFinite("rate-equation state diverged at t = " + std::to_string(t));

    double err = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                             e6 * k6[i] + e7 * k7[i]);
      const double sc = tol.abs_tol * scale[i] +
                        tol.rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i]));
      err += (ei / sc) * (ei / sc);
    }
    err = std::sqrt(0.5 * err);

    if (err <= 1.0) {
      if (lands) {
        traj.photon_density[emitted] = y_new[0];
        traj.carrier_density[emitted] = y_new[1];
        ++emitted;
        t = t_boundary;
      } else {
        t += h;
      }
      y[0] = y_new[0];
      y[1] = y_new[1];
      k1[0] = k7[0];
      k1[1] = k7[1];
      double grow = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
      grow = std::clamp(grow, 0.2, previous_rejected ? 1.0 : 5.0);
      h = std::min(h * grow, drive.sample_period);
      previous_rejected = false;
    } else {
      h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
      previous_rejected = true;
    }
  }

  // Dense output may undershoot zero by rounding at the spontaneous floor.
  for (std::size_t k = 0; k < n_samples; ++k) {
    double& s = traj.photon_density[k];
    double& n = traj.carrier_density[k];
    if (s < -1e-6 * scale[0] || n < -1e-6 * scale[1])
      throw NonFinite("rate-equation trajectory went negative");
    s = std::max(s, 0.0);
    n = std::max(n, 0.0);
  }
  return traj;
}

double instantaneous_chirp(const LaserParams& params, double photon_density,
                           double carrier_density) {
  return 0.5 * params.linewidth_enhancement_alpha *
         (params.confinement_factor * params.gain(carrier_density, photon_density) -
          1.0 / params.photon_lifetime);
}

ComplexField field_from_trajectory(const RateTrajectory& traj,
                                   const LaserParams& params) {
  const std::size_t n = traj.photon_density.size();
  if (n == 0) throw DegenerateInput("empty trajectory");
  if (traj.carrier_density.size() != n)
    throw LengthMismatch("trajectory photon/carrier length mismatch");

  ComplexField field;
  field.sample_period = traj.sample_period;
  field.amplitude.resize(n);
  field.phase.resize(n);

  double omega_prev = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double s = traj.photon_density[k];
    field.amplitude[k] = std::sqrt(params.power_per_photon_density * s);
    const double omega =
        instantaneous_chirp(params, s, traj.carrier_density[k]);
    field.phase[k] = k == 0 ? 0.0
                            : field.phase[k - 1] +
                                  0.5 * (omega_prev + omega) * traj.sample_period;
    omega_prev = omega;
  }
  return field;
}

}  // namespace chirplink
