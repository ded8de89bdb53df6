#ifndef CHIRPLINK_LASER_HPP
#define CHIRPLINK_LASER_HPP

#include <cstddef>
#include <vector>

namespace chirplink {

// Single-mode rate-equation model of a directly modulated laser,
//
//   dN/dt = I/(qV) - N/tau_n - g0 (N - N0) S / (1 + eps S)
//   dS/dt = Gamma g0 (N - N0) S / (1 + eps S) - S/tau_p
//           + Gamma beta N / tau_n
//
// with S the photon density, N the carrier density and I the injection
// current. The emitted field has amplitude sqrt(eta S) and an
// instantaneous angular frequency deviation (chirp)
//
//   omega = (alpha/2) (Gamma g(N,S) - 1/tau_p),
//
// referenced to the photon-lifetime term so it vanishes at steady state
// up to the spontaneous-emission contribution.
struct LaserParams {
  double active_volume;                 // V      [m^3]
  double confinement_factor;            // Gamma  [-]
  double gain_coefficient;              // g0     [m^3/s]
  double transparency_density;          // N0     [1/m^3]
  double carrier_lifetime;              // tau_n  [s]
  double photon_lifetime;               // tau_p  [s]
  double gain_compression;              // eps    [m^3]
  double spontaneous_emission_factor;   // beta   [-]
  double linewidth_enhancement_alpha;   // alpha  [-]
  double power_per_photon_density;      // eta    [W m^3], P = eta * S

  void validate() const;  // throws ConfigError on an unphysical set

  // Compressed material gain g(N, S) [1/s].
  double gain(double carrier_density, double photon_density) const;
  // Carrier density at which the round-trip gain clamps, ignoring
  // compression and spontaneous emission.
  double threshold_carrier_density() const;
  double threshold_current() const;  // [A]
};

// Injection current sequence on a uniform grid.
struct DriveWaveform {
  std::vector<double> current;  // [A]
  double sample_period;         // [s]

  void validate() const;  // nonnegative samples, positive period
};

// Photon/carrier densities on the drive grid. The leading
// `transient_samples` entries cover the solver warm-up from the initial
// steady state and are excluded from losses and metrics downstream.
struct RateTrajectory {
  std::vector<double> photon_density;   // [1/m^3]
  std::vector<double> carrier_density;  // [1/m^3]
  double sample_period = 0.0;           // [s]
  std::size_t transient_samples = 0;
};

// Optical field as amplitude/phase pair, |field|^2 in watts.
struct ComplexField {
  std::vector<double> amplitude;  // [sqrt(W)]
  std::vector<double> phase;      // [rad]
  double sample_period = 0.0;     // [s]
};

struct SteadyState {
  double photon_density;
  double carrier_density;
  bool lasing;  // false when S collapsed to the spontaneous-emission floor
};

// Fixed point of the rate equations at constant bias, by damped Newton
// iteration; residuals are driven below 1e-10 of the per-equation scale.
// Returns the spontaneous-emission floor (lasing = false) below threshold.
// Throws NoConvergence if the iteration cap is exceeded.
SteadyState steady_state(const LaserParams& params, double bias_current);

// As above but throws BelowThreshold when the fixed point is not lasing;
// link simulations use this form since every configured bias must lase.
SteadyState steady_state_lasing(const LaserParams& params,
                                double bias_current);

struct SolverTolerances {
  double rel_tol = 1e-7;
  double abs_tol = 1e-9;  // relative to the steady-state scale per component
};

// Adaptive Dormand-Prince RK(4,5) integration of the rate equations over
// the drive, which is linearly interpolated between samples. The initial
// state is the steady state at the first drive sample and the output is
// resampled onto the drive grid through the solver's dense output.
// Throws StepUnderflow / NonFinite per the solver guard rails.
RateTrajectory integrate_rate_equations(const DriveWaveform& drive,
                                        const LaserParams& params,
                                        const SolverTolerances& tol = {});

// Number of leading samples flagged as transient on every trajectory
// (capped at the trajectory length).
inline constexpr std::size_t kTransientSamples = 512;

// Chirp omega(N, S) [rad/s] relative to the photon-lifetime reference.
double instantaneous_chirp(const LaserParams& params, double photon_density,
                           double carrier_density);

// amplitude[k] = sqrt(eta S[k]); phase by cumulative trapezoidal
// integration of the chirp with phase[0] = 0.
ComplexField field_from_trajectory(const RateTrajectory& traj,
                                   const LaserParams& params);

}  // namespace chirplink

#endif  // CHIRPLINK_LASER_HPP
