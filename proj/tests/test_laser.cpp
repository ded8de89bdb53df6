#include "chirplink/laser.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "chirplink/errors.hpp"
#include "chirplink/rng.hpp"
#include "oracles.hpp"

using namespace chirplink;

namespace {

double rate_eq_residual(const LaserParams& p, double bias, double s, double n) {
  const double pump = bias / (oracles::kQ * p.active_volume);
  const double g = p.gain(n, s);
  const double ds = p.confinement_factor *
                        (g * s + p.spontaneous_emission_factor * n / p.carrier_lifetime) -
                    s / p.photon_lifetime;
  const double dn = pump - n / p.carrier_lifetime - g * s;
  const double scale_s = std::max(s / p.photon_lifetime, 1.0);
  const double scale_n = std::max(pump, 1.0);
  return std::max(std::abs(ds) / scale_s, std::abs(dn) / scale_n);
}

DriveWaveform test_pam_drive(double rate_gbd, double ibias, double ipp,
                             int n_symbols, std::uint64_t seed) {
  RngStream rng(seed, "laser-test-symbols");
  return oracles::pam4_drive(rng.symbols(n_symbols), ibias, ipp, 4,
                             1.0 / (4.0 * rate_gbd * 1e9));
}

}  // namespace

TEST_CASE("steady state at zero bias sits at the spontaneous floor") {
  const LaserParams p = oracles::default_laser();
  const SteadyState ss = steady_state(p, 0.0);
  CHECK(!ss.lasing);
  CHECK(ss.photon_density >= 0.0);
  CHECK(ss.photon_density < 1e-6 * p.transparency_density);
  CHECK(ss.carrier_density < 1e-6 * p.transparency_density);
  CHECK_THROWS_AS(steady_state_lasing(p, 0.0), BelowThreshold);
}

TEST_CASE("steady state at 30 mA matches the bisection oracle") {
  const LaserParams p = oracles::default_laser();
  const SteadyState ss = steady_state(p, 30e-3);
  CHECK(ss.lasing);
  CHECK(rate_eq_residual(p, 30e-3, ss.photon_density, ss.carrier_density) < 1e-10);

  const oracles::SteadyPair ref = oracles::bisect_steady_state(p, 30e-3);
  CHECK(ss.photon_density == doctest::Approx(ref.s).epsilon(1e-9));
  CHECK(ss.carrier_density == doctest::Approx(ref.n).epsilon(1e-9));
}

TEST_CASE("steady-state photon density grows with bias above threshold") {
  const LaserParams p = oracles::default_laser();
  const double i_th = p.threshold_current();
  double prev = steady_state(p, 2.0 * i_th).photon_density;
  for (double bias : {4.0 * i_th, 8.0 * i_th}) {
    const double s = steady_state(p, bias).photon_density;
    CHECK(s > prev);
    prev = s;
  }
}

TEST_CASE("constant drive stays at the steady state") {
  const LaserParams p = oracles::default_laser();
  DriveWaveform drive;
  drive.sample_period = 1.0 / (4.0 * 70e9);
  drive.current.assign(2048, 30e-3);
  const RateTrajectory traj = integrate_rate_equations(drive, p);
  REQUIRE(traj.photon_density.size() == drive.current.size());
  CHECK(traj.transient_samples == 512);

  const SteadyState ss = steady_state(p, 30e-3);
  for (std::size_t k = 0; k < traj.photon_density.size(); k += 97) {
    CHECK(traj.photon_density[k] ==
          doctest::Approx(ss.photon_density).epsilon(1e-6));
    CHECK(traj.carrier_density[k] ==
          doctest::Approx(ss.carrier_density).epsilon(1e-6));
  }
}

TEST_CASE("current step rings and settles on the new steady state") {
  const LaserParams p = oracles::default_laser();
  DriveWaveform drive;
  drive.sample_period = 1.0 / (4.0 * 70e9);
  drive.current.assign(512, 28e-3);
  drive.current.resize(4096, 32e-3);
  const RateTrajectory traj = integrate_rate_equations(drive, p);

  const double s_new = steady_state(p, 32e-3).photon_density;
  double s_max = 0.0;
  for (std::size_t k = 512; k < 1024; ++k)
    s_max = std::max(s_max, traj.photon_density[k]);
  CHECK(s_max > 1.02 * s_new);  // relaxation overshoot
  CHECK(traj.photon_density.back() == doctest::Approx(s_new).epsilon(1e-5));

  const oracles::Rk4Result ref = oracles::rk4_reference(drive, p);
  CHECK(oracles::nrmse(traj.photon_density, ref.s) < 1e-4);
  CHECK(oracles::nrmse(traj.carrier_density, ref.n) < 1e-4);
}

TEST_CASE("4PAM drive agrees with the fixed-step reference") {
  const LaserParams p = oracles::default_laser();
  const DriveWaveform drive = test_pam_drive(70.0, 30e-3, 20e-3, 512, 11);
  const RateTrajectory traj = integrate_rate_equations(drive, p);
  const oracles::Rk4Result ref = oracles::rk4_reference(drive, p);
  CHECK(oracles::nrmse(traj.photon_density, ref.s) < 1e-4);
  CHECK(oracles::nrmse(traj.carrier_density, ref.n) < 1e-4);

  // Ringing overshoots the highest steady level on strong rising edges.
  const double s_top = steady_state(p, 40e-3).photon_density;
  const double s_max = *std::max_element(traj.photon_density.begin() + 512,
                                         traj.photon_density.end());
  CHECK(s_max > 1.02 * s_top);
  for (double s : traj.photon_density) CHECK(s >= 0.0);
}

TEST_CASE("halving the tolerances moves the trajectory less than the looser one") {
  const LaserParams p = oracles::default_laser();
  const DriveWaveform drive = test_pam_drive(70.0, 30e-3, 20e-3, 256, 12);
  SolverTolerances loose;
  SolverTolerances tight{loose.rel_tol / 2.0, loose.abs_tol / 2.0};
  const RateTrajectory a = integrate_rate_equations(drive, p, loose);
  const RateTrajectory b = integrate_rate_equations(drive, p, tight);
  CHECK(oracles::nrmse(a.photon_density, b.photon_density) < loose.rel_tol);
  CHECK(oracles::nrmse(a.carrier_density, b.carrier_density) < loose.rel_tol);
}

TEST_CASE("shifting the drive shifts the settled trajectory") {
  const LaserParams p = oracles::default_laser();
  const DriveWaveform base = test_pam_drive(70.0, 30e-3, 20e-3, 384, 13);
  const std::size_t m = 7;
  DriveWaveform shifted;
  shifted.sample_period = base.sample_period;
  shifted.current.assign(m, base.current.front());
  shifted.current.insert(shifted.current.end(), base.current.begin(),
                         base.current.end());
  const RateTrajectory a = integrate_rate_equations(base, p);
  const RateTrajectory b = integrate_rate_equations(shifted, p);

  std::vector<double> got, ref;
  for (std::size_t k = 512; k < base.current.size(); ++k) {
    ref.push_back(a.photon_density[k]);
    got.push_back(b.photon_density[k + m]);
  }
  CHECK(oracles::nrmse(got, ref) < 1e-5);
}

TEST_CASE("rejects bad drives") {
  const LaserParams p = oracles::default_laser();
  DriveWaveform empty;
  empty.sample_period = 1e-12;
  CHECK_THROWS_AS(integrate_rate_equations(empty, p), DegenerateInput);

  DriveWaveform negative;
  negative.sample_period = 1e-12;
  negative.current = {1e-3, -1e-3};
  CHECK_THROWS_AS(integrate_rate_equations(negative, p), NegativeCurrent);
}

TEST_CASE("field amplitude squares back to the optical power") {
  const LaserParams p = oracles::default_laser();
  const DriveWaveform drive = test_pam_drive(70.0, 30e-3, 20e-3, 64, 14);
  const RateTrajectory traj = integrate_rate_equations(drive, p);
  const ComplexField field = field_from_trajectory(traj, p);
  REQUIRE(field.amplitude.size() == traj.photon_density.size());
  for (std::size_t k = 0; k < field.amplitude.size(); ++k) {
    CHECK(field.amplitude[k] >= 0.0);
    const double power = p.power_per_photon_density * traj.photon_density[k];
    CHECK(field.amplitude[k] * field.amplitude[k] ==
          doctest::Approx(power).epsilon(1e-14));
  }
}

TEST_CASE("steady-state field has constant amplitude and a spontaneous-floor slope") {
  const LaserParams p = oracles::default_laser();
  DriveWaveform drive;
  drive.sample_period = 1.0 / (4.0 * 70e9);
  drive.current.assign(2048, 30e-3);
  const RateTrajectory traj = integrate_rate_equations(drive, p);
  const ComplexField field = field_from_trajectory(traj, p);

  const SteadyState ss = steady_state(p, 30e-3);
  const double amp_ss = std::sqrt(p.power_per_photon_density * ss.photon_density);
  for (std::size_t k = 600; k < field.amplitude.size(); k += 131)
    CHECK(field.amplitude[k] == doctest::Approx(amp_ss).epsilon(1e-6));

  // At the fixed point the gain deficit is exactly the spontaneous term, so
  // the residual phase slope is pinned to it.
  const double omega_floor = -0.5 * p.linewidth_enhancement_alpha *
                             p.confinement_factor * p.spontaneous_emission_factor *
                             ss.carrier_density /
                             (p.carrier_lifetime * ss.photon_density);
  const double slope = (field.phase.back() - field.phase[600]) /
                       (drive.sample_period * double(field.phase.size() - 1 - 600));
  CHECK(slope == doctest::Approx(omega_floor).epsilon(1e-3));
  CHECK(std::abs(slope) < 1e-4 / p.photon_lifetime);
}

TEST_CASE("zero alpha gives an identically flat phase") {
  LaserParams p = oracles::default_laser();
  p.linewidth_enhancement_alpha = 0.0;
  const DriveWaveform drive = test_pam_drive(70.0, 30e-3, 20e-3, 64, 15);
  const ComplexField field =
      field_from_trajectory(integrate_rate_equations(drive, p), p);
  for (double ph : field.phase) CHECK(ph == 0.0);
}

TEST_CASE("phase increments reproduce the chirp and its sign follows dS/dt") {
  const LaserParams p = oracles::default_laser();
  const DriveWaveform drive = test_pam_drive(70.0, 30e-3, 20e-3, 512, 16);
  const RateTrajectory traj = integrate_rate_equations(drive, p);
  const ComplexField field = field_from_trajectory(traj, p);

  std::vector<double> omega(traj.photon_density.size());
  double w_lo = 0.0, w_hi = 0.0;
  for (std::size_t k = 0; k < omega.size(); ++k) {
    omega[k] = instantaneous_chirp(p, traj.photon_density[k],
                                   traj.carrier_density[k]);
    w_lo = std::min(w_lo, omega[k]);
    w_hi = std::max(w_hi, omega[k]);
  }
  const double w_range = w_hi - w_lo;
  REQUIRE(w_range > 0.0);

  double worst = 0.0;
  for (std::size_t k = 1; k < omega.size(); ++k) {
    const double fd = (field.phase[k] - field.phase[k - 1]) / field.sample_period;
    worst = std::max(worst, std::abs(fd - 0.5 * (omega[k] + omega[k - 1])));
  }
  CHECK(worst < 1e-6 * w_range);

  // On strong edges the chirp sign tracks the sign of dS/dt.
  const double t2 = 2.0 * field.sample_period;
  double ds_max = 0.0;
  std::vector<double> ds(omega.size(), 0.0);
  for (std::size_t k = 513; k + 1 < omega.size(); ++k) {
    ds[k] = (traj.photon_density[k + 1] - traj.photon_density[k - 1]) / t2;
    ds_max = std::max(ds_max, std::abs(ds[k]));
  }
  std::size_t strong = 0;
  for (std::size_t k = 513; k + 1 < omega.size(); ++k) {
    if (std::abs(ds[k]) < 0.2 * ds_max) continue;
    ++strong;
    CHECK(omega[k] * ds[k] > 0.0);
  }
  CHECK(strong > 50);
}
