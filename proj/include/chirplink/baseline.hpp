#ifndef CHIRPLINK_BASELINE_HPP
#define CHIRPLINK_BASELINE_HPP

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "chirplink/config.hpp"
#include "chirplink/metrics.hpp"

namespace chirplink {

// Second-order Volterra kernel: causal linear lags 0..n-1 plus selected
// second-order products rx[n-i] rx[n-j]. An empty product set degrades to
// the plain FIR equalizer, same ridge and lags.
struct VolterraKernel {
  std::vector<double> linear_taps;
  std::vector<double> nonlinear_taps;
  std::vector<std::pair<int, int>> products;  // (i, j) lag pairs, i <= j
};

// The default nonlinear selection: diagonal squares rx[n-i]^2, i < n.
std::vector<std::pair<int, int>> diagonal_products(int n);

// Delay maximizing the cross-correlation of rx against ref over
// d in [-window, window]; apply as rx[n + d] ~ ref[n].
int align_delay(const std::vector<double>& rx, const std::vector<double>& ref,
                int window);

// Ridge-regularized least squares (lambda 1e-8 on the Gram diagonal,
// solved by Cholesky) minimizing sum_n (y[n] - tx_ref[n])^2 with
// y[n] = sum_i w_i rx[n + shift - i] + sum_(i,j) v_ij rx[n+shift-i]
// rx[n+shift-j], over the rows where every lag is in range. The shift
// folds in the estimated channel delay plus any centering advance.
// Throws SingularMatrix past the ridge, ConfigError on a bad product set.
VolterraKernel fit_vnle_ls(const std::vector<double>& rx,
                           const std::vector<double>& tx_ref, int n_linear,
                           const std::vector<std::pair<int, int>>& products,
                           int shift = 0);
std::vector<double> fit_fir_ls(const std::vector<double>& rx,
                               const std::vector<double>& tx_ref, int n_taps,
                               int shift = 0);

// Kernel output over the full index range, zero-padding rx outside its
// support; callers keep their edge trims.
std::vector<double> apply_volterra(const std::vector<double>& rx,
                                   const VolterraKernel& kernel,
                                   int shift = 0);

// Per-class means of the symbol statistics (2-SpS pairs averaged) on a
// training segment. Throws EmptyClass.
std::array<double, kAlphabet> estimate_levels(
    const std::vector<double>& eq_out, const std::vector<int>& tx_symbols);

// Average the 2 samples of each symbol, pick the nearest reference level;
// exact midpoints break toward the lower class index.
std::vector<int> ml_detect(const std::vector<double>& eq_out,
                           const std::array<double, kAlphabet>& levels);

// The receiver-only benchmark of the reference transmitter (equispaced
// rectangular 4PAM at the configured bias) swept over ipp: one row per
// sweep point with SER, confusion MI and P_RF from a disjoint test
// segment. scheme is "fir" or "vnle". Sweep points are independent and
// spread over `jobs` workers; results do not depend on the worker count.
std::vector<ResultRow> run_benchmark_sweep(const LinkConfig& link,
                                           const std::string& scheme,
                                           int jobs = 1);

}  // namespace chirplink

#endif  // CHIRPLINK_BASELINE_HPP
