#ifndef CHIRPLINK_METRICS_HPP
#define CHIRPLINK_METRICS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "chirplink/autodiff.hpp"

namespace chirplink {

inline constexpr int kAlphabet = 4;

// One experiment outcome; every append and read re-checks the ranges.
struct ResultRow {
  std::string scheme;
  double symbol_rate_gbd = 0.0;
  double ipp_ma = 0.0;
  double ibias_ma = 0.0;
  double prf_dbm = 0.0;
  double ser = 0.0;
  double mi_bits = 0.0;
  long n_symbols = 0;
  std::uint64_t seed = 0;

  void validate() const;  // 0 <= ser <= 1, 0 <= mi <= log2(4)
};

// Fraction of mismatched symbols. Throws LengthMismatch.
double ser(const std::vector<int>& tx, const std::vector<int>& rx);

// Cross-entropy lower bound on the mutual information:
// log2(4) - mean(-log2 p[label]), clipped below at zero. `probs` holds one
// probability row per symbol.
double mi_from_probs(const Tensor& probs, const std::vector<int>& labels);

// Plug-in mutual information of the empirical joint (tx, rx) distribution
// of hard decisions. Throws EmptyClass when a transmit class is unseen.
double mi_from_confusion(const std::vector<int>& tx,
                         const std::vector<int>& rx);

// Fixed-header CSV, rewritten whole so reruns are idempotent.
void write_results_csv(const std::string& path,
                       const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(const std::string& path);

}  // namespace chirplink

#endif  // CHIRPLINK_METRICS_HPP
