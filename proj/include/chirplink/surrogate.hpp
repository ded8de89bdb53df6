#ifndef CHIRPLINK_SURROGATE_HPP
#define CHIRPLINK_SURROGATE_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "chirplink/autodiff.hpp"
#include "chirplink/config.hpp"
#include "chirplink/laser.hpp"

namespace chirplink {

// Dataset-level affine maps x_norm = (x - mean) / scale, stored so every
// normalization is invertible. The same constants serve train and test.
struct Normalization {
  double current_mean = 0.0;  // [A]
  double current_scale = 1.0;
  double photon_mean = 0.0;  // S [1/m^3]
  double photon_scale = 1.0;
  double carrier_mean = 0.0;  // N [1/m^3]
  double carrier_scale = 1.0;
};

// (drive current -> S, N) pairs at the link sample rate. Sequences are
// stored normalized; per-sequence drive randomization is kept for audit.
struct SurrogateDataset {
  std::vector<std::vector<double>> current;
  std::vector<std::vector<double>> photon;
  std::vector<std::vector<double>> carrier;
  std::vector<double> ipp_ma;
  std::vector<double> ibias_ma;
  Normalization norm;
  double sample_period = 0.0;
  std::uint64_t seed = 0;
  std::string split;

  int sequences() const { return static_cast<int>(current.size()); }
};

// Random 4PAM sequences shaped by a per-sequence random smooth pulse,
// run through the DAC chain at random (ipp, ibias) inside the trainable
// drive box, then integrated by the rate-equation solver. Splits are
// disjoint by stream tag; pass the train split's constants via
// fixed_norm when generating the test split so both share one map.
// Sequences are distributed across `jobs` worker threads; results do not
// depend on the thread count.
SurrogateDataset generate_dataset(const LinkConfig& link, int n_sequences,
                                  std::uint64_t seed, const std::string& split,
                                  const Normalization* fixed_norm = nullptr,
                                  int jobs = 1);

// Causal dilated residual conv net mapping the normalized drive (1 x T)
// to normalized S and N (each 1 x T). Block i dilates by 2^i, so the
// receptive field is 1 + 2 (2^blocks - 1) samples with zero lookahead.
struct SurrogateNet {
  struct Block {
    AdamParam dilated_w, dilated_b;  // causal C -> C, kernel x dilation 2^i
    AdamParam mix_w, mix_b;          // 1x1 C -> C before the residual add
  };

  SurrogateConfig cfg;
  AdamParam stem_w, stem_b;  // 1x1, 1 -> C
  std::vector<Block> blocks;
  AdamParam head_photon_w, head_photon_b;  // 1x1, C -> 1
  AdamParam head_carrier_w, head_carrier_b;

  int receptive_field() const;
  int lookahead() const { return 0; }

  struct Heads {
    Var photon;
    Var carrier;
  };
  // Pushes the weights onto the tape (appending their Vars to weight_vars
  // when given, in parameters() order) and runs the net.
  Heads forward(Tape& tape, Var current_norm,
                std::vector<Var>* weight_vars = nullptr) const;

  std::vector<AdamParam*> parameters();
  std::vector<const AdamParam*> parameters() const;
};

SurrogateNet make_surrogate_net(const SurrogateConfig& cfg,
                                std::uint64_t seed);

// Leading samples excluded from losses and metrics: the solver transient
// and the net's context warm-up, whichever is longer.
int surrogate_trim(const SurrogateNet& net);

// nrmse_Q = sqrt(mean((pred - tgt)^2)) / (max(tgt) - min(tgt)) for each
// quantity; inputs are already transient-trimmed and may concatenate
// sequences. An exactly constant target falls back to |mean| (then 1) as
// the normalizer. Throws LengthMismatch on ragged inputs.
std::pair<double, double> split_nrmse(const std::vector<double>& pred_photon,
                                      const std::vector<double>& pred_carrier,
                                      const std::vector<double>& tgt_photon,
                                      const std::vector<double>& tgt_carrier);

// Trimmed predictions and targets over a whole dataset, concatenated in
// sequence order (normalized units).
struct SurrogateEval {
  std::vector<double> pred_photon, pred_carrier;
  std::vector<double> tgt_photon, tgt_carrier;
};
SurrogateEval evaluate_surrogate(const SurrogateNet& net,
                                 const SurrogateDataset& dataset,
                                 int jobs = 1);

struct EpochRow {
  int epoch;
  double train_photon_nrmse, train_carrier_nrmse;
  double test_photon_nrmse, test_carrier_nrmse;
};
struct TrainReport {
  std::vector<EpochRow> epochs;
};

// Adam on the summed per-head NRMSE losses, batched over sequences with
// a fresh shuffle per epoch. Train columns pool the squared errors seen
// during the epoch; test columns are a full held-out evaluation. The
// optimizer itself is single-threaded; `jobs` only spreads the held-out
// evaluations, so results never depend on it. Throws Diverged when the
// loss leaves the finite range.
TrainReport train_surrogate(
    SurrogateNet& net, const SurrogateDataset& train,
    const SurrogateDataset& test, std::uint64_t seed, int jobs = 1,
    const std::function<void(const EpochRow&)>& on_epoch = {});

// Differentiable field reconstruction from the net: denormalized S and N
// feed the same amplitude and chirp formulas as field_from_trajectory,
// with the phase integrated in-graph. `current` is the drive in amperes
// (1 x T). S predictions below zero are lifted to a tiny positive floor
// with zero subgradient; the count is reported for logging.
struct SurrogateFieldResult {
  Var amplitude;  // [sqrt(W)]
  Var phase;      // [rad]
  int negative_clamped = 0;
};
SurrogateFieldResult surrogate_field(Tape& tape, const SurrogateNet& net,
                                     const Normalization& norm, Var current,
                                     const LaserParams& laser, double dt,
                                     std::vector<Var>* weight_vars = nullptr);

// Checkpoints: weights in the binary container (one channel, parameters()
// order), architecture / normalization / config hash in a JSON sidecar at
// path + ".json". Loading verifies the hash against the resolved config.
void save_surrogate(const std::string& path, const SurrogateNet& net,
                    const Normalization& norm, const LinkConfig& link,
                    double test_photon_nrmse, double test_carrier_nrmse);
SurrogateNet load_surrogate(const std::string& path, const LinkConfig& link,
                            Normalization* norm = nullptr,
                            bool force = false);

// Dataset files use the same container + JSON sidecar pairing, channels
// (current, S, N) per sequence.
void save_dataset(const std::string& path, const SurrogateDataset& dataset,
                  const LinkConfig& link);
SurrogateDataset load_dataset(const std::string& path,
                              const LinkConfig& link, bool force = false);

}  // namespace chirplink

#endif  // CHIRPLINK_SURROGATE_HPP
