#ifndef CHIRPLINK_AUTOENCODER_HPP
#define CHIRPLINK_AUTOENCODER_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "chirplink/autodiff.hpp"
#include "chirplink/config.hpp"
#include "chirplink/dsp.hpp"
#include "chirplink/surrogate.hpp"

namespace chirplink {

inline constexpr int kDpdTaps = 15;
inline constexpr int kEqTaps = 5;
inline constexpr int kMlpHidden = 32;

// Transmitter: a learned 4 -> 2-sample pulse map (geometric constellation
// shaping), a centered DPD FIR, and drive currents held strictly inside
// ipp in (0.1, 20) mA and ibias in (15, 30) mA by a logistic box map of
// unconstrained raws.
struct EncoderParams {
  AdamParam pulse_map;  // 4 x 2
  AdamParam dpd;        // 1 x kDpdTaps
  AdamParam raw_ipp;    // 1 x 1
  AdamParam raw_ibias;  // 1 x 1

  double ipp_ma() const;
  double ibias_ma() const;
};

// Receiver: centered EQ FIR, then a 2-32-32-4 relu MLP turning each
// 2-sample symbol window into class logits.
struct DecoderParams {
  AdamParam eq;                // 1 x kEqTaps
  AdamParam h1_w, h1_b;        // kMlpHidden x 2, kMlpHidden x 1
  AdamParam h2_w, h2_b;        // kMlpHidden x kMlpHidden, kMlpHidden x 1
  AdamParam out_w, out_b;      // 4 x kMlpHidden, 4 x 1
};

// Initial point: the reference transmitter (equispaced rectangular 4PAM,
// identity DPD, mid-box currents) and an identity EQ with a small random
// MLP, so epoch zero starts at the benchmark TX and chance-level RX.
EncoderParams make_encoder();
DecoderParams make_decoder(std::uint64_t seed);

// Parameter groups in fixed traversal order (encoder first); the same
// order is used by the optimizer, the graph builders and the checkpoint.
std::vector<AdamParam*> ae_parameters(EncoderParams& enc, DecoderParams& dec);

struct EncoderVars {
  Var pulse_map, dpd, raw_ipp, raw_ibias;
  Var ipp_ma, ibias_ma;  // realized box-mapped currents, 1 x 1
};
struct DecoderVars {
  Var eq, h1_w, h1_b, h2_w, h2_b, out_w, out_b;
};

// Push parameters onto a tape, optionally collecting the pushed Vars in
// ae_parameters order for gradient readout.
EncoderVars push_encoder(Tape& tape, const EncoderParams& enc,
                         std::vector<Var>* weight_vars = nullptr);
DecoderVars push_decoder(Tape& tape, const DecoderParams& dec,
                         std::vector<Var>* weight_vars = nullptr);

// Pulse-map rows by symbol, serialized to 2 SpS, DPD, then a soft clip
// that is exactly linear up to sat_knee of the converter rail and bends
// into a tanh tail asymptoting at the rail, so in-band levels pass
// untouched while overdrive keeps a live gradient. Output is the 1 x 2n
// full-scale DAC input.
Var encode_graph(Tape& tape, const EncoderVars& enc,
                 const std::vector<int>& symbols, double sat_knee);

// DAC input -> drive current in amperes at the link rate: quantizer,
// zero-order hold to 4 SpS, reconstruction low-pass, then the box-mapped
// bias and swing. Mirrors the oracle DAC chain bit for bit.
Var tx_drive_graph(Tape& tape, Var x2, const EncoderVars& enc,
                   const LinkConfig& link);

// Detected power (4 SpS) -> receiver stream at 2 SpS: AGC, anti-alias
// low-pass, decimation, ADC quantizer. Mirrors the oracle RX chain.
Var rx_front_graph(Tape& tape, Var power4, const LinkConfig& link);

// EQ plus MLP classifier; returns logits for the symbols inside the edge
// trim, one row per kept symbol. Throws ShapeMismatch on odd input.
Var decode_graph(Tape& tape, Var rx2, const DecoderVars& dec,
                 int trim_symbols);

// Convenience single-shot forms for evaluation paths (fresh throwaway
// tape; values only).
SampledWaveform encode_waveform(const std::vector<int>& symbols,
                                const EncoderParams& enc,
                                const LinkConfig& link);
Tensor decode_probs(const SampledWaveform& rx2, const DecoderParams& dec,
                    int trim_symbols);

// The full differentiable link for one symbol sequence: encoder, DAC,
// surrogate laser, fiber, square-law detection with the reparameterized
// frozen noise draw, RX chain, decoder, mean cross entropy (nats).
struct AeChain {
  Var loss;
  Var logits;
  Var current_a;  // 1 x 4n drive, for feasibility checks
  Var power;      // 1 x 4n detected power before noise
  EncoderVars enc;
  DecoderVars dec;
  int negative_clamped = 0;  // surrogate S floor activations
};
AeChain build_ae_graph(Tape& tape, const std::vector<int>& symbols,
                       const EncoderParams& enc, const DecoderParams& dec,
                       const SurrogateNet& surrogate, const Normalization& norm,
                       const LinkConfig& link, const Tensor& noise,
                       int trim_symbols,
                       std::vector<Var>* weight_vars = nullptr);

// Frozen noise draw for one pass, identical to the photodetector's:
// sigma-scaled normals from (link.seed, "photodetect-noise", stream).
Tensor draw_noise(const LinkConfig& link, const NoiseCalibration& cal,
                  std::uint64_t stream, int n_samples);

struct AeEpochRow {
  int epoch = 0;
  double ce_train = 0.0;  // nats
  double ce_val = 0.0;
  double ipp_ma = 0.0;
  double ibias_ma = 0.0;
};

struct AeTrainReport {
  std::vector<AeEpochRow> epochs;
  int best_epoch = 0;
  double best_val_ce = 0.0;
};

struct TrainedAutoencoder {
  EncoderParams enc;
  DecoderParams dec;
  AeTrainReport report;
};

// Joint Adam training of every encoder and decoder parameter through the
// frozen surrogate: steps_per_epoch fresh random minibatches per epoch,
// a fixed validation set scored each epoch, early stop after `patience`
// epochs without validation progress, best-validation weights returned.
// Throws Diverged on a non-finite loss and InfeasibleDrive if the drive
// current stays negative past the warm-up epochs.
TrainedAutoencoder train_e2e(
    const SurrogateNet& surrogate, const Normalization& norm,
    const LinkConfig& link, std::uint64_t seed,
    const std::function<void(const AeEpochRow&)>& on_epoch = {});

struct AeEvaluation {
  double ser = 0.0;
  double mi_bits = 0.0;  // cross-entropy lower bound from decoder probs
  double prf_dbm = 0.0;
  long n_symbols = 0;
};

// Scores the trained pair on the rate-equation oracle (chunked, edge
// symbols trimmed) or on the surrogate path with identical symbols and
// noise draws; the difference isolates surrogate fidelity.
AeEvaluation evaluate_on_oracle(const EncoderParams& enc,
                                const DecoderParams& dec,
                                const LinkConfig& link, long n_symbols,
                                std::uint64_t seed);
AeEvaluation evaluate_on_surrogate(const EncoderParams& enc,
                                   const DecoderParams& dec,
                                   const SurrogateNet& surrogate,
                                   const Normalization& norm,
                                   const LinkConfig& link, long n_symbols,
                                   std::uint64_t seed);

// Checkpoints in the binary container (ae_parameters order) with a JSON
// sidecar carrying the realized currents and training summary.
void save_autoencoder(const std::string& path, const EncoderParams& enc,
                      const DecoderParams& dec, const LinkConfig& link,
                      const AeTrainReport& report);
TrainedAutoencoder load_autoencoder(const std::string& path,
                                    const LinkConfig& link,
                                    bool force = false);

}  // namespace chirplink

#endif  // CHIRPLINK_AUTOENCODER_HPP
