#include "chirplink/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "chirplink/channel.hpp"
#include "chirplink/container.hpp"
#include "chirplink/errors.hpp"
#include "chirplink/metrics.hpp"
#include "chirplink/rng.hpp"
#include "json.hpp"
#include "manifest.hpp"

namespace chirplink {
namespace {

using nlohmann::json;

constexpr double kIppLo = 0.1, kIppHi = 20.0;
constexpr double kIbiasLo = 15.0, kIbiasHi = 30.0;
constexpr int kDriveWarmupEpochs = 3;
constexpr double kValImprovement = 1e-4;  // nats

// Stream blocks under the shared photodetect tag; the baseline sweep uses
// small indices, so training, validation and evaluation never collide.
constexpr std::uint64_t kTrainNoiseBase = 1ull << 20;
constexpr std::uint64_t kValNoiseBase = 1ull << 21;
constexpr std::uint64_t kEvalNoiseBase = 1ull << 22;

double logistic_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor delta_taps(int n) {
  Tensor t(1, n);
  t.at(0, n / 2) = 1.0;
  return t;
}

Tensor lecun_normal(int rows, int cols, double gain, RngStream& rng) {
  Tensor t(rows, cols);
  const double sd = gain * std::sqrt(1.0 / cols);
  for (double& v : t.v) v = sd * rng.normal();
  return t;
}

void check_symbols(const std::vector<int>& symbols) {
  if (symbols.empty()) throw DegenerateInput("empty symbol sequence");
  for (int s : symbols)
    if (s < 0 || s >= kAlphabet)
      throw DegenerateInput("symbol index outside the 4PAM alphabet");
}

Var box_map(Tape& tape, Var raw, double lo, double hi) {
  return tape.offset(tape.scale(tape.logistic(raw), hi - lo), lo);
}

Var zero_bias(Tape& tape) { return tape.constant(Tensor(1, 1, 0.0)); }

std::vector<const AdamParam*> parameter_list(const EncoderParams& enc,
                                             const DecoderParams& dec) {
  return {&enc.pulse_map, &enc.dpd,  &enc.raw_ipp, &enc.raw_ibias,
          &dec.eq,        &dec.h1_w, &dec.h1_b,    &dec.h2_w,
          &dec.h2_b,      &dec.out_w, &dec.out_b};
}

struct FiberTaps {
  std::vector<double> re, im;
};

FiberTaps split_fiber_taps(const LinkConfig& link) {
  const std::vector<std::complex<double>> taps =
      fiber_kernel(link.fiber, link.sample_rate_hz());
  FiberTaps out;
  out.re.reserve(taps.size());
  out.im.reserve(taps.size());
  for (const auto& t : taps) {
    out.re.push_back(t.real());
    out.im.push_back(t.imag());
  }
  return out;
}

int argmax_row(const Tensor& probs, int r) {
  int best = 0;
  double bv = probs.at(r, 0);
  for (int c = 1; c < probs.cols; ++c)
    if (probs.at(r, c) > bv) {
      bv = probs.at(r, c);
      best = c;
    }
  return best;
}

// Shared scoring loop for the oracle and surrogate evaluations: the
// callback maps one symbol chunk to (probability rows, P_RF).
template <typename ChunkFn>
AeEvaluation evaluate_chunks(const LinkConfig& link, long n_symbols,
                             std::uint64_t seed, int trim, ChunkFn&& chunk_fn) {
  if (n_symbols < 1) throw ConfigError("n_symbols must be positive");
  const int chunk = link.evaluation.chunk_symbols;
  if (chunk - 2 * trim < 1)
    throw ConfigError("evaluation chunk is shorter than the chain trim");
  long scored = 0, errors = 0;
  double ce_bits = 0.0, prf_sum = 0.0;
  int chunks = 0;
  for (std::uint64_t k = 0; scored < n_symbols; ++k) {
    const std::vector<int> syms =
        RngStream(seed, "ae-eval-symbols", k)
            .symbols(static_cast<std::size_t>(chunk));
    const auto [probs, prf] = chunk_fn(syms, k);
    for (int r = 0; r < probs.rows; ++r) {
      const int label = syms[static_cast<std::size_t>(trim + r)];
      if (argmax_row(probs, r) != label) ++errors;
      ce_bits += -std::log2(std::max(probs.at(r, label), 1e-300));
      ++scored;
    }
    prf_sum += prf;
    ++chunks;
  }
  AeEvaluation ev;
  ev.ser = static_cast<double>(errors) / static_cast<double>(scored);
  ev.mi_bits =
      std::max(0.0, 2.0 - ce_bits / static_cast<double>(scored));
  ev.prf_dbm = prf_sum / chunks;
  ev.n_symbols = scored;
  return ev;
}

double trimmed_prf_dbm(const Tensor& power, const LinkConfig& link) {
  SampledWaveform p;
  p.samples_per_symbol = link.samples_per_symbol;
  p.symbol_rate = link.symbol_rate_hz();
  const auto guard = std::min(
      power.v.size() / 2,
      std::max<std::size_t>(kTransientSamples,
                            static_cast<std::size_t>(link.fiber.fir_length) / 2));
  p.samples.assign(power.v.begin() + static_cast<std::ptrdiff_t>(guard),
                   power.v.end() - static_cast<std::ptrdiff_t>(guard));
  return measure_prf_dbm(p);
}

}  // namespace

double EncoderParams::ipp_ma() const {
  return kIppLo + (kIppHi - kIppLo) * logistic_scalar(raw_ipp.value.v[0]);
}

double EncoderParams::ibias_ma() const {
  return kIbiasLo +
         (kIbiasHi - kIbiasLo) * logistic_scalar(raw_ibias.value.v[0]);
}

EncoderParams make_encoder() {
  EncoderParams e;
  Tensor pm(kAlphabet, 2);
  for (int s = 0; s < kAlphabet; ++s) {
    pm.at(s, 0) = kPam4Levels[s];
    pm.at(s, 1) = kPam4Levels[s];
  }
  e.pulse_map = AdamParam(std::move(pm));
  e.dpd = AdamParam(delta_taps(kDpdTaps));
  e.raw_ipp = AdamParam(Tensor(1, 1, 0.0));
  e.raw_ibias = AdamParam(Tensor(1, 1, 0.0));
  return e;
}

DecoderParams make_decoder(std::uint64_t seed) {
  RngStream rng(seed, "ae-init");
  DecoderParams d;
  d.eq = AdamParam(delta_taps(kEqTaps));
  d.h1_w = AdamParam(lecun_normal(kMlpHidden, 2, 1.0, rng));
  d.h1_b = AdamParam(Tensor(kMlpHidden, 1));
  d.h2_w = AdamParam(lecun_normal(kMlpHidden, kMlpHidden, 1.0, rng));
  d.h2_b = AdamParam(Tensor(kMlpHidden, 1));
  d.out_w = AdamParam(lecun_normal(kAlphabet, kMlpHidden, 0.1, rng));
  d.out_b = AdamParam(Tensor(kAlphabet, 1));
  return d;
}

std::vector<AdamParam*> ae_parameters(EncoderParams& enc, DecoderParams& dec) {
  std::vector<AdamParam*> out;
  for (const AdamParam* p : parameter_list(enc, dec))
    out.push_back(const_cast<AdamParam*>(p));
  return out;
}

EncoderVars push_encoder(Tape& tape, const EncoderParams& enc,
                         std::vector<Var>* weight_vars) {
  EncoderVars v;
  v.pulse_map = tape.param(enc.pulse_map.value);
  if (weight_vars) weight_vars->push_back(v.pulse_map);
  v.dpd = tape.param(enc.dpd.value);
  if (weight_vars) weight_vars->push_back(v.dpd);
  v.raw_ipp = tape.param(enc.raw_ipp.value);
  if (weight_vars) weight_vars->push_back(v.raw_ipp);
  v.raw_ibias = tape.param(enc.raw_ibias.value);
  if (weight_vars) weight_vars->push_back(v.raw_ibias);
  v.ipp_ma = box_map(tape, v.raw_ipp, kIppLo, kIppHi);
  v.ibias_ma = box_map(tape, v.raw_ibias, kIbiasLo, kIbiasHi);
  return v;
}

DecoderVars push_decoder(Tape& tape, const DecoderParams& dec,
                         std::vector<Var>* weight_vars) {
  DecoderVars v;
  v.eq = tape.param(dec.eq.value);
  if (weight_vars) weight_vars->push_back(v.eq);
  v.h1_w = tape.param(dec.h1_w.value);
  if (weight_vars) weight_vars->push_back(v.h1_w);
  v.h1_b = tape.param(dec.h1_b.value);
  if (weight_vars) weight_vars->push_back(v.h1_b);
  v.h2_w = tape.param(dec.h2_w.value);
  if (weight_vars) weight_vars->push_back(v.h2_w);
  v.h2_b = tape.param(dec.h2_b.value);
  if (weight_vars) weight_vars->push_back(v.h2_b);
  v.out_w = tape.param(dec.out_w.value);
  if (weight_vars) weight_vars->push_back(v.out_w);
  v.out_b = tape.param(dec.out_b.value);
  if (weight_vars) weight_vars->push_back(v.out_b);
  return v;
}

Var encode_graph(Tape& tape, const EncoderVars& enc,
                 const std::vector<int>& symbols, double sat_knee) {
  check_symbols(symbols);
  const int n = static_cast<int>(symbols.size());
  const Var pulses = tape.rows_select(enc.pulse_map, symbols);
  const Var serial = tape.reshape(pulses, 1, 2 * n);
  const Var shaped =
      tape.conv1d(serial, enc.dpd, zero_bias(tape), kDpdTaps, 1, false);
  // Linear inside |x| <= c, then a tanh tail reaching the rail at infinity:
  // sat(x) = clamp(x) + m tanh((x - clamp(x)) / m), m the headroom.
  const double c = 0.5 * kFullScale * sat_knee;
  const double m = 0.5 * kFullScale - c;
  const Var inner = tape.clamp(shaped, -c, c);
  const Var excess = tape.sub(shaped, inner);
  return tape.add(inner,
                  tape.scale(tape.tanh_t(tape.scale(excess, 1.0 / m)), m));
}

Var tx_drive_graph(Tape& tape, Var x2, const EncoderVars& enc,
                   const LinkConfig& link) {
  const Var q = tape.smooth_quantize(x2, link.converter.bits,
                                     link.converter.fourier_order);
  const Var up = tape.upsample_hold(q, link.samples_per_symbol / 2);
  const Var filt = tape.conv_fixed(
      up, supergaussian_taps(link.converter, link.samples_per_symbol));
  const Var cur_ma = tape.add_bc(tape.mul_bc(filt, enc.ipp_ma), enc.ibias_ma);
  return tape.scale(cur_ma, 1e-3);
}

Var rx_front_graph(Tape& tape, Var power4, const LinkConfig& link) {
  const Var mean = tape.mean_all(power4);
  const Var centered = tape.sub_bc(power4, mean);
  const Var variance = tape.mean_all(tape.square(centered));
  const Var gain =
      tape.div(tape.constant(Tensor(1, 1, link.converter.agc_target_std)),
               tape.sqrt_t(variance));
  const Var leveled = tape.mul_bc(centered, gain);
  const Var filtered = tape.conv_fixed(
      leveled, supergaussian_taps(link.converter, link.samples_per_symbol));
  const Var down = tape.downsample_keep0(filtered, link.samples_per_symbol / 2);
  return tape.smooth_quantize(down, link.converter.bits,
                              link.converter.fourier_order);
}

Var decode_graph(Tape& tape, Var rx2, const DecoderVars& dec,
                 int trim_symbols) {
  if (rx2.rows != 1 || rx2.cols % 2 != 0)
    throw ShapeMismatch("decoder expects a 1 x even receiver stream");
  const int n = rx2.cols / 2;
  if (trim_symbols < 0 || n - 2 * trim_symbols < 1)
    throw ShapeMismatch("edge trim leaves no symbols to decode");
  const Var eqd = tape.conv1d(rx2, dec.eq, zero_bias(tape), kEqTaps, 1, false);
  const Var kept =
      tape.slice_cols(eqd, 2 * trim_symbols, 2 * (n - trim_symbols));
  const Var windows = tape.reshape(kept, n - 2 * trim_symbols, 2);
  const Var a1 = tape.relu(tape.linear(windows, dec.h1_w, dec.h1_b));
  const Var a2 = tape.relu(tape.linear(a1, dec.h2_w, dec.h2_b));
  return tape.linear(a2, dec.out_w, dec.out_b);
}

SampledWaveform encode_waveform(const std::vector<int>& symbols,
                                const EncoderParams& enc,
                                const LinkConfig& link) {
  Tape tape;
  const EncoderVars v = push_encoder(tape, enc, nullptr);
  const Var x2 = encode_graph(tape, v, symbols, link.ae.sat_knee);
  SampledWaveform w;
  w.samples = tape.value(x2).v;
  w.samples_per_symbol = 2;
  w.symbol_rate = link.symbol_rate_hz();
  return w;
}

Tensor decode_probs(const SampledWaveform& rx2, const DecoderParams& dec,
                    int trim_symbols) {
  if (rx2.samples_per_symbol != 2)
    throw IncompatibleRates("decoder expects a 2-SpS stream");
  Tape tape;
  const DecoderVars v = push_decoder(tape, dec, nullptr);
  Tensor in(1, static_cast<int>(rx2.samples.size()));
  in.v = rx2.samples;
  const Var logits = decode_graph(tape, tape.constant(std::move(in)), v,
                                  trim_symbols);
  return softmax_rows(tape.value(logits));
}

Tensor draw_noise(const LinkConfig& link, const NoiseCalibration& cal,
                  std::uint64_t stream, int n_samples) {
  if (!cal.calibrated())
    throw NotCalibrated("photodetector noise has not been calibrated");
  RngStream rng(link.seed, "photodetect-noise", stream);
  Tensor t(1, n_samples);
  for (double& v : t.v) v = cal.sigma * rng.normal();
  return t;
}

AeChain build_ae_graph(Tape& tape, const std::vector<int>& symbols,
                       const EncoderParams& enc, const DecoderParams& dec,
                       const SurrogateNet& surrogate, const Normalization& norm,
                       const LinkConfig& link, const Tensor& noise,
                       int trim_symbols, std::vector<Var>* weight_vars) {
  AeChain c;
  c.enc = push_encoder(tape, enc, weight_vars);
  c.dec = push_decoder(tape, dec, weight_vars);

  const Var x2 = encode_graph(tape, c.enc, symbols, link.ae.sat_knee);
  c.current_a = tx_drive_graph(tape, x2, c.enc, link);

  const SurrogateFieldResult field = surrogate_field(
      tape, surrogate, norm, c.current_a, link.laser, link.sample_period());
  c.negative_clamped = field.negative_clamped;

  const Var re = tape.mul(field.amplitude, tape.cos_t(field.phase));
  const Var im = tape.mul(field.amplitude, tape.sin_t(field.phase));
  const FiberTaps taps = split_fiber_taps(link);
  const Var out_re =
      tape.sub(tape.conv_fixed(re, taps.re), tape.conv_fixed(im, taps.im));
  const Var out_im =
      tape.add(tape.conv_fixed(re, taps.im), tape.conv_fixed(im, taps.re));
  c.power = tape.add(tape.square(out_re), tape.square(out_im));

  if (noise.rows != 1 || noise.cols != c.power.cols)
    throw ShapeMismatch("noise draw does not match the detected power length");
  const Var noisy = tape.add(c.power, tape.constant(noise));
  const Var rx2 = rx_front_graph(tape, noisy, link);
  c.logits = decode_graph(tape, rx2, c.dec, trim_symbols);

  std::vector<int> labels(symbols.begin() + trim_symbols,
                          symbols.end() - trim_symbols);
  c.loss = tape.softmax_ce(c.logits, std::move(labels));
  return c;
}

TrainedAutoencoder train_e2e(
    const SurrogateNet& surrogate, const Normalization& norm,
    const LinkConfig& link, std::uint64_t seed,
    const std::function<void(const AeEpochRow&)>& on_epoch) {
  const AeConfig& cfg = link.ae;
  TrainedAutoencoder out{make_encoder(), make_decoder(seed), {}};
  const NoiseCalibration cal = calibrate_noise(link);
  Adam adam(cfg.learning_rate);
  const std::vector<AdamParam*> params = ae_parameters(out.enc, out.dec);

  const int batch = cfg.batch_symbols;
  const int n4 = batch * link.samples_per_symbol;

  std::vector<std::vector<int>> val_syms;
  std::vector<Tensor> val_noise;
  for (int k = 0; k < cfg.val_sequences; ++k) {
    val_syms.push_back(RngStream(seed, "ae-val-symbols", k)
                           .symbols(static_cast<std::size_t>(batch)));
    val_noise.push_back(draw_noise(link, cal, kValNoiseBase + k, n4));
  }

  EncoderParams best_enc = out.enc;
  DecoderParams best_dec = out.dec;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0, stale = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double ce_sum = 0.0;
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      const std::uint64_t idx =
          static_cast<std::uint64_t>(epoch) * cfg.steps_per_epoch + step;
      const std::vector<int> syms =
          RngStream(seed, "ae-train-symbols", idx)
              .symbols(static_cast<std::size_t>(batch));
      const Tensor noise = draw_noise(link, cal, kTrainNoiseBase + idx, n4);

      Tape tape;
      std::vector<Var> wv;
      const AeChain chain =
          build_ae_graph(tape, syms, out.enc, out.dec, surrogate, norm, link,
                         noise, cfg.trim_symbols, &wv);
      const double loss = tape.value(chain.loss).v[0];
      if (!std::isfinite(loss))
        throw Diverged("autoencoder loss left the finite range at epoch " +
                       std::to_string(epoch + 1));
      if (epoch >= kDriveWarmupEpochs) {
        const Tensor& cur = tape.value(chain.current_a);
        const double mn = *std::min_element(cur.v.begin(), cur.v.end());
        if (mn < 0.0)
          throw InfeasibleDrive(
              "drive current still negative after warm-up: " +
              std::to_string(mn * 1e3) + " mA");
      }
      ce_sum += loss;

      tape.backward(chain.loss);
      for (std::size_t i = 0; i < params.size(); ++i)
        adam.step(*params[i], tape.grad(wv[i]));
      adam.next_step();
    }

    double val_sum = 0.0;
    for (int k = 0; k < cfg.val_sequences; ++k) {
      Tape tape;
      const AeChain chain =
          build_ae_graph(tape, val_syms[static_cast<std::size_t>(k)], out.enc,
                         out.dec, surrogate, norm, link,
                         val_noise[static_cast<std::size_t>(k)],
                         cfg.trim_symbols, nullptr);
      val_sum += tape.value(chain.loss).v[0];
    }

    AeEpochRow row;
    row.epoch = epoch + 1;
    row.ce_train = ce_sum / cfg.steps_per_epoch;
    row.ce_val = val_sum / cfg.val_sequences;
    row.ipp_ma = out.enc.ipp_ma();
    row.ibias_ma = out.enc.ibias_ma();
    out.report.epochs.push_back(row);
    if (on_epoch) on_epoch(row);

    if (row.ce_val < best_val - kValImprovement) {
      best_val = row.ce_val;
      best_epoch = epoch + 1;
      best_enc = out.enc;
      best_dec = out.dec;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }

  out.enc = std::move(best_enc);
  out.dec = std::move(best_dec);
  out.report.best_epoch = best_epoch;
  out.report.best_val_ce = best_val;
  return out;
}

AeEvaluation evaluate_on_oracle(const EncoderParams& enc,
                                const DecoderParams& dec,
                                const LinkConfig& link, long n_symbols,
                                std::uint64_t seed) {
  const NoiseCalibration cal = calibrate_noise(link);
  const int trim = chain_trim_symbols(link);
  const double ipp = enc.ipp_ma(), ibias = enc.ibias_ma();
  return evaluate_chunks(
      link, n_symbols, seed, trim,
      [&](const std::vector<int>& syms, std::uint64_t k) {
        const SampledWaveform x2 = encode_waveform(syms, enc, link);
        const OracleChainResult chain =
            oracle_chain(link, x2, ipp, ibias, cal, kEvalNoiseBase + k);
        return std::pair(decode_probs(chain.rx, dec, trim), chain.prf_dbm);
      });
}

AeEvaluation evaluate_on_surrogate(const EncoderParams& enc,
                                   const DecoderParams& dec,
                                   const SurrogateNet& surrogate,
                                   const Normalization& norm,
                                   const LinkConfig& link, long n_symbols,
                                   std::uint64_t seed) {
  const NoiseCalibration cal = calibrate_noise(link);
  const int trim = chain_trim_symbols(link);
  const int sps = link.samples_per_symbol;
  return evaluate_chunks(
      link, n_symbols, seed, trim,
      [&](const std::vector<int>& syms, std::uint64_t k) {
        Tape tape;
        const Tensor noise = draw_noise(
            link, cal, kEvalNoiseBase + k,
            static_cast<int>(syms.size()) * sps);
        const AeChain chain = build_ae_graph(tape, syms, enc, dec, surrogate,
                                             norm, link, noise, trim, nullptr);
        return std::pair(softmax_rows(tape.value(chain.logits)),
                         trimmed_prf_dbm(tape.value(chain.power), link));
      });
}

void save_autoencoder(const std::string& path, const EncoderParams& enc,
                      const DecoderParams& dec, const LinkConfig& link,
                      const AeTrainReport& report) {
  Container c;
  c.channels = 1;
  c.sample_period = 0.0;
  long count = 0;
  for (const AdamParam* p : parameter_list(enc, dec)) {
    c.payload.insert(c.payload.end(), p->value.v.begin(), p->value.v.end());
    count += p->value.size();
  }
  write_container(path, c);
  json j{{"schema_version", 1},
         {"kind", "autoencoder"},
         {"config_hash", config_hash_hex(link)},
         {"symbol_rate_gbd", link.symbol_rate_gbd},
         {"parameter_count", count},
         {"ipp_ma", enc.ipp_ma()},
         {"ibias_ma", enc.ibias_ma()},
         {"best_epoch", report.best_epoch},
         {"best_val_ce", report.best_val_ce},
         {"epochs_run", report.epochs.size()}};
  manifest::write(path + ".json", j);
}

TrainedAutoencoder load_autoencoder(const std::string& path,
                                    const LinkConfig& link, bool force) {
  const json j = manifest::read(path + ".json", "autoencoder", link, !force);
  TrainedAutoencoder out{make_encoder(), make_decoder(0), {}};
  const Container c = read_container(path);
  std::size_t off = 0;
  for (AdamParam* p : ae_parameters(out.enc, out.dec)) {
    const std::size_t n = p->value.v.size();
    if (off + n > c.payload.size())
      throw Error("autoencoder checkpoint " + path +
                  " is shorter than its parameter shapes");
    std::copy(c.payload.begin() + static_cast<std::ptrdiff_t>(off),
              c.payload.begin() + static_cast<std::ptrdiff_t>(off + n),
              p->value.v.begin());
    p->m = Tensor(p->value.rows, p->value.cols);
    p->v = Tensor(p->value.rows, p->value.cols);
    off += n;
  }
  if (off != c.payload.size())
    throw Error("autoencoder checkpoint " + path +
                " does not match its parameter shapes");
  out.report.best_epoch = j.value("best_epoch", 0);
  out.report.best_val_ce = j.value("best_val_ce", 0.0);
  return out;
}

}  // namespace chirplink
