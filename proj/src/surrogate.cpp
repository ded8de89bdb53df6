#include "chirplink/surrogate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>
#include <vector>

#include "chirplink/container.hpp"
#include "chirplink/dsp.hpp"
#include "chirplink/errors.hpp"
#include "chirplink/rng.hpp"
#include "json.hpp"

#include "manifest.hpp"

namespace chirplink {
namespace {

using nlohmann::json;

struct RawSequence {
  std::vector<double> current, photon, carrier;
  double ipp_ma = 0.0, ibias_ma = 0.0;
};

RawSequence make_sequence(const LinkConfig& link, std::uint64_t seed,
                          const std::string& split, int index) {
  RngStream rng(seed, "dataset-" + split, static_cast<std::uint64_t>(index));
  RawSequence out;
  out.ipp_ma = rng.uniform(0.1, 20.0);
  out.ibias_ma = rng.uniform(15.0, 30.0);
  const auto symbols = rng.symbols(link.dataset.symbols_per_sequence);

  std::vector<double> pulse(std::max(1, link.dataset.pulse_taps));
  for (auto& p : pulse) p = rng.uniform();
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<double> sm(pulse.size());
    for (std::size_t k = 0; k < pulse.size(); ++k) {
      const double left = k > 0 ? pulse[k - 1] : 0.0;
      const double right = k + 1 < pulse.size() ? pulse[k + 1] : 0.0;
      sm[k] = 0.25 * left + 0.5 * pulse[k] + 0.25 * right;
    }
    pulse.swap(sm);
  }
  const double sum = std::accumulate(pulse.begin(), pulse.end(), 0.0);
  if (sum > 1e-9) {
    for (auto& p : pulse) p /= sum;
  } else {
    std::fill(pulse.begin(), pulse.end(), 0.0);
    pulse[pulse.size() / 2] = 1.0;
  }
  if (pulse.size() % 2 == 0) pulse.push_back(0.0);  // convolve_same wants odd

  SampledWaveform shaped = rect_pam_waveform(symbols, link.symbol_rate_hz(), 2);
  shaped.samples = convolve_same(shaped.samples, pulse);
  const SampledWaveform quantized = smooth_quantize(shaped, link.converter);
  const SampledWaveform upsampled = resample(quantized, link.samples_per_symbol);
  const SampledWaveform filtered = supergaussian_lpf(upsampled, link.converter);
  const DriveWaveform drive =
      current_scale(filtered, out.ipp_ma, out.ibias_ma);

  const SolverTolerances tol{link.solver.rel_tol, link.solver.abs_tol};
  const RateTrajectory traj =
      integrate_rate_equations(drive, link.laser, tol);
  out.current = drive.current;
  out.photon = traj.photon_density;
  out.carrier = traj.carrier_density;
  return out;
}

void mean_std(const std::vector<std::vector<double>>& seqs, double* mean,
              double* scale) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : seqs) {
    for (double v : s) sum += v;
    n += s.size();
  }
  const double m = n ? sum / static_cast<double>(n) : 0.0;
  double ss = 0.0;
  for (const auto& s : seqs)
    for (double v : s) ss += (v - m) * (v - m);
  const double sd = n ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
  *mean = m;
  *scale = std::max(sd, 1e-12 * std::max(std::abs(m), 1e-300));
}

void normalize_all(std::vector<std::vector<double>>& seqs, double mean,
                   double scale) {
  for (auto& s : seqs)
    for (double& v : s) v = (v - mean) / scale;
}

double nrmse_one(const std::vector<double>& pred,
                 const std::vector<double>& tgt) {
  double sse = 0.0;
  for (std::size_t k = 0; k < tgt.size(); ++k) {
    const double d = pred[k] - tgt[k];
    sse += d * d;
  }
  const double rmse = std::sqrt(sse / static_cast<double>(tgt.size()));
  const auto [lo, hi] = std::minmax_element(tgt.begin(), tgt.end());
  double range = *hi - *lo;
  if (range <= 0.0) {
    const double mean =
        std::accumulate(tgt.begin(), tgt.end(), 0.0) /
        static_cast<double>(tgt.size());
    range = std::max(std::abs(mean), 1.0);
  }
  return rmse / range;
}

double target_range(const std::vector<std::vector<double>>& seqs, int trim) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : seqs) {
    for (std::size_t k = static_cast<std::size_t>(trim); k < s.size(); ++k) {
      lo = std::min(lo, s[k]);
      hi = std::max(hi, s[k]);
      sum += s[k];
      ++n;
    }
  }
  double range = hi - lo;
  if (!(range > 0.0))
    range = std::max(std::abs(n ? sum / static_cast<double>(n) : 0.0), 1.0);
  return range;
}

Tensor row_tensor(const double* data, int n) {
  Tensor t(1, n);
  std::copy(data, data + n, t.v.begin());
  return t;
}

void init_conv(Tensor& w, Tensor& b, int fan_in, double gain, RngStream& rng) {
  const double sd = gain * std::sqrt(1.0 / static_cast<double>(fan_in));
  for (auto& v : w.v) v = sd * rng.normal();
  std::fill(b.v.begin(), b.v.end(), 0.0);
}

json norm_to_json(const Normalization& n) {
  return json{{"current_mean", n.current_mean},
              {"current_scale", n.current_scale},
              {"photon_mean", n.photon_mean},
              {"photon_scale", n.photon_scale},
              {"carrier_mean", n.carrier_mean},
              {"carrier_scale", n.carrier_scale}};
}

Normalization norm_from_json(const json& j) {
  Normalization n;
  n.current_mean = j.at("current_mean").get<double>();
  n.current_scale = j.at("current_scale").get<double>();
  n.photon_mean = j.at("photon_mean").get<double>();
  n.photon_scale = j.at("photon_scale").get<double>();
  n.carrier_mean = j.at("carrier_mean").get<double>();
  n.carrier_scale = j.at("carrier_scale").get<double>();
  return n;
}


}  // namespace

SurrogateDataset generate_dataset(const LinkConfig& link, int n_sequences,
                                  std::uint64_t seed, const std::string& split,
                                  const Normalization* fixed_norm, int jobs) {
  if (n_sequences < 1) throw ConfigError("n_sequences must be positive");
  std::vector<RawSequence> raw(static_cast<std::size_t>(n_sequences));
  const int workers = std::clamp(jobs, 1, n_sequences);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n_sequences) return;
      try {
        raw[static_cast<std::size_t>(i)] = make_sequence(link, seed, split, i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  SurrogateDataset ds;
  ds.sample_period = link.sample_period();
  ds.seed = seed;
  ds.split = split;
  for (auto& r : raw) {
    ds.current.push_back(std::move(r.current));
    ds.photon.push_back(std::move(r.photon));
    ds.carrier.push_back(std::move(r.carrier));
    ds.ipp_ma.push_back(r.ipp_ma);
    ds.ibias_ma.push_back(r.ibias_ma);
  }
  if (fixed_norm) {
    ds.norm = *fixed_norm;
  } else {
    mean_std(ds.current, &ds.norm.current_mean, &ds.norm.current_scale);
    mean_std(ds.photon, &ds.norm.photon_mean, &ds.norm.photon_scale);
    mean_std(ds.carrier, &ds.norm.carrier_mean, &ds.norm.carrier_scale);
  }
  normalize_all(ds.current, ds.norm.current_mean, ds.norm.current_scale);
  normalize_all(ds.photon, ds.norm.photon_mean, ds.norm.photon_scale);
  normalize_all(ds.carrier, ds.norm.carrier_mean, ds.norm.carrier_scale);
  return ds;
}

int SurrogateNet::receptive_field() const {
  int rf = 1;
  for (int i = 0; i < cfg.blocks; ++i) rf += (cfg.kernel - 1) * (1 << i);
  return rf;
}

SurrogateNet::Heads SurrogateNet::forward(
    Tape& tape, Var current_norm, std::vector<Var>* weight_vars) const {
  auto push = [&](const AdamParam& p) {
    const Var v = tape.param(p.value);
    if (weight_vars) weight_vars->push_back(v);
    return v;
  };
  const Var sw = push(stem_w);
  const Var sb = push(stem_b);
  Var h = tape.conv1d(current_norm, sw, sb, 1, 1, true);
  for (int i = 0; i < cfg.blocks; ++i) {
    const Block& blk = blocks[static_cast<std::size_t>(i)];
    const Var dw = push(blk.dilated_w);
    const Var db = push(blk.dilated_b);
    const Var act =
        tape.tanh_t(tape.conv1d(h, dw, db, cfg.kernel, 1 << i, true));
    const Var mw = push(blk.mix_w);
    const Var mb = push(blk.mix_b);
    h = tape.add(h, tape.conv1d(act, mw, mb, 1, 1, true));
  }
  const Var pw = push(head_photon_w);
  const Var pb = push(head_photon_b);
  const Var cw = push(head_carrier_w);
  const Var cb = push(head_carrier_b);
  Heads out;
  out.photon = tape.conv1d(h, pw, pb, 1, 1, true);
  out.carrier = tape.conv1d(h, cw, cb, 1, 1, true);
  return out;
}

std::vector<AdamParam*> SurrogateNet::parameters() {
  std::vector<AdamParam*> ps{&stem_w, &stem_b};
  for (auto& b : blocks) {
    ps.push_back(&b.dilated_w);
    ps.push_back(&b.dilated_b);
    ps.push_back(&b.mix_w);
    ps.push_back(&b.mix_b);
  }
  ps.insert(ps.end(), {&head_photon_w, &head_photon_b, &head_carrier_w,
                       &head_carrier_b});
  return ps;
}

std::vector<const AdamParam*> SurrogateNet::parameters() const {
  auto mutable_ps = const_cast<SurrogateNet*>(this)->parameters();
  return {mutable_ps.begin(), mutable_ps.end()};
}

SurrogateNet make_surrogate_net(const SurrogateConfig& cfg,
                                std::uint64_t seed) {
  if (cfg.channels < 1 || cfg.blocks < 1 || cfg.kernel < 2)
    throw ConfigError("surrogate architecture must have channels >= 1, "
                      "blocks >= 1, kernel >= 2");
  RngStream rng(seed, "surrogate-init");
  SurrogateNet net;
  net.cfg = cfg;
  const int c = cfg.channels;
  auto make = [](AdamParam& p, int rows, int cols) {
    p.value = Tensor(rows, cols);
    p.m = Tensor(rows, cols);
    p.v = Tensor(rows, cols);
  };
  make(net.stem_w, c, 1);
  make(net.stem_b, c, 1);
  init_conv(net.stem_w.value, net.stem_b.value, 1, 1.0, rng);
  net.blocks.resize(static_cast<std::size_t>(cfg.blocks));
  for (auto& b : net.blocks) {
    make(b.dilated_w, c, c * cfg.kernel);
    make(b.dilated_b, c, 1);
    init_conv(b.dilated_w.value, b.dilated_b.value, c * cfg.kernel, 1.0, rng);
    make(b.mix_w, c, c);
    make(b.mix_b, c, 1);
    init_conv(b.mix_w.value, b.mix_b.value, c, 0.5, rng);
  }
  make(net.head_photon_w, 1, c);
  make(net.head_photon_b, 1, 1);
  init_conv(net.head_photon_w.value, net.head_photon_b.value, c, 0.1, rng);
  make(net.head_carrier_w, 1, c);
  make(net.head_carrier_b, 1, 1);
  init_conv(net.head_carrier_w.value, net.head_carrier_b.value, c, 0.1, rng);
  return net;
}

int surrogate_trim(const SurrogateNet& net) {
  return std::max(static_cast<int>(kTransientSamples), net.receptive_field());
}

std::pair<double, double> split_nrmse(const std::vector<double>& pred_photon,
                                      const std::vector<double>& pred_carrier,
                                      const std::vector<double>& tgt_photon,
                                      const std::vector<double>& tgt_carrier) {
  if (pred_photon.size() != tgt_photon.size() ||
      pred_carrier.size() != tgt_carrier.size() ||
      pred_photon.size() != pred_carrier.size() || pred_photon.empty())
    throw LengthMismatch("split_nrmse needs four equal nonempty sequences");
  return {nrmse_one(pred_photon, tgt_photon),
          nrmse_one(pred_carrier, tgt_carrier)};
}

SurrogateEval evaluate_surrogate(const SurrogateNet& net,
                                 const SurrogateDataset& dataset, int jobs) {
  const int trim = surrogate_trim(net);
  const int n = dataset.sequences();
  std::vector<std::vector<double>> ps(static_cast<std::size_t>(n)),
      pc(static_cast<std::size_t>(n));
  const int workers = std::clamp(jobs, 1, std::max(1, n));
  std::atomic<int> next{0};
  auto work = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      const auto& cur = dataset.current[static_cast<std::size_t>(i)];
      const int len = static_cast<int>(cur.size());
      Tape tape;
      const Var x = tape.constant(row_tensor(cur.data(), len));
      const auto heads = net.forward(tape, x);
      const Tensor& sp = tape.value(heads.photon);
      const Tensor& cp = tape.value(heads.carrier);
      const int from = std::min(trim, len);
      ps[static_cast<std::size_t>(i)].assign(sp.v.begin() + from, sp.v.end());
      pc[static_cast<std::size_t>(i)].assign(cp.v.begin() + from, cp.v.end());
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  SurrogateEval ev;
  for (int i = 0; i < n; ++i) {
    const auto& ts = dataset.photon[static_cast<std::size_t>(i)];
    const auto& tc = dataset.carrier[static_cast<std::size_t>(i)];
    const int from = std::min<int>(trim, static_cast<int>(ts.size()));
    ev.pred_photon.insert(ev.pred_photon.end(),
                          ps[static_cast<std::size_t>(i)].begin(),
                          ps[static_cast<std::size_t>(i)].end());
    ev.pred_carrier.insert(ev.pred_carrier.end(),
                           pc[static_cast<std::size_t>(i)].begin(),
                           pc[static_cast<std::size_t>(i)].end());
    ev.tgt_photon.insert(ev.tgt_photon.end(), ts.begin() + from, ts.end());
    ev.tgt_carrier.insert(ev.tgt_carrier.end(), tc.begin() + from, tc.end());
  }
  return ev;
}

TrainReport train_surrogate(
    SurrogateNet& net, const SurrogateDataset& train,
    const SurrogateDataset& test, std::uint64_t seed, int jobs,
    const std::function<void(const EpochRow&)>& on_epoch) {
  if (train.sequences() < 1 || test.sequences() < 1)
    throw ConfigError("train and test splits must both be nonempty");
  const SurrogateConfig& cfg = net.cfg;
  const int trim = surrogate_trim(net);
  const double range_photon = target_range(train.photon, trim);
  const double range_carrier = target_range(train.carrier, trim);

  auto params = net.parameters();
  Adam adam(cfg.learning_rate);
  std::vector<Tensor> grad_sum;
  grad_sum.reserve(params.size());
  for (const auto* p : params) grad_sum.emplace_back(p->value.rows, p->value.cols);

  std::vector<int> order(static_cast<std::size_t>(train.sequences()));
  std::iota(order.begin(), order.end(), 0);
  const int batch = std::max(1, cfg.batch_sequences);

  TrainReport report;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    RngStream shuffle(seed, "surrogate-shuffle",
                      static_cast<std::uint64_t>(epoch));
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(shuffle.uniform_int(i + 1))]);

    double sse_photon = 0.0, sse_carrier = 0.0;
    std::size_t scored = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
      const std::size_t b1 = std::min(order.size(), b0 + batch);
      for (auto& g : grad_sum) std::fill(g.v.begin(), g.v.end(), 0.0);
      for (std::size_t bi = b0; bi < b1; ++bi) {
        const auto idx = static_cast<std::size_t>(order[bi]);
        const auto& cur = train.current[idx];
        const auto& tps = train.photon[idx];
        const auto& tcs = train.carrier[idx];
        const int len = static_cast<int>(cur.size());
        const int from = std::min(trim, len - 1);
        const int m = len - from;

        Tape tape;
        std::vector<Var> wv;
        const Var x = tape.constant(row_tensor(cur.data(), len));
        const auto heads = net.forward(tape, x, &wv);
        const Var dp = tape.sub(tape.slice_cols(heads.photon, from, len),
                                tape.constant(row_tensor(tps.data() + from, m)));
        const Var dc = tape.sub(tape.slice_cols(heads.carrier, from, len),
                                tape.constant(row_tensor(tcs.data() + from, m)));
        const Var loss = tape.add(
            tape.scale(tape.sqrt_t(tape.mean_all(tape.square(dp))),
                       1.0 / range_photon),
            tape.scale(tape.sqrt_t(tape.mean_all(tape.square(dc))),
                       1.0 / range_carrier));
        const double lv = tape.value(loss).v[0];
        if (!std::isfinite(lv))
          throw Diverged("surrogate loss left the finite range at epoch " +
                         std::to_string(epoch));
        tape.backward(loss);
        for (std::size_t k = 0; k < params.size(); ++k) {
          const Tensor& g = tape.grad(wv[k]);
          for (int e = 0; e < g.size(); ++e) grad_sum[k].v[e] += g.v[e];
        }
        for (int e = 0; e < m; ++e) {
          const double ep = tape.value(dp).v[e];
          const double ec = tape.value(dc).v[e];
          sse_photon += ep * ep;
          sse_carrier += ec * ec;
        }
        scored += static_cast<std::size_t>(m);
      }
      const double inv = 1.0 / static_cast<double>(b1 - b0);
      for (std::size_t k = 0; k < params.size(); ++k) {
        for (auto& g : grad_sum[k].v) g *= inv;
        adam.step(*params[k], grad_sum[k]);
      }
      adam.next_step();
    }

    const SurrogateEval ev = evaluate_surrogate(net, test, jobs);
    const auto [ts, tc] = split_nrmse(ev.pred_photon, ev.pred_carrier,
                                      ev.tgt_photon, ev.tgt_carrier);
    EpochRow row;
    row.epoch = epoch;
    row.train_photon_nrmse =
        std::sqrt(sse_photon / static_cast<double>(scored)) / range_photon;
    row.train_carrier_nrmse =
        std::sqrt(sse_carrier / static_cast<double>(scored)) / range_carrier;
    row.test_photon_nrmse = ts;
    row.test_carrier_nrmse = tc;
    report.epochs.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return report;
}

SurrogateFieldResult surrogate_field(Tape& tape, const SurrogateNet& net,
                                     const Normalization& norm, Var current,
                                     const LaserParams& laser, double dt,
                                     std::vector<Var>* weight_vars) {
  const Var normalized = tape.scale(tape.offset(current, -norm.current_mean),
                                    1.0 / norm.current_scale);
  const auto heads = net.forward(tape, normalized, weight_vars);
  const Var photon = tape.offset(tape.scale(heads.photon, norm.photon_scale),
                                 norm.photon_mean);
  const Var carrier = tape.offset(
      tape.scale(heads.carrier, norm.carrier_scale), norm.carrier_mean);

  SurrogateFieldResult out;
  const Tensor& sv = tape.value(photon);
  for (double v : sv.v)
    if (v < 0.0) ++out.negative_clamped;
  const double floor = std::max(1e-9 * std::abs(norm.photon_scale), 1e-300);
  const Var clamped = tape.clamp(photon, floor, 1e300);

  out.amplitude =
      tape.sqrt_t(tape.scale(clamped, laser.power_per_photon_density));
  const Var gain_num =
      tape.scale(tape.offset(carrier, -laser.transparency_density),
                 laser.gain_coefficient);
  const Var gain_den =
      tape.offset(tape.scale(clamped, laser.gain_compression), 1.0);
  const Var gain = tape.div(gain_num, gain_den);
  const Var chirp = tape.scale(
      tape.offset(tape.scale(gain, laser.confinement_factor),
                  -1.0 / laser.photon_lifetime),
      0.5 * laser.linewidth_enhancement_alpha);
  out.phase = tape.cumtrapz(chirp, dt);
  return out;
}

void save_surrogate(const std::string& path, const SurrogateNet& net,
                    const Normalization& norm, const LinkConfig& link,
                    double test_photon_nrmse, double test_carrier_nrmse) {
  Container c;
  c.channels = 1;
  c.sample_period = link.sample_period();
  std::size_t count = 0;
  const auto params = net.parameters();
  for (const auto* p : params) count += static_cast<std::size_t>(p->value.size());
  c.payload.reserve(count);
  for (const auto* p : params)
    c.payload.insert(c.payload.end(), p->value.v.begin(), p->value.v.end());
  write_container(path, c);

  json j{{"schema_version", 1},
         {"kind", "surrogate"},
         {"config_hash", config_hash_hex(link)},
         {"symbol_rate_gbd", link.symbol_rate_gbd},
         {"channels", net.cfg.channels},
         {"blocks", net.cfg.blocks},
         {"kernel", net.cfg.kernel},
         {"parameter_count", count},
         {"normalization", norm_to_json(norm)},
         {"test_photon_nrmse", test_photon_nrmse},
         {"test_carrier_nrmse", test_carrier_nrmse}};
  manifest::write(path + ".json", j);
}

SurrogateNet load_surrogate(const std::string& path, const LinkConfig& link,
                            Normalization* norm, bool force) {
  const json j = manifest::read(path + ".json", "surrogate", link, !force);
  if (j.at("channels").get<int>() != link.surrogate.channels ||
      j.at("blocks").get<int>() != link.surrogate.blocks ||
      j.at("kernel").get<int>() != link.surrogate.kernel)
    throw ConfigError("surrogate architecture in " + path +
                      ".json does not match the config");
  SurrogateNet net = make_surrogate_net(link.surrogate, 0);
  const Container c = read_container(path);
  std::size_t offset = 0;
  for (auto* p : net.parameters()) {
    const auto n = static_cast<std::size_t>(p->value.size());
    if (offset + n > c.payload.size())
      throw Error("surrogate payload in " + path + " is too short");
    std::copy(c.payload.begin() + static_cast<std::ptrdiff_t>(offset),
              c.payload.begin() + static_cast<std::ptrdiff_t>(offset + n),
              p->value.v.begin());
    std::fill(p->m.v.begin(), p->m.v.end(), 0.0);
    std::fill(p->v.v.begin(), p->v.v.end(), 0.0);
    offset += n;
  }
  if (offset != c.payload.size())
    throw Error("surrogate payload in " + path + " has trailing weights");
  if (norm) *norm = norm_from_json(j.at("normalization"));
  return net;
}

void save_dataset(const std::string& path, const SurrogateDataset& dataset,
                  const LinkConfig& link) {
  const int n = dataset.sequences();
  if (n < 1) throw ConfigError("refusing to save an empty dataset");
  const std::size_t len = dataset.current.front().size();
  Container c;
  c.channels = static_cast<std::uint32_t>(3 * n);
  c.sample_period = dataset.sample_period;
  c.payload.reserve(3 * static_cast<std::size_t>(n) * len);
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (dataset.current[idx].size() != len ||
        dataset.photon[idx].size() != len ||
        dataset.carrier[idx].size() != len)
      throw LengthMismatch("dataset sequences must share one length");
    c.payload.insert(c.payload.end(), dataset.current[idx].begin(),
                     dataset.current[idx].end());
    c.payload.insert(c.payload.end(), dataset.photon[idx].begin(),
                     dataset.photon[idx].end());
    c.payload.insert(c.payload.end(), dataset.carrier[idx].begin(),
                     dataset.carrier[idx].end());
  }
  write_container(path, c);

  json j{{"schema_version", 1},
         {"kind", "dataset"},
         {"config_hash", config_hash_hex(link)},
         {"split", dataset.split},
         {"seed", dataset.seed},
         {"n_sequences", n},
         {"samples_per_sequence", len},
         {"sample_period", dataset.sample_period},
         {"normalization", norm_to_json(dataset.norm)},
         {"ipp_ma", dataset.ipp_ma},
         {"ibias_ma", dataset.ibias_ma}};
  manifest::write(path + ".json", j);
}

SurrogateDataset load_dataset(const std::string& path,
                              const LinkConfig& link, bool force) {
  const json j = manifest::read(path + ".json", "dataset", link, !force);
  const Container c = read_container(path);
  const int n = j.at("n_sequences").get<int>();
  if (n < 1 || c.channels != static_cast<std::uint32_t>(3 * n))
    throw Error("dataset container " + path +
                " does not match its manifest");
  SurrogateDataset ds;
  ds.sample_period = j.at("sample_period").get<double>();
  ds.seed = j.at("seed").get<std::uint64_t>();
  ds.split = j.at("split").get<std::string>();
  ds.norm = norm_from_json(j.at("normalization"));
  ds.ipp_ma = j.at("ipp_ma").get<std::vector<double>>();
  ds.ibias_ma = j.at("ibias_ma").get<std::vector<double>>();
  const std::size_t len = c.length();
  for (int i = 0; i < n; ++i) {
    const double* base = c.payload.data() + 3 * static_cast<std::size_t>(i) * len;
    ds.current.emplace_back(base, base + len);
    ds.photon.emplace_back(base + len, base + 2 * len);
    ds.carrier.emplace_back(base + 2 * len, base + 3 * len);
  }
  return ds;
}

}  // namespace chirplink
