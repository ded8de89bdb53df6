#include "chirplink/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "chirplink/baseline.hpp"
#include "chirplink/errors.hpp"
#include "json.hpp"
#include "manifest.hpp"

namespace chirplink {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string pct(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g%%", 100.0 * v);
  return buf;
}

void say(const LogFn& log, const std::string& line) {
  if (log) log(line);
}

void ensure_dir(const ExperimentPaths& paths) {
  fs::create_directories(paths.out);
}

void write_table(const std::string& path, const std::string& header,
                 const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << header << "\n";
  for (const std::string& l : lines) out << l << "\n";
}

// Rows not owned by `replaced` schemes survive an upsert, so baselines
// and the autoencoder can land in either order.
void upsert_results(const LinkConfig& link, const ExperimentPaths& paths,
                    bool force, const std::vector<ResultRow>& fresh,
                    const std::set<std::string>& replaced) {
  std::vector<ResultRow> rows;
  const std::string sidecar = paths.results() + ".json";
  if (fs::exists(paths.results())) {
    if (fs::exists(sidecar)) {
      manifest::read(sidecar, "results", link, !force);
    } else if (!force) {
      throw Error("results table " + paths.results() +
                  " has no manifest; pass --force to mix into it");
    }
    for (ResultRow& row : read_results_csv(paths.results()))
      if (!replaced.count(row.scheme)) rows.push_back(std::move(row));
  }
  rows.insert(rows.end(), fresh.begin(), fresh.end());
  std::sort(rows.begin(), rows.end(),
            [](const ResultRow& a, const ResultRow& b) {
              if (a.scheme != b.scheme) return a.scheme < b.scheme;
              if (a.ipp_ma != b.ipp_ma) return a.ipp_ma < b.ipp_ma;
              return a.prf_dbm < b.prf_dbm;
            });
  write_results_csv(paths.results(), rows);
  manifest::write(sidecar, json{{"schema_version", 1},
                                {"kind", "results"},
                                {"config_hash", config_hash_hex(link)},
                                {"seed", link.seed},
                                {"rows", rows.size()}});
}

std::string rate_tag(double gbd) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%ggbd", gbd);
  return buf;
}

}  // namespace

void cmd_gen_data(const LinkConfig& link, const ExperimentPaths& paths,
                  int jobs, const LogFn& log) {
  ensure_dir(paths);
  const SurrogateDataset train = generate_dataset(
      link, link.dataset.train_sequences, link.seed, "train", nullptr, jobs);
  const SurrogateDataset test =
      generate_dataset(link, link.dataset.test_sequences, link.seed, "test",
                       &train.norm, jobs);
  save_dataset(paths.dataset_train(), train, link);
  save_dataset(paths.dataset_test(), test, link);
  say(log, "gen-data: " + std::to_string(train.sequences()) + " train + " +
               std::to_string(test.sequences()) + " test sequences of " +
               std::to_string(link.dataset.symbols_per_sequence) +
               " symbols -> " + paths.out);
}

TrainReport cmd_train_surrogate(const LinkConfig& link,
                                const ExperimentPaths& paths, int jobs,
                                bool force, const LogFn& log) {
  ensure_dir(paths);
  const SurrogateDataset train =
      load_dataset(paths.dataset_train(), link, force);
  const SurrogateDataset test = load_dataset(paths.dataset_test(), link, force);
  SurrogateNet net = make_surrogate_net(link.surrogate, link.seed);
  const TrainReport report = train_surrogate(
      net, train, test, link.seed, jobs, [&](const EpochRow& row) {
        say(log, "epoch " + std::to_string(row.epoch) + "/" +
                     std::to_string(link.surrogate.epochs) + "  train S " +
                     pct(row.train_photon_nrmse) + " N " +
                     pct(row.train_carrier_nrmse) + "  test S " +
                     pct(row.test_photon_nrmse) + " N " +
                     pct(row.test_carrier_nrmse));
      });
  const EpochRow& last = report.epochs.back();
  save_surrogate(paths.surrogate(), net, train.norm, link,
                 last.test_photon_nrmse, last.test_carrier_nrmse);
  std::vector<std::string> lines;
  for (const EpochRow& r : report.epochs)
    lines.push_back(std::to_string(r.epoch) + "," + num(r.train_photon_nrmse) +
                    "," + num(r.train_carrier_nrmse) + "," +
                    num(r.test_photon_nrmse) + "," +
                    num(r.test_carrier_nrmse));
  write_table(paths.surrogate_report(),
              "epoch,nrmse_s_train,nrmse_n_train,nrmse_s_test,nrmse_n_test",
              lines);
  say(log, "train-surrogate: final test NRMSE S " + pct(last.test_photon_nrmse) +
               " N " + pct(last.test_carrier_nrmse) + " -> " +
               paths.surrogate());
  return report;
}

AeTrainReport cmd_train_ae(const LinkConfig& link, const ExperimentPaths& paths,
                           bool force, const LogFn& log) {
  ensure_dir(paths);
  Normalization norm;
  const SurrogateNet net =
      load_surrogate(paths.surrogate(), link, &norm, force);
  const TrainedAutoencoder trained =
      train_e2e(net, norm, link, link.seed, [&](const AeEpochRow& row) {
        say(log, "epoch " + std::to_string(row.epoch) + "/" +
                     std::to_string(link.ae.epochs) + "  ce_train " +
                     num(row.ce_train) + "  ce_val " + num(row.ce_val) +
                     "  ipp " + num(row.ipp_ma) + " mA  ibias " +
                     num(row.ibias_ma) + " mA");
      });
  save_autoencoder(paths.autoencoder(), trained.enc, trained.dec, link,
                   trained.report);
  std::vector<std::string> lines;
  for (const AeEpochRow& r : trained.report.epochs)
    lines.push_back(std::to_string(r.epoch) + "," + num(r.ce_train) + "," +
                    num(r.ce_val) + "," + num(r.ipp_ma) + "," +
                    num(r.ibias_ma));
  write_table(paths.ae_report(), "epoch,ce_train,ce_val,ipp_ma,ibias_ma",
              lines);
  say(log, "train-ae: best epoch " +
               std::to_string(trained.report.best_epoch) + " val ce " +
               num(trained.report.best_val_ce) + " nats, ipp " +
               num(trained.enc.ipp_ma()) + " mA, ibias " +
               num(trained.enc.ibias_ma()) + " mA -> " + paths.autoencoder());
  return trained.report;
}

std::vector<ResultRow> cmd_run_baselines(const LinkConfig& link,
                                         const ExperimentPaths& paths,
                                         int jobs, bool force,
                                         const LogFn& log) {
  ensure_dir(paths);
  std::vector<ResultRow> rows = run_benchmark_sweep(link, "fir", jobs);
  const std::vector<ResultRow> vnle = run_benchmark_sweep(link, "vnle", jobs);
  rows.insert(rows.end(), vnle.begin(), vnle.end());
  for (const ResultRow& r : rows)
    say(log, r.scheme + " ipp " + num(r.ipp_ma) + " mA  prf " +
                 num(r.prf_dbm) + " dBm  ser " + num(r.ser) + "  mi " +
                 num(r.mi_bits) + " bits (confusion)");
  upsert_results(link, paths, force, rows, {"fir", "vnle"});
  say(log, "run-baselines: " + std::to_string(rows.size()) + " rows -> " +
               paths.results());
  return rows;
}

EvaluateOutcome cmd_evaluate(const LinkConfig& link,
                             const ExperimentPaths& paths, bool force,
                             const LogFn& log) {
  ensure_dir(paths);
  const TrainedAutoencoder ae =
      load_autoencoder(paths.autoencoder(), link, force);
  Normalization norm;
  const SurrogateNet net =
      load_surrogate(paths.surrogate(), link, &norm, force);

  const AeEvaluation oracle = evaluate_on_oracle(
      ae.enc, ae.dec, link, link.evaluation.n_symbols, link.seed);
  const AeEvaluation surr =
      evaluate_on_surrogate(ae.enc, ae.dec, net, norm, link,
                            link.evaluation.n_symbols, link.seed);

  EvaluateOutcome out;
  out.row.scheme = "ae";
  out.row.symbol_rate_gbd = link.symbol_rate_gbd;
  out.row.ipp_ma = ae.enc.ipp_ma();
  out.row.ibias_ma = ae.enc.ibias_ma();
  out.row.prf_dbm = oracle.prf_dbm;
  out.row.ser = oracle.ser;
  out.row.mi_bits = oracle.mi_bits;
  out.row.n_symbols = oracle.n_symbols;
  out.row.seed = link.seed;
  out.row.validate();
  out.surrogate_ser = surr.ser;
  out.ser_gap = std::abs(oracle.ser - surr.ser);
  out.flagged = out.ser_gap > 0.05;

  upsert_results(link, paths, force, {out.row}, {"ae"});
  say(log, "evaluate (rate-equation oracle): ser " + num(oracle.ser) +
               "  mi " + num(oracle.mi_bits) +
               " bits (ce lower bound)  prf " + num(oracle.prf_dbm) +
               " dBm over " + std::to_string(oracle.n_symbols) + " symbols");
  say(log, "surrogate fidelity: ser gap " + num(out.ser_gap) +
               (out.flagged ? "  WARNING: above 0.05, retrain the surrogate"
                            : ""));
  return out;
}

std::vector<std::string> cmd_report(const ExperimentPaths& paths,
                                    const LogFn& log) {
  const std::vector<ResultRow> rows = read_results_csv(paths.results());
  if (rows.empty())
    throw EmptyResults("results table " + paths.results() + " has no rows");

  std::map<double, std::vector<ResultRow>> by_rate;
  for (const ResultRow& r : rows) by_rate[r.symbol_rate_gbd].push_back(r);

  std::vector<std::string> written;
  for (auto& [rate, group] : by_rate) {
    std::sort(group.begin(), group.end(),
              [](const ResultRow& a, const ResultRow& b) {
                if (a.scheme != b.scheme) return a.scheme < b.scheme;
                return a.prf_dbm < b.prf_dbm;
              });
    std::vector<std::string> ser_lines, mi_lines;
    for (const ResultRow& r : group) {
      const std::string x =
          r.scheme + "," + num(r.ipp_ma) + "," + num(r.prf_dbm) + ",";
      ser_lines.push_back(x + num(r.ser));
      mi_lines.push_back(x + num(r.mi_bits));
    }
    const std::string ser_path =
        paths.out + "/ser_" + rate_tag(rate) + ".csv";
    const std::string mi_path = paths.out + "/mi_" + rate_tag(rate) + ".csv";
    write_table(ser_path, "scheme,ipp_ma,prf_dbm,ser", ser_lines);
    write_table(mi_path, "scheme,ipp_ma,prf_dbm,mi_bits", mi_lines);
    written.push_back(ser_path);
    written.push_back(mi_path);
  }
  say(log, "report: " + std::to_string(written.size()) + " series files -> " +
               paths.out);
  return written;
}

}  // namespace chirplink
