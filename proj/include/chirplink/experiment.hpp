#ifndef CHIRPLINK_EXPERIMENT_HPP
#define CHIRPLINK_EXPERIMENT_HPP

#include <functional>
#include <string>
#include <vector>

#include "chirplink/autoencoder.hpp"
#include "chirplink/config.hpp"
#include "chirplink/metrics.hpp"
#include "chirplink/surrogate.hpp"

namespace chirplink {

// Layout of one experiment directory: every artifact pairs a binary
// container (or CSV table) with a JSON manifest carrying the config hash.
struct ExperimentPaths {
  std::string out;

  std::string dataset_train() const { return out + "/dataset_train.bin"; }
  std::string dataset_test() const { return out + "/dataset_test.bin"; }
  std::string surrogate() const { return out + "/surrogate.bin"; }
  std::string surrogate_report() const { return out + "/surrogate_report.csv"; }
  std::string autoencoder() const { return out + "/autoencoder.bin"; }
  std::string ae_report() const { return out + "/ae_report.csv"; }
  std::string results() const { return out + "/results.csv"; }
};

using LogFn = std::function<void(const std::string&)>;

// The experiment commands behind the CLI; each is deterministic given the
// config and seed, rewrites its outputs whole, and refuses artifacts from
// another config unless `force`.
void cmd_gen_data(const LinkConfig& link, const ExperimentPaths& paths,
                  int jobs, const LogFn& log = {});

TrainReport cmd_train_surrogate(const LinkConfig& link,
                                const ExperimentPaths& paths, int jobs,
                                bool force, const LogFn& log = {});

AeTrainReport cmd_train_ae(const LinkConfig& link,
                           const ExperimentPaths& paths, bool force,
                           const LogFn& log = {});

// Fits and scores both benchmark receivers (fir, vnle) over the ipp
// sweep and upserts their rows into the results table.
std::vector<ResultRow> cmd_run_baselines(const LinkConfig& link,
                                         const ExperimentPaths& paths,
                                         int jobs, bool force,
                                         const LogFn& log = {});

// Scores the trained autoencoder on the rate-equation oracle (never the
// surrogate) and upserts its single row. The surrogate is scored on the
// same symbol and noise draws purely to report the fidelity gap.
struct EvaluateOutcome {
  ResultRow row;               // oracle scores, written to the table
  double surrogate_ser = 0.0;  // same draws through the surrogate
  double ser_gap = 0.0;        // |oracle - surrogate|
  bool flagged = false;        // gap above 0.05 absolute
};
EvaluateOutcome cmd_evaluate(const LinkConfig& link,
                             const ExperimentPaths& paths, bool force,
                             const LogFn& log = {});

// Per-symbol-rate plot series from the results table: for each rate
// present, ser_<rate>gbd.csv and mi_<rate>gbd.csv with P_RF as the x
// column. Returns the written paths. Throws EmptyResults on an empty
// table.
std::vector<std::string> cmd_report(const ExperimentPaths& paths,
                                    const LogFn& log = {});

}  // namespace chirplink

#endif  // CHIRPLINK_EXPERIMENT_HPP
