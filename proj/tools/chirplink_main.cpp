#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"

#include "chirplink/config.hpp"
#include "chirplink/errors.hpp"
#include "chirplink/experiment.hpp"

namespace {

std::string default_out(const chirplink::LinkConfig& link) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "artifacts/%ggbd", link.symbol_rate_gbd);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "chirplink: chirp-limited DML link experiments.\n"
      "Pipeline: gen-data -> train-surrogate -> train-ae -> run-baselines\n"
      "-> evaluate -> report. Evaluation always runs on the rate-equation\n"
      "oracle; the surrogate only shapes gradients during training."};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool force = false;
  app.add_option("--config", config_path, "experiment config file (JSON)")
      ->required();
  auto* seed_opt =
      app.add_option("--seed", seed, "override the config's seed");
  app.add_option("--jobs", jobs, "worker threads for parallel stages")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir,
                 "artifact directory (default artifacts/<rate>gbd)");
  app.add_flag("--force", force,
               "accept artifacts whose config hash does not match");

  auto* c_gen = app.add_subcommand(
      "gen-data", "integrate the rate equations into train/test datasets");
  auto* c_sur = app.add_subcommand(
      "train-surrogate", "fit the laser surrogate on the datasets");
  auto* c_ae = app.add_subcommand(
      "train-ae", "train the autoencoder end to end through the surrogate");
  auto* c_base = app.add_subcommand(
      "run-baselines", "sweep the FIR and VNLE receivers over ipp");
  auto* c_eval = app.add_subcommand(
      "evaluate", "score the trained autoencoder on the rate-equation oracle");
  auto* c_rep = app.add_subcommand(
      "report", "emit per-rate SER and MI plot series from the results");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const chirplink::LogFn log = [](const std::string& line) {
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
  };

  try {
    chirplink::LinkConfig link = chirplink::load_link_config(config_path);
    if (seed_opt->count() > 0) link.seed = seed;
    const chirplink::ExperimentPaths paths{
        out_dir.empty() ? default_out(link) : out_dir};

    if (c_gen->parsed()) {
      chirplink::cmd_gen_data(link, paths, jobs, log);
    } else if (c_sur->parsed()) {
      chirplink::cmd_train_surrogate(link, paths, jobs, force, log);
    } else if (c_ae->parsed()) {
      chirplink::cmd_train_ae(link, paths, force, log);
    } else if (c_base->parsed()) {
      chirplink::cmd_run_baselines(link, paths, jobs, force, log);
    } else if (c_eval->parsed()) {
      chirplink::cmd_evaluate(link, paths, force, log);
    } else if (c_rep->parsed()) {
      chirplink::cmd_report(paths, log);
    }
  } catch (const chirplink::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const chirplink::MissingArtifact& e) {
    std::fprintf(stderr, "missing artifact: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
