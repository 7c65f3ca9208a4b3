#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "detq/experiments.hpp"

namespace {

struct CliOverrides {
  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  long trials = 0;
  std::vector<int> k_list;
  std::vector<double> snr_list;
  int epochs = 0;
  int batch_size = 0;
  double lr = 0.0;
  long T = 0;
  int K = 0;
  int checkpoint_every = -1;
  int stop_after = 0;
  bool resume = false;
  bool serial = false;
};

void add_common_options(CLI::App* cmd, CliOverrides& o) {
  cmd->add_option("--config", o.config_path, "JSON config file; flags override it");
  cmd->add_option("--seed", o.seed, "master seed")->each([&](std::string) {
    o.seed_set = true;
  });
  cmd->add_option("--out-dir", o.out_dir, "output directory");
  cmd->add_option("--trials", o.trials, "Monte Carlo trials per point");
  cmd->add_option("--k-list", o.k_list, "sensor counts for sweeps")->delimiter(',');
  cmd->add_option("--snr-list", o.snr_list, "SNR values in dB")->delimiter(',');
  cmd->add_option("--epochs", o.epochs, "training epochs per stage");
  cmd->add_option("--batch-size", o.batch_size, "mini-batch size");
  cmd->add_option("--lr", o.lr, "Adam learning rate");
  cmd->add_option("--t-samples", o.T, "training set size T");
  cmd->add_option("--sensors", o.K, "sensor count K used in training");
  cmd->add_option("--checkpoint-every", o.checkpoint_every,
                  "write interval checkpoints every N epochs");
  cmd->add_option("--stop-after", o.stop_after,
                  "stop training after N new epochs (state is resumable)");
  cmd->add_flag("--resume", o.resume, "resume training from a saved state");
  cmd->add_flag("--serial", o.serial, "disable OpenMP parallel kernels");
}

detq::ExperimentConfig resolve(const CliOverrides& o) {
  detq::ExperimentConfig config;
  if (!o.config_path.empty()) {
    config = detq::load_config_file(o.config_path);
  }
  if (o.seed_set) config.train.seed = o.seed;
  if (!o.out_dir.empty()) config.out_dir = o.out_dir;
  if (o.trials > 0) config.trials = o.trials;
  if (!o.k_list.empty()) config.k_list = o.k_list;
  if (!o.snr_list.empty()) config.snr_db_list = o.snr_list;
  if (o.epochs > 0) config.train.epochs = o.epochs;
  if (o.batch_size > 0) config.train.batch = o.batch_size;
  if (o.lr > 0.0) config.train.lr = o.lr;
  if (o.T > 0) config.train.T = o.T;
  if (o.K > 0) config.train.K = o.K;
  if (o.checkpoint_every >= 0) config.checkpoint_every = o.checkpoint_every;
  if (o.stop_after > 0) config.stop_after = o.stop_after;
  config.resume = o.resume;
  if (o.serial) config.train.exec = detq::Exec::Serial;

  if (config.k_list.empty() || config.snr_db_list.empty()) {
    throw detq::UsageError("k-list and snr-list must be non-empty");
  }
  for (int k : config.k_list) {
    if (k < 1) throw detq::UsageError("sensor counts must be >= 1");
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed detection with learned binary dithered quantizers"};
  app.require_subcommand(1);

  CliOverrides o;
  CLI::App* gen = app.add_subcommand("gen-data", "generate training datasets");
  CLI::App* train = app.add_subcommand("train", "train controller and detector");
  CLI::App* baseline =
      app.add_subcommand("baseline", "Chernoff-optimal threshold baseline");
  CLI::App* sweep = app.add_subcommand("sweep", "error-vs-K sweep to CSV");
  CLI::App* verify = app.add_subcommand("verify", "run the property suite");
  CLI::App* report = app.add_subcommand("report", "summarize an output directory");
  for (CLI::App* cmd : {gen, train, baseline, sweep, verify, report}) {
    add_common_options(cmd, o);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      return app.exit(e);
    }
    app.exit(e);
    return 2;
  }

  try {
    detq::ExperimentConfig config = resolve(o);
    if (gen->parsed()) return detq::cmd_gen_data(config);
    if (train->parsed()) return detq::cmd_train(config);
    if (baseline->parsed()) return detq::cmd_baseline(config);
    if (sweep->parsed()) return detq::cmd_sweep(config);
    if (verify->parsed()) return detq::cmd_verify(config);
    if (report->parsed()) return detq::cmd_report(config);
    std::cerr << "no subcommand given\n";
    return 2;
  } catch (const detq::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
