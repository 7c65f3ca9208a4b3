#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "detq/fusion.hpp"
#include "detq/hypothesis.hpp"
#include "detq/quantizer.hpp"
#include "detq/training.hpp"

namespace detq {

// Bad arguments, missing inputs, unwritable outputs: exit code 2 territory.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  TrainingConfig train;
  std::vector<double> snr_db_list{0.0};
  std::vector<int> k_list{20};
  long trials = 10000;
  std::string out_dir = "out";
  double mean0 = -1.0;
  double mean1 = 1.0;
  int checkpoint_every = 0;  // epochs between interval checkpoints; 0 disables
  int stop_after = 0;        // harness hook: stop after N new epochs this run
  bool resume = false;
};

ExperimentConfig load_config_file(const std::string& path);
void apply_config_json(ExperimentConfig& config, const std::string& json_text);
std::string config_to_json_text(const ExperimentConfig& config);

// Resolved-config snapshot written next to every command's outputs.
void write_run_snapshot(const ExperimentConfig& config, const std::string& subcommand);

// File-name tag for an SNR value ("0", "m5", "2.5").
std::string snr_label(double snr_db);

GaussianObservationModel model_for(const ExperimentConfig& config, double snr_db);

// Chernoff-optimal deterministic threshold: the exact-oracle reference
// system the trained quantizer is compared against.
struct BaselineQuantizer {
  double snr_db = 0.0;
  double tau_star = 0.0;
  GammaPair gammas;
  double chernoff_value = 0.0;
};

BaselineQuantizer make_baseline(const GaussianObservationModel& model, double snr_db);

void write_baseline_json(const std::vector<BaselineQuantizer>& baselines,
                         const std::string& path);
std::vector<BaselineQuantizer> read_baseline_json(const std::string& path);

// CLI subcommand bodies. All return a process exit code.
int cmd_gen_data(const ExperimentConfig& config);
int cmd_train(const ExperimentConfig& config);
int cmd_baseline(const ExperimentConfig& config);
int cmd_sweep(const ExperimentConfig& config);
int cmd_verify(const ExperimentConfig& config);
int cmd_report(const ExperimentConfig& config);

}  // namespace detq
