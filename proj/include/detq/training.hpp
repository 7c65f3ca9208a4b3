#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "detq/exec.hpp"
#include "detq/hypothesis.hpp"
#include "detq/mlp.hpp"
#include "detq/quantizer.hpp"

namespace detq {

struct TrainingConfig {
  int K = 20;
  long T = 50000;
  int batch = 500;
  int epochs = 500;
  double lr = 1e-4;
  uint64_t seed = 1;
  std::vector<int> controller_hidden = {20, 20, 20};
  std::vector<int> detector_hidden = {30, 30, 30};
  BinaryHypothesis priors{};
  bool shuffle = true;  // seed-derived permutation per epoch
  Exec exec = Exec::Parallel;
};

struct LossCurve {
  std::string stage;  // "controller" or "detector"
  std::vector<double> values;
};

struct PhiLoss {
  double loss = 0.0;
  Gradients grads;
  GammaPair gammas;  // batch-empirical pair the loss was evaluated at
};

// Batch MAPDEP loss: gamma_hat_n = batch mean of G_phi over the H_n column,
// then the closed-form binary MAPDEP at (gamma_hat_0, gamma_hat_1). The
// gradient flows through gamma_hat into phi; each min term contributes its
// active branch, ties resolved to the H0 branch.
PhiLoss loss_phi(const Mlp& phi, const std::vector<double>& batch_h0,
                 const std::vector<double>& batch_h1, const BinaryHypothesis& priors,
                 int K, Exec exec = Exec::Serial);

struct ThetaLoss {
  double loss = 0.0;
  Gradients grads;
};

// Batch KL loss: sums the average KL divergence over k = 0..K, querying the
// detector at u_bar = k/K. gamma_star is frozen; gradients flow through the
// softmax outputs only.
ThetaLoss loss_theta(const Mlp& theta, const GammaPair& gamma_star,
                     const BinaryHypothesis& priors, int K);

// Serializable snapshot of an in-progress training run.
struct TrainState {
  std::string stage;  // stage currently being trained
  int epochs_done = 0;
  Mlp net;
  AdamState opt;
  std::vector<double> loss_controller;
  std::vector<double> loss_detector;
  Mlp controller_final;           // populated once the controller stage is done
  bool has_controller_final = false;
};

void save_train_state(const TrainState& state, const std::string& path);
TrainState load_train_state(const std::string& path);

struct StageResult {
  Mlp net;
  LossCurve curve;
  AdamState opt;
  bool completed = true;  // false when stopped by max_new_epochs
};

// Called after every epoch with the state so far; return false to request
// a checkpoint-and-stop (the snapshot the caller saves resumes bit-exactly).
using EpochCallback = std::function<bool(int epochs_done, const Mlp& net)>;

// Mini-batch Adam on the controller against loss_phi. No early stopping;
// runs until config.epochs unless max_new_epochs (>= 0) caps the number of
// epochs executed in this call. Resuming from a saved TrainState reproduces
// the uninterrupted run bit-for-bit.
StageResult train_quantizer(const TrainingConfig& config, const Dataset& data,
                            const TrainState* resume = nullptr,
                            int max_new_epochs = -1,
                            const EpochCallback& on_epoch = nullptr);

// Mini-batch Adam on the detector against loss_theta, with gamma_star
// recomputed per batch from the frozen controller.
StageResult train_detector(const TrainingConfig& config, const Mlp& phi_star,
                           const Dataset& data, const TrainState* resume = nullptr,
                           int max_new_epochs = -1,
                           const EpochCallback& on_epoch = nullptr);

// CSV with header `epoch,loss,stage`, one row per epoch per stage.
void write_loss_csv(const std::vector<LossCurve>& curves, const std::string& path);

}  // namespace detq
