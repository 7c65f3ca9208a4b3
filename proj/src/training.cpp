#include "detq/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "detq/rng.hpp"

namespace detq {

namespace {

// Fixed chunk size for parallel gradient accumulation; partial gradients are
// merged in chunk order, so results do not depend on the thread count.
constexpr long kGrain = 64;

double clamp_gamma(double g) {
  return std::min(std::max(g, kProbClamp), 1.0 - kProbClamp);
}

// Loss and d(loss)/d(gamma_hat) of the closed-form binary MAPDEP at the
// (already clamped) empirical pair.
struct MapdepGrad {
  double loss = 0.0;
  double d0 = 0.0;
  double d1 = 0.0;
};

MapdepGrad mapdep_with_gradient(const BinaryHypothesis& priors, double g0, double g1,
                                int K) {
  MapdepGrad out;
  double coeff = 1.0;
  for (int k = 0; k <= K; ++k) {
    double a = std::pow(g0, k) * std::pow(1.0 - g0, K - k);
    double b = std::pow(g1, k) * std::pow(1.0 - g1, K - k);
    double m0 = priors.pi0 * a;
    double m1 = priors.pi1 * b;
    if (m0 <= m1) {  // ties resolved to the H0 branch
      out.loss += coeff * m0;
      out.d0 += coeff * m0 * (k / g0 - (K - k) / (1.0 - g0));
    } else {
      out.loss += coeff * m1;
      out.d1 += coeff * m1 * (k / g1 - (K - k) / (1.0 - g1));
    }
    coeff = coeff * (K - k) / (k + 1.0);
  }
  return out;
}

std::vector<long> epoch_order(long T, bool shuffle, uint64_t seed, uint64_t stage_label,
                              int epoch) {
  std::vector<long> order(T);
  for (long i = 0; i < T; ++i) order[i] = i;
  if (shuffle) {
    RngStream rng = RngStream(seed).substream(stage_label).substream(
        static_cast<uint64_t>(epoch));
    for (long i = T - 1; i > 0; --i) {
      long j = static_cast<long>(rng.next_below(static_cast<uint64_t>(i + 1)));
      std::swap(order[i], order[j]);
    }
  }
  return order;
}

nlohmann::json net_to_json(const Mlp& net) {
  nlohmann::json j;
  j["layer_sizes"] = net.layer_sizes;
  j["head"] = net.head == Head::SigmoidScalar ? "sigmoid" : "softmax";
  j["weights"] = net.weights;
  j["biases"] = net.biases;
  return j;
}

Mlp net_from_json(const nlohmann::json& j) {
  Mlp net;
  net.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  net.head = j.at("head").get<std::string>() == "sigmoid" ? Head::SigmoidScalar
                                                          : Head::SoftmaxPair;
  net.weights = j.at("weights").get<std::vector<std::vector<double>>>();
  net.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  validate(net);
  return net;
}

std::vector<int> widths_to_sizes(int input, const std::vector<int>& hidden, int output) {
  std::vector<int> sizes{input};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output);
  return sizes;
}

}  // namespace

PhiLoss loss_phi(const Mlp& phi, const std::vector<double>& batch_h0,
                 const std::vector<double>& batch_h1, const BinaryHypothesis& priors,
                 int K, Exec exec) {
  if (batch_h0.empty() || batch_h0.size() != batch_h1.size()) {
    throw std::invalid_argument("loss_phi needs non-empty matching batch columns");
  }
  if (phi.head != Head::SigmoidScalar) {
    throw std::invalid_argument("controller net must have a sigmoid head");
  }
  const long B = static_cast<long>(batch_h0.size());
  const long n = 2 * B;

  // Pass 1: controller outputs for both columns.
  std::vector<double> g(n);
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (long i = 0; i < n; ++i) {
    double x = i < B ? batch_h0[i] : batch_h1[i - B];
    g[i] = forward_scalar(phi, x);
  }
  double sum0 = 0.0, sum1 = 0.0;
  for (long i = 0; i < B; ++i) sum0 += g[i];
  for (long i = B; i < n; ++i) sum1 += g[i];
  PhiLoss result;
  result.gammas.gamma0 = sum0 / B;
  result.gammas.gamma1 = sum1 / B;

  const double cg0 = clamp_gamma(result.gammas.gamma0);
  const double cg1 = clamp_gamma(result.gammas.gamma1);
  MapdepGrad mg = mapdep_with_gradient(priors, cg0, cg1, K);
  result.loss = mg.loss;
  if (!std::isfinite(result.loss)) {
    std::ostringstream msg;
    msg << "loss_phi produced a non-finite loss at gamma_hat = (" << cg0 << ", " << cg1
        << ")";
    throw std::runtime_error(msg.str());
  }

  // Pass 2: backpropagate d(loss)/d(gamma_hat_n) / B into each sample.
  const double up0 = mg.d0 / B;
  const double up1 = mg.d1 / B;
  const long num_chunks = (n + kGrain - 1) / kGrain;
  std::vector<Gradients> partials(num_chunks);
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (long c = 0; c < num_chunks; ++c) {
    Gradients local = zero_gradients(phi);
    ForwardTrace trace;
    const long lo = c * kGrain, hi = std::min(n, lo + kGrain);
    for (long i = lo; i < hi; ++i) {
      double x = i < B ? batch_h0[i] : batch_h1[i - B];
      forward(phi, {x}, &trace);
      backward(phi, trace, {i < B ? up0 : up1}, local);
    }
    partials[c] = std::move(local);
  }
  result.grads = zero_gradients(phi);
  for (long c = 0; c < num_chunks; ++c) result.grads.add(partials[c]);
  return result;
}

ThetaLoss loss_theta(const Mlp& theta, const GammaPair& gamma_star,
                     const BinaryHypothesis& priors, int K) {
  if (theta.head != Head::SoftmaxPair) {
    throw std::invalid_argument("detector net must have a softmax head");
  }
  const GammaPair g = gamma_star.clamped();
  const double lg[2] = {std::log(g.gamma0), std::log(g.gamma1)};
  const double lq[2] = {std::log(1.0 - g.gamma0), std::log(1.0 - g.gamma1)};
  const double pri[2] = {priors.pi0, priors.pi1};

  ThetaLoss result;
  result.grads = zero_gradients(theta);
  ForwardTrace trace;
  double coeff_log = 0.0;  // ln C(K, k), updated incrementally
  for (int k = 0; k <= K; ++k) {
    double w[2];
    for (int n = 0; n < 2; ++n) {
      w[n] = pri[n] * std::exp(coeff_log + k * lg[n] + (K - k) * lq[n]);
    }
    double s = w[0] + w[1];
    std::vector<double> out =
        forward(theta, {static_cast<double>(k) / K}, &trace);
    std::vector<double> upstream(2, 0.0);
    for (int n = 0; n < 2; ++n) {
      if (w[n] <= 0.0) continue;
      result.loss += w[n] * (std::log(std::max(w[n], 1e-12)) -
                             std::log(std::max(out[n], 1e-12)) -
                             std::log(std::max(s, 1e-12)));
      upstream[n] = -w[n] / std::max(out[n], 1e-12);
    }
    backward(theta, trace, upstream, result.grads);
    if (k < K) coeff_log += std::log((K - k) / (k + 1.0));
  }
  if (!std::isfinite(result.loss)) {
    throw std::runtime_error("loss_theta produced a non-finite loss");
  }
  return result;
}

void save_train_state(const TrainState& state, const std::string& path) {
  nlohmann::json j;
  j["stage"] = state.stage;
  j["epochs_done"] = state.epochs_done;
  j["net"] = net_to_json(state.net);
  j["adam"] = {{"lr", state.opt.lr},   {"beta1", state.opt.beta1},
               {"beta2", state.opt.beta2}, {"eps", state.opt.eps},
               {"t", state.opt.t},     {"m_w", state.opt.m_w},
               {"v_w", state.opt.v_w}, {"m_b", state.opt.m_b},
               {"v_b", state.opt.v_b}};
  j["loss_controller"] = state.loss_controller;
  j["loss_detector"] = state.loss_detector;
  j["has_controller_final"] = state.has_controller_final;
  if (state.has_controller_final) {
    j["controller_final"] = net_to_json(state.controller_final);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump() << "\n";
}

TrainState load_train_state(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open train state: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  TrainState state;
  state.stage = j.at("stage").get<std::string>();
  state.epochs_done = j.at("epochs_done").get<int>();
  state.net = net_from_json(j.at("net"));
  const auto& a = j.at("adam");
  state.opt.lr = a.at("lr").get<double>();
  state.opt.beta1 = a.at("beta1").get<double>();
  state.opt.beta2 = a.at("beta2").get<double>();
  state.opt.eps = a.at("eps").get<double>();
  state.opt.t = a.at("t").get<long>();
  state.opt.m_w = a.at("m_w").get<std::vector<std::vector<double>>>();
  state.opt.v_w = a.at("v_w").get<std::vector<std::vector<double>>>();
  state.opt.m_b = a.at("m_b").get<std::vector<std::vector<double>>>();
  state.opt.v_b = a.at("v_b").get<std::vector<std::vector<double>>>();
  state.loss_controller = j.at("loss_controller").get<std::vector<double>>();
  state.loss_detector = j.at("loss_detector").get<std::vector<double>>();
  state.has_controller_final = j.at("has_controller_final").get<bool>();
  if (state.has_controller_final) {
    state.controller_final = net_from_json(j.at("controller_final"));
  }
  return state;
}

namespace {

// Shared mini-batch Adam driver for both stages.
struct StageHooks {
  // Computes loss and gradients for the batch defined by [lo, hi) of `order`.
  std::function<double(const std::vector<long>& order, long lo, long hi, Mlp& net,
                       AdamState& opt)>
      run_batch;
};

StageResult run_stage(const TrainingConfig& config, const Dataset& data,
                      const char* stage_name, uint64_t shuffle_label, Mlp start_net,
                      AdamState start_opt, std::vector<double> loss_history,
                      int start_epoch, int max_new_epochs, const EpochCallback& on_epoch,
                      const StageHooks& hooks) {
  if (data.size() != config.T) {
    throw std::invalid_argument("dataset size does not match config.T");
  }
  if (config.batch < 1 || config.epochs < 1 || !(config.lr > 0.0)) {
    throw std::invalid_argument("invalid training configuration");
  }
  StageResult result;
  result.net = std::move(start_net);
  result.opt = std::move(start_opt);
  result.curve.stage = stage_name;
  result.curve.values = std::move(loss_history);

  const long T = config.T;
  const long num_batches = (T + config.batch - 1) / config.batch;
  int epoch = start_epoch;
  int ran = 0;
  for (; epoch < config.epochs; ++epoch) {
    if (max_new_epochs >= 0 && ran >= max_new_epochs) {
      result.completed = false;
      return result;
    }
    std::vector<long> order =
        epoch_order(T, config.shuffle, config.seed, shuffle_label, epoch);
    double loss_sum = 0.0;
    for (long b = 0; b < num_batches; ++b) {
      const long lo = b * config.batch;
      const long hi = std::min(T, lo + config.batch);
      loss_sum += hooks.run_batch(order, lo, hi, result.net, result.opt);
    }
    double epoch_loss = loss_sum / static_cast<double>(num_batches);
    if (!std::isfinite(epoch_loss)) {
      throw std::runtime_error(std::string(stage_name) + " training diverged");
    }
    result.curve.values.push_back(epoch_loss);
    ++ran;
    if (on_epoch && !on_epoch(epoch + 1, result.net)) {
      result.completed = epoch + 1 >= config.epochs;
      return result;
    }
  }
  result.completed = true;
  return result;
}

}  // namespace

StageResult train_quantizer(const TrainingConfig& config, const Dataset& data,
                            const TrainState* resume, int max_new_epochs,
                            const EpochCallback& on_epoch) {
  Mlp net;
  AdamState opt;
  std::vector<double> history;
  int start_epoch = 0;
  if (resume) {
    if (resume->stage != "controller") {
      throw std::invalid_argument("resume state is not a controller stage");
    }
    net = resume->net;
    opt = resume->opt;
    history = resume->loss_controller;
    start_epoch = resume->epochs_done;
  } else {
    uint64_t init_seed =
        RngStream(config.seed).substream(stream_label::kControllerInit).next_u64();
    net = init_params(widths_to_sizes(1, config.controller_hidden, 1),
                      Head::SigmoidScalar, init_seed);
    opt = make_adam_state(net, config.lr);
  }

  StageHooks hooks;
  hooks.run_batch = [&config, &data](const std::vector<long>& order, long lo, long hi,
                                     Mlp& net, AdamState& opt) {
    std::vector<double> bh0(hi - lo), bh1(hi - lo);
    for (long i = lo; i < hi; ++i) {
      bh0[i - lo] = data.x_h0[order[i]];
      bh1[i - lo] = data.x_h1[order[i]];
    }
    PhiLoss batch = loss_phi(net, bh0, bh1, config.priors, config.K, config.exec);
    adam_step(net, opt, batch.grads);
    return batch.loss;
  };
  return run_stage(config, data, "controller", stream_label::kShuffleController,
                   std::move(net), std::move(opt), std::move(history), start_epoch,
                   max_new_epochs, on_epoch, hooks);
}

StageResult train_detector(const TrainingConfig& config, const Mlp& phi_star,
                           const Dataset& data, const TrainState* resume,
                           int max_new_epochs, const EpochCallback& on_epoch) {
  Mlp net;
  AdamState opt;
  std::vector<double> history;
  int start_epoch = 0;
  if (resume) {
    if (resume->stage != "detector") {
      throw std::invalid_argument("resume state is not a detector stage");
    }
    net = resume->net;
    opt = resume->opt;
    history = resume->loss_detector;
    start_epoch = resume->epochs_done;
  } else {
    uint64_t init_seed =
        RngStream(config.seed).substream(stream_label::kDetectorInit).next_u64();
    net = init_params(widths_to_sizes(1, config.detector_hidden, 2), Head::SoftmaxPair,
                      init_seed);
    opt = make_adam_state(net, config.lr);
  }

  // The controller is frozen, so its outputs over the dataset are fixed;
  // cache them once and form per-batch gamma_star from the cache.
  const long T = config.T;
  std::vector<double> g0_cache(T), g1_cache(T);
#pragma omp parallel for schedule(static) if (config.exec == Exec::Parallel)
  for (long t = 0; t < T; ++t) {
    g0_cache[t] = forward_scalar(phi_star, data.x_h0[t]);
    g1_cache[t] = forward_scalar(phi_star, data.x_h1[t]);
  }

  StageHooks hooks;
  hooks.run_batch = [&config, &g0_cache, &g1_cache](const std::vector<long>& order,
                                                    long lo, long hi, Mlp& net,
                                                    AdamState& opt) {
    double sum0 = 0.0, sum1 = 0.0;
    for (long i = lo; i < hi; ++i) {
      sum0 += g0_cache[order[i]];
      sum1 += g1_cache[order[i]];
    }
    const double b = static_cast<double>(hi - lo);
    GammaPair gamma_star;
    gamma_star.gamma0 = sum0 / b;
    gamma_star.gamma1 = sum1 / b;
    ThetaLoss batch = loss_theta(net, gamma_star, config.priors, config.K);
    adam_step(net, opt, batch.grads);
    return batch.loss;
  };
  return run_stage(config, data, "detector", stream_label::kShuffleDetector,
                   std::move(net), std::move(opt), std::move(history), start_epoch,
                   max_new_epochs, on_epoch, hooks);
}

void write_loss_csv(const std::vector<LossCurve>& curves, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "epoch,loss,stage\n";
  char buf[128];
  for (const auto& curve : curves) {
    for (size_t e = 0; e < curve.values.size(); ++e) {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%s\n", e + 1, curve.values[e],
                    curve.stage.c_str());
      out << buf;
    }
  }
}

}  // namespace detq
