// Timing comparison of the OpenMP kernels against their serial reference.
// Both paths must also agree bit-for-bit; a mismatch makes the run fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <omp.h>

#include "detq/fusion.hpp"
#include "detq/training.hpp"

using namespace detq;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int failures = 0;

void row(const char* name, double serial_s, double parallel_s, bool identical) {
  std::printf("%-34s %10.3f ms %10.3f ms   x%.2f   %s\n", name, serial_s * 1e3,
              parallel_s * 1e3, serial_s / parallel_s,
              identical ? "identical" : "MISMATCH");
  if (!identical) ++failures;
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", omp_get_max_threads());
  std::printf("%-34s %13s %13s %8s\n", "kernel", "serial", "parallel", "speedup");

  GaussianObservationModel model;
  BinaryHypothesis priors;

  // Monte Carlo evaluation, neural controller + oracle detector.
  {
    Mlp phi = init_params({1, 20, 20, 20, 1}, Head::SigmoidScalar, 7);
    ProbabilityController ctrl = NeuralController{phi};
    Detector det = OracleDetector{priors, GammaPair(0.1587, 0.8413), 20};
    const long trials = 200000;

    auto t0 = std::chrono::steady_clock::now();
    EvaluationReport serial =
        monte_carlo_error(model, priors, ctrl, det, 20, trials, 42, Exec::Serial);
    double ts = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    EvaluationReport parallel =
        monte_carlo_error(model, priors, ctrl, det, 20, trials, 42, Exec::Parallel);
    double tp = seconds_since(t0);

    row("monte_carlo_error (2e5 trials)", ts, tp,
        serial.errors_h0 == parallel.errors_h0 &&
            serial.errors_h1 == parallel.errors_h1 &&
            serial.error_rate == parallel.error_rate);
  }

  // Controller batch loss (forward + backward over a batch).
  {
    Mlp phi = init_params({1, 20, 20, 20, 1}, Head::SigmoidScalar, 11);
    RngStream rng(3);
    const long B = 20000;
    std::vector<double> bh0(B), bh1(B);
    for (long i = 0; i < B; ++i) {
      bh0[i] = rng.normal(-1.0, 1.0);
      bh1[i] = rng.normal(1.0, 1.0);
    }

    auto t0 = std::chrono::steady_clock::now();
    PhiLoss serial = loss_phi(phi, bh0, bh1, priors, 20, Exec::Serial);
    double ts = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    PhiLoss parallel = loss_phi(phi, bh0, bh1, priors, 20, Exec::Parallel);
    double tp = seconds_since(t0);

    bool same = serial.loss == parallel.loss;
    for (size_t l = 0; same && l < serial.grads.w.size(); ++l) {
      same = serial.grads.w[l] == parallel.grads.w[l] &&
             serial.grads.b[l] == parallel.grads.b[l];
    }
    row("loss_phi batch (B=2e4, K=20)", ts, tp, same);
  }

  // Frozen-controller evaluation over a dataset-sized batch.
  {
    Mlp phi = init_params({1, 20, 20, 20, 1}, Head::SigmoidScalar, 13);
    ProbabilityController ctrl = NeuralController{phi};
    RngStream rng(5);
    const long n = 100000;
    std::vector<double> xs(n);
    for (long i = 0; i < n; ++i) xs[i] = rng.normal(0.0, 2.0);
    std::vector<double> out_s(n), out_p(n);

    auto t0 = std::chrono::steady_clock::now();
    batch_controller_eval(ctrl, xs, out_s, Exec::Serial);
    double ts = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    batch_controller_eval(ctrl, xs, out_p, Exec::Parallel);
    double tp = seconds_since(t0);

    row("batch_controller_eval (1e5)", ts, tp, out_s == out_p);
  }

  if (failures > 0) {
    std::printf("%d kernel(s) disagreed between serial and parallel\n", failures);
    return 1;
  }
  return 0;
}
