#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "detq/exec.hpp"
#include "detq/hypothesis.hpp"
#include "detq/mlp.hpp"
#include "detq/rng.hpp"

namespace detq {

// Deterministic variant: G(x) = 1 if x > tau else 0.
struct ThresholdController {
  double tau = 0.0;
};

// Learned variant: G = sigmoid-head MLP, output already clamped into (0,1).
struct NeuralController {
  Mlp phi;
};

using ProbabilityController = std::variant<ThresholdController, NeuralController>;

// Conditional probabilities of emitting bit 1: (gamma(H0), gamma(H1)).
struct GammaPair {
  double gamma0 = 0.5;
  double gamma1 = 0.5;

  GammaPair() = default;
  GammaPair(double g0, double g1);

  double gamma(Hypothesis h) const { return h == Hypothesis::H0 ? gamma0 : gamma1; }

  // View used wherever logs or powers would blow up at exact 0/1.
  GammaPair clamped() const;
};

double controller_eval(const ProbabilityController& g, double x);

// Dithered comparison (sign convention: p >= z emits 1).
int quantize(double p, double z);

// One independent dither draw per sensor, identical controller at all sensors.
std::vector<int> quantize_array(const ProbabilityController& g,
                                const std::vector<double>& xs, RngStream& rng);

// Batch mean of G over the given observations (the empirical gamma).
double gamma_empirical(const ProbabilityController& g, const std::vector<double>& batch);

// Evaluates G on every observation; out must have batch.size() slots.
void batch_controller_eval(const ProbabilityController& g,
                           const std::vector<double>& batch, std::vector<double>& out,
                           Exec exec);

// Exact gamma of a threshold controller under the Gaussian model:
// P(X > tau | H), evaluated through erfc.
double gamma_exact_threshold(double tau, const GaussianObservationModel& model,
                             Hypothesis h);

// Exact gamma of an arbitrary controller by adaptive quadrature of
// G(x) f(x|H) over mean +- 12 sigma.
double gamma_exact_quadrature(const ProbabilityController& g,
                              const GaussianObservationModel& model, Hypothesis h,
                              double tol = 1e-10);

GammaPair gamma_pair_exact_threshold(double tau, const GaussianObservationModel& model);

}  // namespace detq
