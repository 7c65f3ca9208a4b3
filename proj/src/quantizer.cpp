#include "detq/quantizer.hpp"

#include <cmath>
#include <stdexcept>

#include "detq/numeric.hpp"

namespace detq {

GammaPair::GammaPair(double g0, double g1) : gamma0(g0), gamma1(g1) {
  if (!(gamma0 >= 0.0 && gamma0 <= 1.0) || !(gamma1 >= 0.0 && gamma1 <= 1.0)) {
    throw std::invalid_argument("gamma values must lie in [0, 1]");
  }
}

GammaPair GammaPair::clamped() const {
  auto c = [](double g) {
    if (g < kProbClamp) return kProbClamp;
    if (g > 1.0 - kProbClamp) return 1.0 - kProbClamp;
    return g;
  };
  GammaPair out;
  out.gamma0 = c(gamma0);
  out.gamma1 = c(gamma1);
  return out;
}

double controller_eval(const ProbabilityController& g, double x) {
  if (const auto* t = std::get_if<ThresholdController>(&g)) {
    return x > t->tau ? 1.0 : 0.0;
  }
  return forward_scalar(std::get<NeuralController>(g).phi, x);
}

int quantize(double p, double z) { return p >= z ? 1 : 0; }

std::vector<int> quantize_array(const ProbabilityController& g,
                                const std::vector<double>& xs, RngStream& rng) {
  if (xs.empty()) {
    throw std::invalid_argument("quantize_array needs at least one observation");
  }
  std::vector<int> bits(xs.size());
  for (size_t k = 0; k < xs.size(); ++k) {
    double p = controller_eval(g, xs[k]);
    bits[k] = quantize(p, rng.uniform01());
  }
  return bits;
}

double gamma_empirical(const ProbabilityController& g, const std::vector<double>& batch) {
  if (batch.empty()) {
    throw std::invalid_argument("gamma_empirical needs a non-empty batch");
  }
  double sum = 0.0;
  for (double x : batch) sum += controller_eval(g, x);
  return sum / static_cast<double>(batch.size());
}

void batch_controller_eval(const ProbabilityController& g,
                           const std::vector<double>& batch, std::vector<double>& out,
                           Exec exec) {
  if (out.size() != batch.size()) {
    throw std::invalid_argument("output buffer size mismatch");
  }
  const long n = static_cast<long>(batch.size());
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (long i = 0; i < n; ++i) {
    out[i] = controller_eval(g, batch[i]);
  }
}

double gamma_exact_threshold(double tau, const GaussianObservationModel& model,
                             Hypothesis h) {
  double z = (tau - model.mean(h)) / (model.sigma * 1.4142135623730950488);
  return 0.5 * std::erfc(z);
}

double gamma_exact_quadrature(const ProbabilityController& g,
                              const GaussianObservationModel& model, Hypothesis h,
                              double tol) {
  double mu = model.mean(h), s = model.sigma;
  auto integrand = [&](double x) { return controller_eval(g, x) * pdf(model, x, h); };
  return adaptive_simpson(integrand, mu - 12.0 * s, mu + 12.0 * s, tol);
}

GammaPair gamma_pair_exact_threshold(double tau, const GaussianObservationModel& model) {
  return GammaPair(gamma_exact_threshold(tau, model, Hypothesis::H0),
                   gamma_exact_threshold(tau, model, Hypothesis::H1));
}

}  // namespace detq
