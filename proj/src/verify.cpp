#include "detq/verify.hpp"

#include <algorithm>
#include <cmath>

#include "detq/fusion.hpp"
#include "detq/metrics.hpp"
#include "detq/mlp.hpp"
#include "detq/training.hpp"

namespace detq {

namespace {

GammaPair random_gammas(RngStream& rng) {
  // Keep away from the exact endpoints so every metric path is exercised.
  double g0 = 0.01 + 0.98 * rng.uniform01();
  double g1 = 0.01 + 0.98 * rng.uniform01();
  return GammaPair(g0, g1);
}

BinaryHypothesis random_priors(RngStream& rng) {
  double p0 = 0.05 + 0.9 * rng.uniform01();
  return BinaryHypothesis(p0, 1.0 - p0);
}

CheckResult check_enumeration_vs_closed_form(RngStream rng,
                                             const MapdepBinaryFn& mapdep_fn) {
  CheckResult r{"mapdep enumeration vs closed form", true, 0.0, "tol 1e-10"};
  for (int K = 1; K <= 12; ++K) {
    for (int i = 0; i < 200; ++i) {
      GammaPair g = random_gammas(rng);
      BinaryHypothesis priors = random_priors(rng);
      double exact = mapdep_enumerate(priors, binary_channel(g), K);
      double closed = mapdep_fn(priors, g, K);
      r.max_deviation = std::max(r.max_deviation, std::abs(exact - closed));
    }
  }
  r.pass = r.max_deviation <= 1e-10;
  return r;
}

CheckResult check_average_fusion_equality(RngStream rng,
                                          const MapdepBinaryFn& mapdep_fn) {
  CheckResult r{"full-vector vs average-fusion MAPDEP", true, 0.0, "tol 1e-12"};
  for (int i = 0; i < 1000; ++i) {
    int K = 1 + static_cast<int>(rng.next_below(64));
    GammaPair g = random_gammas(rng);
    BinaryHypothesis priors = random_priors(rng);
    double via_binary = mapdep_fn(priors, g, K);
    double via_average = mapdep_average(priors, g, K);
    r.max_deviation = std::max(r.max_deviation, std::abs(via_binary - via_average));
  }
  r.pass = r.max_deviation <= 1e-12;
  return r;
}

CheckResult check_chernoff_gap(RngStream rng) {
  CheckResult r{"identical-quantizer Chernoff optimality", true, 0.0,
                "common alpha <= per-sensor mean; equality for identical"};
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    DiscreteChannel a = binary_channel(random_gammas(rng));
    DiscreteChannel b = binary_channel(random_gammas(rng));
    QuantizerGap gap = identical_quantizer_gap({a, b});
    worst = std::max(worst, gap.common_alpha_value - gap.per_sensor_mean_value);

    int K = 2 + static_cast<int>(rng.next_below(7));
    std::vector<DiscreteChannel> same(K, a);
    QuantizerGap eq = identical_quantizer_gap(same);
    worst = std::max(worst,
                     std::abs(eq.common_alpha_value - eq.per_sensor_mean_value));
  }
  r.max_deviation = worst;
  r.pass = worst <= 1e-9;
  return r;
}

CheckResult check_gradient_phi(RngStream rng) {
  CheckResult r{"controller loss gradient vs finite differences", true, 0.0,
                "central differences h=1e-5, tol 1e-4"};
  const int K = 5, B = 32;
  const BinaryHypothesis priors(0.4, 0.6);
  Mlp net = init_params({1, 4, 1}, Head::SigmoidScalar, rng.next_u64());
  std::vector<double> bh0(B), bh1(B);
  for (int i = 0; i < B; ++i) {
    bh0[i] = rng.normal(-1.0, 1.0);
    bh1[i] = rng.normal(1.0, 1.0);
  }
  auto eval = [&](const Mlp& m) {
    return loss_phi(m, bh0, bh1, priors, K).loss;
  };
  PhiLoss analytic = loss_phi(net, bh0, bh1, priors, K);

  const double h = 1e-5;
  int probes = 0;
  while (probes < 100) {
    int layer = static_cast<int>(rng.next_below(net.weights.size()));
    bool is_weight = rng.uniform01() < 0.8;
    auto& vec = is_weight ? net.weights[layer] : net.biases[layer];
    int idx = static_cast<int>(rng.next_below(vec.size()));
    double saved = vec[idx];
    vec[idx] = saved + h;
    double fp = eval(net);
    vec[idx] = saved - h;
    double fm = eval(net);
    vec[idx] = saved;
    double fd = (fp - fm) / (2.0 * h);
    double an =
        is_weight ? analytic.grads.w[layer][idx] : analytic.grads.b[layer][idx];
    double denom = std::max(std::abs(fd), std::abs(an));
    double rel = denom < 1e-6 ? (std::abs(fd - an) <= 1e-8 ? 0.0 : 1.0)
                              : std::abs(fd - an) / denom;
    r.max_deviation = std::max(r.max_deviation, rel);
    ++probes;
  }
  r.pass = r.max_deviation <= 1e-4;
  return r;
}

CheckResult check_gradient_theta(RngStream rng) {
  CheckResult r{"detector loss gradient vs finite differences", true, 0.0,
                "central differences h=1e-5, tol 1e-4"};
  const int K = 5;
  const BinaryHypothesis priors(0.45, 0.55);
  const GammaPair gamma_star(0.25, 0.75);
  Mlp net = init_params({1, 4, 2}, Head::SoftmaxPair, rng.next_u64());
  auto eval = [&](const Mlp& m) { return loss_theta(m, gamma_star, priors, K).loss; };
  ThetaLoss analytic = loss_theta(net, gamma_star, priors, K);

  const double h = 1e-5;
  for (int probes = 0; probes < 100; ++probes) {
    int layer = static_cast<int>(rng.next_below(net.weights.size()));
    bool is_weight = rng.uniform01() < 0.8;
    auto& vec = is_weight ? net.weights[layer] : net.biases[layer];
    int idx = static_cast<int>(rng.next_below(vec.size()));
    double saved = vec[idx];
    vec[idx] = saved + h;
    double fp = eval(net);
    vec[idx] = saved - h;
    double fm = eval(net);
    vec[idx] = saved;
    double fd = (fp - fm) / (2.0 * h);
    double an =
        is_weight ? analytic.grads.w[layer][idx] : analytic.grads.b[layer][idx];
    double denom = std::max(std::abs(fd), std::abs(an));
    double rel = denom < 1e-6 ? (std::abs(fd - an) <= 1e-8 ? 0.0 : 1.0)
                              : std::abs(fd - an) / denom;
    r.max_deviation = std::max(r.max_deviation, rel);
  }
  r.pass = r.max_deviation <= 1e-4;
  return r;
}

CheckResult check_dither_unbiased(RngStream rng) {
  CheckResult r{"dithering unbiasedness", true, 0.0, "4-sigma binomial band, 1e6 draws"};
  const long n = 1000000;
  for (double p : {0.1, 0.3, 0.5, 0.9}) {
    long ones = 0;
    for (long i = 0; i < n; ++i) ones += quantize(p, rng.uniform01());
    double mean = static_cast<double>(ones) / n;
    double sigma = std::sqrt(p * (1.0 - p) / n);
    r.max_deviation = std::max(r.max_deviation, std::abs(mean - p) / sigma);
  }
  r.pass = r.max_deviation <= 4.0;
  return r;
}

CheckResult check_mapdep_monotone(const MapdepBinaryFn& mapdep_fn) {
  CheckResult r{"closed-form MAPDEP non-increasing in K", true, 0.0,
                "gamma (0.2, 0.8), equal priors, K=1..200"};
  BinaryHypothesis priors;
  GammaPair g(0.2, 0.8);
  double prev = mapdep_fn(priors, g, 1);
  for (int K = 2; K <= 200; ++K) {
    double cur = mapdep_fn(priors, g, K);
    r.max_deviation = std::max(r.max_deviation, cur - prev);
    prev = cur;
  }
  r.pass = r.max_deviation <= 1e-15;
  return r;
}

CheckResult check_gamma_lln(RngStream rng) {
  CheckResult r{"empirical gamma vs exact threshold gamma", true, 0.0,
                "4-sigma band, 1e5 samples"};
  GaussianObservationModel model;
  ProbabilityController g = ThresholdController{0.0};
  const long n = 100000;
  for (Hypothesis h : {Hypothesis::H0, Hypothesis::H1}) {
    std::vector<double> xs(n);
    for (long i = 0; i < n; ++i) xs[i] = sample_observation(model, h, rng);
    double emp = gamma_empirical(g, xs);
    double exact = gamma_exact_threshold(0.0, model, h);
    double sigma = std::sqrt(exact * (1.0 - exact) / n);
    r.max_deviation = std::max(r.max_deviation, std::abs(emp - exact) / sigma);
  }
  r.pass = r.max_deviation <= 4.0;
  return r;
}

}  // namespace

std::vector<CheckResult> run_verification(uint64_t seed,
                                          const MapdepBinaryFn& mapdep_fn_in) {
  MapdepBinaryFn mapdep_fn = mapdep_fn_in;
  if (!mapdep_fn) {
    mapdep_fn = [](const BinaryHypothesis& priors, const GammaPair& g, int K) {
      return mapdep_binary(priors, g, K);
    };
  }
  RngStream rng(seed);
  std::vector<CheckResult> results;
  results.push_back(check_enumeration_vs_closed_form(rng.substream(11), mapdep_fn));
  results.push_back(check_average_fusion_equality(rng.substream(12), mapdep_fn));
  results.push_back(check_chernoff_gap(rng.substream(13)));
  results.push_back(check_gradient_phi(rng.substream(14)));
  results.push_back(check_gradient_theta(rng.substream(15)));
  results.push_back(check_dither_unbiased(rng.substream(16)));
  results.push_back(check_mapdep_monotone(mapdep_fn));
  results.push_back(check_gamma_lln(rng.substream(17)));
  return results;
}

bool all_passed(const std::vector<CheckResult>& results) {
  for (const auto& r : results) {
    if (!r.pass) return false;
  }
  return true;
}

}  // namespace detq
