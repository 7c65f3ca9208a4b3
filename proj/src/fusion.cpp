#include "detq/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace detq {

namespace {

double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

// 95% normal-approximation half-width, Wilson when the error count is small.
double ci_halfwidth_95(long errors, long trials) {
  const double z = 1.959963984540054;
  double n = static_cast<double>(trials);
  double p = static_cast<double>(errors) / n;
  if (errors >= 10) {
    return z * std::sqrt(p * (1.0 - p) / n);
  }
  double z2 = z * z;
  return z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
}

}  // namespace

BitAverage average_bits(const std::vector<int>& bits) {
  if (bits.empty()) {
    throw std::invalid_argument("average_bits needs at least one bit");
  }
  BitAverage avg;
  avg.sensors = static_cast<int>(bits.size());
  for (int b : bits) avg.count += b;
  return avg;
}

std::array<double, 2> oracle_posterior(const BinaryHypothesis& priors,
                                       const GammaPair& gammas, int k, int K) {
  if (k < 0 || k > K) {
    throw std::invalid_argument("oracle_posterior: k out of range");
  }
  const double neg_inf = -std::numeric_limits<double>::infinity();
  const GammaPair g = gammas.clamped();
  double lj0 = priors.pi0 > 0.0 ? std::log(priors.pi0) + xlogy(k, g.gamma0) +
                                      xlogy(K - k, 1.0 - g.gamma0)
                                : neg_inf;
  double lj1 = priors.pi1 > 0.0 ? std::log(priors.pi1) + xlogy(k, g.gamma1) +
                                      xlogy(K - k, 1.0 - g.gamma1)
                                : neg_inf;
  double m = std::max(lj0, lj1);
  if (m == neg_inf) {
    throw std::invalid_argument("oracle_posterior: unreachable bit average");
  }
  double e0 = std::exp(lj0 - m), e1 = std::exp(lj1 - m);
  double s = e0 + e1;
  return {e0 / s, e1 / s};
}

std::array<double, 2> detector_posterior(const Detector& d, int k, int K) {
  if (k < 0 || k > K) {
    throw std::invalid_argument("detector_posterior: k out of range");
  }
  if (const auto* oracle = std::get_if<OracleDetector>(&d)) {
    return oracle_posterior(oracle->priors, oracle->gammas, k, K);
  }
  const Mlp& theta = std::get<NeuralDetector>(d).theta;
  std::vector<double> out = forward(theta, {static_cast<double>(k) / K});
  return {out[0], out[1]};
}

Hypothesis decide(const Detector& d, int k, int K) {
  std::array<double, 2> post = detector_posterior(d, k, K);
  return post[0] > post[1] ? Hypothesis::H0 : Hypothesis::H1;
}

Hypothesis map_decide_bits(const BinaryHypothesis& priors, const GammaPair& gammas,
                           const std::vector<int>& bits) {
  const GammaPair g = gammas.clamped();
  double l0 = 1.0, l1 = 1.0;
  for (int b : bits) {
    l0 *= b ? g.gamma0 : 1.0 - g.gamma0;
    l1 *= b ? g.gamma1 : 1.0 - g.gamma1;
  }
  return map_decide_ratio(priors, l0, l1);
}

EvaluationReport monte_carlo_error(const GaussianObservationModel& model,
                                   const BinaryHypothesis& priors,
                                   const ProbabilityController& controller,
                                   const Detector& detector, int K, long trials,
                                   uint64_t seed, Exec exec) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (K < 1) throw std::invalid_argument("K must be >= 1");

  constexpr long kBlock = 8192;
  const long num_blocks = (trials + kBlock - 1) / kBlock;
  std::vector<std::array<long, 4>> counts(num_blocks, {0, 0, 0, 0});
  const RngStream base = RngStream(seed).substream(stream_label::kMonteCarlo);

#pragma omp parallel for schedule(dynamic) if (exec == Exec::Parallel)
  for (long b = 0; b < num_blocks; ++b) {
    RngStream rng = base.substream(static_cast<uint64_t>(b));
    const long lo = b * kBlock;
    const long hi = std::min(trials, lo + kBlock);
    long t_h0 = 0, e_h0 = 0, t_h1 = 0, e_h1 = 0;
    for (long t = lo; t < hi; ++t) {
      Hypothesis h = rng.uniform01() < priors.pi0 ? Hypothesis::H0 : Hypothesis::H1;
      int ones = 0;
      for (int k = 0; k < K; ++k) {
        double x = sample_observation(model, h, rng);
        double p = controller_eval(controller, x);
        ones += quantize(p, rng.uniform01());
      }
      Hypothesis decision = decide(detector, ones, K);
      if (h == Hypothesis::H0) {
        ++t_h0;
        if (decision != h) ++e_h0;
      } else {
        ++t_h1;
        if (decision != h) ++e_h1;
      }
    }
    counts[b] = {t_h0, e_h0, t_h1, e_h1};
  }

  EvaluationReport report;
  for (const auto& c : counts) {
    report.trials_h0 += c[0];
    report.errors_h0 += c[1];
    report.trials_h1 += c[2];
    report.errors_h1 += c[3];
  }
  report.trials = trials;
  report.error_rate = static_cast<double>(report.errors()) / trials;
  report.ci_halfwidth = ci_halfwidth_95(report.errors(), trials);
  report.K = K;
  report.seed = seed;
  return report;
}

void write_report_json(const EvaluationReport& report, const std::string& path) {
  nlohmann::json j;
  j["error_rate"] = report.error_rate;
  j["trials"] = report.trials;
  j["ci_halfwidth"] = report.ci_halfwidth;
  j["per_hypothesis"] = {
      {"h0", {{"trials", report.trials_h0}, {"errors", report.errors_h0}}},
      {"h1", {{"trials", report.trials_h1}, {"errors", report.errors_h1}}}};
  j["config"] = {{"K", report.K},
                 {"snr_db", report.snr_db},
                 {"seed", report.seed},
                 {"controller", report.controller_name},
                 {"detector", report.detector_name}};
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  out << j.dump(2) << "\n";
}

}  // namespace detq
