#include "detq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "detq/numeric.hpp"

namespace detq {

namespace {

constexpr double kLogClamp = 1e-12;

double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

// Powers inside Chernoff sums: 0^a := 0 for every a in [0,1], which keeps
// the objective continuous at the endpoints (the a -> 0+ limit of p^a is the
// support indicator).
double pow_chernoff(double base, double a) {
  if (base <= 0.0) return 0.0;
  return std::pow(base, a);
}

void check_channel_pair(const std::vector<double>& p0, const std::vector<double>& p1) {
  if (p0.size() < 2 || p0.size() != p1.size()) {
    throw std::invalid_argument("channel needs matching vectors of length >= 2");
  }
  for (const auto* v : {&p0, &p1}) {
    double sum = 0.0;
    for (double p : *v) {
      if (p < 0.0) throw std::invalid_argument("channel probabilities must be >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      throw std::invalid_argument("channel probabilities must sum to 1");
    }
  }
}

// Objective of Eq-style Chernoff sums for one channel at exponent a.
double chernoff_objective(const DiscreteChannel& c, double a) {
  double sum = 0.0;
  for (int u = 0; u < c.levels(); ++u) {
    sum += pow_chernoff(c.p_given_h0[u], a) * pow_chernoff(c.p_given_h1[u], 1.0 - a);
  }
  return std::log(sum);
}

// Binomial pmf over k = 0..K by iterated convolution with {1-g, g}.
std::vector<double> binomial_pmf_by_convolution(int K, double g) {
  std::vector<double> p{1.0};
  for (int i = 0; i < K; ++i) {
    std::vector<double> q(p.size() + 1, 0.0);
    for (size_t j = 0; j < p.size(); ++j) {
      q[j] += p[j] * (1.0 - g);
      q[j + 1] += p[j] * g;
    }
    p = std::move(q);
  }
  return p;
}

}  // namespace

DiscreteChannel::DiscreteChannel(std::vector<double> p0, std::vector<double> p1)
    : p_given_h0(std::move(p0)), p_given_h1(std::move(p1)) {
  check_channel_pair(p_given_h0, p_given_h1);
}

DiscreteChannel binary_channel(const GammaPair& gammas) {
  return DiscreteChannel({1.0 - gammas.gamma0, gammas.gamma0},
                         {1.0 - gammas.gamma1, gammas.gamma1});
}

double log_binomial(long K, long k) {
  if (k < 0 || k > K) {
    throw std::invalid_argument("log_binomial: k out of range");
  }
  return std::lgamma(static_cast<double>(K) + 1.0) -
         std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(K - k) + 1.0);
}

double mapdep_enumerate(const BinaryHypothesis& priors, const DiscreteChannel& channel,
                        int K) {
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  const int L = channel.levels();
  double combos = std::pow(static_cast<double>(L), K);
  if (combos > static_cast<double>(1 << 24)) {
    throw std::invalid_argument("mapdep_enumerate: L^K exceeds enumeration guard");
  }
  const long total = static_cast<long>(std::llround(combos));
  std::vector<int> digits(K, 0);
  double sum = 0.0;
  for (long idx = 0; idx < total; ++idx) {
    double l0 = 1.0, l1 = 1.0;
    for (int k = 0; k < K; ++k) {
      l0 *= channel.p_given_h0[digits[k]];
      l1 *= channel.p_given_h1[digits[k]];
    }
    sum += std::min(priors.pi0 * l0, priors.pi1 * l1);
    for (int k = 0; k < K; ++k) {  // odometer increment
      if (++digits[k] < L) break;
      digits[k] = 0;
    }
  }
  return sum;
}

double mapdep_binary(const BinaryHypothesis& priors, const GammaPair& gammas, int K) {
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  const double g0 = gammas.gamma0, g1 = gammas.gamma1;

  if (K <= 60) {
    // Exact-ish direct path; binomial coefficients built incrementally.
    double coeff = 1.0;
    double sum = 0.0;
    for (int k = 0; k <= K; ++k) {
      double a = std::pow(g0, k) * std::pow(1.0 - g0, K - k);
      double b = std::pow(g1, k) * std::pow(1.0 - g1, K - k);
      sum += coeff * std::min(priors.pi0 * a, priors.pi1 * b);
      coeff = coeff * (K - k) / (k + 1.0);
    }
    return sum;
  }

  // Per-term log-space with max subtraction.
  const double neg_inf = -std::numeric_limits<double>::infinity();
  std::vector<double> log_terms(K + 1);
  double peak = neg_inf;
  double lpi0 = priors.pi0 > 0.0 ? std::log(priors.pi0) : neg_inf;
  double lpi1 = priors.pi1 > 0.0 ? std::log(priors.pi1) : neg_inf;
  for (int k = 0; k <= K; ++k) {
    double lc = log_binomial(K, k);
    double la = (k > 0 && g0 == 0.0) || (k < K && g0 == 1.0)
                    ? neg_inf
                    : xlogy(k, g0) + xlogy(K - k, 1.0 - g0);
    double lb = (k > 0 && g1 == 0.0) || (k < K && g1 == 1.0)
                    ? neg_inf
                    : xlogy(k, g1) + xlogy(K - k, 1.0 - g1);
    double lt = std::min(lpi0 + la, lpi1 + lb);
    log_terms[k] = lt == neg_inf ? neg_inf : lc + lt;
    peak = std::max(peak, log_terms[k]);
  }
  if (peak == neg_inf) return 0.0;
  double sum = 0.0;
  for (int k = 0; k <= K; ++k) {
    if (log_terms[k] != neg_inf) sum += std::exp(log_terms[k] - peak);
  }
  return std::exp(peak) * sum;
}

double mapdep_average(const BinaryHypothesis& priors, const GammaPair& gammas, int K) {
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  std::vector<double> p0 = binomial_pmf_by_convolution(K, gammas.gamma0);
  std::vector<double> p1 = binomial_pmf_by_convolution(K, gammas.gamma1);
  double sum = 0.0;
  for (int k = 0; k <= K; ++k) {
    sum += std::min(priors.pi0 * p0[k], priors.pi1 * p1[k]);
  }
  return sum;
}

ChernoffResult chernoff_information(const DiscreteChannel& channel) {
  auto f = [&](double a) { return chernoff_objective(channel, a); };
  MinimizeResult m = golden_section_min(f, 0.0, 1.0, 1e-9);
  return ChernoffResult{-m.value, m.x};
}

QuantizerGap identical_quantizer_gap(const std::vector<DiscreteChannel>& channels) {
  if (channels.empty()) {
    throw std::invalid_argument("identical_quantizer_gap needs at least one channel");
  }
  const int L = channels.front().levels();
  for (const auto& c : channels) {
    if (c.levels() != L) {
      throw std::invalid_argument("all channels must share the same level count");
    }
  }
  const double K = static_cast<double>(channels.size());

  auto joint = [&](double a) {
    double total = 0.0;
    for (const auto& c : channels) total += chernoff_objective(c, a);
    return total;
  };
  MinimizeResult m = golden_section_min(joint, 0.0, 1.0, 1e-9);

  double mean = 0.0;
  for (const auto& c : channels) mean += chernoff_information(c).value;

  QuantizerGap gap;
  gap.common_alpha_value = -m.value / K;
  gap.per_sensor_mean_value = mean / K;
  return gap;
}

double kl_binary(const BinaryHypothesis& priors, const GammaPair& gammas_phi,
                 const std::vector<std::array<double, 2>>& detector_table, int K) {
  if (static_cast<int>(detector_table.size()) != K + 1) {
    throw std::invalid_argument("detector table must have K+1 rows");
  }
  for (const auto& row : detector_table) {
    if (row[0] < 0.0 || row[1] < 0.0 || std::abs(row[0] + row[1] - 1.0) > 1e-9) {
      throw std::invalid_argument("detector table rows must be normalized pairs");
    }
  }
  const GammaPair g = gammas_phi.clamped();
  double total = 0.0;
  for (int k = 0; k <= K; ++k) {
    double lc = log_binomial(K, k);
    double w0 = priors.pi0 * std::exp(lc + xlogy(k, g.gamma0) + xlogy(K - k, 1.0 - g.gamma0));
    double w1 = priors.pi1 * std::exp(lc + xlogy(k, g.gamma1) + xlogy(K - k, 1.0 - g.gamma1));
    double s = w0 + w1;
    const double w[2] = {w0, w1};
    for (int n = 0; n < 2; ++n) {
      if (w[n] <= 0.0) continue;
      total += w[n] * (std::log(std::max(w[n], kLogClamp)) -
                       std::log(std::max(detector_table[k][n], kLogClamp)) -
                       std::log(std::max(s, kLogClamp)));
    }
  }
  return total;
}

Hypothesis map_decide_ratio(const BinaryHypothesis& priors, double likelihood0,
                            double likelihood1) {
  if (likelihood0 < 0.0 || likelihood1 < 0.0) {
    throw std::invalid_argument("likelihoods must be >= 0");
  }
  if (likelihood0 == 0.0 && likelihood1 == 0.0) {
    throw std::invalid_argument("both likelihoods are zero");
  }
  return priors.pi0 * likelihood0 > priors.pi1 * likelihood1 ? Hypothesis::H0
                                                             : Hypothesis::H1;
}

}  // namespace detq
