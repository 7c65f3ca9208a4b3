#pragma once

#include <array>
#include <vector>

#include "detq/hypothesis.hpp"
#include "detq/quantizer.hpp"

namespace detq {

// Per-sensor discrete message channel: p(u | H_n) over L levels.
struct DiscreteChannel {
  std::vector<double> p_given_h0;
  std::vector<double> p_given_h1;

  DiscreteChannel(std::vector<double> p0, std::vector<double> p1);

  int levels() const { return static_cast<int>(p_given_h0.size()); }
};

// Binary channel induced by a gamma pair, levels ordered u = 0, 1.
DiscreteChannel binary_channel(const GammaPair& gammas);

struct ChernoffResult {
  double value = 0.0;       // nats
  double alpha_star = 0.5;  // argmin in [0, 1]
};

// ln C(K, k) via log-gamma.
double log_binomial(long K, long k);

// Exact MAPDEP by enumerating all L^K message vectors (guarded by L^K <= 2^24).
double mapdep_enumerate(const BinaryHypothesis& priors, const DiscreteChannel& channel,
                        int K);

// Closed-form MAPDEP for identical binary quantizers:
//   sum_k C(K,k) min{pi0 g0^k (1-g0)^(K-k), pi1 g1^k (1-g1)^(K-k)}.
// Direct evaluation for K <= 60, per-term log-space above.
double mapdep_binary(const BinaryHypothesis& priors, const GammaPair& gammas, int K);

// MAPDEP through the distribution of the bit average, with the binomial law
// built by iterated convolution. Independent of mapdep_binary so their
// agreement is a genuine cross-check.
double mapdep_average(const BinaryHypothesis& priors, const GammaPair& gammas, int K);

// Minimizes log sum_u p(u|H0)^a p(u|H1)^(1-a) over a in [0,1] by
// golden-section search (the objective is convex); endpoints included.
ChernoffResult chernoff_information(const DiscreteChannel& channel);

struct QuantizerGap {
  double common_alpha_value = 0.0;    // single alpha shared by all sensors
  double per_sensor_mean_value = 0.0;  // mean of individual optima
};

// Average Chernoff information with a common alpha vs the per-sensor mean.
// Always common <= mean; equality when the channels are identical.
QuantizerGap identical_quantizer_gap(const std::vector<DiscreteChannel>& channels);

// Average KL divergence between the binomial-induced posterior and a
// detector table of K+1 normalized posterior pairs (index k -> u = k/K).
double kl_binary(const BinaryHypothesis& priors, const GammaPair& gammas_phi,
                 const std::vector<std::array<double, 2>>& detector_table, int K);

// MAP rule on likelihoods: H0 iff pi0*l0 / (pi1*l1) > 1, ties to H1.
Hypothesis map_decide_ratio(const BinaryHypothesis& priors, double likelihood0,
                            double likelihood1);

}  // namespace detq
