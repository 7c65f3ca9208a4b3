#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "detq/exec.hpp"
#include "detq/hypothesis.hpp"
#include "detq/metrics.hpp"
#include "detq/mlp.hpp"
#include "detq/quantizer.hpp"

namespace detq {

// Softmax-pair MLP posterior approximator over the bit average.
struct NeuralDetector {
  Mlp theta;
};

// Exact Bayes posterior under the binomial message law.
struct OracleDetector {
  BinaryHypothesis priors;
  GammaPair gammas;
  int K = 1;
};

using Detector = std::variant<NeuralDetector, OracleDetector>;

// Bit average kept as an exact count: u_bar = count / K.
struct BitAverage {
  int count = 0;
  int sensors = 0;

  double value() const { return static_cast<double>(count) / sensors; }
};

BitAverage average_bits(const std::vector<int>& bits);

// Posterior (p(H0|u_bar), p(H1|u_bar)) with u_bar = k/K, computed in
// log space; the binomial coefficient cancels.
std::array<double, 2> oracle_posterior(const BinaryHypothesis& priors,
                                       const GammaPair& gammas, int k, int K);

std::array<double, 2> detector_posterior(const Detector& d, int k, int K);

// argmax of the posterior pair; ties go to H1.
Hypothesis decide(const Detector& d, int k, int K);

// Full-vector MAP decision through the product likelihood; the operational
// counterpart of the average-based rule.
Hypothesis map_decide_bits(const BinaryHypothesis& priors, const GammaPair& gammas,
                           const std::vector<int>& bits);

struct EvaluationReport {
  double error_rate = 0.0;
  long trials = 0;
  double ci_halfwidth = 0.0;  // 95%; Wilson when fewer than 10 errors
  long trials_h0 = 0, errors_h0 = 0;
  long trials_h1 = 0, errors_h1 = 0;
  int K = 0;
  double snr_db = 0.0;
  uint64_t seed = 0;
  std::string controller_name;
  std::string detector_name;

  long errors() const { return errors_h0 + errors_h1; }
};

// End-to-end Monte Carlo: draw H from the priors, K observations, dither-
// quantize, average, decide. Trials run in fixed-size blocks with derived
// substreams, so results are identical for Serial and Parallel execution
// and independent of thread count.
EvaluationReport monte_carlo_error(const GaussianObservationModel& model,
                                   const BinaryHypothesis& priors,
                                   const ProbabilityController& controller,
                                   const Detector& detector, int K, long trials,
                                   uint64_t seed, Exec exec = Exec::Parallel);

void write_report_json(const EvaluationReport& report, const std::string& path);

}  // namespace detq
