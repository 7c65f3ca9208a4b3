#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "detq/rng.hpp"

namespace detq {

enum class Hypothesis { H0 = 0, H1 = 1 };

// Prior pair (pi0, pi1). Must sum to 1.
struct BinaryHypothesis {
  double pi0 = 0.5;
  double pi1 = 0.5;

  BinaryHypothesis() = default;
  BinaryHypothesis(double p0, double p1);

  double prior(Hypothesis h) const { return h == Hypothesis::H0 ? pi0 : pi1; }
};

// Conditionally i.i.d. Gaussian observations: X | H_n ~ N(mean_n, sigma^2).
struct GaussianObservationModel {
  double mean0 = -1.0;
  double mean1 = 1.0;
  double sigma = 1.0;

  GaussianObservationModel() = default;
  GaussianObservationModel(double m0, double m1, double s);

  double mean(Hypothesis h) const { return h == Hypothesis::H0 ? mean0 : mean1; }
};

double pdf(const GaussianObservationModel& model, double x, Hypothesis h);
double log_pdf(const GaussianObservationModel& model, double x, Hypothesis h);

// SNR = 1/sigma^2 with unit signal power, so sigma = 10^(-snr_db/20).
double snr_to_sigma(double snr_db);

// One draw from the hypothesis-selected Gaussian; advances the stream.
double sample_observation(const GaussianObservationModel& model, Hypothesis h,
                          RngStream& rng);

// Paired per-index observations: samples[t] = (draw under H0, draw under H1).
struct Dataset {
  std::vector<double> x_h0;
  std::vector<double> x_h1;
  uint64_t seed = 0;

  long size() const { return static_cast<long>(x_h0.size()); }
};

// T pairs, drawn x_h0[t] then x_h1[t] from the stream derived as
// seed -> substream(kDataset). Rejects T < 1.
Dataset sample_dataset(const GaussianObservationModel& model, long T, uint64_t seed);

// CSV with header `t,x_h0,x_h1` (t starts at 1), 17 significant digits.
void write_dataset_csv(const Dataset& data, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

// Manifest JSON: {seed, sigma, T, mean0, mean1}.
void write_dataset_manifest(const Dataset& data, const GaussianObservationModel& model,
                            const std::string& path);

}  // namespace detq
