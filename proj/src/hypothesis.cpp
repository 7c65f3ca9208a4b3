#include "detq/hypothesis.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace detq {

namespace {
constexpr double kSqrt2Pi = 2.506628274631000502415765284811;
}

BinaryHypothesis::BinaryHypothesis(double p0, double p1) : pi0(p0), pi1(p1) {
  if (!(pi0 >= 0.0 && pi0 <= 1.0) || !(pi1 >= 0.0 && pi1 <= 1.0)) {
    throw std::invalid_argument("priors must lie in [0, 1]");
  }
  if (std::abs(pi0 + pi1 - 1.0) > 1e-12) {
    throw std::invalid_argument("priors must sum to 1");
  }
}

GaussianObservationModel::GaussianObservationModel(double m0, double m1, double s)
    : mean0(m0), mean1(m1), sigma(s) {
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("sigma must be positive");
  }
}

double pdf(const GaussianObservationModel& model, double x, Hypothesis h) {
  double z = (x - model.mean(h)) / model.sigma;
  return std::exp(-0.5 * z * z) / (model.sigma * kSqrt2Pi);
}

double log_pdf(const GaussianObservationModel& model, double x, Hypothesis h) {
  double z = (x - model.mean(h)) / model.sigma;
  return -0.5 * z * z - std::log(model.sigma * kSqrt2Pi);
}

double snr_to_sigma(double snr_db) { return std::pow(10.0, -snr_db / 20.0); }

double sample_observation(const GaussianObservationModel& model, Hypothesis h,
                          RngStream& rng) {
  return rng.normal(model.mean(h), model.sigma);
}

Dataset sample_dataset(const GaussianObservationModel& model, long T, uint64_t seed) {
  if (T < 1) {
    throw std::invalid_argument("dataset size T must be at least 1");
  }
  Dataset data;
  data.seed = seed;
  data.x_h0.resize(T);
  data.x_h1.resize(T);
  RngStream rng = RngStream(seed).substream(stream_label::kDataset);
  for (long t = 0; t < T; ++t) {
    data.x_h0[t] = sample_observation(model, Hypothesis::H0, rng);
    data.x_h1[t] = sample_observation(model, Hypothesis::H1, rng);
  }
  return data;
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  out << "t,x_h0,x_h1\n";
  char buf[128];
  for (long t = 0; t < data.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g\n", t + 1, data.x_h0[t],
                  data.x_h1[t]);
    out << buf;
  }
  if (!out) {
    throw std::runtime_error("write failed: " + path);
  }
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open dataset: " + path);
  }
  std::string line;
  if (!std::getline(in, line) || line != "t,x_h0,x_h1") {
    throw std::runtime_error("bad dataset header in " + path);
  }
  Dataset data;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');
    std::getline(ss, field, ',');
    double x0 = std::stod(field);
    std::getline(ss, field, ',');
    double x1 = std::stod(field);
    data.x_h0.push_back(x0);
    data.x_h1.push_back(x1);
  }
  if (data.size() == 0) {
    throw std::runtime_error("dataset is empty: " + path);
  }
  return data;
}

void write_dataset_manifest(const Dataset& data, const GaussianObservationModel& model,
                            const std::string& path) {
  nlohmann::json j;
  j["seed"] = data.seed;
  j["sigma"] = model.sigma;
  j["T"] = data.size();
  j["mean0"] = model.mean0;
  j["mean1"] = model.mean1;
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  out << j.dump(2) << "\n";
}

}  // namespace detq
