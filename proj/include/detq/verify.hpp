#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "detq/hypothesis.hpp"
#include "detq/quantizer.hpp"

namespace detq {

struct CheckResult {
  std::string name;
  bool pass = false;
  double max_deviation = 0.0;
  std::string note;
};

using MapdepBinaryFn =
    std::function<double(const BinaryHypothesis&, const GammaPair&, int)>;

// Full property suite: enumeration vs closed form, average-fusion equality,
// Chernoff identical-quantizer inequality and equality cases, gradient
// finite-difference checks, dithering unbiasedness, monotonicity in K, and
// the empirical-gamma law of large numbers. `mapdep_fn` defaults to the real
// implementation; injecting a corrupted one must make the suite fail.
std::vector<CheckResult> run_verification(uint64_t seed,
                                          const MapdepBinaryFn& mapdep_fn = {});

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace detq
