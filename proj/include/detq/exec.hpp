#pragma once

namespace detq {

// Execution policy for the data-parallel kernels. Serial and Parallel runs
// produce bit-identical results: parallel loops either write disjoint slots
// or reduce over fixed-size chunks merged in chunk order.
enum class Exec { Serial, Parallel };

}  // namespace detq
