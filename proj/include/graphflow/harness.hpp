#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace graphflow {

struct PropertyFailure {
  std::size_t sample = 0;
  std::uint64_t sample_seed = 0;
  std::size_t size = 0;         // vertex count of the failing instance
  std::size_t shrunk_size = 0;  // smallest vertex count that still fails
  double violation = 0.0;
  std::string detail;
};

struct HarnessReport {
  std::string suite;
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  std::size_t checks = 0;
  // Largest observed violation (positive means the property failed by that
  // much beyond its tolerance margin; negative values are slack).
  double worst_margin = -std::numeric_limits<double>::infinity();
  std::vector<PropertyFailure> failures;
  std::string note;

  bool passed() const noexcept { return note.empty() && failures.empty(); }
};

std::vector<std::string> property_suites();

// Runs a randomized property suite. Unknown suite names produce an empty
// report with a note instead of an exception.
HarnessReport property_harness(const std::string& suite, std::uint64_t seed, std::size_t samples);

// Worker count: GRAPHFLOW_THREADS when set to a positive integer, otherwise
// the hardware concurrency (at least 1).
std::size_t worker_count();

// Calls fn(i) for i in [0, n) on up to worker_count() threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace graphflow
