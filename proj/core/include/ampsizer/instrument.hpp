#pragma once

// Test-support call counters backing the evaluation-accounting invariant:
// the per-phase history of a pipeline run must sum to exactly the number of
// evaluate_devices and AC-scan calls made on its behalf.

#include <atomic>
#include <cstdint>

namespace ampsizer::instrument {

std::atomic<std::int64_t>& evaluate_devices_calls();
std::atomic<std::int64_t>& ac_scan_calls();
void reset();

}  // namespace ampsizer::instrument
