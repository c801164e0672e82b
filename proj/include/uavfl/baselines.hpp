#ifndef UAVFL_BASELINES_HPP
#define UAVFL_BASELINES_HPP

#include <string>

#include "uavfl/ao.hpp"

namespace uavfl {

// The four benchmark schemes plus the full pipeline.
enum class Scheme {
    kProposed,            // full alternating optimization
    kFdma,                // equal RB split, everything else optimized
    kFixedTrajectory,     // straight-line flight, everything else optimized
    kFixedUserAllocation, // device frequencies/powers pinned at half maximum
    kThresholding,        // relaxed RB shares binarized by a threshold
};

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

struct BaselineOptions {
    AoOptions ao;
    double threshold = 0.5;  // delta for the thresholding scheme
};

// Runs one scheme end to end and returns the AO result (baselines reuse the
// outer loop with the corresponding block pinned).
AoResult run_scheme(Scheme scheme, const Scenario& sc, const BaselineOptions& opt = {});

}  // namespace uavfl

#endif
