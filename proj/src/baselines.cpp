#include "uavfl/baselines.hpp"

#include <cmath>
#include <stdexcept>

namespace uavfl {

std::string scheme_name(Scheme s) {
    switch (s) {
        case Scheme::kProposed: return "proposed";
        case Scheme::kFdma: return "fdma";
        case Scheme::kFixedTrajectory: return "fixed_trajectory";
        case Scheme::kFixedUserAllocation: return "fixed_user_allocation";
        case Scheme::kThresholding: return "thresholding";
    }
    return "unknown";
}

Scheme scheme_from_name(const std::string& name) {
    if (name == "proposed" || name == "ao") return Scheme::kProposed;
    if (name == "fdma") return Scheme::kFdma;
    if (name == "fixed_trajectory") return Scheme::kFixedTrajectory;
    if (name == "fixed_user_allocation") return Scheme::kFixedUserAllocation;
    if (name == "thresholding") return Scheme::kThresholding;
    throw std::invalid_argument("unknown scheme: " + name);
}

namespace {

// Equal split of whole RBs by largest remainder; equal quotas tie-break to
// the lowest device index.
std::vector<int> fdma_rb_counts(const Scenario& sc) {
    const int M = sc.device_count();
    const int U = sc.channel.rb_count;
    std::vector<int> per_device(static_cast<std::size_t>(M),
                                static_cast<int>(std::floor(static_cast<double>(U) / M)));
    int spare = U;
    for (int c : per_device) spare -= c;
    for (int m = 0; m < M && spare > 0; ++m, --spare)
        ++per_device[static_cast<std::size_t>(m)];
    std::vector<int> counts(static_cast<std::size_t>(M) * sc.slots, 0);
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < sc.slots; ++n)
            counts[static_cast<std::size_t>(m * sc.slots + n)] =
                per_device[static_cast<std::size_t>(m)];
    return counts;
}

}  // namespace

AoResult run_scheme(Scheme scheme, const Scenario& sc, const BaselineOptions& opt) {
    StagePins pins;
    switch (scheme) {
        case Scheme::kProposed:
            break;
        case Scheme::kFdma:
            pins.pin_rb = true;
            pins.pinned_rb_counts = fdma_rb_counts(sc);
            break;
        case Scheme::kFixedTrajectory:
            pins.pin_trajectory = true;
            break;
        case Scheme::kFixedUserAllocation:
            pins.pin_device_power_freq = true;
            break;
        case Scheme::kThresholding:
            if (opt.threshold <= 0.0 || opt.threshold >= 1.0)
                throw std::invalid_argument("thresholding: delta must lie in (0, 1)");
            pins.threshold_rb = true;
            pins.threshold = opt.threshold;
            break;
    }
    return run_ao(sc, opt.ao, pins);
}

}  // namespace uavfl
