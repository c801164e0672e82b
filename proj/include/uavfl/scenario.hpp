#ifndef UAVFL_SCENARIO_HPP
#define UAVFL_SCENARIO_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "uavfl/rng.hpp"

namespace uavfl {

using Vec2 = Eigen::Vector2d;

struct DeviceSpec {
    int id = 0;
    Vec2 position{0.0, 0.0};    // meters, fixed on the ground
    double cycles_per_bit = 0;  // CPU cycles per bit of training data
    double capacitance = 0;     // effective switched capacitance
    double sample_bits = 0;     // bits per training sample
    int local_rounds = 0;       // gradient steps per slot
    double energy_budget = 0;   // joules over the whole block
    double f_max = 0;           // Hz
    double p_max = 0;           // watts
};

struct UavSpec {
    Vec2 start{0.0, 0.0};
    Vec2 end{0.0, 0.0};
    double altitude = 0;        // meters, fixed flight height
    double v_min = 0;           // m/s
    double v_max = 0;           // m/s
    double a_max = 0;           // m/s^2
    double f_max = 0;           // Hz, aggregation processor
    double capacitance = 0;
    double energy_budget = 0;   // joules
    double p_max = 0;           // watts, per-device downlink power cap
    double cycles_per_bit = 0;  // aggregation cycles per bit
};

struct ChannelSpec {
    double ref_gain = 0;        // linear power gain at 1 m
    double rb_bandwidth = 0;    // Hz per resource block
    int rb_count = 0;           // number of orthogonal RBs
    double noise_uplink = 0;    // W/Hz at the UAV
    double noise_downlink = 0;  // W/Hz at the devices
};

// Poisson birth/death dynamics of the per-device sample count, clamped to
// [min_samples, max_samples].
struct DatasetState {
    long samples = 0;
    long min_samples = 0;
    long max_samples = 0;
    double sensed_rate = 0;
    double dropped_rate = 0;
};

struct Scenario {
    std::vector<DeviceSpec> devices;
    UavSpec uav;
    ChannelSpec channel;
    int slots = 0;
    std::uint64_t seed = 0;
    double region_size = 0;  // devices live in [0, region_size]^2

    // Per-slot realizations drawn at load time (scenario is immutable after).
    std::vector<std::vector<long>> samples;        // [m][n] sample counts
    std::vector<std::vector<double>> model_bits;   // [m][n] local update size d_m[n]
    std::vector<double> agg_bits;                  // [n] global update size

    int device_count() const { return static_cast<int>(devices.size()); }
    double train_bits(int m, int n) const {
        return static_cast<double>(samples[m][n]) * devices[m].sample_bits;
    }
    double sum_model_bits(int n) const {
        double s = 0;
        for (int m = 0; m < device_count(); ++m) s += model_bits[m][n];
        return s;
    }
};

// dBm/Hz -> linear W/Hz.
double dbm_per_hz_to_linear(double dbm);

// Parses a JSON scenario description, draws all randomized fields from the
// embedded seed, and validates every invariant. Throws std::runtime_error with
// the offending field name on failure.
Scenario load_scenario(const std::string& config_text);

// Canonical serialized form; identical scenarios produce identical bytes.
std::string serialize_scenario(const Scenario& sc);

// One Poisson step of the dataset dynamics.
DatasetState step_dataset(const DatasetState& state, RandomStream& rng);

// M i.i.d. uniform positions in [0, region]^2.
std::vector<Vec2> random_layout(int count, double region, RandomStream& rng);

// Validates all scenario invariants; throws on violation.
void validate_scenario(const Scenario& sc);

}  // namespace uavfl

#endif
