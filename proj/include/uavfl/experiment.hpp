#ifndef UAVFL_EXPERIMENT_HPP
#define UAVFL_EXPERIMENT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uavfl/baselines.hpp"
#include "uavfl/scenario.hpp"

namespace uavfl {

// Scenario templates. The desk profile keeps full runs fast; the table
// profile carries the published parameter set (N=200, U=30, M=20).
std::string desk_scenario_json(std::uint64_t seed, int devices = 8, int rbs = 12,
                               int slots = 20);
std::string table_scenario_json(std::uint64_t seed);

enum class SweepAxis { kRbCount, kUavEnergy, kSamples, kModelBits };
std::string sweep_axis_name(SweepAxis axis);
SweepAxis sweep_axis_from_name(const std::string& name);

struct ExperimentPlan {
    std::string scenario_template;      // JSON text the sweep patches
    SweepAxis axis = SweepAxis::kRbCount;
    std::vector<double> values;
    std::vector<std::uint64_t> seeds;
    std::vector<Scheme> schemes;
    std::string output_dir;
    int trajectory_stride = 10;         // sampling stride for polyline exports
    BaselineOptions options;
};

ExperimentPlan load_plan(const std::string& plan_json);

// Applies one sweep value and a seed to the template.
std::string patch_scenario(const std::string& scenario_template, SweepAxis axis,
                           double value, std::uint64_t seed);

struct CellResult {
    SweepAxis axis;
    double value = 0;
    std::uint64_t seed = 0;
    Scheme scheme = Scheme::kProposed;
    bool ok = false;
    std::string error;
    double total_latency = 0;       // binary-feasible objective
    double relaxed_latency = 0;     // relaxed lower bound
    int outer_iterations = 0;
    bool audits_passed = false;
    double wall_seconds = 0;
};

struct PlanOutcome {
    std::vector<CellResult> cells;  // fixed order: value-major, then seed, then scheme
    bool all_ok = true;
    std::string results_csv;        // one row per cell
    std::string summary_csv;        // mean/stddev per (value, scheme)
};

// Runs every (value, seed, scheme) cell; failures are recorded per cell and
// the plan continues. Worker count > 1 runs cells concurrently with
// deterministic, order-independent aggregation. Files are written under
// plan.output_dir when it is nonempty.
PlanOutcome run_plan(const ExperimentPlan& plan, int workers = 1);

// Trajectory polyline and device layout, sampled every `stride` slots (the
// endpoints are always included).
std::string export_trajectory(const AllocationState& st, const Scenario& sc, int stride);

struct TrajectoryFile {
    std::vector<std::pair<int, Vec2>> waypoints;
    std::vector<Vec2> devices;
};
TrajectoryFile parse_trajectory(const std::string& csv_text);

}  // namespace uavfl

#endif
