#include "uavfl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

namespace uavfl {

using json = nlohmann::ordered_json;

std::string desk_scenario_json(std::uint64_t seed, int devices, int rbs, int slots) {
    json j;
    j["slots"] = slots;
    j["seed"] = seed;
    j["region_size"] = 1000.0;
    j["channel"] = {{"ref_gain", 1e-3},
                    {"rb_bandwidth", 1e6},
                    {"rb_count", rbs},
                    {"noise_dbm_per_hz", -174.0}};
    // The mission endpoints keep the per-hop distance of the 20-slot profile
    // so the straight-line start stays inside the speed limits at any slot
    // count, capped at the 600 m diagonal.
    const double span = std::min(600.0, 600.0 * (slots - 1) / 19.0);
    j["uav"] = {{"start", {200.0, 200.0}}, {"end", {200.0 + span, 200.0 + span}},
                {"altitude", 100.0},       {"v_min", 2.0},
                {"v_max", 70.0},           {"a_max", 30.0},
                {"f_max", 1e10},           {"capacitance", 1e-28},
                {"energy_budget", 2000.0}, {"p_max", 0.1},
                {"cycles_per_bit", 100.0}};
    j["dataset"] = {{"initial_samples", 1000}, {"min_samples", 800},
                    {"max_samples", 1200},     {"sensed_rate", 50.0},
                    {"dropped_rate", 50.0},    {"sample_bits", 5000.0}};
    j["devices"] = {{"count", devices},
                    {"cycles_per_bit", 100.0},
                    {"capacitance", 1e-28},
                    {"model_bits", {3.5e6, 4.5e6}},
                    {"local_rounds", 1},
                    {"energy_budget", 100.0},
                    {"f_max", {8e8, 1.2e9}},
                    {"p_max", 0.1}};
    return j.dump(2);
}

std::string table_scenario_json(std::uint64_t seed) {
    // Published parameter set: 200 slots, 30 RBs, 20 devices, 1 MHz RBs,
    // -174 dBm/Hz noise, local updates of 3.5e5..4.5e5 bits.
    json j = json::parse(desk_scenario_json(seed, 20, 30, 200));
    j["devices"]["model_bits"] = {3.5e5, 4.5e5};
    j["uav"]["v_max"] = 40.0;
    j["uav"]["a_max"] = 15.0;
    return j.dump(2);
}

std::string sweep_axis_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::kRbCount: return "rb_count";
        case SweepAxis::kUavEnergy: return "uav_energy";
        case SweepAxis::kSamples: return "samples";
        case SweepAxis::kModelBits: return "model_bits";
    }
    return "unknown";
}

SweepAxis sweep_axis_from_name(const std::string& name) {
    if (name == "rb_count") return SweepAxis::kRbCount;
    if (name == "uav_energy") return SweepAxis::kUavEnergy;
    if (name == "samples") return SweepAxis::kSamples;
    if (name == "model_bits") return SweepAxis::kModelBits;
    throw std::invalid_argument("unknown sweep axis: " + name);
}

std::string patch_scenario(const std::string& scenario_template, SweepAxis axis,
                           double value, std::uint64_t seed) {
    json j = json::parse(scenario_template);
    j["seed"] = seed;
    switch (axis) {
        case SweepAxis::kRbCount:
            j["channel"]["rb_count"] = static_cast<int>(std::llround(value));
            break;
        case SweepAxis::kUavEnergy:
            j["uav"]["energy_budget"] = value;
            break;
        case SweepAxis::kSamples: {
            const long s = std::llround(value);
            j["dataset"]["initial_samples"] = s;
            j["dataset"]["min_samples"] = std::max<long>(1, std::llround(0.8 * value));
            j["dataset"]["max_samples"] = std::llround(1.2 * value);
            break;
        }
        case SweepAxis::kModelBits:
            j["devices"]["model_bits"] = {0.875 * value, 1.125 * value};
            break;
    }
    return j.dump(2);
}

ExperimentPlan load_plan(const std::string& plan_json) {
    json j;
    try {
        j = json::parse(plan_json);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("plan: parse failure: ") + e.what());
    }
    ExperimentPlan plan;
    if (j.contains("scenario"))
        plan.scenario_template = j["scenario"].dump();
    else if (j.contains("profile")) {
        const std::string p = j["profile"].get<std::string>();
        if (p == "desk")
            plan.scenario_template = desk_scenario_json(0);
        else if (p == "table")
            plan.scenario_template = table_scenario_json(0);
        else
            throw std::runtime_error("plan: unknown profile '" + p + "'");
    } else {
        throw std::runtime_error("plan: need 'scenario' or 'profile'");
    }
    plan.axis = sweep_axis_from_name(j.at("axis").get<std::string>());
    for (const auto& v : j.at("values")) plan.values.push_back(v.get<double>());
    for (const auto& s : j.at("seeds")) plan.seeds.push_back(s.get<std::uint64_t>());
    if (j.contains("schemes"))
        for (const auto& s : j["schemes"])
            plan.schemes.push_back(scheme_from_name(s.get<std::string>()));
    else
        plan.schemes = {Scheme::kProposed, Scheme::kFdma, Scheme::kFixedTrajectory,
                        Scheme::kFixedUserAllocation, Scheme::kThresholding};
    if (j.contains("output_dir")) plan.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("trajectory_stride"))
        plan.trajectory_stride = j["trajectory_stride"].get<int>();
    if (j.contains("ao")) {
        const auto& a = j["ao"];
        if (a.contains("eps_rel")) plan.options.ao.eps_rel = a["eps_rel"].get<double>();
        if (a.contains("max_outer")) plan.options.ao.max_outer = a["max_outer"].get<int>();
        if (a.contains("chi")) plan.options.ao.chi = a["chi"].get<int>();
    }
    if (j.contains("threshold")) plan.options.threshold = j["threshold"].get<double>();
    if (plan.values.empty()) throw std::runtime_error("plan: empty sweep value list");
    if (plan.seeds.empty()) throw std::runtime_error("plan: empty seed list");
    return plan;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

CellResult run_cell(const ExperimentPlan& plan, double value, std::uint64_t seed,
                    Scheme scheme) {
    CellResult cell;
    cell.axis = plan.axis;
    cell.value = value;
    cell.seed = seed;
    cell.scheme = scheme;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const std::string text = patch_scenario(plan.scenario_template, plan.axis, value, seed);
        const Scenario sc = load_scenario(text);
        const AoResult res = run_scheme(scheme, sc, plan.options);
        cell.total_latency = res.final_objective;
        cell.relaxed_latency = res.relaxed_objective;
        cell.outer_iterations = res.outer_iterations;
        cell.audits_passed = res.energy_audit.feasible && res.kinematics_audit.feasible;
        cell.ok = res.failure_stage.empty();
        if (!cell.ok) cell.error = res.failure_stage;

        if (!plan.output_dir.empty()) {
            namespace fs = std::filesystem;
            fs::create_directories(plan.output_dir);
            std::ostringstream stem;
            stem << sweep_axis_name(plan.axis) << '_' << fmt(value) << "_s" << seed << '_'
                 << scheme_name(scheme);
            json trace;
            trace["axis"] = sweep_axis_name(plan.axis);
            trace["value"] = value;
            trace["seed"] = seed;
            trace["scheme"] = scheme_name(scheme);
            trace["objectives"] = res.trace.objectives;
            trace["total_latency"] = res.final_objective;
            trace["relaxed_latency"] = res.relaxed_objective;
            trace["outer_iterations"] = res.outer_iterations;
            std::ofstream(fs::path(plan.output_dir) / (stem.str() + "_trace.json"))
                << trace.dump(2);
            const Scenario sc2 = load_scenario(text);
            std::ofstream(fs::path(plan.output_dir) / (stem.str() + "_traj.csv"))
                << export_trajectory(res.final_state, sc2, plan.trajectory_stride);
            std::ofstream(fs::path(plan.output_dir) / (stem.str() + "_breakdown.csv"))
                << evaluate(sc2, res.final_state).to_csv();
        }
    } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
    }
    cell.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return cell;
}

}  // namespace

PlanOutcome run_plan(const ExperimentPlan& plan, int workers) {
    PlanOutcome out;
    struct CellSpec {
        double value;
        std::uint64_t seed;
        Scheme scheme;
    };
    std::vector<CellSpec> specs;
    for (double v : plan.values)
        for (std::uint64_t s : plan.seeds)
            for (Scheme sch : plan.schemes) specs.push_back({v, s, sch});
    out.cells.resize(specs.size());

    if (workers <= 1) {
        for (std::size_t i = 0; i < specs.size(); ++i)
            out.cells[i] = run_cell(plan, specs[i].value, specs[i].seed, specs[i].scheme);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= specs.size()) return;
                out.cells[i] =
                    run_cell(plan, specs[i].value, specs[i].seed, specs[i].scheme);
            }
        };
        std::vector<std::thread> pool;
        const int k = std::min<int>(workers, static_cast<int>(specs.size()));
        pool.reserve(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::ostringstream rows;
    rows << "axis,value,seed,scheme,ok,total_latency,relaxed_latency,outer_iterations,"
            "audits_passed,wall_seconds,error\n";
    for (const auto& c : out.cells) {
        if (!c.ok) out.all_ok = false;
        rows << sweep_axis_name(c.axis) << ',' << fmt(c.value) << ',' << c.seed << ','
             << scheme_name(c.scheme) << ',' << (c.ok ? 1 : 0) << ','
             << fmt(c.total_latency) << ',' << fmt(c.relaxed_latency) << ','
             << c.outer_iterations << ',' << (c.audits_passed ? 1 : 0) << ','
             << fmt(c.wall_seconds) << ',' << c.error << '\n';
    }
    out.results_csv = rows.str();

    std::ostringstream sum;
    sum << "axis,value,scheme,runs,failures,mean_latency,stddev_latency\n";
    for (double v : plan.values)
        for (Scheme sch : plan.schemes) {
            double mean = 0, m2 = 0;
            int n_ok = 0, n_fail = 0;
            for (const auto& c : out.cells) {
                if (c.value != v || c.scheme != sch) continue;
                if (!c.ok) {
                    ++n_fail;
                    continue;
                }
                ++n_ok;
                const double d = c.total_latency - mean;
                mean += d / n_ok;
                m2 += d * (c.total_latency - mean);
            }
            const double sd = n_ok > 1 ? std::sqrt(m2 / (n_ok - 1)) : 0.0;
            sum << sweep_axis_name(plan.axis) << ',' << fmt(v) << ',' << scheme_name(sch)
                << ',' << n_ok << ',' << n_fail << ',' << fmt(mean) << ',' << fmt(sd)
                << '\n';
        }
    out.summary_csv = sum.str();

    if (!plan.output_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(plan.output_dir);
        std::ofstream(fs::path(plan.output_dir) / "results.csv") << out.results_csv;
        std::ofstream(fs::path(plan.output_dir) / "summary.csv") << out.summary_csv;
    }
    return out;
}

std::string export_trajectory(const AllocationState& st, const Scenario& sc, int stride) {
    if (stride < 1) stride = 1;
    std::ostringstream os;
    os << "kind,index,x,y\n";
    const int n_last = static_cast<int>(st.traj.size()) - 1;
    for (int n = 0; n <= n_last; n += stride)
        os << "q," << n << ',' << fmt(st.traj[static_cast<std::size_t>(n)].x()) << ','
           << fmt(st.traj[static_cast<std::size_t>(n)].y()) << '\n';
    if (n_last % stride != 0)
        os << "q," << n_last << ',' << fmt(st.traj[static_cast<std::size_t>(n_last)].x())
           << ',' << fmt(st.traj[static_cast<std::size_t>(n_last)].y()) << '\n';
    for (int m = 0; m < sc.device_count(); ++m)
        os << "device," << m << ','
           << fmt(sc.devices[static_cast<std::size_t>(m)].position.x()) << ','
           << fmt(sc.devices[static_cast<std::size_t>(m)].position.y()) << '\n';
    return os.str();
}

TrajectoryFile parse_trajectory(const std::string& csv_text) {
    TrajectoryFile tf;
    std::istringstream is(csv_text);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string kind, idx, xs, ys;
        std::getline(ls, kind, ',');
        std::getline(ls, idx, ',');
        std::getline(ls, xs, ',');
        std::getline(ls, ys, ',');
        const Vec2 p(std::stod(xs), std::stod(ys));
        if (kind == "q")
            tf.waypoints.emplace_back(std::stoi(idx), p);
        else if (kind == "device")
            tf.devices.push_back(p);
        else
            throw std::runtime_error("trajectory: unknown row kind '" + kind + "'");
    }
    return tf;
}

}  // namespace uavfl
