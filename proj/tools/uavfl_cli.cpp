#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "uavfl/ao.hpp"
#include "uavfl/baselines.hpp"
#include "uavfl/experiment.hpp"
#include "uavfl/fl_convergence.hpp"
#include "uavfl/scenario.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"UAV-assisted federated learning latency optimizer"};
    app.require_subcommand(1);

    // run-plan: batch experiment driver.
    std::string plan_path, plan_out;
    int workers = 1;
    bool verbose = false;
    auto* plan_cmd = app.add_subcommand("run-plan", "run a sweep plan and emit CSV tables");
    plan_cmd->add_option("--plan", plan_path, "plan JSON file")->required();
    plan_cmd->add_option("--out", plan_out, "output directory (overrides the plan)");
    plan_cmd->add_option("--workers", workers, "concurrent cells")->default_val(1);
    plan_cmd->add_flag("--verbose", verbose, "print one line per cell");

    // run: single scenario, single scheme.
    std::string run_scenario_path, run_scheme = "proposed", run_out;
    std::uint64_t run_seed = 0;
    bool run_desk = false, run_table = false;
    auto* run_cmd = app.add_subcommand("run", "run one scheme on one scenario");
    run_cmd->add_option("--scenario", run_scenario_path, "scenario JSON file");
    run_cmd->add_flag("--desk", run_desk, "use the desk-scale scenario profile");
    run_cmd->add_flag("--table", run_table, "use the published parameter profile");
    run_cmd->add_option("--seed", run_seed, "seed for the profile scenarios");
    run_cmd->add_option("--scheme", run_scheme,
                        "proposed|fdma|fixed_trajectory|fixed_user_allocation|thresholding");
    run_cmd->add_option("--out", run_out, "output directory for traces");

    // export-scenario: canonical serialized scenario.
    std::string exp_profile = "desk", exp_out;
    std::uint64_t exp_seed = 0;
    auto* exp_cmd = app.add_subcommand("export-scenario", "emit a canonical scenario");
    exp_cmd->add_option("--profile", exp_profile, "desk|table");
    exp_cmd->add_option("--seed", exp_seed, "scenario seed");
    exp_cmd->add_option("--out", exp_out, "output file (stdout when omitted)");

    // bounds: analytical FL round bounds.
    double b_l = 1.0, b_u = 1.0, b_step = 1.0, b_weight = 0.5, b_el = 0.1, b_eg = 0.1;
    auto* bounds_cmd = app.add_subcommand("bounds", "FL round lower bounds");
    bounds_cmd->add_option("--smoothness", b_l, "gradient Lipschitz constant");
    bounds_cmd->add_option("--strong-convexity", b_u, "strong convexity constant");
    bounds_cmd->add_option("--step", b_step, "local learning rate");
    bounds_cmd->add_option("--weight", b_weight, "surrogate weight");
    bounds_cmd->add_option("--eps-local", b_el, "local accuracy");
    bounds_cmd->add_option("--eps-global", b_eg, "global accuracy");

    // complexity: documented operation-count formula.
    int c_m = 8, c_u = 12, c_n = 20, c_l = 10;
    double c_eps = 1e-3;
    auto* cx_cmd = app.add_subcommand("complexity", "operation-count estimate");
    cx_cmd->add_option("--devices", c_m);
    cx_cmd->add_option("--rbs", c_u);
    cx_cmd->add_option("--slots", c_n);
    cx_cmd->add_option("--iterations", c_l);
    cx_cmd->add_option("--eps", c_eps);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*plan_cmd) {
            uavfl::ExperimentPlan plan = uavfl::load_plan(read_file(plan_path));
            if (!plan_out.empty()) plan.output_dir = plan_out;
            const uavfl::PlanOutcome outcome = uavfl::run_plan(plan, workers);
            if (verbose)
                for (const auto& c : outcome.cells)
                    std::cout << uavfl::sweep_axis_name(c.axis) << '=' << c.value << " seed="
                              << c.seed << ' ' << uavfl::scheme_name(c.scheme) << " -> "
                              << (c.ok ? "ok" : ("FAILED: " + c.error))
                              << " latency=" << c.total_latency << '\n';
            std::cout << outcome.summary_csv;
            return outcome.all_ok ? 0 : 1;
        }
        if (*run_cmd) {
            std::string text;
            if (!run_scenario_path.empty())
                text = read_file(run_scenario_path);
            else if (run_table)
                text = uavfl::table_scenario_json(run_seed);
            else if (run_desk || run_scenario_path.empty())
                text = uavfl::desk_scenario_json(run_seed);
            const uavfl::Scenario sc = uavfl::load_scenario(text);
            const uavfl::AoResult res =
                uavfl::run_scheme(uavfl::scheme_from_name(run_scheme), sc, {});
            std::cout << "scheme: " << run_scheme << "\n"
                      << "outer iterations: " << res.outer_iterations << "\n"
                      << "relaxed objective: " << res.relaxed_objective << " s\n"
                      << "final objective:   " << res.final_objective << " s\n"
                      << "energy audit:      "
                      << (res.energy_audit.feasible ? "pass" : "VIOLATION") << "\n"
                      << "kinematics audit:  "
                      << (res.kinematics_audit.feasible ? "pass" : "VIOLATION") << "\n";
            if (!res.failure_stage.empty())
                std::cout << "failure stage:     " << res.failure_stage << "\n";
            if (!run_out.empty()) {
                write_file(run_out + "/trajectory.csv",
                           uavfl::export_trajectory(res.final_state, sc, 1));
                write_file(run_out + "/breakdown.csv",
                           uavfl::evaluate(sc, res.final_state).to_csv());
                std::ostringstream trace;
                trace << "iteration,objective\n";
                for (std::size_t i = 0; i < res.trace.objectives.size(); ++i)
                    trace << i << ',' << res.trace.objectives[i] << '\n';
                write_file(run_out + "/ao_trace.csv", trace.str());
                std::cout << "traces written to " << run_out << "\n";
            }
            return res.failure_stage.empty() ? 0 : 1;
        }
        if (*exp_cmd) {
            const std::string text = exp_profile == "table"
                                         ? uavfl::table_scenario_json(exp_seed)
                                         : uavfl::desk_scenario_json(exp_seed);
            const std::string canon = uavfl::serialize_scenario(uavfl::load_scenario(text));
            if (exp_out.empty())
                std::cout << canon << '\n';
            else
                write_file(exp_out, canon);
            return 0;
        }
        if (*bounds_cmd) {
            const uavfl::RoundBounds rb =
                uavfl::make_round_bounds(b_l, b_u, b_step, b_weight, b_el, b_eg);
            std::cout << "local rounds lower bound:  " << rb.local_rounds << " (ceil "
                      << std::ceil(rb.local_rounds) << ")\n"
                      << "global rounds lower bound: " << rb.global_rounds << " (ceil "
                      << std::ceil(rb.global_rounds) << ")\n";
            return 0;
        }
        if (*cx_cmd) {
            std::cout << uavfl::complexity_estimate(c_m, c_u, c_n, c_l, c_eps) << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
