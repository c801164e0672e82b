#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "uavfl/ao.hpp"
#include "uavfl/experiment.hpp"
#include "uavfl/rng.hpp"
#include "uavfl/trajectory_sca.hpp"

using namespace uavfl;

TEST_CASE("rate surrogate is exact at the expansion point and one-sided") {
    RandomStream rng(81);
    for (int trial = 0; trial < 20; ++trial) {
        const double delta_ref = rng.uniform(1e4, 2e6);
        const RateSurrogate s = linearize_rate_lb(delta_ref, rng.uniform(1.0, 3.0),
                                                  rng.uniform(0.01, 0.2), 1e-3, 1e6,
                                                  3.98e-21);
        // Taylor exactness at the expansion point.
        CHECK(std::abs(s.value(delta_ref) - s.exact_rate(delta_ref)) <=
              1e-9 * s.exact_rate(delta_ref));
        // Lower bound everywhere else on the physical range.
        for (int k = 0; k < 100; ++k) {
            const double delta = rng.uniform(1e4, 4e6);
            CHECK(s.value(delta) <= s.exact_rate(delta) + 1e-9 * s.exact_rate(delta));
        }
        // Positive gap away from the expansion point.
        CHECK(s.value(2.0 * delta_ref) < s.exact_rate(2.0 * delta_ref));
    }
}

TEST_CASE("rate surrogate gradient matches finite differences") {
    RandomStream rng(82);
    const RateSurrogate s = linearize_rate_lb(5e4, 2.0, 0.1, 1e-3, 1e6, 3.98e-21);
    for (int k = 0; k < 20; ++k) {
        const double delta = rng.uniform(2e4, 2e6);
        const double h = 1e-4 * delta;
        const double fd = (s.value(delta + h) - s.value(delta - h)) / (2 * h);
        CHECK(std::abs(s.derivative(delta) - fd) <=
              1e-5 * std::max(std::abs(fd), 1e-12));
        const double fd2 = (s.value(delta + h) - 2 * s.value(delta) + s.value(delta - h)) /
                           (h * h);
        CHECK(std::abs(s.second_derivative(delta) - fd2) <=
              1e-3 * std::max(std::abs(fd2), 1e-16));
    }
}

TEST_CASE("nonpositive expansion point is rejected") {
    CHECK_THROWS_AS(linearize_rate_lb(0.0, 1.0, 0.1, 1e-3, 1e6, 3.98e-21),
                    std::invalid_argument);
}

TEST_CASE("minimum-speed linearization") {
    const Vec2 q_prev(0, 0), q_curr(10, 0);
    const double v_min = 4.0, t_fl = 2.0;  // required displacement 8 < 10
    const VminConstraint c = linearize_vmin(q_curr, q_prev, v_min, t_fl);
    SUBCASE("holds with the original margin at the iterate") {
        // At the expansion point the cut reduces to (v t)^2 - ||dq_ref||^2.
        CHECK(c.evaluate(q_curr, q_prev) ==
              doctest::Approx((v_min * t_fl) * (v_min * t_fl) - 100.0));
        CHECK(c.evaluate(q_curr, q_prev) < 0.0);
    }
    SUBCASE("orthogonal movement tightens the constraint") {
        const Vec2 q_orth(0, 10);
        CHECK(c.evaluate(q_orth, q_prev) ==
              doctest::Approx((v_min * t_fl) * (v_min * t_fl) + 100.0));
        CHECK(c.evaluate(q_orth, q_prev) > 0.0);  // rejected by the cut
    }
    SUBCASE("points feasible for the cut satisfy the true constraint") {
        RandomStream rng(83);
        for (int k = 0; k < 200; ++k) {
            const Vec2 q(rng.uniform(-20, 20), rng.uniform(-20, 20));
            if (c.evaluate(q, q_prev) <= 0.0) {
                const double speed = (q - q_prev).norm() / t_fl;
                CHECK(speed >= v_min - 1e-12);
            }
        }
    }
}

TEST_CASE("distance-slack linearization") {
    const Vec2 q_ref(100, 50), s_m(80, 40);
    const double h0 = 100.0;
    const DistanceBound b = linearize_distance(q_ref, s_m, h0);
    SUBCASE("exact at the expansion point") {
        CHECK(b.evaluate(q_ref) ==
              doctest::Approx(h0 * h0 + (q_ref - s_m).squaredNorm()));
    }
    SUBCASE("affine bound stays below the true quadratic") {
        RandomStream rng(84);
        for (int k = 0; k < 100; ++k) {
            const Vec2 q(rng.uniform(-500, 500), rng.uniform(-500, 500));
            const double truth = h0 * h0 + (q - s_m).squaredNorm();
            CHECK(b.evaluate(q) <= truth + 1e-9 * truth);
        }
    }
    SUBCASE("gradient matches finite differences") {
        const double h = 1e-4;
        const double fx = (b.evaluate(q_ref + Vec2(h, 0)) - b.evaluate(q_ref - Vec2(h, 0))) /
                          (2 * h);
        const double fy = (b.evaluate(q_ref + Vec2(0, h)) - b.evaluate(q_ref - Vec2(0, h))) /
                          (2 * h);
        CHECK(fx == doctest::Approx(b.gradient.x()).epsilon(1e-5));
        CHECK(fy == doctest::Approx(b.gradient.y()).epsilon(1e-5));
    }
}

TEST_CASE("slack distances sit on the squared distance after a step") {
    const Scenario sc = load_scenario(desk_scenario_json(91, 3, 5, 6));
    AllocationState st = initial_allocation(sc);
    const TrajectoryStepResult step = solve_trajectory_step(sc, st);
    REQUIRE(step.solved);
    const double h2 = sc.uav.altitude * sc.uav.altitude;
    for (int m = 0; m < 3; ++m)
        for (int n = 0; n < 6; ++n) {
            const double truth =
                h2 + (step.iterate.traj[n] - sc.devices[m].position).squaredNorm();
            CHECK(step.iterate.delta[m * 6 + n] <= truth + 1e-6);
            CHECK(step.iterate.delta[m * 6 + n] ==
                  doctest::Approx(truth).epsilon(1e-9));
        }
}

TEST_CASE("a step toward an off-path cluster lowers the true objective") {
    Scenario sc = load_scenario(desk_scenario_json(92, 3, 5, 8));
    for (int m = 0; m < 3; ++m)
        sc.devices[m].position = Vec2(750.0 + 20.0 * m, 250.0 - 15.0 * m);
    AllocationState st = initial_allocation(sc);
    const double before = evaluate(sc, st).objective;
    const TrajectoryStepResult step = solve_trajectory_step(sc, st);
    REQUIRE(step.solved);
    AllocationState moved = st;
    moved.traj = step.iterate.traj;
    const double after = evaluate(sc, moved).objective;
    CHECK(after < before);
    // Waypoints bend toward the cluster.
    const Vec2 centroid(770.0, 235.0);
    double best_before = 1e300, best_after = 1e300;
    for (int n = 0; n < 8; ++n) {
        best_before = std::min(best_before, (st.traj[n] - centroid).norm());
        best_after = std::min(best_after, (moved.traj[n] - centroid).norm());
    }
    CHECK(best_after < best_before);
}

TEST_CASE("sca trace is monotone and endpoints stay pinned") {
    const Scenario sc = load_scenario(desk_scenario_json(93, 4, 6, 8));
    AllocationState st = initial_allocation(sc);
    ScaOptions opt;
    const ScaResult res = run_sca(sc, st, opt);
    REQUIRE(res.objectives.size() >= 2);
    for (std::size_t i = 1; i < res.objectives.size(); ++i)
        CHECK(res.objectives[i] <=
              res.objectives[i - 1] + 1e-9 * std::abs(res.objectives[i - 1]));
    CHECK((st.traj.front() - sc.uav.start).norm() == doctest::Approx(0.0));
    CHECK((st.traj.back() - sc.uav.end).norm() == doctest::Approx(0.0));
}

TEST_CASE("infinite tolerance stops after one inner solve") {
    const Scenario sc = load_scenario(desk_scenario_json(94, 3, 5, 6));
    AllocationState st = initial_allocation(sc);
    ScaOptions opt;
    opt.rel_tol = std::numeric_limits<double>::infinity();
    const ScaResult res = run_sca(sc, st, opt);
    CHECK(res.iterations == 1);
    CHECK(res.converged);
}

TEST_CASE("a fixed point returns unchanged after one no-improvement step") {
    const Scenario sc = load_scenario(desk_scenario_json(95, 3, 5, 6));
    AllocationState st = initial_allocation(sc);
    ScaOptions opt;
    opt.rel_tol = 1e-7;
    opt.max_iterations = 40;
    run_sca(sc, st, opt);  // converge first
    const std::vector<Vec2> fixed = st.traj;
    const ScaResult again = run_sca(sc, st, opt);
    CHECK(again.iterations <= 2);
    for (int n = 0; n < sc.slots; ++n)
        CHECK((st.traj[n] - fixed[n]).norm() <= 1e-3);
}

TEST_CASE("sca fixed point matches a grid search on the tiny instance") {
    // N = 3 with pinned endpoints leaves one free waypoint; one device.
    Scenario sc = load_scenario(desk_scenario_json(96, 1, 2, 3));
    sc.devices[0].position = Vec2(650.0, 350.0);  // off the straight line
    // Loose kinematics so the geometry, not the dynamics, decides.
    sc.uav.v_max = 500.0;
    sc.uav.a_max = 500.0;
    sc.uav.v_min = 0.5;
    AllocationState st = initial_allocation(sc);
    ScaOptions opt;
    opt.rel_tol = 1e-7;
    opt.max_iterations = 60;
    const ScaResult res = run_sca(sc, st, opt);
    REQUIRE(res.objectives.size() >= 2);
    const Vec2 q_sca = st.traj[1];

    // Brute-force lattice over the free waypoint with self-consistent slot
    // durations and a kinematics filter.
    const double lo = 150.0, hi = 850.0;
    const int cells = 50;
    const double cell = (hi - lo) / (cells - 1);
    Vec2 best_q(0, 0);
    double best_obj = 1e300;
    for (int i = 0; i < cells; ++i)
        for (int j = 0; j < cells; ++j) {
            AllocationState cand = st;
            cand.traj[1] = Vec2(lo + cell * i, lo + cell * j);
            const LatencyBreakdown bd = evaluate(sc, cand);
            if (!bd.feasible) continue;
            const FeasibilityReport kin = kinematics_check(
                cand.traj, bd.t_fl, sc.uav.v_min, sc.uav.v_max, sc.uav.a_max);
            if (!kin.feasible) continue;
            if (bd.objective < best_obj) {
                best_obj = bd.objective;
                best_q = cand.traj[1];
            }
        }
    CHECK(std::abs(q_sca.x() - best_q.x()) <= cell + 1e-9);
    CHECK(std::abs(q_sca.y() - best_q.y()) <= cell + 1e-9);
    CHECK(evaluate(sc, st).objective <= best_obj + 1e-6 * best_obj);
}

TEST_CASE("feasibility persists across convexified problems") {
    const Scenario sc = load_scenario(desk_scenario_json(97, 3, 5, 7));
    AllocationState st = initial_allocation(sc);
    for (int it = 0; it < 3; ++it) {
        const TrajectoryStepResult step = solve_trajectory_step(sc, st);
        REQUIRE(step.solved);
        // The accepted iterate satisfies its own expansion's minimum-speed
        // cuts, which is what carries feasibility into the next problem.
        const LatencyBreakdown bd = evaluate(sc, st);
        for (int n = 1; n < sc.slots; ++n) {
            const VminConstraint c = linearize_vmin(st.traj[n], st.traj[n - 1],
                                                    sc.uav.v_min, bd.t_fl[n - 1]);
            CHECK(c.evaluate(st.traj[n], st.traj[n - 1]) <= 1e-9);
        }
        st.traj = step.iterate.traj;
    }
}
