#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "uavfl/ao.hpp"
#include "uavfl/experiment.hpp"
#include "uavfl/rb_allocation.hpp"
#include "uavfl/rng.hpp"
#include "uavfl/scenario.hpp"

using namespace uavfl;

namespace {

Scenario tiny_scenario(std::uint64_t seed, int devices, int rbs, int slots) {
    return load_scenario(desk_scenario_json(seed, devices, rbs, slots));
}

AllocationState fixed_point_state(const Scenario& sc, RandomStream& rng) {
    AllocationState st = initial_allocation(sc);
    // Perturb powers and frequencies so instances differ beyond placement.
    for (int m = 0; m < sc.device_count(); ++m)
        for (int n = 0; n < sc.slots; ++n) {
            st.at_fdev(m, n) = rng.uniform(0.6, 1.0) * sc.devices[m].f_max;
            st.at_pdev(m, n) = rng.uniform(0.4, 1.0) * sc.devices[m].p_max;
            st.at_puav(m, n) = rng.uniform(0.4, 1.0) * sc.uav.p_max;
        }
    return st;
}

}  // namespace

TEST_CASE("forced allocation when devices equal RBs") {
    const Scenario sc = tiny_scenario(3, 1, 1, 3);
    const AllocationState st = initial_allocation(sc);
    const RbSolution sol = solve_relaxed(sc, st);
    const RbLinkData d = collect_rb_link_data(sc, st);
    CHECK(sol.report.converged);
    for (int n = 0; n < sc.slots; ++n) {
        CHECK(sol.alpha_relaxed[n] == doctest::Approx(1.0));
        // Full RB: eta is that device's train plus upload time.
        const double expect =
            d.at(d.t_train, 0, n) + d.at(d.up_bits, 0, n) / d.at(d.up_unit_rate, 0, n);
        CHECK(sol.eta[n] == doctest::Approx(expect).epsilon(1e-9));
    }
    // Closed form reproduces the forced shares at the reported multipliers.
    const auto alpha = closed_form_alpha(sol.multipliers, d);
    for (std::size_t i = 0; i < alpha.size(); ++i)
        CHECK(alpha[i] == doctest::Approx(sol.alpha_relaxed[i]).epsilon(1e-9));
}

TEST_CASE("two identical devices and two RBs split evenly") {
    Scenario sc = tiny_scenario(4, 2, 2, 2);
    sc.devices[1] = sc.devices[0];
    sc.devices[1].id = 1;
    for (int n = 0; n < sc.slots; ++n) {
        sc.samples[1][n] = sc.samples[0][n];
        sc.model_bits[1][n] = sc.model_bits[0][n];
    }
    const AllocationState st = initial_allocation(sc);
    const RbSolution sol = solve_relaxed(sc, st);
    for (int m = 0; m < 2; ++m)
        for (int n = 0; n < 2; ++n) {
            double total = 0;
            for (int u = 0; u < 2; ++u)
                total += sol.alpha_relaxed[(m * 2 + u) * 2 + n];
            CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
        }
}

TEST_CASE("relaxed objective matches the generic full-tensor solve") {
    RandomStream rng(71);
    for (std::uint64_t seed = 100; seed < 103; ++seed) {
        const Scenario sc = tiny_scenario(seed, 2, 3, 2);
        const AllocationState st = fixed_point_state(sc, rng);
        const RbSolution fast = solve_relaxed(sc, st);
        const RbReferenceSolution ref = solve_relaxed_reference(sc, st);
        REQUIRE(fast.report.converged);
        CHECK(fast.relaxed_objective == doctest::Approx(ref.objective).epsilon(1e-5));
        // Relaxation lower-bounds the whole-RB allocation rounded from it.
        RbSolution rounded = fast;
        reconstruct_binary(rounded, sc, 1);
        AllocationState bin = st;
        apply_binary_allocation(rounded, bin);
        CHECK(fast.relaxed_objective <= evaluate(sc, bin).objective * (1.0 + 1e-9));
    }
}

TEST_CASE("closed form matches the generic solve componentwise") {
    RandomStream rng(72);
    for (std::uint64_t seed = 200; seed < 203; ++seed) {
        const Scenario sc = tiny_scenario(seed, 2, 3, 2);
        const AllocationState st = fixed_point_state(sc, rng);
        const RbSolution fast = solve_relaxed(sc, st);
        const RbReferenceSolution ref = solve_relaxed_reference(sc, st);
        const RbLinkData d = collect_rb_link_data(sc, st);
        const auto alpha = closed_form_alpha(fast.multipliers, d);
        REQUIRE(alpha.size() == ref.alpha.size());
        for (std::size_t i = 0; i < alpha.size(); ++i)
            CHECK(std::abs(alpha[i] - ref.alpha[i]) <= 1e-4);
    }
}

TEST_CASE("closed form clip boundaries") {
    RbMultipliers mult;
    mult.devices = 1;
    mult.rbs = 1;
    mult.slots = 1;
    mult.rb_price = {4.0};
    mult.min_share_price = {0.0};
    mult.straggler_weight = {1.0};
    mult.device_energy_price = {0.0};
    mult.uav_energy_price = 0.0;

    RbLinkData d;
    d.devices = 1;
    d.slots = 1;
    d.t_train = {0.0};
    d.e_train = {0.0};
    d.up_bits = {0.0};
    d.dn_bits = {0.0};
    d.up_unit_rate = {1.0};
    d.dn_unit_rate = {1.0};
    d.p_up = {0.0};
    d.p_dn = {0.0};
    d.e_agg = {0.0};

    SUBCASE("zero pressure gives zero share") {
        CHECK(closed_form_alpha(mult, d)[0] == doctest::Approx(0.0));
    }
    SUBCASE("unit ratio clips to one") {
        d.up_bits = {4.0};  // W equals the price difference
        CHECK(closed_form_alpha(mult, d)[0] == doctest::Approx(1.0));
    }
    SUBCASE("nonpositive denominator pins to one") {
        mult.min_share_price = {5.0};
        d.up_bits = {0.1};
        CHECK(closed_form_alpha(mult, d)[0] == doctest::Approx(1.0));
    }
}

TEST_CASE("KKT consistency and complementary slackness at the relaxed optimum") {
    RandomStream rng(73);
    const Scenario sc = tiny_scenario(300, 3, 5, 3);
    const AllocationState st = fixed_point_state(sc, rng);
    const RbSolution sol = solve_relaxed(sc, st);
    const RbLinkData d = collect_rb_link_data(sc, st);
    REQUIRE(sol.report.converged);

    // Stationarity: the closed form reproduces the solver's own shares.
    const auto alpha = closed_form_alpha(sol.multipliers, d);
    for (std::size_t i = 0; i < alpha.size(); ++i)
        CHECK(std::abs(alpha[i] - sol.alpha_relaxed[i]) <= 1e-4);

    const int M = sc.device_count(), U = sc.channel.rb_count, N = sc.slots;
    for (int n = 0; n < N; ++n) {
        for (int u = 0; u < U; ++u) {
            double used = 0;
            for (int m = 0; m < M; ++m) used += sol.alpha_relaxed[(m * U + u) * N + n];
            CHECK(std::abs(sol.multipliers.phi(u, n) * (used - 1.0)) <= 1e-6);
        }
        double mu_sum = 0;
        for (int m = 0; m < M; ++m) {
            double total = 0;
            for (int u = 0; u < U; ++u) total += sol.alpha_relaxed[(m * U + u) * N + n];
            CHECK(std::abs(sol.multipliers.varpi(m, n) * (1.0 - total)) <= 1e-6);
            const double mu = sol.multipliers.mu(m, n);
            CHECK(mu <= 1.0 + 1e-8);
            CHECK(mu >= 0.0);
            mu_sum += mu;
        }
        // Straggler weights live on the unit simplex per slot.
        CHECK(mu_sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("optimal eta equals the brute-force maximum") {
    RandomStream rng(74);
    const Scenario sc = tiny_scenario(400, 4, 7, 3);
    const AllocationState st = fixed_point_state(sc, rng);
    const RbLinkData d = collect_rb_link_data(sc, st);
    std::vector<double> totals(4 * 3);
    for (auto& t : totals) t = rng.uniform(1.0, 1.6);
    const auto eta = optimal_eta(d, totals);
    int bottleneck = 0;
    double worst = 0;
    for (int n = 0; n < 3; ++n) {
        double expect = 0;
        for (int m = 0; m < 4; ++m) {
            const double v = d.at(d.t_train, m, n) +
                             d.at(d.up_bits, m, n) /
                                 (d.at(d.up_unit_rate, m, n) * totals[m * 3 + n]);
            if (n == 0 && v > worst) {
                worst = v;
                bottleneck = m;
            }
            expect = std::max(expect, v);
        }
        CHECK(eta[n] == doctest::Approx(expect).epsilon(1e-12));
    }
    // Extra capacity for the non-bottleneck devices leaves eta unchanged.
    auto totals2 = totals;
    for (int m = 0; m < 4; ++m)
        if (m != bottleneck) totals2[m * 3 + 0] += 0.5;
    CHECK(optimal_eta(d, totals2)[0] == doctest::Approx(eta[0]));
}

TEST_CASE("single-device eta is its own train plus upload time") {
    RandomStream rng(76);
    const Scenario sc = tiny_scenario(401, 1, 2, 2);
    const AllocationState st = fixed_point_state(sc, rng);
    const RbLinkData d = collect_rb_link_data(sc, st);
    const std::vector<double> totals{1.3, 1.7};
    const auto eta = optimal_eta(d, totals);
    for (int n = 0; n < 2; ++n) {
        const double expect = d.at(d.t_train, 0, n) +
                              d.at(d.up_bits, 0, n) /
                                  (d.at(d.up_unit_rate, 0, n) * totals[n]);
        CHECK(eta[n] == doctest::Approx(expect));
    }
}

TEST_CASE("sub-RB rounding") {
    const Scenario sc = tiny_scenario(500, 2, 4, 2);
    RbSolution sol;
    sol.alpha_relaxed.assign(2 * 4 * 2, 0.0);
    // Same totals in both slots; checks read slot 0.
    auto set_totals = [&](double a0, double a1) {
        for (int u = 0; u < 4; ++u)
            for (int n = 0; n < 2; ++n) {
                sol.alpha_relaxed[(0 * 4 + u) * 2 + n] = a0 / 4.0;
                sol.alpha_relaxed[(1 * 4 + u) * 2 + n] = a1 / 4.0;
            }
    };
    SUBCASE("a 0.26-RB total rounds to 3 sub-RBs at chi ten") {
        set_totals(0.26, 0.25);  // below the minimum share; exercises pure rounding
        reconstruct_binary(sol, sc, 10);
        CHECK(sol.sub_rb_counts[0] == 3);
        CHECK_FALSE(sol.trimmed);
    }
    SUBCASE("nearest-integer demand at chi ten") {
        set_totals(2.6, 1.0);
        reconstruct_binary(sol, sc, 10);
        CHECK(sol.sub_rb_counts[0] == 26);
        CHECK(sol.sub_rb_counts[2] == 10);  // device 1, slot 0
    }
    SUBCASE("integer shares are a fixed point") {
        for (int u = 0; u < 4; ++u)
            for (int n = 0; n < 2; ++n) {
                sol.alpha_relaxed[(0 * 4 + u) * 2 + n] = (u < 3) ? 1.0 : 0.0;
                sol.alpha_relaxed[(1 * 4 + u) * 2 + n] = (u == 3) ? 1.0 : 0.0;
            }
        reconstruct_binary(sol, sc, 5);
        CHECK(sol.sub_rb_counts[0] == 15);
        CHECK(sol.sub_rb_counts[2] == 5);
        AllocationState st = AllocationState::sized(2, 4, 2);
        apply_binary_allocation(sol, st);
        CHECK(st.rb_total(0, 0) == doctest::Approx(3.0));
        CHECK(st.rb_total(1, 0) == doctest::Approx(1.0));
    }
    SUBCASE("over-demand triggers largest-remainder trimming") {
        // Totals 2.55 + 1.55 round to 26 + 16 = 42 sub-RBs on a 40-cell grid.
        set_totals(2.55, 1.55);
        reconstruct_binary(sol, sc, 10);
        CHECK(sol.trimmed);
        CHECK(sol.sub_rb_counts[0] + sol.sub_rb_counts[2] <= 40);
        CHECK(sol.sub_rb_counts[0] >= 1);
        CHECK(sol.sub_rb_counts[2] >= 1);
    }
    SUBCASE("no sub-RB is double-assigned") {
        set_totals(2.3, 1.2);
        reconstruct_binary(sol, sc, 7);
        std::vector<int> seen(2, 0);
        for (int owner : sol.sub_rb_owner)
            if (owner >= 0) ++seen[owner];
        CHECK(seen[0] == sol.sub_rb_counts[0] + sol.sub_rb_counts[1]);
        CHECK(seen[1] == sol.sub_rb_counts[2] + sol.sub_rb_counts[3]);
    }
}

TEST_CASE("binary objective approaches the relaxed bound as chi grows") {
    // The full 50-instance statistic runs in the acceptance suite; here a
    // coarse-to-fine endpoint comparison on ten medium instances.
    RandomStream rng(75);
    int improved = 0;
    for (std::uint64_t seed = 600; seed < 610; ++seed) {
        const Scenario sc = tiny_scenario(seed, 5, 8, 10);
        const AllocationState st = fixed_point_state(sc, rng);
        RbSolution sol = solve_relaxed(sc, st);
        std::vector<double> ratio;
        for (int chi : {2, 20}) {
            reconstruct_binary(sol, sc, chi);
            AllocationState bin = st;
            apply_binary_allocation(sol, bin);
            const double r = evaluate(sc, bin).objective / sol.relaxed_objective;
            CHECK(r >= 1.0 - 1e-9);
            ratio.push_back(r);
        }
        CHECK(ratio[1] <= 1.05);
        if (ratio[1] <= ratio[0] + 1e-12) ++improved;
    }
    CHECK(improved >= 9);
}

TEST_CASE("thresholding reconstruction") {
    const Scenario sc = tiny_scenario(700, 2, 4, 2);
    RbSolution sol;
    sol.alpha_relaxed.assign(2 * 4 * 2, 0.0);
    auto set_totals = [&](double a0, double a1) {
        for (int u = 0; u < 4; ++u)
            for (int n = 0; n < 2; ++n) {
                sol.alpha_relaxed[(0 * 4 + u) * 2 + n] = a0 / 4.0;
                sol.alpha_relaxed[(1 * 4 + u) * 2 + n] = a1 / 4.0;
            }
    };
    SUBCASE("delta one half") {
        // Laydown: device 0 holds [0, 2.6), device 1 holds [2.6, 3.8).
        set_totals(2.6, 1.2);
        const ThresholdedAllocation thr = threshold_binarize(sol, sc, 0.5);
        // Device 0 keeps RBs 0-1 (full) and RB 2 (0.6); device 1 keeps RB 3
        // (0.8); its 0.4 tail of RB 2 falls below delta.
        CHECK(thr.rb_counts[0] == 3);
        CHECK(thr.rb_counts[2] == 1);  // device 1, slot 0
    }
    SUBCASE("delta zero keeps every touched cell and repairs conflicts") {
        set_totals(2.6, 1.2);
        const ThresholdedAllocation thr = threshold_binarize(sol, sc, 0.0);
        CHECK(thr.had_conflicts);  // RB 2 is shared 0.6 / 0.4
        CHECK(thr.rb_counts[0] + thr.rb_counts[2] <= 4);
        CHECK(thr.rb_counts[0] >= 1);
        CHECK(thr.rb_counts[2] >= 1);
    }
    SUBCASE("a device losing every cell is forced one RB") {
        set_totals(3.7, 0.3);
        const ThresholdedAllocation thr = threshold_binarize(sol, sc, 0.5);
        CHECK(thr.forced_assignment);
        CHECK(thr.rb_counts[2] >= 1);
    }
}
