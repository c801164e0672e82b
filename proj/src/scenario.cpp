#include "uavfl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace uavfl {

using json = nlohmann::ordered_json;

double dbm_per_hz_to_linear(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

DatasetState step_dataset(const DatasetState& state, RandomStream& rng) {
    DatasetState next = state;
    const long sensed = rng.poisson(state.sensed_rate);
    const long dropped = rng.poisson(state.dropped_rate);
    next.samples = std::clamp(state.samples + sensed - dropped, state.min_samples,
                              state.max_samples);
    return next;
}

std::vector<Vec2> random_layout(int count, double region, RandomStream& rng) {
    std::vector<Vec2> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double x = region * rng.uniform();
        const double y = region * rng.uniform();
        out.emplace_back(x, y);
    }
    return out;
}

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
    throw std::runtime_error("scenario: field '" + field + "': " + what);
}

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) fail(field, what);
}

double get_num(const json& j, const std::string& key) {
    if (!j.contains(key)) fail(key, "missing");
    if (!j[key].is_number()) fail(key, "not a number");
    return j[key].get<double>();
}

double get_num_or(const json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) fail(key, "not a number");
    return j[key].get<double>();
}

// Accepts either a scalar or a [lo, hi] range; ranges are sampled per draw.
struct NumberOrRange {
    double lo = 0, hi = 0;
    bool is_range = false;
    double draw(RandomStream& rng) const { return is_range ? rng.uniform(lo, hi) : lo; }
};

NumberOrRange get_range(const json& j, const std::string& key) {
    if (!j.contains(key)) fail(key, "missing");
    NumberOrRange r;
    const auto& v = j[key];
    if (v.is_number()) {
        r.lo = r.hi = v.get<double>();
    } else if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
        r.lo = v[0].get<double>();
        r.hi = v[1].get<double>();
        r.is_range = r.hi != r.lo;
        if (r.hi < r.lo) fail(key, "range upper bound below lower bound");
    } else {
        fail(key, "expected number or [lo, hi]");
    }
    return r;
}

}  // namespace

void validate_scenario(const Scenario& sc) {
    const int m_count = sc.device_count();
    require(m_count >= 1, "devices.count", "need at least one device");
    require(sc.slots >= 2, "slots", "need at least two slots");
    require(sc.channel.rb_count >= 1, "channel.rb_count", "need at least one RB");
    require(m_count <= sc.channel.rb_count, "devices.count",
            "M <= U violated: every device needs at least one RB");
    require(sc.channel.ref_gain > 0, "channel.ref_gain", "must be positive");
    require(sc.channel.rb_bandwidth > 0, "channel.rb_bandwidth", "must be positive");
    require(sc.channel.noise_uplink > 0, "channel.noise", "must be positive");
    require(sc.channel.noise_downlink > 0, "channel.device_noise", "must be positive");
    require(sc.region_size >= 0, "region_size", "must be nonnegative");

    require(sc.uav.altitude > 0, "uav.altitude", "must be positive");
    require(sc.uav.v_min > 0 && sc.uav.v_min < sc.uav.v_max, "uav.v_min",
            "need 0 < v_min < v_max");
    require(sc.uav.a_max > 0, "uav.a_max", "must be positive");
    require(sc.uav.f_max > 0, "uav.f_max", "must be positive");
    require(sc.uav.capacitance > 0, "uav.capacitance", "must be positive");
    require(sc.uav.energy_budget > 0, "uav.energy_budget", "must be positive");
    require(sc.uav.p_max > 0, "uav.p_max", "must be positive");
    require(sc.uav.cycles_per_bit > 0, "uav.cycles_per_bit", "must be positive");

    for (const auto& d : sc.devices) {
        const std::string tag = "devices[" + std::to_string(d.id) + "]";
        require(d.cycles_per_bit > 0, tag + ".cycles_per_bit", "must be positive");
        require(d.capacitance > 0, tag + ".capacitance", "must be positive");
        require(d.sample_bits > 0, tag + ".sample_bits", "must be positive");
        require(d.local_rounds >= 0, tag + ".local_rounds", "must be nonnegative");
        require(d.energy_budget > 0, tag + ".energy_budget", "must be positive");
        require(d.f_max > 0, tag + ".f_max", "must be positive");
        require(d.p_max > 0, tag + ".p_max", "must be positive");
        require(d.position.x() >= 0 && d.position.x() <= sc.region_size &&
                    d.position.y() >= 0 && d.position.y() <= sc.region_size,
                tag + ".position", "outside region");
    }

    require(sc.samples.size() == static_cast<std::size_t>(m_count), "samples", "bad shape");
    require(sc.model_bits.size() == static_cast<std::size_t>(m_count), "model_bits",
            "bad shape");
    require(sc.agg_bits.size() == static_cast<std::size_t>(sc.slots), "agg_bits",
            "bad shape");
    for (int m = 0; m < m_count; ++m) {
        require(sc.samples[m].size() == static_cast<std::size_t>(sc.slots), "samples",
                "bad shape");
        require(sc.model_bits[m].size() == static_cast<std::size_t>(sc.slots),
                "model_bits", "bad shape");
        for (int n = 0; n < sc.slots; ++n) {
            require(sc.samples[m][n] > 0, "samples", "must be positive");
            require(sc.model_bits[m][n] > 0, "model_bits", "must be positive");
        }
    }
    for (int n = 0; n < sc.slots; ++n)
        require(sc.agg_bits[n] > 0, "agg_bits", "must be positive");
}

Scenario load_scenario(const std::string& config_text) {
    json j;
    try {
        j = json::parse(config_text);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("scenario: parse failure: ") + e.what());
    }

    Scenario sc;
    sc.slots = static_cast<int>(get_num(j, "slots"));
    sc.seed = static_cast<std::uint64_t>(get_num_or(j, "seed", 0));
    sc.region_size = get_num(j, "region_size");

    if (!j.contains("channel")) fail("channel", "missing");
    {
        const auto& c = j["channel"];
        sc.channel.ref_gain = get_num(c, "ref_gain");
        sc.channel.rb_bandwidth = get_num(c, "rb_bandwidth");
        sc.channel.rb_count = static_cast<int>(get_num(c, "rb_count"));
        if (c.contains("noise_w_per_hz"))
            sc.channel.noise_uplink = get_num(c, "noise_w_per_hz");
        else
            sc.channel.noise_uplink = dbm_per_hz_to_linear(get_num(c, "noise_dbm_per_hz"));
        if (c.contains("device_noise_w_per_hz"))
            sc.channel.noise_downlink = get_num(c, "device_noise_w_per_hz");
        else if (c.contains("device_noise_dbm_per_hz"))
            sc.channel.noise_downlink =
                dbm_per_hz_to_linear(get_num(c, "device_noise_dbm_per_hz"));
        else
            sc.channel.noise_downlink = sc.channel.noise_uplink;
    }

    if (!j.contains("uav")) fail("uav", "missing");
    {
        const auto& u = j["uav"];
        auto get_vec2 = [&](const std::string& key) {
            if (!u.contains(key) || !u[key].is_array() || u[key].size() != 2)
                fail("uav." + key, "expected [x, y]");
            return Vec2(u[key][0].get<double>(), u[key][1].get<double>());
        };
        sc.uav.start = get_vec2("start");
        sc.uav.end = get_vec2("end");
        sc.uav.altitude = get_num(u, "altitude");
        sc.uav.v_min = get_num(u, "v_min");
        sc.uav.v_max = get_num(u, "v_max");
        sc.uav.a_max = get_num(u, "a_max");
        sc.uav.f_max = get_num(u, "f_max");
        sc.uav.capacitance = get_num(u, "capacitance");
        sc.uav.energy_budget = get_num(u, "energy_budget");
        sc.uav.p_max = get_num(u, "p_max");
        sc.uav.cycles_per_bit = get_num(u, "cycles_per_bit");
    }

    if (!j.contains("dataset")) fail("dataset", "missing");
    DatasetState ds0;
    double sample_bits = 0;
    {
        const auto& d = j["dataset"];
        ds0.samples = static_cast<long>(get_num(d, "initial_samples"));
        ds0.min_samples = static_cast<long>(get_num(d, "min_samples"));
        ds0.max_samples = static_cast<long>(get_num(d, "max_samples"));
        ds0.sensed_rate = get_num(d, "sensed_rate");
        ds0.dropped_rate = get_num(d, "dropped_rate");
        sample_bits = get_num(d, "sample_bits");
        require(ds0.min_samples > 0, "dataset.min_samples", "must be positive");
        require(ds0.min_samples <= ds0.max_samples, "dataset.min_samples",
                "must not exceed max_samples");
        require(ds0.samples >= ds0.min_samples && ds0.samples <= ds0.max_samples,
                "dataset.initial_samples", "outside [min_samples, max_samples]");
        require(ds0.sensed_rate >= 0 && ds0.dropped_rate >= 0, "dataset.rates",
                "must be nonnegative");
    }

    if (!j.contains("devices")) fail("devices", "missing");
    const auto& dv = j["devices"];
    const int m_count = static_cast<int>(get_num(dv, "count"));
    require(m_count >= 1, "devices.count", "need at least one device");
    const NumberOrRange model_bits_rng = get_range(dv, "model_bits");
    const NumberOrRange f_max_rng = get_range(dv, "f_max");
    const NumberOrRange p_max_rng = get_range(dv, "p_max");

    RandomStream root(sc.seed);
    RandomStream layout_rng = root.fork(1);
    RandomStream spec_rng = root.fork(2);

    std::vector<Vec2> positions;
    if (dv.contains("positions")) {
        for (const auto& p : dv["positions"]) {
            if (!p.is_array() || p.size() != 2) fail("devices.positions", "expected [x, y]");
            positions.emplace_back(p[0].get<double>(), p[1].get<double>());
        }
        require(static_cast<int>(positions.size()) == m_count, "devices.positions",
                "length must equal count");
    } else {
        positions = random_layout(m_count, sc.region_size, layout_rng);
    }

    sc.devices.resize(static_cast<std::size_t>(m_count));
    for (int m = 0; m < m_count; ++m) {
        auto& d = sc.devices[static_cast<std::size_t>(m)];
        d.id = m;
        d.position = positions[static_cast<std::size_t>(m)];
        d.cycles_per_bit = get_num(dv, "cycles_per_bit");
        d.capacitance = get_num(dv, "capacitance");
        d.sample_bits = sample_bits;
        d.local_rounds = static_cast<int>(get_num(dv, "local_rounds"));
        d.energy_budget = get_num(dv, "energy_budget");
        d.f_max = f_max_rng.draw(spec_rng);
        d.p_max = p_max_rng.draw(spec_rng);
    }

    // Per-slot realizations: sample counts evolve with the Poisson dynamics,
    // local update sizes are drawn per slot from their configured range.
    sc.samples.assign(static_cast<std::size_t>(m_count), {});
    sc.model_bits.assign(static_cast<std::size_t>(m_count), {});
    for (int m = 0; m < m_count; ++m) {
        RandomStream dev_rng = root.fork(100 + static_cast<std::uint64_t>(m));
        DatasetState ds = ds0;
        auto& row_s = sc.samples[static_cast<std::size_t>(m)];
        auto& row_d = sc.model_bits[static_cast<std::size_t>(m)];
        row_s.reserve(static_cast<std::size_t>(sc.slots));
        row_d.reserve(static_cast<std::size_t>(sc.slots));
        for (int n = 0; n < sc.slots; ++n) {
            if (n > 0) ds = step_dataset(ds, dev_rng);
            row_s.push_back(ds.samples);
            row_d.push_back(model_bits_rng.draw(dev_rng));
        }
    }

    // The global update size defaults to the per-slot mean of the local
    // update sizes; a fixed number can be given instead.
    sc.agg_bits.assign(static_cast<std::size_t>(sc.slots), 0.0);
    const bool agg_is_mean =
        !j["uav"].contains("agg_model_bits") || j["uav"]["agg_model_bits"].is_string();
    for (int n = 0; n < sc.slots; ++n) {
        if (agg_is_mean) {
            double s = 0;
            for (int m = 0; m < m_count; ++m)
                s += sc.model_bits[static_cast<std::size_t>(m)][static_cast<std::size_t>(n)];
            sc.agg_bits[static_cast<std::size_t>(n)] = s / m_count;
        } else {
            sc.agg_bits[static_cast<std::size_t>(n)] = get_num(j["uav"], "agg_model_bits");
        }
    }

    validate_scenario(sc);
    return sc;
}

std::string serialize_scenario(const Scenario& sc) {
    json j;
    j["slots"] = sc.slots;
    j["seed"] = sc.seed;
    j["region_size"] = sc.region_size;
    j["channel"] = {{"ref_gain", sc.channel.ref_gain},
                    {"rb_bandwidth", sc.channel.rb_bandwidth},
                    {"rb_count", sc.channel.rb_count},
                    {"noise_w_per_hz", sc.channel.noise_uplink},
                    {"device_noise_w_per_hz", sc.channel.noise_downlink}};
    j["uav"] = {{"start", {sc.uav.start.x(), sc.uav.start.y()}},
                {"end", {sc.uav.end.x(), sc.uav.end.y()}},
                {"altitude", sc.uav.altitude},
                {"v_min", sc.uav.v_min},
                {"v_max", sc.uav.v_max},
                {"a_max", sc.uav.a_max},
                {"f_max", sc.uav.f_max},
                {"capacitance", sc.uav.capacitance},
                {"energy_budget", sc.uav.energy_budget},
                {"p_max", sc.uav.p_max},
                {"cycles_per_bit", sc.uav.cycles_per_bit}};
    j["devices"] = json::array();
    for (const auto& d : sc.devices) {
        j["devices"].push_back({{"id", d.id},
                                {"position", {d.position.x(), d.position.y()}},
                                {"cycles_per_bit", d.cycles_per_bit},
                                {"capacitance", d.capacitance},
                                {"sample_bits", d.sample_bits},
                                {"local_rounds", d.local_rounds},
                                {"energy_budget", d.energy_budget},
                                {"f_max", d.f_max},
                                {"p_max", d.p_max}});
    }
    j["samples"] = sc.samples;
    j["model_bits"] = sc.model_bits;
    j["agg_bits"] = sc.agg_bits;
    return j.dump(2);
}

}  // namespace uavfl
