#pragma once

// Scenario configuration: strict JSON parsing into typed settings. Every
// object is checked for unknown keys; errors name the JSON path of the
// offending field.

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dimensions.hpp"
#include "errors.hpp"
#include "performance.hpp"
#include "simulator.hpp"

namespace mdri {

inline constexpr int kSchemaVersion = 1;

/// Cyber aspect as written in a config: counts may be left for derivation from events.
struct CyberAspectSpec {
    std::string name;
    double weight = 0.0;
    std::optional<int> compromised;
    std::optional<int> scope;
};

struct CyberSpec {
    std::optional<int> scope; ///< default scope for every aspect; number of PV plants if absent
    std::vector<CyberAspectSpec> aspects;
};

struct SimulationSpec {
    sim::GridModel model;
    double horizon = 15.0;
    double dt = 0.01;
};

struct ScenarioConfig {
    std::string label;
    std::filesystem::path base_dir; ///< directory relative paths resolve against
    std::optional<std::filesystem::path> trajectory_path;
    std::optional<SimulationSpec> simulation;
    std::vector<sim::AttackEvent> events;
    PerformanceParams performance;
    MarkerRules markers;
    SegmentationParams segmentation;
    OperationalThresholds operational;
    CyberSpec cyber;
    ClimaticAssessment climatic;
    RegulatoryAssessment regulatory;
    std::optional<double> pv_lost;  ///< [MW] override
    std::optional<double> pv_total; ///< [MW] override
};

namespace config_detail {

/// Reads one JSON object, recording which keys were consumed.
class Reader {
  public:
    Reader(const nlohmann::json &obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) {
            throw ConfigError(path_ + ": expected an object");
        }
    }

    const std::string &path() const noexcept { return path_; }
    std::string at(const std::string &key) const { return path_ + "." + key; }

    bool has(const std::string &key) const { return obj_.contains(key); }

    const nlohmann::json &raw(const std::string &key) {
        seen_.insert(key);
        if (!obj_.contains(key)) {
            throw ConfigError(at(key) + ": required field missing");
        }
        return obj_.at(key);
    }

    double number(const std::string &key) {
        const auto &v = raw(key);
        if (!v.is_number()) {
            throw ConfigError(at(key) + ": expected a number");
        }
        return v.get<double>();
    }

    double number(const std::string &key, double fallback) { return has(key) ? number(key) : fallback; }

    std::optional<double> optional_number(const std::string &key) {
        if (!has(key)) {
            return std::nullopt;
        }
        return number(key);
    }

    int integer(const std::string &key) {
        const auto &v = raw(key);
        if (!v.is_number_integer()) {
            throw ConfigError(at(key) + ": expected an integer");
        }
        return v.get<int>();
    }

    std::optional<int> optional_integer(const std::string &key) {
        if (!has(key)) {
            return std::nullopt;
        }
        return integer(key);
    }

    std::string string(const std::string &key) {
        const auto &v = raw(key);
        if (!v.is_string()) {
            throw ConfigError(at(key) + ": expected a string");
        }
        return v.get<std::string>();
    }

    std::string string(const std::string &key, const std::string &fallback) {
        return has(key) ? string(key) : fallback;
    }

    std::optional<std::string> optional_string(const std::string &key) {
        if (!has(key)) {
            return std::nullopt;
        }
        return string(key);
    }

    bool boolean(const std::string &key) {
        const auto &v = raw(key);
        if (!v.is_boolean()) {
            throw ConfigError(at(key) + ": expected true or false");
        }
        return v.get<bool>();
    }

    const nlohmann::json &array(const std::string &key) {
        const auto &v = raw(key);
        if (!v.is_array()) {
            throw ConfigError(at(key) + ": expected an array");
        }
        return v;
    }

    Reader object(const std::string &key) { return Reader(raw(key), at(key)); }

    /// Rejects every key that was never asked for.
    void finish() const {
        for (const auto &[key, value] : obj_.items()) {
            if (!seen_.count(key)) {
                throw ConfigError(at(key) + ": unknown field");
            }
        }
    }

  private:
    const nlohmann::json &obj_;
    std::string path_;
    std::set<std::string> seen_;
};

inline std::string index_path(const std::string &base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

inline PerformanceParams parse_performance(Reader r) {
    PerformanceParams p;
    p.w_f = r.number("w_f", p.w_f);
    p.w_s = r.number("w_s", p.w_s);
    p.f_nom = r.number("f_nom", p.f_nom);
    p.f_crit = r.number("f_crit", p.f_crit);
    p.spread_coh = r.number("spread_coh", p.spread_coh);
    p.horizon = r.number("horizon", p.horizon);
    p.t0 = r.number("t0", p.t0);
    p.phi0_window = r.number("phi0_window", p.phi0_window);
    r.finish();
    try {
        p.validate();
    } catch (const Error &e) {
        throw ConfigError(r.path() + ": " + e.what());
    }
    return p;
}

inline MarkerRules parse_markers(Reader r) {
    MarkerRules m;
    const auto rule = r.string("rule", "spread_sustained");
    if (rule == "spread_sustained") {
        m.collapse.kind = CollapseRule::Kind::SpreadSustained;
    } else if (rule == "phi_floor") {
        m.collapse.kind = CollapseRule::Kind::PhiFloor;
    } else if (rule == "no_recovery") {
        m.collapse.kind = CollapseRule::Kind::NoRecovery;
    } else {
        throw ConfigError(r.at("rule") + ": expected spread_sustained, phi_floor or no_recovery");
    }
    m.collapse.spread_crit = r.number("spread_crit", m.collapse.spread_crit);
    m.collapse.dwell = r.number("dwell", m.collapse.dwell);
    m.collapse.phi_floor = r.number("phi_floor", m.collapse.phi_floor);
    m.recovery_tolerance = r.number("recovery_tolerance", m.recovery_tolerance);
    r.finish();
    try {
        m.collapse.validate();
    } catch (const Error &e) {
        throw ConfigError(r.path() + ": " + e.what());
    }
    if (!(m.recovery_tolerance >= 0.0 && m.recovery_tolerance < 1.0)) {
        throw ConfigError(r.at("recovery_tolerance") + ": must lie in [0, 1)");
    }
    return m;
}

inline SegmentationParams parse_segmentation(Reader r) {
    SegmentationParams s;
    s.absorption_tolerance = r.number("absorption_tolerance", s.absorption_tolerance);
    s.slope_threshold = r.number("slope_threshold", s.slope_threshold);
    s.nadir_band = r.number("nadir_band", s.nadir_band);
    r.finish();
    if (!(s.absorption_tolerance > 0.0) || !(s.slope_threshold > 0.0) || !(s.nadir_band >= 0.0 && s.nadir_band <= 1.0)) {
        throw ConfigError(r.path() + ": tolerances must be positive and nadir_band in [0,1]");
    }
    return s;
}

inline OperationalThresholds parse_operational(Reader r) {
    OperationalThresholds th;
    th.rocof_crit = r.number("rocof_crit", th.rocof_crit);
    th.delta_phi_crit = r.number("delta_phi_crit", th.delta_phi_crit);
    th.spread_crit = r.number("spread_crit", th.spread_crit);
    th.rocof_window = r.number("rocof_window", th.rocof_window);
    r.finish();
    try {
        th.validate();
    } catch (const Error &e) {
        throw ConfigError(r.path() + ": " + e.what());
    }
    return th;
}

inline CyberSpec parse_cyber(Reader r) {
    CyberSpec c;
    c.scope = r.optional_integer("scope");
    const auto &list = r.array("aspects");
    for (std::size_t i = 0; i < list.size(); ++i) {
        Reader a(list[i], index_path(r.at("aspects"), i));
        CyberAspectSpec spec;
        spec.name = a.string("name");
        static const std::set<std::string> known = {"observability", "controllability", "integrity", "availability"};
        if (!known.count(spec.name)) {
            throw ConfigError(a.at("name") + ": expected observability, controllability, integrity or availability");
        }
        spec.weight = a.number("weight");
        spec.compromised = a.optional_integer("compromised");
        spec.scope = a.optional_integer("scope");
        a.finish();
        c.aspects.push_back(std::move(spec));
    }
    r.finish();
    return c;
}

inline ClimaticAssessment parse_climatic(Reader r) {
    ClimaticAssessment c;
    const auto &list = r.array("stressors");
    for (std::size_t i = 0; i < list.size(); ++i) {
        Reader s(list[i], index_path(r.at("stressors"), i));
        ClimaticStressor x;
        x.name = s.string("name");
        x.weight = s.number("weight");
        x.intensity = s.number("intensity");
        s.finish();
        c.stressors.push_back(std::move(x));
    }
    r.finish();
    return c;
}

inline RegulatoryAssessment parse_regulatory(Reader r) {
    RegulatoryAssessment a;
    const auto &list = r.array("controls");
    for (std::size_t i = 0; i < list.size(); ++i) {
        Reader c(list[i], index_path(r.at("controls"), i));
        RegulatoryControl x;
        x.category = c.string("category");
        x.weakness_present = c.boolean("weakness");
        c.finish();
        a.controls.push_back(std::move(x));
    }
    r.finish();
    return a;
}

inline sim::AttackEvent::Kind parse_event_kind(const std::string &text, const std::string &where) {
    using K = sim::AttackEvent::Kind;
    if (text == "pv_trip") return K::PvTrip;
    if (text == "pv_power_ref") return K::PvPowerRef;
    if (text == "load_step") return K::LoadStep;
    if (text == "comm_loss") return K::CommLoss;
    throw ConfigError(where + ": expected pv_trip, pv_power_ref, load_step or comm_loss");
}

inline std::vector<sim::AttackEvent> parse_events(const nlohmann::json &list, const std::string &path) {
    if (!list.is_array()) {
        throw ConfigError(path + ": expected an array");
    }
    std::vector<sim::AttackEvent> out;
    for (std::size_t i = 0; i < list.size(); ++i) {
        Reader e(list[i], index_path(path, i));
        sim::AttackEvent ev;
        ev.kind = parse_event_kind(e.string("kind"), e.at("kind"));
        ev.target = e.string("target", "system");
        ev.time = e.number("time");
        ev.magnitude = e.number("magnitude", 0.0);
        e.finish();
        if (!(ev.time >= 0.0)) {
            throw ConfigError(e.at("time") + ": must be non-negative");
        }
        out.push_back(std::move(ev));
    }
    return out;
}

inline sim::GridModel parse_grid_model(Reader r) {
    sim::GridModel m;
    m.f_nom = r.number("f_nom", m.f_nom);
    m.total_load = r.number("total_load");
    m.agc_gain = r.number("agc_gain", 0.0);
    if (r.has("output_bias")) {
        auto b = r.object("output_bias");
        m.bias.frequency = b.number("frequency_hz", 0.0);
        m.bias.spread = b.number("spread_hz", 0.0);
        b.finish();
    }
    const auto &gens = r.array("generators");
    for (std::size_t i = 0; i < gens.size(); ++i) {
        Reader g(gens[i], index_path(r.at("generators"), i));
        sim::Generator x;
        x.name = g.string("name");
        x.inertia = g.number("inertia");
        x.damping = g.number("damping", x.damping);
        if (g.has("droop") && g.raw("droop").is_null()) {
            x.droop.reset();
        } else {
            x.droop = g.number("droop", *x.droop);
        }
        x.governor_tc = g.number("governor_tc", x.governor_tc);
        x.p_m0 = g.number("p_m0");
        x.rating = g.number("rating");
        x.load = g.optional_number("load");
        x.area = g.optional_string("area");
        g.finish();
        m.generators.push_back(std::move(x));
    }
    if (r.has("pv_plants")) {
        const auto &pvs = r.array("pv_plants");
        for (std::size_t j = 0; j < pvs.size(); ++j) {
            Reader p(pvs[j], index_path(r.at("pv_plants"), j));
            sim::PvPlant x;
            x.name = p.string("name");
            x.bus = p.string("bus");
            x.rating = p.number("rating");
            x.output = p.number("output", x.rating);
            p.finish();
            m.pv_plants.push_back(std::move(x));
        }
    }
    const auto &coupling = r.raw("coupling");
    if (coupling.is_number()) {
        m.coupling = sim::GridModel::uniform_coupling(m.generators.size(), coupling.get<double>());
    } else if (coupling.is_array()) {
        for (const auto &row : coupling) {
            if (!row.is_array()) {
                throw ConfigError(r.at("coupling") + ": matrix rows must be arrays");
            }
            std::vector<double> values;
            for (const auto &v : row) {
                if (!v.is_number()) {
                    throw ConfigError(r.at("coupling") + ": matrix entries must be numbers");
                }
                values.push_back(v.get<double>());
            }
            m.coupling.push_back(std::move(values));
        }
    } else if (coupling.is_object()) {
        Reader c(coupling, r.at("coupling"));
        const double intra = c.number("intra_area");
        const double inter = c.number("inter_area");
        c.finish();
        m.coupling = sim::GridModel::area_coupling(m.generators, intra, inter);
    } else {
        throw ConfigError(r.at("coupling") + ": expected a number, a matrix or {intra_area, inter_area}");
    }
    r.finish();
    try {
        m.validate();
    } catch (const Error &e) {
        throw ConfigError(r.path() + ": " + e.what());
    }
    return m;
}

} // namespace config_detail

/// Parses a scenario document. `base_dir` anchors relative trajectory paths.
inline ScenarioConfig parse_scenario_config(const nlohmann::json &doc, const std::filesystem::path &base_dir = {}) {
    using config_detail::Reader;
    Reader r(doc, "$");
    const int schema = r.integer("schema");
    if (schema != kSchemaVersion) {
        throw ConfigError(r.at("schema") + ": unsupported schema version " + std::to_string(schema));
    }
    ScenarioConfig cfg;
    cfg.base_dir = base_dir;
    cfg.label = r.string("label");

    const bool has_path = r.has("trajectory_path");
    const bool has_model = r.has("grid_model");
    if (has_path == has_model) {
        throw ConfigError("$: exactly one of trajectory_path or grid_model is required");
    }
    if (has_path) {
        cfg.trajectory_path = r.string("trajectory_path");
        if (r.has("simulation")) {
            throw ConfigError(r.at("simulation") + ": only valid together with grid_model");
        }
    } else {
        SimulationSpec spec;
        spec.model = config_detail::parse_grid_model(r.object("grid_model"));
        if (r.has("simulation")) {
            auto s = r.object("simulation");
            spec.horizon = s.number("horizon", spec.horizon);
            spec.dt = s.number("dt", spec.dt);
            s.finish();
            if (!(spec.dt > 0.0 && spec.dt <= 0.05) || !(spec.horizon > 0.0)) {
                throw ConfigError(r.at("simulation") + ": dt must lie in (0, 0.05] and horizon be positive");
            }
        }
        cfg.simulation = std::move(spec);
    }
    if (r.has("events")) {
        cfg.events = config_detail::parse_events(r.raw("events"), r.at("events"));
    }
    if (cfg.simulation) {
        try {
            sim::validate_events(cfg.simulation->model, cfg.events);
        } catch (const Error &e) {
            throw ConfigError(r.at("events") + ": " + e.what());
        }
    }

    auto section = [&](const char *key, auto parse, auto &target) {
        if (r.has(key)) {
            target = parse(r.object(key));
        }
    };
    section("performance", config_detail::parse_performance, cfg.performance);
    section("markers", config_detail::parse_markers, cfg.markers);
    section("segmentation", config_detail::parse_segmentation, cfg.segmentation);
    section("operational", config_detail::parse_operational, cfg.operational);
    cfg.cyber = config_detail::parse_cyber(r.object("cyber"));
    section("climatic", config_detail::parse_climatic, cfg.climatic);
    cfg.regulatory = config_detail::parse_regulatory(r.object("regulatory"));
    cfg.pv_lost = r.optional_number("pv_lost");
    cfg.pv_total = r.optional_number("pv_total");
    r.finish();
    if (cfg.pv_lost && !(*cfg.pv_lost >= 0.0)) {
        throw ConfigError(r.at("pv_lost") + ": must be non-negative");
    }
    if (cfg.pv_total && !(*cfg.pv_total > 0.0)) {
        throw ConfigError(r.at("pv_total") + ": must be positive");
    }
    return cfg;
}

inline nlohmann::json read_json_file(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open '" + path.string() + "'");
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

inline ScenarioConfig load_scenario_config(const std::filesystem::path &path) {
    try {
        return parse_scenario_config(read_json_file(path), path.parent_path());
    } catch (const ConfigError &e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

} // namespace mdri
