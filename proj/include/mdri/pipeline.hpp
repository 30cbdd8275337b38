#pragma once

// End-to-end orchestration: trajectory (loaded or simulated) -> performance,
// phases, resilience loss -> sub-indices; and the two-scenario comparison
// that calibrates gamma. Measured metrics can be injected to bypass the
// trajectory stage entirely.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "dimensions.hpp"
#include "errors.hpp"
#include "index.hpp"
#include "numfmt.hpp"
#include "performance.hpp"
#include "simulator.hpp"
#include "timeseries.hpp"

namespace mdri {

/// Scalar measurements the sub-indices are computed from.
struct ScenarioMetrics {
    double r_loss = 0.0;
    double phi0 = 1.0;
    double phi_nadir = 1.0;
    double rocof_max = 0.0;  ///< [Hz/s]
    double spread_max = 0.0; ///< [Hz]
    double pv_lost = 0.0;    ///< [MW]
    double pv_total = 0.0;   ///< [MW]
};

/// Externally supplied metrics for one scenario, optionally with published sub-indices.
struct InjectedMetrics {
    ScenarioMetrics metrics;
    std::optional<double> d_phy, d_op, d_cyb, d_clim, d_reg;
};

struct Assessment {
    std::string label;
    ScenarioMetrics metrics;
    SubIndices sub;
    std::optional<Trajectory> trajectory;
    std::optional<PerformanceSeries> series;
    std::optional<PhaseReport> phases;

    ScenarioResult result() const { return {label, metrics.r_loss, metrics.pv_lost, sub}; }
};

// ---------------------------------------------------------------------------

/// Trajectory for a config: read from disk or produced by the simulator.
inline Trajectory scenario_trajectory(const ScenarioConfig &cfg) {
    if (cfg.trajectory_path) {
        auto path = *cfg.trajectory_path;
        if (path.is_relative()) {
            path = cfg.base_dir / path;
        }
        return load_trajectory(path);
    }
    const auto &spec = *cfg.simulation;
    return sim::simulate(spec.model, cfg.events, {spec.horizon, spec.dt, cfg.label});
}

/// PV capacity lost, summed over plants, as the drop from the pre-event output
/// to the lowest output on [t0, end].
inline double pv_lost_from_trajectory(const Trajectory &traj, double t0) {
    const auto &t = traj.time();
    const auto k0 = detail::last_index_at_or_before(t, t0);
    double lost = 0.0;
    for (const auto &pv : traj.pv()) {
        const double before = k0 > 0 ? pv.output[k0 - 1] : pv.output[k0];
        const double lowest = *std::min_element(pv.output.begin() + std::ptrdiff_t(k0), pv.output.end());
        lost += std::max(0.0, before - lowest);
    }
    return lost;
}

/// Number of PV plants in a scenario (the default cyber scope).
inline int pv_plant_count(const ScenarioConfig &cfg, const Trajectory *traj) {
    if (cfg.simulation) {
        return int(cfg.simulation->model.pv_plants.size());
    }
    return traj ? int(traj->pv().size()) : 0;
}

/// Counts distinct plants affected by events, per cyber aspect:
/// observability <- comm_loss, integrity <- pv_power_ref, availability <- pv_trip,
/// controllability <- any of the three.
inline int compromised_from_events(const std::string &aspect, const std::vector<sim::AttackEvent> &events) {
    using K = sim::AttackEvent::Kind;
    std::set<std::string> hit;
    for (const auto &e : events) {
        if (e.target == "system") {
            continue;
        }
        const bool counts = (aspect == "observability" && e.kind == K::CommLoss) ||
                            (aspect == "integrity" && e.kind == K::PvPowerRef) ||
                            (aspect == "availability" && e.kind == K::PvTrip) ||
                            (aspect == "controllability" &&
                             (e.kind == K::CommLoss || e.kind == K::PvPowerRef || e.kind == K::PvTrip));
        if (counts) {
            hit.insert(e.target);
        }
    }
    return int(hit.size());
}

inline CyberAssessment resolve_cyber(const ScenarioConfig &cfg, int plant_count) {
    CyberAssessment out;
    for (const auto &spec : cfg.cyber.aspects) {
        CyberAspect a;
        a.name = spec.name;
        a.weight = spec.weight;
        a.scope = spec.scope.value_or(cfg.cyber.scope.value_or(plant_count));
        a.compromised = spec.compromised.value_or(compromised_from_events(spec.name, cfg.events));
        out.aspects.push_back(std::move(a));
    }
    return out;
}

inline SubIndices sub_indices(const ScenarioConfig &cfg, const ScenarioMetrics &m, int plant_count) {
    SubIndices d;
    d.d_phy = physical_index({m.pv_lost, m.pv_total});
    d.d_op = operational_index(m.phi0, m.phi_nadir, m.rocof_max, m.spread_max, cfg.operational);
    d.d_cyb = cyber_index(resolve_cyber(cfg, plant_count));
    d.d_clim = climatic_index(cfg.climatic);
    d.d_reg = regulatory_index(cfg.regulatory);
    return d;
}

/// Metrics measured on a trajectory: loss over the horizon, baseline and
/// nadir of phi, peak RoCoF of the COI frequency and peak spread after t0.
inline ScenarioMetrics measure(const ScenarioConfig &cfg, const Trajectory &traj, const PerformanceSeries &series) {
    ScenarioMetrics m;
    m.r_loss = resilience_loss(series, cfg.performance);
    m.phi0 = series.phi0;
    m.phi_nadir = series.nadir_value;
    const auto derived = derive_channels(traj);
    m.rocof_max = max_rocof(derived.f_coi, traj.dt(), cfg.operational.rocof_window);
    const auto k0 = detail::first_index_at_or_after(series.t, series.t0);
    const auto k1 = detail::last_index_at_or_before(series.t, series.integration_end);
    m.spread_max = 0.0;
    for (std::size_t k = k0; k <= k1; ++k) {
        m.spread_max = std::max(m.spread_max, derived.spread[k]);
    }
    if (cfg.pv_lost) {
        m.pv_lost = *cfg.pv_lost;
    } else if (cfg.simulation) {
        m.pv_lost = sim::pv_capacity_lost(cfg.simulation->model, cfg.events);
    } else {
        m.pv_lost = pv_lost_from_trajectory(traj, cfg.performance.t0);
    }
    m.pv_total = cfg.pv_total.value_or(traj.pv_total_rating());
    return m;
}

inline Assessment run_assess(const ScenarioConfig &cfg) {
    Assessment a;
    a.label = cfg.label;
    auto traj = scenario_trajectory(cfg);
    auto series = performance(traj, cfg.performance, cfg.markers);
    a.phases = segment_phases(series, cfg.performance, cfg.segmentation);
    a.metrics = measure(cfg, traj, series);
    a.sub = sub_indices(cfg, a.metrics, pv_plant_count(cfg, &traj));
    a.series = std::move(series);
    a.trajectory = std::move(traj);
    return a;
}

/// Assessment from injected metrics; the config still supplies thresholds and
/// the cyber, climatic and regulatory blocks. Published sub-indices, when
/// given, take precedence over the recomputed ones.
inline Assessment run_assess(const ScenarioConfig &cfg, const InjectedMetrics &inj) {
    Assessment a;
    a.label = cfg.label;
    a.metrics = inj.metrics;
    int plants = cfg.cyber.scope.value_or(0);
    if (cfg.simulation) {
        plants = int(cfg.simulation->model.pv_plants.size());
    }
    a.sub = sub_indices(cfg, a.metrics, plants);
    a.sub.d_phy = inj.d_phy.value_or(a.sub.d_phy);
    a.sub.d_op = inj.d_op.value_or(a.sub.d_op);
    a.sub.d_cyb = inj.d_cyb.value_or(a.sub.d_cyb);
    a.sub.d_clim = inj.d_clim.value_or(a.sub.d_clim);
    a.sub.d_reg = inj.d_reg.value_or(a.sub.d_reg);
    return a;
}

// ---------------------------------------------------------------------------
// Injected metrics file: {"schema": 1, "baseline": {...}, "multi": {...}}

struct InjectedPair {
    InjectedMetrics baseline;
    InjectedMetrics multi;
};

inline InjectedMetrics parse_injected_metrics(config_detail::Reader r) {
    InjectedMetrics inj;
    auto &m = inj.metrics;
    m.r_loss = r.number("r_loss");
    m.phi0 = r.number("phi0");
    m.phi_nadir = r.number("phi_nadir");
    m.rocof_max = r.number("rocof_max");
    m.spread_max = r.number("spread_max");
    m.pv_lost = r.number("pv_lost");
    m.pv_total = r.number("pv_total");
    if (r.has("sub_indices")) {
        auto s = r.object("sub_indices");
        inj.d_phy = s.optional_number("d_phy");
        inj.d_op = s.optional_number("d_op");
        inj.d_cyb = s.optional_number("d_cyb");
        inj.d_clim = s.optional_number("d_clim");
        inj.d_reg = s.optional_number("d_reg");
        s.finish();
        for (auto v : {inj.d_phy, inj.d_op, inj.d_cyb, inj.d_clim, inj.d_reg}) {
            if (v && !(*v >= 0.0 && *v <= 1.0)) {
                throw ConfigError(r.at("sub_indices") + ": values must lie in [0,1]");
            }
        }
    }
    r.finish();
    if (m.r_loss < 0.0 || m.rocof_max < 0.0 || m.spread_max < 0.0 || m.pv_lost < 0.0 || !(m.pv_total > 0.0)) {
        throw ConfigError(r.path() + ": metrics must be non-negative and pv_total positive");
    }
    return inj;
}

inline InjectedPair parse_injected_pair(const nlohmann::json &doc) {
    config_detail::Reader r(doc, "$");
    if (r.integer("schema") != kSchemaVersion) {
        throw ConfigError("$.schema: unsupported schema version");
    }
    InjectedPair p;
    p.baseline = parse_injected_metrics(r.object("baseline"));
    p.multi = parse_injected_metrics(r.object("multi"));
    r.finish();
    return p;
}

// ---------------------------------------------------------------------------

struct Comparison {
    Assessment baseline;
    Assessment multi;
    ComparisonReport report;
};

inline Comparison run_compare(const ScenarioConfig &baseline, const ScenarioConfig &multi,
                              const std::optional<InjectedPair> &inject = std::nullopt) {
    Comparison c;
    if (inject) {
        c.baseline = run_assess(baseline, inject->baseline);
        c.multi = run_assess(multi, inject->multi);
    } else {
        c.baseline = run_assess(baseline);
        c.multi = run_assess(multi);
    }
    c.report = compare_scenarios(c.baseline.result(), c.multi.result());
    return c;
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::json to_json(const ScenarioMetrics &m) {
    return {{"r_loss", numfmt::round_sig(m.r_loss)},         {"phi0", numfmt::round_sig(m.phi0)},
            {"phi_nadir", numfmt::round_sig(m.phi_nadir)},   {"rocof_max", numfmt::round_sig(m.rocof_max)},
            {"spread_max", numfmt::round_sig(m.spread_max)}, {"pv_lost", numfmt::round_sig(m.pv_lost)},
            {"pv_total", numfmt::round_sig(m.pv_total)}};
}

inline nlohmann::json to_json(const Assessment &a) {
    nlohmann::json j = {{"label", a.label}, {"metrics", to_json(a.metrics)}, {"sub_indices", to_json(a.sub)}};
    if (a.series) {
        j["performance"] = to_json(*a.series);
    }
    if (a.phases) {
        j["phases"] = to_json(*a.phases);
    }
    return j;
}

inline nlohmann::json to_json(const Comparison &c) {
    auto j = to_json(c.report);
    j["baseline"]["assessment"] = to_json(c.baseline);
    j["multi"]["assessment"] = to_json(c.multi);
    return j;
}

/// Canonical report text: sorted keys, two-space indent, trailing newline.
inline std::string dump_report(const nlohmann::json &j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Plot series

inline void write_freq_csv(const Trajectory &traj, std::ostream &out) {
    const auto derived = derive_channels(traj);
    out << "t,f_coi,spread";
    for (const auto &g : traj.generators()) {
        out << ',' << g.name;
    }
    out << '\n';
    for (std::size_t k = 0; k < traj.size(); ++k) {
        out << numfmt::decimal(traj.time()[k]) << ',' << numfmt::decimal(derived.f_coi[k]) << ','
            << numfmt::decimal(derived.spread[k]);
        for (const auto &g : traj.generators()) {
            out << ',' << numfmt::decimal(g.freq[k]);
        }
        out << '\n';
    }
}

inline void write_pv_csv(const Trajectory &traj, std::ostream &out) {
    out << 't';
    for (const auto &p : traj.pv()) {
        out << ',' << p.name;
    }
    out << '\n';
    for (std::size_t k = 0; k < traj.size(); ++k) {
        out << numfmt::decimal(traj.time()[k]);
        for (const auto &p : traj.pv()) {
            out << ',' << numfmt::decimal(p.output[k]);
        }
        out << '\n';
    }
}

/// Writes phi.csv, freq.csv and pv.csv into `dir`.
inline void write_plot_files(const Assessment &a, const std::filesystem::path &dir) {
    if (!a.trajectory || !a.series) {
        throw ConfigError("plot series need a trajectory; injected metrics carry none");
    }
    std::filesystem::create_directories(dir);
    auto open = [&](const char *name) {
        std::ofstream f(dir / name);
        if (!f) {
            throw ConfigError("cannot write '" + (dir / name).string() + "'");
        }
        return f;
    };
    {
        auto f = open("phi.csv");
        write_phi_csv(*a.series, f);
    }
    {
        auto f = open("freq.csv");
        write_freq_csv(*a.trajectory, f);
    }
    {
        auto f = open("pv.csv");
        write_pv_csv(*a.trajectory, f);
    }
}

} // namespace mdri
