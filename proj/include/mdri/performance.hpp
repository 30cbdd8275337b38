#pragma once

/*
 * Composite performance function and resilience loss.
 *
 *   phi_f(t) = max(0, 1 - |f_coi(t) - f_nom| / |f_nom - f_crit|)
 *   phi_s(t) = max(0, 1 - spread(t) / spread_coh)
 *   phi(t)   = w_f phi_f(t) + w_s phi_s(t)
 *
 *   R_loss = 1/phi0 * integral_{t0}^{t0+T_H} max(0, phi0 - phi~(t)) dt
 *
 * phi~ follows phi up to the limiting instant. After a detected collapse it is
 * zero; after a detected recovery the deficit is zero, so integration stops at
 * the recovery instant.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "numfmt.hpp"
#include "timeseries.hpp"

namespace mdri {

struct PerformanceParams {
    double w_f = 0.5;
    double w_s = 0.5;
    double f_nom = 60.0;       ///< [Hz]
    double f_crit = 59.0;      ///< [Hz]
    double spread_coh = 1.0;   ///< coherency band [Hz]
    double horizon = 15.0;     ///< T_H [s]
    double t0 = 7.0;           ///< disturbance onset [s]
    double phi0_window = 1.0;  ///< pre-event averaging window [s]

    void validate() const {
        auto in_unit = [](double w) { return w >= 0.0 && w <= 1.0; };
        if (!in_unit(w_f) || !in_unit(w_s) || std::abs(w_f + w_s - 1.0) > 1e-9) {
            throw DomainError("performance weights must lie in [0,1] and sum to 1");
        }
        if (!(std::abs(f_nom - f_crit) > 0.0)) {
            throw DomainError("f_crit must differ from f_nom");
        }
        if (!(spread_coh > 0.0)) {
            throw DomainError("spread_coh must be positive");
        }
        if (!(horizon > 0.0)) {
            throw DomainError("horizon T_H must be positive");
        }
        if (!(phi0_window >= 0.0)) {
            throw DomainError("phi0_window must be non-negative");
        }
    }
};

/// How a collapse is recognised. The default fires on a sustained loss of coherency.
struct CollapseRule {
    enum class Kind { SpreadSustained, PhiFloor, NoRecovery };
    Kind kind = Kind::SpreadSustained;
    double spread_crit = 2.0; ///< [Hz]
    double dwell = 0.2;       ///< [s]
    double phi_floor = 0.0;   ///< for PhiFloor

    void validate() const {
        if (kind == Kind::SpreadSustained && !(spread_crit > 0.0)) {
            throw DomainError("collapse spread threshold must be positive");
        }
        if (!(dwell >= 0.0)) {
            throw DomainError("collapse dwell must be non-negative");
        }
        if (kind == Kind::PhiFloor && !(phi_floor > 0.0)) {
            throw DomainError("collapse phi floor must be positive");
        }
    }
};

struct MarkerRules {
    CollapseRule collapse;
    double recovery_tolerance = 0.001; ///< fraction of phi0 (the 99.9% level)
};

struct PerformanceSeries {
    Series t;
    Series phi;
    Series phi_f;
    Series phi_s;
    Series phi_truncated;
    double phi0 = 1.0;
    double t0 = 0.0;
    std::optional<double> t_col;
    std::optional<double> t_f;
    double nadir_value = 1.0;
    double nadir_time = 0.0;
    double integration_end = 0.0; ///< min(t0 + T_H, last sample)

    bool collapsed() const noexcept { return t_col.has_value(); }
    bool recovered() const noexcept { return t_f.has_value() && !t_col.has_value(); }
};

// ---------------------------------------------------------------------------

inline Series phi_frequency(const Series &f_coi, const PerformanceParams &params) {
    const double band = std::abs(params.f_nom - params.f_crit);
    Series out(f_coi.size());
    for (std::size_t k = 0; k < f_coi.size(); ++k) {
        out[k] = std::max(0.0, 1.0 - std::abs(f_coi[k] - params.f_nom) / band);
    }
    return out;
}

inline Series phi_coherency(const Series &spread, const PerformanceParams &params) {
    Series out(spread.size());
    for (std::size_t k = 0; k < spread.size(); ++k) {
        out[k] = std::max(0.0, 1.0 - spread[k] / params.spread_coh);
    }
    return out;
}

namespace detail {

inline std::size_t first_index_at_or_after(const Series &t, double time) {
    const double slack = 1e-9 * (t.size() > 1 ? t[1] - t[0] : 1.0);
    const auto it = std::lower_bound(t.begin(), t.end(), time - slack);
    return static_cast<std::size_t>(it - t.begin());
}

inline std::size_t last_index_at_or_before(const Series &t, double time) {
    const double slack = 1e-9 * (t.size() > 1 ? t[1] - t[0] : 1.0);
    const auto it = std::upper_bound(t.begin(), t.end(), time + slack);
    return it == t.begin() ? 0 : static_cast<std::size_t>(it - t.begin()) - 1;
}

/// Trapezoid over a uniform grid slice [lo, hi] (indices inclusive).
inline double trapezoid(const Series &t, const Series &y, std::size_t lo, std::size_t hi) {
    double acc = 0.0;
    for (std::size_t k = lo; k < hi; ++k) {
        acc += 0.5 * (y[k] + y[k + 1]) * (t[k + 1] - t[k]);
    }
    return acc;
}

inline double pre_event_mean(const Series &t, const Series &phi, double t0, double window) {
    const auto hi = last_index_at_or_before(t, t0);
    const auto lo = first_index_at_or_after(t, t0 - window);
    if (lo >= hi) {
        return phi[hi];
    }
    // Time average of the sampled signal over the window, clamped so a flat
    // signal averages to exactly its own value.
    const auto [mn, mx] = std::minmax_element(phi.begin() + lo, phi.begin() + hi + 1);
    return std::clamp(trapezoid(t, phi, lo, hi) / (t[hi] - t[lo]), *mn, *mx);
}

/// Integral of max(0, level - y(t)) for y linear between (ta, ya) and (tb, yb).
inline double deficit_segment(double ta, double ya, double tb, double yb, double level) {
    const double da = level - ya;
    const double db = level - yb;
    const double width = tb - ta;
    if (width <= 0.0) {
        return 0.0;
    }
    if (da >= 0.0 && db >= 0.0) {
        return 0.5 * (da + db) * width;
    }
    if (da <= 0.0 && db <= 0.0) {
        return 0.0;
    }
    // One sign change: integrate the positive triangle only.
    const double cross = width * da / (da - db);
    return da > 0.0 ? 0.5 * da * cross : 0.5 * db * (width - cross);
}

inline double interpolate(const Series &t, const Series &y, double time) {
    if (time <= t.front()) {
        return y.front();
    }
    if (time >= t.back()) {
        return y.back();
    }
    const auto it = std::upper_bound(t.begin(), t.end(), time);
    const auto k = static_cast<std::size_t>(it - t.begin()) - 1;
    const double frac = (time - t[k]) / (t[k + 1] - t[k]);
    // Clamped so rounding never puts the value outside its two samples.
    return std::clamp(y[k] + frac * (y[k + 1] - y[k]), std::min(y[k], y[k + 1]), std::max(y[k], y[k + 1]));
}

} // namespace detail

/// Earliest instant at or after t0 where `rule` fires.
inline std::optional<double> detect_collapse(const PerformanceSeries &series, const Series &spread,
                                             const CollapseRule &rule,
                                             std::optional<double> horizon_end = std::nullopt) {
    rule.validate();
    const auto &t = series.t;
    const auto k0 = detail::first_index_at_or_after(t, series.t0);

    auto sustained = [&](auto &&firing) -> std::optional<double> {
        std::optional<std::size_t> run_start;
        for (std::size_t k = k0; k < t.size(); ++k) {
            if (firing(k)) {
                if (!run_start) {
                    run_start = k;
                }
                if (t[k] - t[*run_start] >= rule.dwell - 1e-9) {
                    return t[*run_start];
                }
            } else {
                run_start.reset();
            }
        }
        return std::nullopt;
    };

    switch (rule.kind) {
    case CollapseRule::Kind::SpreadSustained:
        if (spread.size() != t.size()) {
            throw DomainError("detect_collapse: spread length does not match the series");
        }
        return sustained([&](std::size_t k) { return spread[k] > rule.spread_crit; });
    case CollapseRule::Kind::PhiFloor:
        return sustained([&](std::size_t k) { return series.phi[k] < rule.phi_floor; });
    case CollapseRule::Kind::NoRecovery: {
        if (series.t_f) {
            return std::nullopt;
        }
        const double end = horizon_end ? std::min(*horizon_end, t.back()) : t.back();
        const bool disturbed = series.nadir_value < series.phi0;
        return disturbed ? std::optional<double>(end) : std::nullopt;
    }
    }
    return std::nullopt;
}

/// First instant after the nadir where phi is back within `tolerance` of phi0,
/// searched up to `until`. None when phi never left that band.
inline std::optional<double> detect_recovery(const PerformanceSeries &series, double tolerance,
                                             double until) {
    const auto &t = series.t;
    const double level = (1.0 - tolerance) * series.phi0;
    const auto k0 = detail::first_index_at_or_after(t, series.t0);
    const auto k_end = detail::last_index_at_or_before(t, until);
    bool left_band = false;
    for (std::size_t k = k0; k <= k_end && k < t.size(); ++k) {
        if (series.phi[k] < level) {
            left_band = true;
            break;
        }
    }
    if (!left_band) {
        return std::nullopt;
    }
    const auto k_nadir = detail::first_index_at_or_after(t, series.nadir_time);
    for (std::size_t k = k_nadir; k <= k_end && k < t.size(); ++k) {
        if (series.phi[k] >= level) {
            return t[k];
        }
    }
    return std::nullopt;
}

/// Rebuilds phi_truncated from the collapse/recovery markers.
inline void apply_truncation(PerformanceSeries &series) {
    series.phi_truncated = series.phi;
    if (series.t_col) {
        for (std::size_t k = 0; k < series.t.size(); ++k) {
            if (series.t[k] > *series.t_col + 1e-12) {
                series.phi_truncated[k] = 0.0;
            }
        }
    } else if (series.t_f) {
        for (std::size_t k = 0; k < series.t.size(); ++k) {
            if (series.t[k] > *series.t_f + 1e-12) {
                series.phi_truncated[k] = std::max(series.phi[k], series.phi0);
            }
        }
    }
}

/// Builds a series from raw performance samples. Markers are left for the caller.
inline PerformanceSeries make_series(Series t, Series phi_f, Series phi_s, const PerformanceParams &params) {
    params.validate();
    if (t.size() < 2 || phi_f.size() != t.size() || phi_s.size() != t.size()) {
        throw DomainError("performance series channels must share the time grid");
    }
    const double slack = 1e-9 * (t[1] - t[0]);
    if (params.t0 < t.front() - slack || params.t0 > t.back() + slack) {
        throw DomainError("disturbance onset t0 = " + numfmt::decimal(params.t0) + " s lies outside the grid [" +
                          numfmt::decimal(t.front()) + ", " + numfmt::decimal(t.back()) + "]");
    }
    PerformanceSeries s;
    s.phi.resize(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
        s.phi[k] = params.w_f * phi_f[k] + params.w_s * phi_s[k];
    }
    s.t = std::move(t);
    s.phi_f = std::move(phi_f);
    s.phi_s = std::move(phi_s);
    s.t0 = params.t0;
    s.phi0 = detail::pre_event_mean(s.t, s.phi, params.t0, params.phi0_window);
    s.integration_end = std::min(params.t0 + params.horizon, s.t.back());

    const auto k0 = detail::first_index_at_or_after(s.t, params.t0);
    const auto k_end = detail::last_index_at_or_before(s.t, s.integration_end);
    s.nadir_value = s.phi[k0];
    s.nadir_time = s.t[k0];
    for (std::size_t k = k0; k <= k_end; ++k) {
        if (s.phi[k] < s.nadir_value) {
            s.nadir_value = s.phi[k];
            s.nadir_time = s.t[k];
        }
    }
    s.phi_truncated = s.phi;
    return s;
}

/// Full evaluation: phi components, phi0, nadir, collapse and recovery markers.
inline PerformanceSeries performance(const Trajectory &traj, const PerformanceParams &params,
                                     const MarkerRules &rules = {}) {
    const auto derived = derive_channels(traj);
    auto s = make_series(traj.time(), phi_frequency(derived.f_coi, params), phi_coherency(derived.spread, params),
                         params);
    s.t_col = detect_collapse(s, derived.spread, rules.collapse, s.integration_end);
    if (!s.t_col || rules.collapse.kind == CollapseRule::Kind::NoRecovery) {
        s.t_f = detect_recovery(s, rules.recovery_tolerance, s.integration_end);
        if (rules.collapse.kind == CollapseRule::Kind::NoRecovery) {
            s.t_col = detect_collapse(s, derived.spread, rules.collapse, s.integration_end);
        }
    }
    if (s.t_col) {
        s.t_f.reset();
    }
    apply_truncation(s);
    return s;
}

/// Normalised resilience loss over [t0, min(t0 + T_H, last sample)].
///
/// Exact for phi piecewise linear between samples: crossings of phi0 inside a
/// cell are split out, and the cell after a collapse contributes phi0 * dt.
inline double resilience_loss(const PerformanceSeries &series, const PerformanceParams &params) {
    if (!(series.phi0 > 0.0)) {
        throw DegenerateError("resilience_loss: pre-event performance phi0 is zero");
    }
    const auto &t = series.t;
    const double lo = params.t0;
    double hi = std::min(params.t0 + params.horizon, t.back());
    if (series.t_f && !series.t_col) {
        hi = std::min(hi, *series.t_f);
    }
    if (lo < t.front() - 1e-9 * (t[1] - t[0])) {
        throw DomainError("resilience_loss: t0 precedes the grid");
    }
    if (hi <= lo) {
        return 0.0;
    }
    const double level = series.phi0;
    const double cut = series.t_col ? *series.t_col : std::numeric_limits<double>::infinity();

    double area = 0.0;
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
        const double a = std::max(t[k], lo);
        const double b = std::min(t[k + 1], hi);
        if (b <= a) {
            continue;
        }
        if (a >= cut) {
            area += level * (b - a);
            continue;
        }
        const double split = std::min(b, cut);
        const double ya = detail::interpolate(t, series.phi, a);
        const double ys = detail::interpolate(t, series.phi, split);
        area += detail::deficit_segment(a, ya, split, ys, level);
        if (split < b) {
            area += level * (b - split);
        }
    }
    return area / level;
}

// ---------------------------------------------------------------------------
// Phase segmentation
// ---------------------------------------------------------------------------

enum class PhaseLabel { PreEvent, Absorption, AttackPropagation, Degraded, Recovery, FailedRecovery, PostEvent };

inline const char *to_string(PhaseLabel label) {
    switch (label) {
    case PhaseLabel::PreEvent: return "pre_event";
    case PhaseLabel::Absorption: return "absorption";
    case PhaseLabel::AttackPropagation: return "attack_propagation";
    case PhaseLabel::Degraded: return "degraded";
    case PhaseLabel::Recovery: return "recovery";
    case PhaseLabel::FailedRecovery: return "failed_recovery";
    case PhaseLabel::PostEvent: return "post_event";
    }
    return "unknown";
}

struct Phase {
    PhaseLabel label;
    double start;
    double end;
};

struct SegmentationParams {
    double absorption_tolerance = 0.005; ///< |phi - phi0| threshold, fraction of phi0
    double slope_threshold = 0.02;       ///< |dphi/dt| below which degradation has settled [1/s]
    double nadir_band = 0.5;             ///< fraction of the total drop that counts as near the nadir
};

struct PhaseReport {
    std::vector<Phase> phases;
    double nadir_value = 1.0;
    double nadir_time = 0.0;
    bool recovered = true;
    double recovery_fraction = 1.0;
};

inline PhaseReport segment_phases(const PerformanceSeries &series, const PerformanceParams &params,
                                  const SegmentationParams &seg = {}) {
    const auto &t = series.t;
    const auto &phi = series.phi;
    const double t_begin = t.front();
    const double t_end = t.back();
    PhaseReport report;

    const auto k0 = detail::first_index_at_or_after(t, params.t0);
    const double eps_abs = seg.absorption_tolerance * series.phi0;
    std::optional<std::size_t> k_abs;
    for (std::size_t k = k0; k < t.size(); ++k) {
        if (std::abs(phi[k] - series.phi0) > eps_abs) {
            k_abs = k;
            break;
        }
    }
    if (!k_abs && !series.t_col) {
        report.phases.push_back({PhaseLabel::PreEvent, t_begin, t_end});
        report.nadir_value = series.nadir_value;
        report.nadir_time = series.nadir_time;
        report.recovered = true;
        return report;
    }
    if (!k_abs) {
        k_abs = detail::first_index_at_or_after(t, *series.t_col);
    }

    // Nadir from absorption onwards.
    std::size_t k_nadir = *k_abs;
    for (std::size_t k = *k_abs; k < t.size(); ++k) {
        if (phi[k] < phi[k_nadir]) {
            k_nadir = k;
        }
    }
    report.nadir_value = phi[k_nadir];
    report.nadir_time = t[k_nadir];

    std::size_t k_rec = k_nadir;
    if (series.t_col) {
        k_rec = std::min(k_rec, detail::first_index_at_or_after(t, *series.t_col));
    }
    k_rec = std::max(k_rec, std::min(*k_abs + 2, t.size() - 1));

    const double drop = series.phi0 - report.nadir_value;
    std::size_t k_deg = k_rec;
    for (std::size_t k = *k_abs + 1; k < k_rec; ++k) {
        const double slope = (phi[std::min(k + 1, t.size() - 1)] - phi[k - 1]) / (t[std::min(k + 1, t.size() - 1)] - t[k - 1]);
        const bool settled = std::abs(slope) < seg.slope_threshold;
        const bool near_nadir = phi[k] - report.nadir_value <= seg.nadir_band * drop;
        if (settled || near_nadir) {
            k_deg = k;
            break;
        }
    }
    k_deg = std::clamp(k_deg, *k_abs + 1, std::max(*k_abs + 1, k_rec - 1));

    const bool collapsed = series.t_col.has_value();
    report.recovered = series.recovered() && *series.t_f <= params.t0 + params.horizon + 1e-9;

    report.phases.push_back({PhaseLabel::PreEvent, t_begin, t[*k_abs]});
    report.phases.push_back(
        {collapsed ? PhaseLabel::AttackPropagation : PhaseLabel::Absorption, t[*k_abs], t[k_deg]});
    report.phases.push_back({PhaseLabel::Degraded, t[k_deg], t[k_rec]});
    if (report.recovered) {
        const double t_f = std::max(*series.t_f, t[k_rec]);
        report.phases.push_back({PhaseLabel::Recovery, t[k_rec], t_f});
        report.phases.push_back({PhaseLabel::PostEvent, t_f, t_end});
    } else {
        report.phases.push_back({PhaseLabel::FailedRecovery, t[k_rec], t_end});
    }

    if (drop > 0.0) {
        const double last = series.phi_truncated.back();
        const double reached = report.recovered ? std::max(last, (1.0 - 1e-12) * series.phi0) : last;
        report.recovery_fraction = std::clamp((reached - report.nadir_value) / drop, 0.0, 1.0);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const PhaseReport &report) {
    nlohmann::json phases = nlohmann::json::array();
    for (const auto &p : report.phases) {
        phases.push_back({{"phase", to_string(p.label)},
                          {"start", numfmt::round_sig(p.start)},
                          {"end", numfmt::round_sig(p.end)}});
    }
    return {{"phases", phases},
            {"nadir_value", numfmt::round_sig(report.nadir_value)},
            {"nadir_time", numfmt::round_sig(report.nadir_time)},
            {"recovered", report.recovered},
            {"recovery_fraction", numfmt::round_sig(report.recovery_fraction)}};
}

/// Scalar summary; the sampled channels go to CSV.
inline nlohmann::json to_json(const PerformanceSeries &s) {
    auto opt = [](const std::optional<double> &v) -> nlohmann::json {
        return v ? nlohmann::json(numfmt::round_sig(*v)) : nlohmann::json(nullptr);
    };
    return {{"phi0", numfmt::round_sig(s.phi0)},
            {"t0", numfmt::round_sig(s.t0)},
            {"t_col", opt(s.t_col)},
            {"t_f", opt(s.t_f)},
            {"nadir_value", numfmt::round_sig(s.nadir_value)},
            {"nadir_time", numfmt::round_sig(s.nadir_time)},
            {"integration_end", numfmt::round_sig(s.integration_end)},
            {"samples", s.t.size()}};
}

inline void write_phi_csv(const PerformanceSeries &s, std::ostream &out) {
    out << "t,phi,phi_f,phi_s\n";
    for (std::size_t k = 0; k < s.t.size(); ++k) {
        out << numfmt::decimal(s.t[k]) << ',' << numfmt::decimal(s.phi[k]) << ','
            << numfmt::decimal(s.phi_f[k]) << ',' << numfmt::decimal(s.phi_s[k]) << '\n';
    }
}

} // namespace mdri
