#pragma once

// Normalised degradation scores for the five resilience dimensions. All of
// them land in [0, 1]; the endogenous ones (physical, operational, cyber) feed
// the coupled core index, the exogenous ones (climatic, regulatory) act as
// multipliers on it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "numfmt.hpp"
#include "performance.hpp"
#include "timeseries.hpp"

namespace mdri {

inline constexpr double kWeightSumTolerance = 1e-9;

struct PhysicalInput {
    double pv_lost = 0.0;  ///< [MW]
    double pv_total = 0.0; ///< [MW]
};

struct OperationalThresholds {
    double rocof_crit = 1.0;     ///< [Hz/s]
    double delta_phi_crit = 0.05;
    double spread_crit = 2.0;    ///< [Hz]
    double rocof_window = 0.5;   ///< [s]

    void validate() const {
        if (!(rocof_crit > 0.0) || !(delta_phi_crit > 0.0) || !(spread_crit > 0.0) || !(rocof_window > 0.0)) {
            throw DomainError("operational thresholds must all be strictly positive");
        }
    }
};

struct CyberAspect {
    std::string name; ///< observability, controllability, integrity or availability
    double weight = 0.0;
    int compromised = 0;
    int scope = 1;
};

struct CyberAssessment {
    std::vector<CyberAspect> aspects;
};

struct ClimaticStressor {
    std::string name;
    double weight = 0.0;
    double intensity = 0.0;
};

struct ClimaticAssessment {
    std::vector<ClimaticStressor> stressors;
};

struct RegulatoryControl {
    std::string category;
    bool weakness_present = false;
};

struct RegulatoryAssessment {
    std::vector<RegulatoryControl> controls;
};

struct SubIndices {
    double d_phy = 0.0;
    double d_op = 0.0;
    double d_cyb = 0.0;
    double d_clim = 0.0;
    double d_reg = 0.0;
};

// ---------------------------------------------------------------------------

inline double physical_index(const PhysicalInput &in) {
    if (!(in.pv_total > 0.0)) {
        throw DegenerateError("physical_index: total PV capacity is zero");
    }
    if (in.pv_lost < 0.0 || in.pv_lost > in.pv_total * (1.0 + 1e-12)) {
        throw DomainError("physical_index: lost PV capacity must lie in [0, total]");
    }
    return std::min(1.0, in.pv_lost / in.pv_total);
}

/// Largest sliding-window secant |f(t + w) - f(t)| / w. The window is rounded
/// to a whole number of samples.
inline double max_rocof(const Series &f_coi, double dt, double window) {
    if (!(dt > 0.0)) {
        throw DomainError("max_rocof: sample step must be positive");
    }
    if (f_coi.size() < 2) {
        throw DomainError("max_rocof: series needs at least two samples");
    }
    if (window < dt * (1.0 - 1e-9)) {
        throw DomainError("max_rocof: window shorter than one sample step");
    }
    const auto lag = static_cast<std::size_t>(std::llround(window / dt));
    if (lag >= f_coi.size()) {
        throw DomainError("max_rocof: series shorter than the RoCoF window");
    }
    const double span = double(lag) * dt;
    double best = 0.0;
    for (std::size_t k = 0; k + lag < f_coi.size(); ++k) {
        best = std::max(best, std::abs(f_coi[k + lag] - f_coi[k]) / span);
    }
    return best;
}

/// Relative performance drop (phi0 - nadir) / phi0, floored at zero.
inline double performance_drop(double phi0, double phi_nadir) {
    if (!(phi0 > 0.0)) {
        throw DegenerateError("operational_index: phi0 must be positive");
    }
    return std::max(0.0, (phi0 - phi_nadir) / phi0);
}

inline double operational_index(double phi0, double phi_nadir, double rocof_max, double spread_max,
                                const OperationalThresholds &th) {
    th.validate();
    if (rocof_max < 0.0 || spread_max < 0.0) {
        throw DomainError("operational_index: rocof_max and spread_max must be non-negative");
    }
    const double drop = performance_drop(phi0, phi_nadir);
    const double sum = rocof_max / th.rocof_crit + drop / th.delta_phi_crit + spread_max / th.spread_crit;
    return std::min(1.0, sum / 3.0);
}

inline double operational_index(const PerformanceSeries &perf, double rocof_max, double spread_max,
                                const OperationalThresholds &th) {
    return operational_index(perf.phi0, perf.nadir_value, rocof_max, spread_max, th);
}

namespace detail {

template <class Range, class WeightOf>
void check_weights(const Range &items, WeightOf weight_of, const char *what) {
    double total = 0.0;
    for (const auto &item : items) {
        const double w = weight_of(item);
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw NormalizationError(std::string(what) + ": weights must be finite and non-negative");
        }
        total += w;
    }
    if (std::abs(total - 1.0) > kWeightSumTolerance) {
        throw NormalizationError(std::string(what) + ": weights sum to " + numfmt::decimal(total) +
                                 ", expected 1");
    }
}

} // namespace detail

inline double cyber_index(const CyberAssessment &a) {
    detail::check_weights(a.aspects, [](const CyberAspect &x) { return x.weight; }, "cyber_index");
    double acc = 0.0;
    for (const auto &x : a.aspects) {
        if (x.scope <= 0) {
            throw DomainError("cyber_index: aspect '" + x.name + "' has an empty scope");
        }
        if (x.compromised < 0 || x.compromised > x.scope) {
            throw DomainError("cyber_index: aspect '" + x.name + "' compromised count outside [0, scope]");
        }
        acc += x.weight * double(x.compromised) / double(x.scope);
    }
    return std::clamp(acc, 0.0, 1.0);
}

/// An empty stressor list means no climatic stress.
inline double climatic_index(const ClimaticAssessment &a) {
    if (a.stressors.empty()) {
        return 0.0;
    }
    detail::check_weights(a.stressors, [](const ClimaticStressor &x) { return x.weight; }, "climatic_index");
    double acc = 0.0;
    for (const auto &x : a.stressors) {
        if (!(x.intensity >= 0.0 && x.intensity <= 1.0)) {
            throw DomainError("climatic_index: intensity of '" + x.name + "' outside [0,1]");
        }
        acc += x.weight * x.intensity;
    }
    return std::clamp(acc, 0.0, 1.0);
}

inline double regulatory_index(const RegulatoryAssessment &a) {
    if (a.controls.empty()) {
        throw DomainError("regulatory_index: reference control list is empty");
    }
    std::size_t weak = 0;
    for (const auto &c : a.controls) {
        weak += c.weakness_present ? 1 : 0;
    }
    return double(weak) / double(a.controls.size());
}

inline nlohmann::json to_json(const SubIndices &d) {
    return {{"d_phy", numfmt::round_sig(d.d_phy)},
            {"d_op", numfmt::round_sig(d.d_op)},
            {"d_cyb", numfmt::round_sig(d.d_cyb)},
            {"d_clim", numfmt::round_sig(d.d_clim)},
            {"d_reg", numfmt::round_sig(d.d_reg)}};
}

} // namespace mdri
