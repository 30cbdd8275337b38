#pragma once

/*
 * Core index and exogenous amplification.
 *
 *   M    = (1 - gamma) * mean(D_phy, D_op, D_cyb) + gamma * geomean(D_phy, D_op, D_cyb)
 *   MDRI = M * (1 + D_clim) * (1 + D_reg)
 *
 * gamma is fixed by a baseline/multi-vector scenario pair so that
 * M(multi) / M(baseline) equals the observed amplification
 * Lambda = R_loss(multi) / (kappa * R_loss(baseline)), with kappa the ratio of
 * lost PV capacity. The condition is linear in gamma and solved in closed form.
 */

#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dimensions.hpp"
#include "errors.hpp"
#include "numfmt.hpp"

namespace mdri {

struct CoreIndex {
    double linear_term = 0.0;
    double coupling_term = 0.0;
    double core = 0.0;
};

struct Calibration {
    double kappa = 1.0;
    double r_loss_expected = 0.0;
    double lambda = 1.0;
    double gamma = 0.0;
};

struct MdriReport {
    double linear_term = 0.0;
    double coupling_term = 0.0;
    double core = 0.0;
    double exogenous_multiplier = 1.0;
    double mdri = 0.0;
};

inline double endogenous_mean(const SubIndices &d) { return (d.d_phy + d.d_op + d.d_cyb) / 3.0; }

/// Zero as soon as any endogenous dimension is zero.
inline double endogenous_geomean(const SubIndices &d) {
    const double product = d.d_phy * d.d_op * d.d_cyb;
    return product > 0.0 ? std::cbrt(product) : 0.0;
}

inline void check_gamma(double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
        throw DomainError("coupling coefficient gamma = " + numfmt::decimal(gamma) + " outside [0,1]");
    }
}

inline CoreIndex core_index(const SubIndices &d, double gamma) {
    check_gamma(gamma);
    for (double v : {d.d_phy, d.d_op, d.d_cyb}) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw DomainError("core_index: endogenous sub-indices must lie in [0,1]");
        }
    }
    CoreIndex out;
    out.linear_term = (1.0 - gamma) * endogenous_mean(d);
    out.coupling_term = gamma * endogenous_geomean(d);
    out.core = out.linear_term + out.coupling_term;
    return out;
}

struct ExpectedLoss {
    double kappa = 1.0;
    double r_loss_expected = 0.0;
};

/// Linear scaling of the single-plant baseline loss by the ratio of PV lost.
inline ExpectedLoss expected_loss(double r_loss_baseline, double pv_lost_baseline, double pv_lost_multi) {
    if (!(pv_lost_baseline > 0.0)) {
        throw DegenerateError("expected_loss: baseline scenario lost no PV capacity");
    }
    if (r_loss_baseline < 0.0 || pv_lost_multi < 0.0) {
        throw DomainError("expected_loss: losses must be non-negative");
    }
    const double kappa = pv_lost_multi / pv_lost_baseline;
    return {kappa, kappa * r_loss_baseline};
}

inline double amplification_ratio(double r_obs, double r_exp) {
    if (!(std::abs(r_exp) > 0.0)) {
        throw DegenerateError("amplification_ratio: expected loss is zero");
    }
    return r_obs / r_exp;
}

inline constexpr double kCalibrationDenominatorFloor = 1e-12;

/// Solves (1-g)A_b + g G_b = lambda [(1-g)A_a + g G_a] for g.
inline double calibrate_gamma(const SubIndices &baseline, const SubIndices &multi, double lambda) {
    if (!(lambda > 0.0)) {
        throw DomainError("calibrate_gamma: amplification ratio must be positive");
    }
    const double a_a = endogenous_mean(baseline);
    const double g_a = endogenous_geomean(baseline);
    const double a_b = endogenous_mean(multi);
    const double g_b = endogenous_geomean(multi);
    const double denom = lambda * (a_a - g_a) - (a_b - g_b);
    if (std::abs(denom) < kCalibrationDenominatorFloor) {
        throw CalibrationError(CalibrationError::Reason::NoUniqueSolution,
                               "calibrate_gamma: calibration condition does not pin down gamma "
                               "(denominator " + numfmt::decimal(denom) + ")");
    }
    const double gamma = (lambda * a_a - a_b) / denom;
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
        throw CalibrationError(CalibrationError::Reason::Infeasible,
                               "calibrate_gamma: calibrated gamma = " + numfmt::decimal(gamma) +
                                   " lies outside [0,1]",
                               gamma);
    }
    return gamma;
}

struct Amplification {
    double exogenous_multiplier = 1.0;
    double mdri = 0.0;
};

inline Amplification mdri_index(double core, double d_clim, double d_reg) {
    if (!(core >= 0.0)) {
        throw DomainError("mdri: core index must be non-negative");
    }
    if (!(d_clim >= 0.0 && d_clim <= 1.0) || !(d_reg >= 0.0 && d_reg <= 1.0)) {
        throw DomainError("mdri: exogenous sub-indices must lie in [0,1]");
    }
    const double multiplier = (1.0 + d_clim) * (1.0 + d_reg);
    return {multiplier, core * multiplier};
}

inline MdriReport evaluate(const SubIndices &d, double gamma) {
    const auto c = core_index(d, gamma);
    const auto a = mdri_index(c.core, d.d_clim, d.d_reg);
    return {c.linear_term, c.coupling_term, c.core, a.exogenous_multiplier, a.mdri};
}

// ---------------------------------------------------------------------------
// Scenario comparison
// ---------------------------------------------------------------------------

/// What compare_scenarios needs from one assessed scenario.
struct ScenarioResult {
    std::string label;
    double r_loss = 0.0;
    double pv_lost = 0.0; ///< [MW]
    SubIndices sub;
};

struct ComparisonReport {
    std::string baseline_label;
    std::string multi_label;
    Calibration calibration;
    MdriReport baseline;
    MdriReport multi;
    double coupling_over_linear = 0.0;   ///< coupling / linear term of the multi scenario
    double coupling_share_of_core = 0.0; ///< coupling / core of the multi scenario
    double exogenous_amplification = 0.0; ///< multiplier - 1 of the multi scenario
    double core_ratio = 0.0;               ///< M(multi) / M(baseline), equals lambda
};

inline ComparisonReport compare_scenarios(const ScenarioResult &baseline, const ScenarioResult &multi) {
    ComparisonReport r;
    r.baseline_label = baseline.label;
    r.multi_label = multi.label;
    const auto exp = expected_loss(baseline.r_loss, baseline.pv_lost, multi.pv_lost);
    r.calibration.kappa = exp.kappa;
    r.calibration.r_loss_expected = exp.r_loss_expected;
    r.calibration.lambda = amplification_ratio(multi.r_loss, exp.r_loss_expected);
    r.calibration.gamma = calibrate_gamma(baseline.sub, multi.sub, r.calibration.lambda);
    r.baseline = evaluate(baseline.sub, r.calibration.gamma);
    r.multi = evaluate(multi.sub, r.calibration.gamma);
    r.coupling_over_linear = r.multi.linear_term > 0.0 ? r.multi.coupling_term / r.multi.linear_term : 0.0;
    r.coupling_share_of_core = r.multi.core > 0.0 ? r.multi.coupling_term / r.multi.core : 0.0;
    r.exogenous_amplification = r.multi.exogenous_multiplier - 1.0;
    r.core_ratio = r.baseline.core > 0.0 ? r.multi.core / r.baseline.core : 0.0;
    return r;
}

inline nlohmann::json to_json(const Calibration &c) {
    return {{"kappa", numfmt::round_sig(c.kappa)},
            {"r_loss_expected", numfmt::round_sig(c.r_loss_expected)},
            {"lambda", numfmt::round_sig(c.lambda)},
            {"gamma", numfmt::round_sig(c.gamma)}};
}

inline nlohmann::json to_json(const MdriReport &m) {
    return {{"linear_term", numfmt::round_sig(m.linear_term)},
            {"coupling_term", numfmt::round_sig(m.coupling_term)},
            {"core", numfmt::round_sig(m.core)},
            {"exogenous_multiplier", numfmt::round_sig(m.exogenous_multiplier)},
            {"mdri", numfmt::round_sig(m.mdri)}};
}

inline nlohmann::json to_json(const ComparisonReport &r) {
    return {{"baseline", {{"label", r.baseline_label}, {"index", to_json(r.baseline)}}},
            {"multi", {{"label", r.multi_label}, {"index", to_json(r.multi)}}},
            {"calibration", to_json(r.calibration)},
            {"coupling_over_linear", numfmt::round_sig(r.coupling_over_linear)},
            {"coupling_share_of_core", numfmt::round_sig(r.coupling_share_of_core)},
            {"exogenous_amplification", numfmt::round_sig(r.exogenous_amplification)},
            {"core_ratio", numfmt::round_sig(r.core_ratio)}};
}

/// Plain-text table with the linear term, coupling term, M and MDRI rows.
inline std::string format_table(const ComparisonReport &r) {
    auto cell = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%12.3f", v);
        return std::string(buf);
    };
    auto head = [](const std::string &s) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%12s", s.substr(0, 12).c_str());
        return std::string(buf);
    };
    std::ostringstream out;
    out << "Index                      " << head(r.baseline_label) << head(r.multi_label) << '\n';
    out << "Linear term (1-g)*mean     " << cell(r.baseline.linear_term) << cell(r.multi.linear_term) << '\n';
    out << "Coupling term g*geomean    " << cell(r.baseline.coupling_term) << cell(r.multi.coupling_term) << '\n';
    out << "M (w/o exogenous factors)  " << cell(r.baseline.core) << cell(r.multi.core) << '\n';
    out << "MDRI                       " << cell(r.baseline.mdri) << cell(r.multi.mdri) << '\n';
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "kappa = %.3f  R_exp = %.3f  Lambda = %.2f  gamma = %.3f\n"
                  "coupling adds %.1f%% over the linear term; exogenous factors add %.1f%%\n",
                  r.calibration.kappa, r.calibration.r_loss_expected, r.calibration.lambda, r.calibration.gamma,
                  100.0 * r.coupling_over_linear, 100.0 * r.exogenous_amplification);
    out << buf;
    return out.str();
}

} // namespace mdri
