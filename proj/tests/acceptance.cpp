// End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "mdri.hpp"

using namespace mdri;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scenario(const std::string &name) { return fs::path(MDRI_SCENARIO_DIR) / name; }

/// Collects the failed expectations of one criterion.
class Check {
  public:
    void near(const std::string &what, double got, double want, double tol) {
        if (!(std::abs(got - want) <= tol)) {
            fail(what + " = " + numfmt::decimal(got) + ", expected " + numfmt::decimal(want) + " +/- " +
                 numfmt::decimal(tol));
        }
    }
    void relative(const std::string &what, double got, double want, double rel) {
        if (!(std::abs(got - want) <= rel * std::abs(want))) {
            fail(what + " = " + numfmt::decimal(got) + ", expected " + numfmt::decimal(want) + " (relative " +
                 numfmt::decimal(rel) + ")");
        }
    }
    void that(const std::string &what, bool ok) {
        if (!ok) {
            fail(what);
        }
    }
    void fail(const std::string &msg) { failures_.push_back(msg); }
    const std::vector<std::string> &failures() const { return failures_; }

  private:
    std::vector<std::string> failures_;
};

struct Criterion {
    int id;
    std::string name;
    double budget_s; ///< runtime limit, <= 0 for none
    std::function<void(Check &)> body;
};

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_command(const std::string &cmd) {
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int run_cli(const std::string &args, const fs::path &out) {
    return run_command(std::string("\"") + MDRI_CLI_PATH + "\" " + args + " > \"" + out.string() + "\"");
}

fs::path scratch(const std::string &name) {
    const auto dir = fs::temp_directory_path() / "mdri_acceptance";
    fs::create_directories(dir);
    return dir / name;
}

std::string quoted(const fs::path &p) { return "\"" + p.string() + "\""; }

// ---------------------------------------------------------------------------

void sub_index_replication(Check &c) {
    const auto out = scratch("measured.json");
    const int code = run_cli("compare --baseline " + quoted(scenario("scenario_A.json")) + " --multi " +
                                 quoted(scenario("scenario_B.json")) + " --inject-metrics " +
                                 quoted(scenario("measured_metrics.json")),
                             out);
    if (code != 0) {
        c.fail("compare exited with " + std::to_string(code));
        return;
    }
    const auto j = json::parse(slurp(out));
    const double want[2][5] = {{0.127, 0.274, 0.056, 0.000, 0.000}, {0.743, 1.000, 0.667, 0.150, 0.600}};
    const char *keys[5] = {"d_phy", "d_op", "d_cyb", "d_clim", "d_reg"};
    const char *sides[2] = {"baseline", "multi"};
    for (int s = 0; s < 2; ++s) {
        const auto &sub = j.at(sides[s]).at("assessment").at("sub_indices");
        for (int k = 0; k < 5; ++k) {
            c.near(std::string(sides[s]) + "." + keys[k], sub.at(keys[k]).get<double>(), want[s][k], 0.001);
        }
    }
}

Comparison published_comparison() {
    return run_compare(load_scenario_config(scenario("scenario_A.json")),
                       load_scenario_config(scenario("scenario_B.json")),
                       parse_injected_pair(read_json_file(scenario("published_indices.json"))));
}

void calibration_replication(Check &c) {
    const auto cal = published_comparison().report.calibration;
    c.near("kappa", cal.kappa, 5.868, 0.001);
    c.near("R_exp", cal.r_loss_expected, 0.179, 0.001);
    c.near("Lambda", cal.lambda, 5.63, 0.01);
    c.near("gamma", cal.gamma, 0.381, 0.002);
}

void mdri_replication(Check &c) {
    const auto r = published_comparison().report;
    c.near("linear A", r.baseline.linear_term, 0.094, 0.002);
    c.near("linear B", r.multi.linear_term, 0.497, 0.002);
    c.near("coupling A", r.baseline.coupling_term, 0.048, 0.002);
    c.near("coupling B", r.multi.coupling_term, 0.302, 0.002);
    c.near("M A", r.baseline.core, 0.142, 0.002);
    c.near("M B", r.multi.core, 0.799, 0.002);
    c.near("MDRI A", r.baseline.mdri, 0.142, 0.002);
    c.near("MDRI B", r.multi.mdri, 1.470, 0.002);
    c.near("coupling contribution [%]", 100.0 * r.coupling_over_linear, 60.6, 1.0);
    c.near("exogenous amplification [%]", 100.0 * r.exogenous_amplification, 84.0, 1.0);
}

/// phi sampled on a 0.01 s grid from breakpoints (time, value), linear in between.
PerformanceSeries piecewise(const std::vector<std::pair<double, double>> &pts, double t_end,
                            const PerformanceParams &p) {
    Series t, phi;
    for (int k = 0; k * 0.01 <= t_end + 1e-9; ++k) {
        const double tk = k * 0.01;
        t.push_back(tk);
        double v = pts.back().second;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            if (tk <= pts[i + 1].first + 1e-12) {
                const double frac = std::clamp((tk - pts[i].first) / (pts[i + 1].first - pts[i].first), 0.0, 1.0);
                v = pts[i].second + frac * (pts[i + 1].second - pts[i].second);
                break;
            }
        }
        phi.push_back(v);
    }
    return make_series(t, phi, phi, p);
}

void quadrature_oracle(Check &c) {
    PerformanceParams p;
    p.t0 = 2.0;
    p.horizon = 10.0;
    const double phi0 = 0.8;

    // Triangle: down by d over a seconds, back up over a seconds.
    {
        const double a = 1.5, d = 0.3;
        const auto s = piecewise({{0.0, phi0}, {2.0, phi0}, {2.0 + a, phi0 - d}, {2.0 + 2 * a, phi0}}, 15.0, p);
        c.relative("triangle", resilience_loss(s, p), a * d / phi0, 1e-10);
    }
    // Trapezoid: ramp a, hold b, ramp a.
    {
        const double a = 0.5, b = 3.0, d = 0.25;
        const auto s = piecewise({{0.0, phi0},
                                  {2.0, phi0},
                                  {2.0 + a, phi0 - d},
                                  {2.0 + a + b, phi0 - d},
                                  {2.0 + 2 * a + b, phi0}},
                                 15.0, p);
        c.relative("trapezoid", resilience_loss(s, p), d * (a + b) / phi0, 1e-10);
    }
    // Ramp down at slope m, collapse declared after cc seconds: full deficit afterwards.
    {
        const double m = 0.1, cc = 4.0;
        auto s = piecewise({{0.0, phi0}, {2.0, phi0}, {10.0, phi0 - 8.0 * m}}, 15.0, p);
        s.t_col = 2.0 + cc;
        apply_truncation(s);
        const double area = 0.5 * m * cc * cc + phi0 * (p.horizon - cc);
        c.relative("collapse-truncated ramp", resilience_loss(s, p), area / phi0, 1e-10);
    }
}

void calibration_round_trip(Check &c) {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> lo(0.01, 0.6), hi(0.2, 1.0), g(0.0, 1.0);
    int checked = 0, rejected = 0;
    while (checked < 1000) {
        const SubIndices a{lo(gen), lo(gen), lo(gen), 0.0, 0.0};
        const SubIndices b{hi(gen), hi(gen), hi(gen), 0.0, 0.0};
        const double gamma = g(gen);
        const double lambda = core_index(b, gamma).core / core_index(a, gamma).core;
        const double denom = lambda * (endogenous_mean(a) - endogenous_geomean(a)) -
                             (endogenous_mean(b) - endogenous_geomean(b));
        if (std::abs(denom) < kCalibrationDenominatorFloor) {
            continue;
        }
        ++checked;
        try {
            const double fitted = calibrate_gamma(a, b, lambda);
            const double ratio = core_index(b, fitted).core / core_index(a, fitted).core;
            c.relative("core ratio at fitted gamma, pair " + std::to_string(checked), ratio, lambda, 1e-9);
        } catch (const Error &e) {
            c.fail("pair " + std::to_string(checked) + ": " + e.what());
        }
        const double top = std::max(core_index(b, 0.0).core / core_index(a, 0.0).core,
                                    core_index(b, 1.0).core / core_index(a, 1.0).core);
        try {
            calibrate_gamma(a, b, 1.5 * top);
            c.fail("pair " + std::to_string(checked) + ": infeasible Lambda accepted");
        } catch (const CalibrationError &) {
            ++rejected;
        }
    }
    try {
        const SubIndices a{0.2, 0.3, 0.4, 0.0, 0.0};
        calibrate_gamma(a, a, 1.0);
        c.fail("identical pair accepted");
    } catch (const CalibrationError &) {
    }
    c.that("1000 infeasible cases rejected", rejected == 1000);
}

void simulator_properties(Check &c) {
    const auto cfg_a = load_scenario_config(scenario("scenario_A.json"));
    const auto cfg_b = load_scenario_config(scenario("scenario_B.json"));

    // (a) quiescent run
    {
        auto model = cfg_a.simulation->model;
        model.bias = {};
        const auto traj = sim::simulate(model, {}, {15.0, 0.01, "quiet"});
        double worst = 0.0;
        for (const auto &g : traj.generators()) {
            for (double f : g.freq) {
                worst = std::max(worst, std::abs(f - model.f_nom));
            }
        }
        c.that("(a) no-event deviation " + numfmt::decimal(worst) + " Hz within 1e-6", worst <= 1e-6);
    }
    // (b) phase structure
    const auto a = run_assess(cfg_a);
    const auto b = run_assess(cfg_b);
    c.that("(b) A has 5 phases", a.phases->phases.size() == 5);
    c.that("(b) A recovered", a.phases->recovered && !a.series->collapsed());
    c.that("(b) B has 4 phases", b.phases->phases.size() == 4);
    c.that("(b) B collapse detected", b.series->collapsed() && !b.phases->recovered);

    // (c) monotone in tripped capacity
    {
        auto model = cfg_a.simulation->model;
        double prev_nadir = std::numeric_limits<double>::infinity(), prev_rocof = -1.0;
        for (double level : {0.0, 38.0, 76.0, 114.0, 152.0, 190.0}) {
            const auto traj =
                sim::simulate(model, {{sim::AttackEvent::Kind::PvTrip, "PV4", 7.0, level}}, {15.0, 0.01, "sweep"});
            const auto coi = coi_frequency(traj);
            const double nadir = *std::min_element(coi.begin(), coi.end());
            const double rocof = max_rocof(coi, traj.dt(), cfg_a.operational.rocof_window);
            const bool first = level == 0.0;
            c.that("(c) nadir falls at " + numfmt::decimal(level) + " MW", first || nadir < prev_nadir);
            c.that("(c) RoCoF rises at " + numfmt::decimal(level) + " MW", first || rocof > prev_rocof);
            prev_nadir = nadir;
            prev_rocof = rocof;
        }
    }
    // (d) step-size sensitivity
    for (const auto *cfg : {&cfg_a, &cfg_b}) {
        auto fine = *cfg;
        fine.simulation->dt /= 2.0;
        const double coarse_loss = (cfg == &cfg_a ? a : b).metrics.r_loss;
        const double fine_loss = run_assess(fine).metrics.r_loss;
        c.relative("(d) " + cfg->label + " R_loss under dt/2", fine_loss, coarse_loss, 0.005);
    }
}

void invariant_suites(Check &c) {
    const int code = run_command(std::string("\"") + MDRI_PROPERTIES_PATH + "\" --gtest_brief=1 > " +
                                 quoted(scratch("properties.log")) + " 2>&1");
    if (code != 0) {
        c.fail("property suite exited with " + std::to_string(code) + "; log: " + scratch("properties.log").string());
    }
}

void determinism(Check &c) {
    const std::string cmp = "compare --baseline " + quoted(scenario("scenario_A.json")) + " --multi " +
                            quoted(scenario("scenario_B.json")) + " --inject-metrics " +
                            quoted(scenario("published_indices.json"));
    c.that("first compare run", run_cli(cmp, scratch("det1.json")) == 0);
    c.that("second compare run", run_cli(cmp, scratch("det2.json")) == 0);
    const auto first = slurp(scratch("det1.json"));
    c.that("compare report non-empty", !first.empty());
    c.that("compare reports byte-identical", first == slurp(scratch("det2.json")));

    const std::string assess = "assess --config " + quoted(scenario("scenario_B.json"));
    c.that("first assess run", run_cli(assess, scratch("det3.json")) == 0);
    c.that("second assess run", run_cli(assess, scratch("det4.json")) == 0);
    c.that("simulated assessment reports byte-identical", slurp(scratch("det3.json")) == slurp(scratch("det4.json")));
}

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "Sub-index replication from measured metrics", 1.0, sub_index_replication},
        {2, "Calibration replication", 1.0, calibration_replication},
        {3, "MDRI replication", 1.0, mdri_replication},
        {4, "Resilience-loss quadrature oracle", 0.0, quadrature_oracle},
        {5, "Calibration round trip (1000 pairs)", 0.0, calibration_round_trip},
        {6, "Simulator properties", 30.0, simulator_properties},
        {7, "Invariant suites", 0.0, invariant_suites},
        {8, "Determinism", 0.0, determinism},
    };
    int failed = 0;
    for (const auto &cr : criteria) {
        Check check;
        const auto start = std::chrono::steady_clock::now();
        try {
            cr.body(check);
        } catch (const std::exception &e) {
            check.fail(std::string("unexpected exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (cr.budget_s > 0.0 && secs > cr.budget_s) {
            check.fail("runtime " + numfmt::decimal(numfmt::round_sig(secs, 3)) + " s exceeds " +
                       numfmt::decimal(cr.budget_s) + " s");
        }
        const bool ok = check.failures().empty();
        failed += ok ? 0 : 1;
        std::printf("[%s] %d. %s (%.3f s)\n", ok ? "PASS" : "FAIL", cr.id, cr.name.c_str(), secs);
        for (const auto &msg : check.failures()) {
            std::printf("       - %s\n", msg.c_str());
        }
    }
    std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
