// Command-line front end: simulate, assess, compare, calibrate, emit-plots.
//
// Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mdri.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<double> parse_list(const std::string &text, std::size_t expected, const std::string &flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double v = 0.0;
        if (!mdri::numfmt::parse_double(item, v)) {
            throw mdri::ConfigError(flag + ": '" + item + "' is not a number");
        }
        out.push_back(v);
    }
    if (out.size() != expected) {
        throw mdri::ConfigError(flag + ": expected " + std::to_string(expected) + " comma-separated values");
    }
    return out;
}

void write_text(const fs::path &path, const std::string &text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw mdri::ConfigError("cannot write '" + path.string() + "'");
    }
    out << text;
}

int cmd_simulate(const std::string &config, const std::string &out) {
    const auto cfg = mdri::load_scenario_config(config);
    if (!cfg.simulation) {
        throw mdri::ConfigError(config + ": simulate needs a grid_model");
    }
    const auto traj = mdri::scenario_trajectory(cfg);
    fs::path path(out);
    if (fs::exists(mdri::sidecar_path(path)) && fs::exists(config) &&
        fs::equivalent(mdri::sidecar_path(path), config)) {
        throw mdri::ConfigError("--out " + out + " would overwrite the scenario config with its sidecar");
    }
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    mdri::save_trajectory(traj, path);
    std::cerr << "wrote " << traj.size() << " samples to " << path.string() << " (+ "
              << mdri::sidecar_path(path).filename().string() << ")\n";
    return 0;
}

int cmd_assess(const std::string &config, const std::string &out_dir, bool plots) {
    const auto cfg = mdri::load_scenario_config(config);
    const auto assessment = mdri::run_assess(cfg);
    const auto text = mdri::dump_report(mdri::to_json(assessment));
    std::cout << text;
    if (!out_dir.empty()) {
        write_text(fs::path(out_dir) / "report.json", text);
    }
    if (plots) {
        mdri::write_plot_files(assessment, out_dir.empty() ? fs::path(".") : fs::path(out_dir));
    }
    return 0;
}

int cmd_compare(const std::string &baseline, const std::string &multi, const std::string &inject,
                const std::string &out, bool table) {
    const auto cfg_a = mdri::load_scenario_config(baseline);
    const auto cfg_b = mdri::load_scenario_config(multi);
    std::optional<mdri::InjectedPair> injected;
    if (!inject.empty()) {
        try {
            injected = mdri::parse_injected_pair(mdri::read_json_file(inject));
        } catch (const mdri::ConfigError &e) {
            throw mdri::ConfigError(inject + ": " + e.what());
        }
    }
    const auto cmp = mdri::run_compare(cfg_a, cfg_b, injected);
    const auto text = mdri::dump_report(mdri::to_json(cmp));
    if (!out.empty()) {
        write_text(out, text);
    }
    if (table) {
        std::cout << mdri::format_table(cmp.report);
    } else {
        std::cout << text;
    }
    return 0;
}

int cmd_calibrate(const std::string &base_idx, const std::string &multi_idx, std::optional<double> lambda,
                  const std::string &r_loss, const std::string &pv_lost) {
    const auto a = parse_list(base_idx, 3, "--baseline-indices");
    const auto b = parse_list(multi_idx, 3, "--multi-indices");
    const mdri::SubIndices da{a[0], a[1], a[2], 0.0, 0.0};
    const mdri::SubIndices db{b[0], b[1], b[2], 0.0, 0.0};
    mdri::Calibration cal;
    if (lambda) {
        if (!r_loss.empty() || !pv_lost.empty()) {
            throw mdri::ConfigError("give either --lambda or --r-loss with --pv-lost, not both");
        }
        cal.lambda = *lambda;
    } else {
        if (r_loss.empty() || pv_lost.empty()) {
            throw mdri::ConfigError("calibrate needs --lambda, or both --r-loss and --pv-lost");
        }
        const auto r = parse_list(r_loss, 2, "--r-loss");
        const auto p = parse_list(pv_lost, 2, "--pv-lost");
        const auto exp = mdri::expected_loss(r[0], p[0], p[1]);
        cal.kappa = exp.kappa;
        cal.r_loss_expected = exp.r_loss_expected;
        cal.lambda = mdri::amplification_ratio(r[1], exp.r_loss_expected);
    }
    cal.gamma = mdri::calibrate_gamma(da, db, cal.lambda);
    std::cout << mdri::dump_report(mdri::to_json(cal));
    return 0;
}

int cmd_emit_plots(const std::string &config, const std::string &out_dir) {
    const auto cfg = mdri::load_scenario_config(config);
    const auto assessment = mdri::run_assess(cfg);
    mdri::write_plot_files(assessment, out_dir);
    std::cerr << "wrote phi.csv, freq.csv, pv.csv to " << out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Multidimensional resilience index for cyber-physical power systems"};
    app.require_subcommand(1);

    std::string config, out, baseline, multi, inject, base_idx, multi_idx, r_loss, pv_lost;
    bool plots = false, table = false;
    std::optional<double> lambda;

    auto *simulate = app.add_subcommand("simulate", "Simulate a grid_model scenario and write its trajectory");
    simulate->add_option("--config", config, "Scenario JSON")->required();
    simulate->add_option("--out", out, "Output CSV (sidecar JSON written next to it)")->required();

    auto *assess = app.add_subcommand("assess", "Assess one scenario: performance, phases, loss, sub-indices");
    assess->add_option("--config", config, "Scenario JSON")->required();
    assess->add_option("--out", out, "Directory for report.json (and plot CSVs)");
    assess->add_flag("--plots", plots, "Also write phi.csv, freq.csv and pv.csv");

    auto *compare = app.add_subcommand("compare", "Calibrate gamma on a scenario pair and evaluate the index");
    compare->add_option("--baseline", baseline, "Single-vector scenario JSON")->required();
    compare->add_option("--multi", multi, "Multi-vector scenario JSON")->required();
    compare->add_option("--inject-metrics", inject, "Measured metrics JSON replacing the trajectory stage");
    compare->add_option("--out", out, "Write the JSON report to this file");
    compare->add_flag("--table", table, "Print a text table instead of JSON");

    auto *calibrate = app.add_subcommand("calibrate", "Solve for gamma from endogenous sub-indices");
    calibrate->add_option("--baseline-indices", base_idx, "d_phy,d_op,d_cyb of the baseline")->required();
    calibrate->add_option("--multi-indices", multi_idx, "d_phy,d_op,d_cyb of the multi-vector scenario")->required();
    calibrate->add_option("--lambda", lambda, "Amplification ratio");
    calibrate->add_option("--r-loss", r_loss, "R_loss baseline,multi");
    calibrate->add_option("--pv-lost", pv_lost, "Lost PV MW baseline,multi");

    auto *emit = app.add_subcommand("emit-plots", "Write plot-ready CSV series for a scenario");
    emit->add_option("--config", config, "Scenario JSON")->required();
    emit->add_option("--out", out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*simulate) return cmd_simulate(config, out);
        if (*assess) return cmd_assess(config, out, plots);
        if (*compare) return cmd_compare(baseline, multi, inject, out, table);
        if (*calibrate) return cmd_calibrate(base_idx, multi_idx, lambda, r_loss, pv_lost);
        if (*emit) return cmd_emit_plots(config, out);
    } catch (const mdri::CalibrationError &e) {
        std::cerr << "error: " << e.what() << "\n";
        if (e.reason() == mdri::CalibrationError::Reason::Infeasible) {
            std::cerr << "raw gamma: " << mdri::numfmt::decimal(e.raw_gamma()) << "\n";
        }
        return e.exit_code();
    } catch (const mdri::Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
