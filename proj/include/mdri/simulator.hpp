#pragma once

/*
 * Reduced-order multi-machine frequency model.
 *
 * Per machine i (rating S_i, inertia H_i, damping D_i in pu):
 *   d delta_i / dt = 2 pi (f_i - f_nom)
 *   (2 H_i S_i / f_nom) d f_i / dt = P_m,i - P_e,i - D_i S_i (f_i - f_nom) / f_nom
 *   P_e,i = load_i - pv_i + sum_j K_ij sin(delta_i - delta_j)
 *   T_g d P_m,i / dt = clamp(P_ref,i - (S_i / R_i) (f_i - f_nom) / f_nom, 0, S_i) - P_m,i
 *
 * P_ref follows an optional secondary (AGC) integrator on the COI frequency,
 * shared among governed machines in proportion to rating. PV plants are
 * constant-power injections on a machine bus; events step them, or the load,
 * at grid instants. Integration is fixed-step RK4.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "numfmt.hpp"
#include "timeseries.hpp"

namespace mdri::sim {

struct Generator {
    std::string name;
    double inertia = 5.0;              ///< H [s]
    double damping = 1.0;              ///< D [pu on machine base]
    std::optional<double> droop = 0.05; ///< R [pu]; empty means no primary response
    double governor_tc = 2.0;          ///< T_g [s]
    double p_m0 = 0.0;                 ///< initial mechanical power [MW]
    double rating = 0.0;               ///< S [MW]
    std::optional<double> load;        ///< local load [MW]; shares of total_load by rating when absent
    std::optional<std::string> area;   ///< coupling group, used by area-based coupling configs
};

struct PvPlant {
    std::string name;
    std::string bus; ///< generator the plant injects at
    double rating = 0.0; ///< [MW]
    double output = 0.0; ///< initial output [MW]
};

/// Constant offset added to the reported machine frequencies.
struct OutputBias {
    double frequency = 0.0; ///< common offset [Hz]
    double spread = 0.0;    ///< linear fan across machines, total width [Hz]
};

struct GridModel {
    std::vector<Generator> generators;
    std::vector<PvPlant> pv_plants;
    std::vector<std::vector<double>> coupling; ///< K_ij [MW/rad], symmetric, zero diagonal
    double total_load = 0.0;                   ///< [MW]
    double f_nom = 60.0;                       ///< [Hz]
    double agc_gain = 0.0;                     ///< [MW / (Hz s)]
    OutputBias bias;

    static std::vector<std::vector<double>> uniform_coupling(std::size_t n, double k) {
        std::vector<std::vector<double>> m(n, std::vector<double>(n, k));
        for (std::size_t i = 0; i < n; ++i) {
            m[i][i] = 0.0;
        }
        return m;
    }

    /// K_ij = intra when machines i and j share an area, inter otherwise.
    static std::vector<std::vector<double>> area_coupling(const std::vector<Generator> &gens, double intra,
                                                          double inter) {
        const auto n = gens.size();
        std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            if (!gens[i].area) {
                throw ConfigError("area coupling requires an area for generator '" + gens[i].name + "'");
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i != j) {
                    m[i][j] = *gens[i].area == *gens[j].area ? intra : inter;
                }
            }
        }
        return m;
    }

    /// Machine-local loads, resolved from explicit values or rating shares.
    std::vector<double> local_loads() const {
        std::vector<double> out(generators.size(), 0.0);
        const bool any_explicit = std::any_of(generators.begin(), generators.end(),
                                              [](const Generator &g) { return g.load.has_value(); });
        if (any_explicit) {
            for (std::size_t i = 0; i < generators.size(); ++i) {
                out[i] = generators[i].load.value_or(0.0);
            }
            return out;
        }
        double rating = 0.0;
        for (const auto &g : generators) {
            rating += g.rating;
        }
        for (std::size_t i = 0; i < generators.size(); ++i) {
            out[i] = total_load * generators[i].rating / rating;
        }
        return out;
    }

    std::size_t generator_index(const std::string &name) const {
        for (std::size_t i = 0; i < generators.size(); ++i) {
            if (generators[i].name == name) {
                return i;
            }
        }
        throw ConfigError("unknown generator '" + name + "'");
    }

    std::size_t pv_index(const std::string &name) const {
        for (std::size_t j = 0; j < pv_plants.size(); ++j) {
            if (pv_plants[j].name == name) {
                return j;
            }
        }
        throw ConfigError("unknown PV plant '" + name + "'");
    }

    void validate() const {
        const auto n = generators.size();
        if (n == 0) {
            throw ConfigError("grid model has no generators");
        }
        std::set<std::string> names;
        for (const auto &g : generators) {
            if (!names.insert(g.name).second) {
                throw ConfigError("duplicate generator name '" + g.name + "'");
            }
            if (!(g.inertia > 0.0) || !(g.rating > 0.0)) {
                throw ConfigError("generator '" + g.name + "' needs positive inertia and rating");
            }
            if (g.damping < 0.0 || !(g.governor_tc > 0.0) || (g.droop && !(*g.droop > 0.0))) {
                throw ConfigError("generator '" + g.name + "' has invalid damping, droop or governor time constant");
            }
            if (g.p_m0 < 0.0 || g.p_m0 > g.rating * (1.0 + 1e-12)) {
                throw ConfigError("generator '" + g.name + "' initial power outside [0, rating]");
            }
        }
        std::set<std::string> pv_names;
        for (const auto &p : pv_plants) {
            if (!pv_names.insert(p.name).second) {
                throw ConfigError("duplicate PV plant name '" + p.name + "'");
            }
            generator_index(p.bus);
            if (!(p.rating > 0.0) || p.output < 0.0 || p.output > p.rating * (1.0 + 1e-12)) {
                throw ConfigError("PV plant '" + p.name + "' needs rating > 0 and output in [0, rating]");
            }
        }
        if (coupling.size() != n) {
            throw ConfigError("coupling matrix must be " + std::to_string(n) + "x" + std::to_string(n));
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (coupling[i].size() != n) {
                throw ConfigError("coupling matrix must be square");
            }
            if (coupling[i][i] != 0.0) {
                throw ConfigError("coupling matrix diagonal must be zero");
            }
            for (std::size_t j = 0; j < n; ++j) {
                if (coupling[i][j] < 0.0 || std::abs(coupling[i][j] - coupling[j][i]) > 1e-12 * (1.0 + coupling[i][j])) {
                    throw ConfigError("coupling matrix must be symmetric and non-negative");
                }
            }
        }
        if (!(f_nom > 0.0) || agc_gain < 0.0) {
            throw ConfigError("f_nom must be positive and agc_gain non-negative");
        }
        const auto loads = local_loads();
        double load_sum = 0.0;
        for (double l : loads) {
            load_sum += l;
        }
        if (std::abs(load_sum - total_load) > 1e-6 * std::max(1.0, total_load)) {
            throw ConfigError("local generator loads sum to " + numfmt::decimal(load_sum) + " MW, total_load is " +
                              numfmt::decimal(total_load) + " MW");
        }
        double supply = 0.0;
        for (const auto &g : generators) {
            supply += g.p_m0;
        }
        for (const auto &p : pv_plants) {
            supply += p.output;
        }
        if (std::abs(supply - total_load) > 1e-6 * std::max(1.0, total_load)) {
            throw ConfigError("initial power balance violated: generation " + numfmt::decimal(supply) +
                              " MW vs load " + numfmt::decimal(total_load) + " MW");
        }
    }
};

struct AttackEvent {
    enum class Kind { PvTrip, PvPowerRef, LoadStep, CommLoss };
    Kind kind = Kind::PvTrip;
    std::string target = "system";
    double time = 0.0;
    double magnitude = 0.0; ///< MW for PV events, fraction of load for load_step
};

inline const char *to_string(AttackEvent::Kind kind) {
    switch (kind) {
    case AttackEvent::Kind::PvTrip: return "pv_trip";
    case AttackEvent::Kind::PvPowerRef: return "pv_power_ref";
    case AttackEvent::Kind::LoadStep: return "load_step";
    case AttackEvent::Kind::CommLoss: return "comm_loss";
    }
    return "unknown";
}

struct SteadyState {
    std::vector<double> angles; ///< [rad], first machine is the reference
    std::vector<double> freq;   ///< [Hz]
};

/// Net injection P_m + pv - load at each machine bus.
inline std::vector<double> net_injection(const GridModel &model) {
    auto out = model.local_loads();
    for (auto &v : out) {
        v = -v;
    }
    for (std::size_t i = 0; i < model.generators.size(); ++i) {
        out[i] += model.generators[i].p_m0;
    }
    for (const auto &p : model.pv_plants) {
        out[model.generator_index(p.bus)] += p.output;
    }
    return out;
}

/// Angles with sum_j K_ij sin(d_i - d_j) = P_m,i + pv_i - load_i at nominal frequency.
inline SteadyState steady_state(const GridModel &model) {
    model.validate();
    const auto n = model.generators.size();
    SteadyState ss;
    ss.angles.assign(n, 0.0);
    ss.freq.assign(n, model.f_nom);
    if (n == 1) {
        return ss;
    }
    const auto injection = net_injection(model);
    const auto &K = model.coupling;
    const auto m = static_cast<Eigen::Index>(n - 1);

    // DC estimate for the starting point.
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd rhs(m);
    for (std::size_t i = 1; i < n; ++i) {
        rhs(Eigen::Index(i - 1)) = injection[i];
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                continue;
            }
            lap(Eigen::Index(i - 1), Eigen::Index(i - 1)) += K[i][j];
            if (j > 0) {
                lap(Eigen::Index(i - 1), Eigen::Index(j - 1)) -= K[i][j];
            }
        }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> dc(lap);
    if (dc.rank() < m) {
        throw InfeasibleError("steady_state: coupling network is disconnected");
    }
    Eigen::VectorXd x = dc.solve(rhs);

    double scale = 1.0;
    for (double p : injection) {
        scale = std::max(scale, std::abs(p));
    }
    bool converged = false;
    for (int iter = 0; iter < 100; ++iter) {
        Eigen::VectorXd residual(m);
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, m);
        auto angle = [&](std::size_t i) { return i == 0 ? 0.0 : x(Eigen::Index(i - 1)); };
        for (std::size_t i = 1; i < n; ++i) {
            double flow = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i || K[i][j] == 0.0) {
                    continue;
                }
                const double d = angle(i) - angle(j);
                flow += K[i][j] * std::sin(d);
                const double c = K[i][j] * std::cos(d);
                jac(Eigen::Index(i - 1), Eigen::Index(i - 1)) += c;
                if (j > 0) {
                    jac(Eigen::Index(i - 1), Eigen::Index(j - 1)) -= c;
                }
            }
            residual(Eigen::Index(i - 1)) = flow - injection[i];
        }
        if (!residual.allFinite()) {
            break;
        }
        if (residual.lpNorm<Eigen::Infinity>() < 1e-10 * scale) {
            converged = true;
            break;
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        if (lu.rank() < m) {
            break;
        }
        Eigen::VectorXd step = lu.solve(-residual);
        const double big = step.lpNorm<Eigen::Infinity>();
        if (big > 0.5) {
            step *= 0.5 / big;
        }
        x += step;
    }
    for (std::size_t i = 1; i < n; ++i) {
        ss.angles[i] = x(Eigen::Index(i - 1));
    }
    // Only the stable branch (every loaded tie below 90 degrees) counts.
    bool stable = converged;
    for (std::size_t i = 0; stable && i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (K[i][j] > 0.0 && std::abs(ss.angles[i] - ss.angles[j]) >= std::numbers::pi / 2) {
                stable = false;
                break;
            }
        }
    }
    if (!stable) {
        throw InfeasibleError("steady_state: no equilibrium, coupling too weak for the required transfers");
    }
    return ss;
}

/// PV capacity [MW] made unavailable by trip and power-reference events.
inline double pv_capacity_lost(const GridModel &model, const std::vector<AttackEvent> &events) {
    std::vector<double> output;
    for (const auto &p : model.pv_plants) {
        output.push_back(p.output);
    }
    auto ordered = events;
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const AttackEvent &a, const AttackEvent &b) { return a.time < b.time; });
    double lost = 0.0;
    for (const auto &e : ordered) {
        if (e.kind == AttackEvent::Kind::PvTrip) {
            const auto j = model.pv_index(e.target);
            const double cut = std::min(e.magnitude, output[j]);
            lost += cut;
            output[j] -= cut;
        } else if (e.kind == AttackEvent::Kind::PvPowerRef) {
            const auto j = model.pv_index(e.target);
            const double next = std::clamp(e.magnitude, 0.0, model.pv_plants[j].rating);
            lost += std::max(0.0, output[j] - next);
            output[j] = next;
        }
    }
    return lost;
}

inline void validate_events(const GridModel &model, const std::vector<AttackEvent> &events) {
    for (const auto &e : events) {
        if (!(e.time >= 0.0) || !std::isfinite(e.time)) {
            throw ConfigError(std::string(to_string(e.kind)) + " event needs a non-negative time");
        }
        switch (e.kind) {
        case AttackEvent::Kind::PvTrip: {
            const auto j = model.pv_index(e.target);
            if (!(e.magnitude >= 0.0) || e.magnitude > model.pv_plants[j].rating * (1.0 + 1e-12)) {
                throw ConfigError("pv_trip on '" + e.target + "' must lie within [0, rating]");
            }
            break;
        }
        case AttackEvent::Kind::PvPowerRef:
            model.pv_index(e.target);
            if (!(e.magnitude >= 0.0)) {
                throw ConfigError("pv_power_ref on '" + e.target + "' needs a non-negative setpoint");
            }
            break;
        case AttackEvent::Kind::LoadStep:
            if (e.target != "system") {
                throw ConfigError("load_step applies to target 'system' only");
            }
            if (!(e.magnitude > -1.0)) {
                throw ConfigError("load_step fraction must exceed -1");
            }
            break;
        case AttackEvent::Kind::CommLoss:
            if (e.target != "system") {
                model.pv_index(e.target);
            }
            break;
        }
    }
}

struct SimulationOptions {
    double horizon = 15.0; ///< [s]
    double dt = 0.01;      ///< [s]
    std::string label = "simulated";
};

namespace detail {

struct State {
    std::vector<double> angle;
    std::vector<double> freq;
    std::vector<double> p_mech;
    double agc = 0.0;
};

inline void axpy(State &out, const State &base, const State &slope, double h) {
    const auto n = base.angle.size();
    for (std::size_t i = 0; i < n; ++i) {
        out.angle[i] = base.angle[i] + h * slope.angle[i];
        out.freq[i] = base.freq[i] + h * slope.freq[i];
        out.p_mech[i] = base.p_mech[i] + h * slope.p_mech[i];
    }
    out.agc = base.agc + h * slope.agc;
}

class SwingSystem {
  public:
    explicit SwingSystem(const GridModel &model)
        : model_(model), load_(model.local_loads()), pv_bus_(model.pv_plants.size()) {
        for (std::size_t j = 0; j < model.pv_plants.size(); ++j) {
            pv_bus_[j] = model.generator_index(model.pv_plants[j].bus);
            pv_.push_back(model.pv_plants[j].output);
        }
        double governed = 0.0;
        for (const auto &g : model.generators) {
            h_total_ += g.inertia;
            if (g.droop) {
                governed += g.rating;
            }
        }
        for (const auto &g : model.generators) {
            participation_.push_back(g.droop && governed > 0.0 ? g.rating / governed : 0.0);
        }
    }

    void apply(const AttackEvent &e) {
        switch (e.kind) {
        case AttackEvent::Kind::PvTrip: {
            const auto j = model_.pv_index(e.target);
            pv_[j] -= std::min(e.magnitude, pv_[j]);
            break;
        }
        case AttackEvent::Kind::PvPowerRef: {
            const auto j = model_.pv_index(e.target);
            pv_[j] = std::clamp(e.magnitude, 0.0, model_.pv_plants[j].rating);
            break;
        }
        case AttackEvent::Kind::LoadStep:
            for (auto &l : load_) {
                l *= 1.0 + e.magnitude;
            }
            break;
        case AttackEvent::Kind::CommLoss:
            break;
        }
    }

    void derivative(const State &s, State &ds) const {
        const auto &gens = model_.generators;
        const auto n = gens.size();
        const double f_nom = model_.f_nom;
        std::vector<double> local(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            local[i] = load_[i];
        }
        for (std::size_t j = 0; j < pv_.size(); ++j) {
            local[pv_bus_[j]] -= pv_[j];
        }
        double f_coi = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            f_coi += gens[i].inertia * s.freq[i];
        }
        f_coi /= h_total_;

        for (std::size_t i = 0; i < n; ++i) {
            const auto &g = gens[i];
            double p_elec = local[i];
            for (std::size_t j = 0; j < n; ++j) {
                const double k = model_.coupling[i][j];
                if (k != 0.0) {
                    p_elec += k * std::sin(s.angle[i] - s.angle[j]);
                }
            }
            const double dev = s.freq[i] - f_nom;
            ds.angle[i] = 2.0 * std::numbers::pi * dev;
            ds.freq[i] = (s.p_mech[i] - p_elec - g.damping * g.rating * dev / f_nom) * f_nom /
                         (2.0 * g.inertia * g.rating);
            const double p_ref = g.p_m0 + participation_[i] * model_.agc_gain * s.agc;
            double target = p_ref;
            if (g.droop) {
                target -= (g.rating / *g.droop) * dev / f_nom;
            }
            target = std::clamp(target, 0.0, g.rating);
            ds.p_mech[i] = (target - s.p_mech[i]) / g.governor_tc;
        }
        ds.agc = model_.agc_gain > 0.0 ? -(f_coi - f_nom) : 0.0;
    }

    void rk4(State &s, double dt, std::array<State, 5> &scratch) const {
        auto &[k1, k2, k3, k4, tmp] = scratch;
        derivative(s, k1);
        axpy(tmp, s, k1, 0.5 * dt);
        derivative(tmp, k2);
        axpy(tmp, s, k2, 0.5 * dt);
        derivative(tmp, k3);
        axpy(tmp, s, k3, dt);
        derivative(tmp, k4);
        const auto n = s.angle.size();
        const double w = dt / 6.0;
        for (std::size_t i = 0; i < n; ++i) {
            s.angle[i] += w * (k1.angle[i] + 2.0 * k2.angle[i] + 2.0 * k3.angle[i] + k4.angle[i]);
            s.freq[i] += w * (k1.freq[i] + 2.0 * k2.freq[i] + 2.0 * k3.freq[i] + k4.freq[i]);
            s.p_mech[i] += w * (k1.p_mech[i] + 2.0 * k2.p_mech[i] + 2.0 * k3.p_mech[i] + k4.p_mech[i]);
        }
        s.agc += w * (k1.agc + 2.0 * k2.agc + 2.0 * k3.agc + k4.agc);
    }

    const std::vector<double> &pv() const noexcept { return pv_; }
    double total_load() const {
        double acc = 0.0;
        for (double l : load_) {
            acc += l;
        }
        return acc;
    }

  private:
    const GridModel &model_;
    std::vector<double> load_;
    std::vector<double> pv_;
    std::vector<std::size_t> pv_bus_;
    std::vector<double> participation_;
    double h_total_ = 0.0;
};

} // namespace detail

/// Integrates the model over [0, horizon] and returns every channel on the grid.
inline Trajectory simulate(const GridModel &model, std::vector<AttackEvent> events, const SimulationOptions &opt) {
    model.validate();
    validate_events(model, events);
    if (!(opt.dt > 0.0 && opt.dt <= 0.05)) {
        throw ConfigError("simulation step dt must lie in (0, 0.05] s");
    }
    if (!(opt.horizon > 0.0)) {
        throw ConfigError("simulation horizon must be positive");
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const AttackEvent &a, const AttackEvent &b) { return a.time < b.time; });

    const auto n = model.generators.size();
    const auto steps = static_cast<std::size_t>(std::llround(opt.horizon / opt.dt));
    const auto init = steady_state(model);

    detail::State state{init.angles, init.freq, {}, 0.0};
    for (const auto &g : model.generators) {
        state.p_mech.push_back(g.p_m0);
    }
    std::array<detail::State, 5> scratch;
    for (auto &s : scratch) {
        s = state;
    }
    detail::SwingSystem system(model);

    TrajectoryData out;
    out.label = opt.label;
    out.dt = opt.dt;
    out.t.resize(steps + 1);
    std::vector<double> fan(n, 0.0);
    for (std::size_t i = 0; i < n && n > 1; ++i) {
        fan[i] = model.bias.spread * (double(i) / double(n - 1) - 0.5);
    }
    for (std::size_t i = 0; i < n; ++i) {
        out.generators.push_back({model.generators[i].name, model.generators[i].inertia, Series(steps + 1)});
    }
    for (const auto &p : model.pv_plants) {
        out.pv.push_back({p.name, p.rating, Series(steps + 1)});
    }
    out.load.emplace(steps + 1);

    std::size_t next_event = 0;
    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = double(k) * opt.dt;
        while (next_event < events.size() && events[next_event].time <= t + 1e-9 * opt.dt) {
            system.apply(events[next_event]);
            ++next_event;
        }
        out.t[k] = t;
        for (std::size_t i = 0; i < n; ++i) {
            out.generators[i].freq[k] = state.freq[i] + model.bias.frequency + fan[i];
        }
        for (std::size_t j = 0; j < model.pv_plants.size(); ++j) {
            out.pv[j].output[k] = system.pv()[j];
        }
        (*out.load)[k] = system.total_load();
        if (k == steps) {
            break;
        }
        system.rk4(state, opt.dt, scratch);
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(state.freq[i]) || !std::isfinite(state.angle[i]) || !std::isfinite(state.p_mech[i])) {
                throw IntegrationError("simulation diverged at t = " + numfmt::decimal(t + opt.dt) + " s");
            }
        }
    }
    return Trajectory::make(std::move(out));
}

} // namespace mdri::sim
