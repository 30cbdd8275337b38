#pragma once

/*
 * Trajectory data model: a uniform time grid carrying per-generator frequency
 * channels (with their inertia constants), PV plant output channels and an
 * optional load channel. Also the two derived frequency signals every
 * downstream metric consumes, the center-of-inertia frequency and the
 * inter-generator spread.
 *
 * On-disk forms:
 *   CSV      header `t,gen:<name>,...,pv:<name>,...[,load]`, one row per sample,
 *            plus a JSON sidecar {"inertia":{}, "pv_rating":{}, "dt":s, "label":str}
 *   JSON     the sidecar fields plus "t", optional "load", and "gen"/"pv" arrays of
 *            {"name": str, "values": [...]} in channel order
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "numfmt.hpp"

namespace mdri {

using Series = std::vector<double>;

struct GeneratorChannel {
    std::string name;
    double inertia = 0.0; ///< H constant [s]
    Series freq;          ///< [Hz]
};

struct PvChannel {
    std::string name;
    double rating = 0.0; ///< [MW]
    Series output;       ///< [MW]
};

/// Unvalidated trajectory contents. Hand to Trajectory::make().
struct TrajectoryData {
    std::string label;
    Series t;
    std::vector<GeneratorChannel> generators;
    std::vector<PvChannel> pv;
    std::optional<Series> load;
    std::optional<double> dt; ///< declared step; derived from t when absent
};

/// Validated, immutable trajectory.
class Trajectory {
  public:
    static constexpr double kGridTolerance = 1e-9;

    static Trajectory make(TrajectoryData data) {
        validate(data);
        Trajectory traj;
        if (!data.dt) {
            data.dt = data.t.size() > 1 ? (data.t.back() - data.t.front()) / double(data.t.size() - 1)
                                        : 0.0;
        }
        traj.data_ = std::move(data);
        return traj;
    }

    const std::string &label() const noexcept { return data_.label; }
    const Series &time() const noexcept { return data_.t; }
    double dt() const noexcept { return *data_.dt; }
    std::size_t size() const noexcept { return data_.t.size(); }
    double start() const { return data_.t.front(); }
    double end() const { return data_.t.back(); }
    double horizon() const { return end() - start(); }

    const std::vector<GeneratorChannel> &generators() const noexcept { return data_.generators; }
    const std::vector<PvChannel> &pv() const noexcept { return data_.pv; }
    const std::optional<Series> &load() const noexcept { return data_.load; }

    double pv_total_rating() const {
        double total = 0.0;
        for (const auto &p : data_.pv) {
            total += p.rating;
        }
        return total;
    }

    /// Index of the first grid point at or after `time` (clamped to the grid).
    std::size_t index_at(double time) const {
        const double raw = (time - start()) / dt();
        const double rounded = std::round(raw);
        double idx = std::abs(raw - rounded) < 1e-6 ? rounded : std::ceil(raw);
        idx = std::clamp(idx, 0.0, double(size() - 1));
        return static_cast<std::size_t>(idx);
    }

    bool contains(double time) const {
        const double slack = 1e-9 * std::max(1.0, dt());
        return time >= start() - slack && time <= end() + slack;
    }

    const TrajectoryData &data() const noexcept { return data_; }

  private:
    Trajectory() = default;

    static void validate(const TrajectoryData &d) {
        if (d.generators.empty()) {
            throw SchemaError("trajectory has no generator channels");
        }
        if (d.t.size() < 2) {
            throw GridError("trajectory needs at least two samples");
        }
        for (std::size_t k = 0; k < d.t.size(); ++k) {
            if (!std::isfinite(d.t[k])) {
                throw GridError("non-finite timestamp at index " + std::to_string(k));
            }
        }
        const double step = d.dt ? *d.dt : d.t[1] - d.t[0];
        if (!(step > 0.0)) {
            throw GridError("time grid is not strictly increasing at index 1");
        }
        for (std::size_t k = 1; k < d.t.size(); ++k) {
            const double delta = d.t[k] - d.t[k - 1];
            if (!(delta > 0.0)) {
                throw GridError("time grid is not strictly increasing at index " + std::to_string(k));
            }
            if (std::abs(delta - step) > kGridTolerance * step + 64 * 2.2e-16 * std::abs(d.t[k])) {
                throw GridError("time grid is not uniform at index " + std::to_string(k) +
                                " (step " + numfmt::decimal(delta) + " s, expected " +
                                numfmt::decimal(step) + " s)");
            }
        }
        const auto n = d.t.size();
        for (const auto &g : d.generators) {
            if (!(g.inertia > 0.0) || !std::isfinite(g.inertia)) {
                throw SchemaError("generator '" + g.name + "' needs a positive inertia constant");
            }
            if (g.freq.size() != n) {
                throw SchemaError("generator '" + g.name + "' has " + std::to_string(g.freq.size()) +
                                  " samples, expected " + std::to_string(n));
            }
        }
        for (const auto &p : d.pv) {
            if (p.output.size() != n) {
                throw SchemaError("pv plant '" + p.name + "' has " + std::to_string(p.output.size()) +
                                  " samples, expected " + std::to_string(n));
            }
            if (p.rating < 0.0 || !std::isfinite(p.rating)) {
                throw SchemaError("pv plant '" + p.name + "' has an invalid rating");
            }
        }
        if (d.load && d.load->size() != n) {
            throw SchemaError("load channel has " + std::to_string(d.load->size()) +
                              " samples, expected " + std::to_string(n));
        }
    }

    TrajectoryData data_;
};

struct DerivedChannels {
    Series f_coi;  ///< [Hz]
    Series spread; ///< [Hz]
};

/// Inertia-weighted mean of the given frequency channels.
inline Series coi_frequency(std::span<const Series> freqs, std::span<const double> inertia) {
    if (freqs.empty() || freqs.size() != inertia.size()) {
        throw DomainError("coi_frequency needs one inertia per generator channel");
    }
    double total = 0.0;
    for (double h : inertia) {
        total += h;
    }
    if (!(total > 0.0)) {
        throw DegenerateError("coi_frequency: inertia weights sum to zero");
    }
    const std::size_t n = freqs.front().size();
    Series out(n, 0.0);
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        const double w = inertia[i] / total;
        for (std::size_t k = 0; k < n; ++k) {
            out[k] += w * freqs[i][k];
        }
    }
    // Rounding in the weighted sum may step a hair outside [min, max].
    for (std::size_t k = 0; k < n; ++k) {
        double lo = freqs[0][k];
        double hi = lo;
        for (const auto &f : freqs) {
            lo = std::min(lo, f[k]);
            hi = std::max(hi, f[k]);
        }
        out[k] = std::clamp(out[k], lo, hi);
    }
    return out;
}

inline Series coi_frequency(const Trajectory &traj) {
    std::vector<Series> freqs;
    std::vector<double> inertia;
    for (const auto &g : traj.generators()) {
        freqs.push_back(g.freq);
        inertia.push_back(g.inertia);
    }
    return coi_frequency(freqs, inertia);
}

/// max_i f_i(t) - min_i f_i(t), pointwise.
inline Series generator_spread(std::span<const Series> freqs) {
    if (freqs.empty()) {
        throw DomainError("generator_spread needs at least one generator channel");
    }
    const std::size_t n = freqs.front().size();
    Series out(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double lo = freqs[0][k];
        double hi = lo;
        for (const auto &f : freqs) {
            lo = std::min(lo, f[k]);
            hi = std::max(hi, f[k]);
        }
        out[k] = hi - lo;
    }
    return out;
}

inline Series generator_spread(const Trajectory &traj) {
    std::vector<Series> freqs;
    for (const auto &g : traj.generators()) {
        freqs.push_back(g.freq);
    }
    return generator_spread(freqs);
}

inline DerivedChannels derive_channels(const Trajectory &traj) {
    return {coi_frequency(traj), generator_spread(traj)};
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = line.find(',', pos);
        out.push_back(line.substr(pos, next == std::string_view::npos ? line.npos : next - pos));
        if (next == std::string_view::npos) {
            break;
        }
        pos = next + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline double sidecar_number(const nlohmann::json &obj, const std::string &key, const std::string &where) {
    if (!obj.contains(key)) {
        throw SchemaError(where + ": missing entry for '" + key + "'");
    }
    const auto &v = obj.at(key);
    if (!v.is_number()) {
        throw SchemaError(where + "." + key + " must be a number");
    }
    return v.get<double>();
}

inline void check_sidecar_keys(const nlohmann::json &meta) {
    if (!meta.is_object()) {
        throw SchemaError("trajectory metadata must be a JSON object");
    }
    static const std::vector<std::string> known = {"inertia", "pv_rating", "dt", "label",
                                                   "t", "gen", "pv", "load"};
    for (const auto &[key, value] : meta.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw SchemaError("unknown trajectory metadata field '" + key + "'");
        }
    }
    if (!meta.contains("inertia") || !meta.at("inertia").is_object()) {
        throw SchemaError("trajectory metadata lacks an 'inertia' object");
    }
}

inline void apply_sidecar(TrajectoryData &data, const nlohmann::json &meta) {
    check_sidecar_keys(meta);
    const auto &inertia = meta.at("inertia");
    for (auto &g : data.generators) {
        g.inertia = sidecar_number(inertia, g.name, "inertia");
    }
    if (!data.pv.empty()) {
        if (!meta.contains("pv_rating") || !meta.at("pv_rating").is_object()) {
            throw SchemaError("trajectory metadata lacks a 'pv_rating' object");
        }
        for (auto &p : data.pv) {
            p.rating = sidecar_number(meta.at("pv_rating"), p.name, "pv_rating");
        }
    }
    if (meta.contains("dt")) {
        if (!meta.at("dt").is_number()) {
            throw SchemaError("dt must be a number");
        }
        data.dt = meta.at("dt").get<double>();
    }
    if (meta.contains("label")) {
        data.label = meta.at("label").get<std::string>();
    }
}

} // namespace detail

inline Trajectory load_trajectory_csv(std::istream &csv, const nlohmann::json &sidecar) {
    std::string line;
    if (!std::getline(csv, line)) {
        throw ParseError("empty CSV trajectory");
    }
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        line.erase(0, 3);
    }
    const auto header = detail::split_csv(line);
    if (header.empty() || detail::trim(header[0]) != "t") {
        throw ParseError("column 1: expected 't', got '" +
                         std::string(header.empty() ? "" : detail::trim(header[0])) + "'");
    }

    enum class Col { Gen, Pv, Load };
    std::vector<Col> kinds;
    std::vector<std::size_t> slot;
    TrajectoryData data;
    bool seen_pv = false;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const auto name = detail::trim(header[c]);
        const std::string where = "column " + std::to_string(c + 1) + " '" + std::string(name) + "'";
        if (name.starts_with("gen:") && name.size() > 4) {
            if (seen_pv || data.load) {
                throw ParseError(where + ": generator columns must precede pv and load columns");
            }
            kinds.push_back(Col::Gen);
            slot.push_back(data.generators.size());
            data.generators.push_back({std::string(name.substr(4)), 0.0, {}});
        } else if (name.starts_with("pv:") && name.size() > 3) {
            if (data.load) {
                throw ParseError(where + ": pv columns must precede the load column");
            }
            seen_pv = true;
            kinds.push_back(Col::Pv);
            slot.push_back(data.pv.size());
            data.pv.push_back({std::string(name.substr(3)), 0.0, {}});
        } else if (name == "load") {
            if (data.load) {
                throw ParseError(where + ": duplicate load column");
            }
            kinds.push_back(Col::Load);
            slot.push_back(0);
            data.load.emplace();
        } else {
            throw ParseError(where + ": expected 'gen:<name>', 'pv:<name>' or 'load'");
        }
    }
    if (data.generators.empty()) {
        throw ParseError("header has no 'gen:<name>' column");
    }

    std::size_t row = 1;
    while (std::getline(csv, line)) {
        ++row;
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto cells = detail::split_csv(line);
        if (cells.size() != header.size()) {
            throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                             " fields, got " + std::to_string(cells.size()));
        }
        double value = 0.0;
        if (!numfmt::parse_double(cells[0], value)) {
            throw ParseError("row " + std::to_string(row) + ", column 't': bad number");
        }
        data.t.push_back(value);
        for (std::size_t c = 1; c < cells.size(); ++c) {
            if (!numfmt::parse_double(cells[c], value)) {
                throw ParseError("row " + std::to_string(row) + ", column '" +
                                 std::string(detail::trim(header[c])) + "': bad number");
            }
            switch (kinds[c - 1]) {
            case Col::Gen: data.generators[slot[c - 1]].freq.push_back(value); break;
            case Col::Pv: data.pv[slot[c - 1]].output.push_back(value); break;
            case Col::Load: data.load->push_back(value); break;
            }
        }
    }
    detail::apply_sidecar(data, sidecar);
    return Trajectory::make(std::move(data));
}

inline Trajectory load_trajectory_json(const nlohmann::json &doc) {
    detail::check_sidecar_keys(doc);
    TrajectoryData data;
    try {
        data.t = doc.at("t").get<Series>();
        for (const auto &ch : doc.at("gen")) {
            data.generators.push_back({ch.at("name").get<std::string>(), 0.0, ch.at("values").get<Series>()});
        }
        if (doc.contains("pv")) {
            for (const auto &ch : doc.at("pv")) {
                data.pv.push_back({ch.at("name").get<std::string>(), 0.0, ch.at("values").get<Series>()});
            }
        }
        if (doc.contains("load")) {
            data.load = doc.at("load").get<Series>();
        }
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("JSON trajectory: ") + e.what());
    }
    detail::apply_sidecar(data, doc);
    return Trajectory::make(std::move(data));
}

enum class TrajectoryFormat { Csv, Json };

/// Stream entry point. For CSV the sidecar metadata must be supplied.
inline Trajectory load_trajectory(std::istream &source, TrajectoryFormat format,
                                  const nlohmann::json &sidecar = nlohmann::json::object()) {
    if (format == TrajectoryFormat::Csv) {
        return load_trajectory_csv(source, sidecar);
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(source);
    } catch (const nlohmann::json::parse_error &e) {
        throw ParseError(std::string("JSON trajectory: ") + e.what());
    }
    return load_trajectory_json(doc);
}

inline std::filesystem::path sidecar_path(const std::filesystem::path &csv_path) {
    auto p = csv_path;
    p.replace_extension(".json");
    return p;
}

/// Loads `<name>.csv` with its `<name>.json` sidecar, or a single `.json` trajectory.
inline Trajectory load_trajectory(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open trajectory file " + path.string());
    }
    if (path.extension() == ".json") {
        return load_trajectory(in, TrajectoryFormat::Json);
    }
    const auto meta_path = sidecar_path(path);
    std::ifstream meta_in(meta_path);
    if (!meta_in) {
        throw SchemaError("missing inertia sidecar " + meta_path.string());
    }
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_in);
    } catch (const nlohmann::json::parse_error &e) {
        throw ParseError("sidecar " + meta_path.string() + ": " + e.what());
    }
    return load_trajectory(in, TrajectoryFormat::Csv, meta);
}

inline nlohmann::json trajectory_metadata(const Trajectory &traj) {
    nlohmann::json meta;
    meta["label"] = traj.label();
    meta["dt"] = traj.dt();
    meta["inertia"] = nlohmann::json::object();
    for (const auto &g : traj.generators()) {
        meta["inertia"][g.name] = g.inertia;
    }
    meta["pv_rating"] = nlohmann::json::object();
    for (const auto &p : traj.pv()) {
        meta["pv_rating"][p.name] = p.rating;
    }
    return meta;
}

inline void save_trajectory_csv(const Trajectory &traj, std::ostream &csv) {
    csv << "t";
    for (const auto &g : traj.generators()) {
        csv << ",gen:" << g.name;
    }
    for (const auto &p : traj.pv()) {
        csv << ",pv:" << p.name;
    }
    if (traj.load()) {
        csv << ",load";
    }
    csv << '\n';
    for (std::size_t k = 0; k < traj.size(); ++k) {
        csv << numfmt::decimal(traj.time()[k]);
        for (const auto &g : traj.generators()) {
            csv << ',' << numfmt::decimal(g.freq[k]);
        }
        for (const auto &p : traj.pv()) {
            csv << ',' << numfmt::decimal(p.output[k]);
        }
        if (traj.load()) {
            csv << ',' << numfmt::decimal((*traj.load())[k]);
        }
        csv << '\n';
    }
}

inline nlohmann::json trajectory_to_json(const Trajectory &traj) {
    auto doc = trajectory_metadata(traj);
    doc["t"] = traj.time();
    doc["gen"] = nlohmann::json::array();
    for (const auto &g : traj.generators()) {
        doc["gen"].push_back({{"name", g.name}, {"values", g.freq}});
    }
    doc["pv"] = nlohmann::json::array();
    for (const auto &p : traj.pv()) {
        doc["pv"].push_back({{"name", p.name}, {"values", p.output}});
    }
    if (traj.load()) {
        doc["load"] = *traj.load();
    }
    return doc;
}

/// Writes `path` (CSV) and its JSON sidecar next to it.
inline void save_trajectory(const Trajectory &traj, const std::filesystem::path &path) {
    if (path.extension() == ".json") {
        std::ofstream out(path);
        out << trajectory_to_json(traj).dump() << '\n';
        return;
    }
    {
        std::ofstream out(path);
        if (!out) {
            throw ParseError("cannot write " + path.string());
        }
        save_trajectory_csv(traj, out);
    }
    std::ofstream meta(sidecar_path(path));
    meta << trajectory_metadata(traj).dump(2) << '\n';
}

} // namespace mdri
