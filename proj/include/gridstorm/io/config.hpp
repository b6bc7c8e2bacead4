#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gridstorm/sim/detect.hpp"

namespace gridstorm {

using json = nlohmann::json;

/// Thin cursor over a JSON document that remembers its path, so every
/// diagnostic names the offending field ("$.generators[1].params.R").
class JsonCursor {
public:
    JsonCursor(const json& node, std::string path) : node_(&node), path_(std::move(path)) {}

    [[nodiscard]] const json& node() const noexcept { return *node_; }
    [[nodiscard]] const std::string& path() const noexcept { return path_; }

    [[noreturn]] void fail(const std::string& what) const { throw ConfigError(path_ + ": " + what); }

    void require_object(std::initializer_list<std::string_view> allowed) const {
        if (!node_->is_object()) fail("expected an object");
        for (const auto& [key, _] : node_->items()) {
            bool ok = false;
            for (auto a : allowed) ok = ok || key == a;
            if (!ok) throw ConfigError(path_ + "." + key + ": unknown key");
        }
    }

    [[nodiscard]] bool has(std::string_view key) const { return node_->contains(std::string(key)); }

    [[nodiscard]] JsonCursor at(std::string_view key) const {
        const std::string k(key);
        if (!node_->contains(k)) throw ConfigError(path_ + "." + k + ": required key is missing");
        return {(*node_)[k], path_ + "." + k};
    }

    [[nodiscard]] JsonCursor at(std::size_t i) const {
        return {(*node_)[i], path_ + "[" + std::to_string(i) + "]"};
    }

    [[nodiscard]] std::size_t array_size() const {
        if (!node_->is_array()) fail("expected an array");
        return node_->size();
    }

    [[nodiscard]] double number() const {
        if (!node_->is_number()) fail("expected a number");
        const double v = node_->get<double>();
        if (!std::isfinite(v)) fail("expected a finite number");
        return v;
    }

    [[nodiscard]] double number_or(std::string_view key, double fallback) const {
        return has(key) ? at(key).number() : fallback;
    }

    [[nodiscard]] std::uint64_t u64() const {
        if (!node_->is_number_unsigned() && !(node_->is_number_integer() && node_->get<std::int64_t>() >= 0))
            fail("expected a non-negative integer");
        return node_->get<std::uint64_t>();
    }

    [[nodiscard]] bool boolean() const {
        if (!node_->is_boolean()) fail("expected true or false");
        return node_->get<bool>();
    }

    [[nodiscard]] std::string string() const {
        if (!node_->is_string()) fail("expected a string");
        return node_->get<std::string>();
    }

    [[nodiscard]] std::vector<double> numbers() const {
        std::vector<double> out(array_size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i).number();
        return out;
    }

    [[nodiscard]] std::vector<int> bits() const {
        std::vector<int> out(array_size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            const JsonCursor c = at(i);
            if (!c.node().is_number_integer() || (c.node() != 0 && c.node() != 1)) c.fail("expected 0 or 1");
            out[i] = c.node().get<int>();
        }
        return out;
    }

    [[nodiscard]] Matrix matrix(std::size_t rows, std::size_t cols) const {
        const std::size_t r = array_size();
        if (rows != 0 && r != rows) fail("expected " + std::to_string(rows) + " rows, got " + std::to_string(r));
        Matrix m;
        for (std::size_t i = 0; i < r; ++i) {
            const std::vector<double> row = at(i).numbers();
            if (i == 0) {
                if (cols != 0 && row.size() != cols)
                    at(i).fail("expected " + std::to_string(cols) + " columns, got " + std::to_string(row.size()));
                m = Matrix(r, row.size());
            } else if (row.size() != m.cols()) {
                at(i).fail("ragged matrix row");
            }
            for (std::size_t j = 0; j < row.size(); ++j) m(i, j) = row[j];
        }
        return m;
    }

    /// Covariance given as a scalar (times I), a diagonal list, or a full
    /// n x n matrix.
    [[nodiscard]] Matrix covariance(std::size_t n) const {
        Matrix m;
        if (node_->is_number()) {
            m = Matrix::identity(n) * number();
        } else if (node_->is_array() && !node_->empty() && (*node_)[0].is_number()) {
            const auto d = numbers();
            if (d.size() != n) fail("expected " + std::to_string(n) + " diagonal entries");
            m = Matrix::diagonal(d);
        } else {
            m = matrix(n, n);
        }
        if ((m - m.transpose()).max_abs() > 1e-12) fail("covariance must be symmetric");
        for (std::size_t i = 0; i < n; ++i)
            if (m(i, i) < 0) fail("covariance diagonal must be >= 0");
        return m;
    }

private:
    const json* node_;
    std::string path_;
};

struct CalibrationSettings {
    std::size_t horizon = 1000;
    double margin = 1.1;
    std::uint64_t seed = 0;
};

/// Stream id reserved for threshold calibration runs.
inline constexpr std::uint64_t kCalibrationStream = 0xCA11B;

namespace detail {

inline AgcParams parse_params(const JsonCursor& c) {
    c.require_object({"D", "R", "H", "T_TR", "T_G", "K_ref", "nominal_frequency", "rated_power",
                      "governor_sign", "speed_base"});
    AgcParams p;
    p.R = c.at("R").number();
    p.H = c.at("H").number();
    p.T_TR = c.at("T_TR").number();
    p.T_G = c.at("T_G").number();
    p.K_ref = c.at("K_ref").number();
    p.nominal_frequency = c.number_or("nominal_frequency", 60.0);
    p.rated_power = c.number_or("rated_power", 100.0);
    const bool explicit_d = c.has("D");
    p.D = explicit_d ? c.at("D").number() : (p.R > 0 ? 1.0 / p.R : 0.0);
    if (c.has("governor_sign")) {
        const std::string s = c.at("governor_sign").string();
        if (s == "physics") p.governor_sign = GovernorSign::physics;
        else if (s == "printed") p.governor_sign = GovernorSign::printed;
        else c.at("governor_sign").fail("expected 'physics' or 'printed'");
    }
    if (explicit_d && p.R > 0 && std::abs(p.D - 1.0 / p.R) > 1e-12 * std::max(1.0, std::abs(p.D)))
        throw ConfigError(c.path() + ".D, " + c.path() + ".R: D must equal 1/R (D = " +
                          format_g9(p.D) + ", 1/R = " + format_g9(1.0 / p.R) + ")");
    // "per_unit": machine constants on a per-unit speed base; convert to the
    // rad/s speed deviation used internally.
    if (c.has("speed_base")) {
        const std::string base = c.at("speed_base").string();
        if (base == "per_unit") {
            const double ws = 2.0 * std::numbers::pi * p.nominal_frequency;
            p.H /= ws;
            p.R *= ws;
            p.D = 1.0 / p.R;
            p.K_ref /= ws;
        } else if (base != "rad_per_s") {
            c.at("speed_base").fail("expected 'rad_per_s' or 'per_unit'");
        }
    }
    try {
        p.validate();
    } catch (const InvalidArgument& e) {
        c.fail(e.what());
    }
    return p;
}

inline Generator parse_generator(const JsonCursor& c, double ts, std::size_t index) {
    c.require_object({"name", "params", "gains", "noise", "lqr", "init"});
    Generator g;
    g.name = c.has("name") ? c.at("name").string() : "GEN" + std::to_string(index + 1);
    g.params = parse_params(c.at("params"));
    LoopDesign design;
    if (c.has("noise")) {
        const JsonCursor n = c.at("noise");
        n.require_object({"process", "measurement"});
        if (n.has("process")) design.Q_n = n.at("process").covariance(kStates);
        if (n.has("measurement")) design.R_n = n.at("measurement").covariance(kOutputs);
    }
    if (c.has("gains")) {
        const JsonCursor gc = c.at("gains");
        gc.require_object({"K", "L"});
        if (gc.has("K")) {
            const auto k = gc.at("K").numbers();
            if (k.size() != kStates) gc.at("K").fail("expected 4 entries");
            design.K = Matrix::row(k);
        }
        if (gc.has("L")) design.L = gc.at("L").matrix(kStates, kOutputs);
    }
    if (c.has("lqr")) {
        if (!design.K.empty()) c.at("lqr").fail("lqr weights conflict with an explicit gain K");
        const JsonCursor l = c.at("lqr");
        l.require_object({"Q", "R"});
        design.Q_c = l.at("Q").covariance(kStates);
        design.R_c = Matrix{{l.at("R").number()}};
        if (!(design.R_c(0, 0) > 0)) l.at("R").fail("must be > 0");
    }
    if (c.has("init")) {
        g.init = c.at("init").numbers();
        if (g.init.size() != kStates) c.at("init").fail("expected 4 entries");
    }
    try {
        g.loop = make_loop(g.params, ts, design);
    } catch (const InvalidArgument& e) {
        c.fail(e.what());
    } catch (const NumericalError& e) {
        c.fail(e.what());
    }
    return g;
}

}  // namespace detail

/// Builds and validates a GridModel. Thresholds are calibrated from a noisy
/// nominal run when the document does not supply them.
inline GridModel load_grid_config(const json& doc, CalibrationSettings* calib_out = nullptr) {
    const JsonCursor root(doc, "$");
    root.require_object({"sampling_period_s", "generators", "load_map", "envelope", "thresholds",
                         "calibration", "scheduled_load", "fdia_governor_gain", "description"});
    const double ts = root.number_or("sampling_period_s", 0.01);
    if (!(ts > 0)) root.at("sampling_period_s").fail("must be > 0");

    GridModel grid;
    const JsonCursor gens = root.at("generators");
    const std::size_t n = gens.array_size();
    if (n == 0) gens.fail("at least one generator is required");
    for (std::size_t i = 0; i < n; ++i) grid.generators.push_back(detail::parse_generator(gens.at(i), ts, i));

    const JsonCursor lm = root.at("load_map");
    lm.require_object({"matrix", "b_nom"});
    grid.load_map.M = lm.at("matrix").matrix(n, 0);
    grid.load_map.b_nom = lm.has("b_nom") ? lm.at("b_nom").bits()
                                          : std::vector<int>(grid.load_map.M.cols(), 1);
    try {
        grid.load_map.validate();
    } catch (const InvalidArgument& e) {
        lm.fail(e.what());
    }

    if (root.has("envelope")) {
        const JsonCursor e = root.at("envelope");
        e.require_object({"f_lo", "f_hi", "pe_lo", "pe_hi"});
        SafetyEnvelope env;
        env.f_lo = e.number_or("f_lo", env.f_lo);
        env.f_hi = e.number_or("f_hi", env.f_hi);
        env.pe_lo = e.number_or("pe_lo", env.pe_lo);
        env.pe_hi = e.number_or("pe_hi", env.pe_hi);
        try {
            env.validate();
        } catch (const InvalidArgument& ex) {
            e.fail(ex.what());
        }
        grid.envelope = env;
    }

    if (root.has("scheduled_load")) {
        const JsonCursor s = root.at("scheduled_load");
        if (s.array_size() != n) s.fail("expected one row per generator");
        for (std::size_t i = 0; i < n; ++i) grid.scheduled_load.push_back(s.at(i).numbers());
    }
    if (root.has("fdia_governor_gain")) {
        grid.fdia_governor_gain = root.at("fdia_governor_gain").number();
        if (grid.fdia_governor_gain < 0 || grid.fdia_governor_gain > 1)
            root.at("fdia_governor_gain").fail("must lie in [0, 1]");
    }

    CalibrationSettings calib;
    if (root.has("calibration")) {
        const JsonCursor c = root.at("calibration");
        c.require_object({"horizon", "margin", "seed"});
        if (c.has("horizon")) calib.horizon = c.at("horizon").u64();
        if (c.has("seed")) calib.seed = c.at("seed").u64();
        calib.margin = c.number_or("margin", calib.margin);
        if (calib.horizon < 1) c.at("horizon").fail("must be >= 1");
        if (!(calib.margin >= 1.0)) c.at("margin").fail("must be >= 1");
    }
    if (calib_out != nullptr) *calib_out = calib;

    try {
        grid.validate_structure();
    } catch (const InvalidArgument& e) {
        root.fail(e.what());
    }

    if (root.has("thresholds")) {
        const JsonCursor t = root.at("thresholds");
        grid.thresholds = t.numbers();
        if (grid.thresholds.size() != n) t.fail("expected one threshold per generator");
        for (std::size_t i = 0; i < n; ++i)
            if (!(grid.thresholds[i] > 0)) t.at(i).fail("threshold must be > 0");
    } else {
        RngStream rng(calib.seed, kCalibrationStream);
        grid.thresholds = calibrate_threshold(grid, calib.horizon, calib.margin, &rng, true);
    }
    grid.validate();
    return grid;
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

inline GridModel load_grid_file(const std::filesystem::path& path, CalibrationSettings* calib_out = nullptr) {
    return load_grid_config(read_json_file(path), calib_out);
}

}  // namespace gridstorm
