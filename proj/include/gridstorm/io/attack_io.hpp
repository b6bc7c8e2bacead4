#pragma once

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "gridstorm/io/config.hpp"
#include "gridstorm/sim/attack.hpp"

namespace gridstorm {

inline constexpr const char* kScheduleFormat = "gridstorm-breaker-schedule";

namespace detail {

inline json range_to_json(const OutputRange& r) {
    json out = json::array();
    for (const auto& iv : r) out.push_back(json::array({iv.lo, iv.hi}));
    return out;
}

inline OutputRange range_from_json(const JsonCursor& c) {
    if (c.array_size() != kOutputs) c.fail("expected one [lo, hi] pair per output");
    OutputRange r{};
    for (std::size_t j = 0; j < kOutputs; ++j) {
        const auto pair = c.at(j).numbers();
        if (pair.size() != 2) c.at(j).fail("expected [lo, hi]");
        if (!(pair[0] <= pair[1])) c.at(j).fail("lower bound exceeds upper bound");
        r[j] = {pair[0], pair[1]};
    }
    return r;
}

inline BreakerSchedule signals_from_json(const JsonCursor& c, std::size_t d, std::size_t m) {
    if (c.array_size() != d) c.fail("expected " + std::to_string(d) + " rows, got " + std::to_string(c.array_size()));
    BreakerSchedule s;
    s.signals.reserve(d);
    for (std::size_t k = 0; k < d; ++k) {
        auto row = c.at(k).bits();
        if (m != 0 && row.size() != m)
            c.at(k).fail("expected " + std::to_string(m) + " breaker signals, got " + std::to_string(row.size()));
        if (k > 0 && row.size() != s.signals.front().size()) c.at(k).fail("ragged schedule row");
        s.signals.push_back(std::move(row));
    }
    return s;
}

}  // namespace detail

// Attack vector file
// {"d": d, "breaker_schedule": d x m, "false_data": [d x 2 per generator],
//  "range": [[lo, hi], [lo, hi]], "mask": [[0|1, 0|1] per generator],
//  "provenance": {...}}

inline json attack_to_json(const AttackVector& atk, const json& provenance = json::object()) {
    json fd = json::array();
    for (const Matrix& v : atk.false_data.values) {
        json rows = json::array();
        for (std::size_t k = 0; k < v.rows(); ++k) rows.push_back(json::array({v(k, 0), v(k, 1)}));
        fd.push_back(std::move(rows));
    }
    json mask = json::array();
    for (const auto& m : atk.false_data.mask) mask.push_back(json::array({m[0], m[1]}));
    json doc;
    doc["d"] = atk.d();
    doc["breaker_schedule"] = atk.breaker_schedule.signals;
    doc["false_data"] = std::move(fd);
    doc["range"] = detail::range_to_json(atk.false_data.range);
    doc["mask"] = std::move(mask);
    doc["provenance"] = provenance;
    return doc;
}

/// Parses and validates an attack file against `grid` (schedule width,
/// generator count, mask and range invariants).
inline AttackVector attack_from_json(const json& doc, const GridModel& grid, json* provenance = nullptr) {
    const JsonCursor root(doc, "$");
    root.require_object({"d", "breaker_schedule", "false_data", "range", "mask", "provenance"});
    const std::uint64_t d = root.at("d").u64();
    if (d < 1) root.at("d").fail("must be >= 1");
    AttackVector atk;
    atk.breaker_schedule = detail::signals_from_json(root.at("breaker_schedule"), d, grid.m());

    const JsonCursor fd = root.at("false_data");
    if (fd.array_size() != grid.n()) fd.fail("expected one block per generator (" + std::to_string(grid.n()) + ")");
    atk.false_data.values.reserve(grid.n());
    for (std::size_t i = 0; i < grid.n(); ++i) atk.false_data.values.push_back(fd.at(i).matrix(d, kOutputs));

    const JsonCursor mc = root.at("mask");
    if (mc.array_size() != grid.n()) mc.fail("expected one mask per generator");
    for (std::size_t i = 0; i < grid.n(); ++i) {
        const auto bits = mc.at(i).bits();
        if (bits.size() != kOutputs) mc.at(i).fail("expected two entries");
        atk.false_data.mask.push_back({bits[0], bits[1]});
    }
    atk.false_data.range = detail::range_from_json(root.at("range"));
    try {
        atk.validate(grid);
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("$: ") + e.what());
    }
    if (provenance != nullptr) *provenance = root.has("provenance") ? doc["provenance"] : json::object();
    return atk;
}

inline AttackVector load_attack_file(const std::filesystem::path& path, const GridModel& grid,
                                     json* provenance = nullptr) {
    try {
        return attack_from_json(read_json_file(path), grid, provenance);
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        if (what.rfind(path.string(), 0) == 0) throw;
        throw ConfigError(path.string() + ": " + what);
    }
}

// Breaker schedule file
// {"format": "gridstorm-breaker-schedule", "d": d, "m": m, "signals": d x m}

inline json schedule_to_json(const BreakerSchedule& s) {
    json doc;
    doc["format"] = kScheduleFormat;
    doc["d"] = s.d();
    doc["m"] = s.m();
    doc["signals"] = s.signals;
    return doc;
}

inline BreakerSchedule schedule_from_json(const json& doc, std::size_t expected_m = 0) {
    const JsonCursor root(doc, "$");
    root.require_object({"format", "d", "m", "signals"});
    if (root.at("format").string() != kScheduleFormat)
        root.at("format").fail(std::string("expected \"") + kScheduleFormat + "\"");
    const std::uint64_t d = root.at("d").u64();
    const std::uint64_t m = root.at("m").u64();
    if (d < 1) root.at("d").fail("must be >= 1");
    if (m < 1) root.at("m").fail("must be >= 1");
    if (expected_m != 0 && m != expected_m)
        root.at("m").fail("grid has " + std::to_string(expected_m) + " breakers, file has " + std::to_string(m));
    return detail::signals_from_json(root.at("signals"), d, m);
}

inline BreakerSchedule load_schedule_file(const std::filesystem::path& path, std::size_t expected_m = 0) {
    try {
        return schedule_from_json(read_json_file(path), expected_m);
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        if (what.rfind(path.string(), 0) == 0) throw;
        throw ConfigError(path.string() + ": " + what);
    }
}

/// Serialized JSON text; two-space indent and a trailing newline.
inline std::string dump_json(const json& doc) { return doc.dump(2) + "\n"; }

inline void write_reward_csv(std::ostream& out, const std::vector<double>& rewards) {
    out << "episode,reward\n";
    for (std::size_t e = 0; e < rewards.size(); ++e) out << e << ',' << format_g9(rewards[e]) << '\n';
}

}  // namespace gridstorm
