#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "gridstorm/falsify/falsify.hpp"
#include "gridstorm/io/attack_io.hpp"
#include "gridstorm/rl/ddpg.hpp"

namespace gridstorm {

// Training config
// {"episodes", "steps_per_episode", "init_spread": [4], "action_repeat",
//  "noise", "terminate_on_detection", "reward": {"w1", "w2", "w3",
//  "variant": "sum_product" | "all_product"}, "hidden", "gamma", "tau",
//  "actor_lr", "critic_lr", "batch", "buffer", "sigma0", "sigma_decay",
//  "updates_per_step", "final_layer_scale", "initial_action"}
// Every key is optional; absent keys keep the TrainConfig defaults.

inline TrainConfig train_config_from_json(const json& doc) {
    const JsonCursor root(doc, "$");
    root.require_object({"description", "episodes", "steps_per_episode", "init_spread", "action_repeat", "noise",
                         "terminate_on_detection", "reward", "hidden", "gamma", "tau", "actor_lr", "critic_lr",
                         "batch", "buffer", "sigma0", "sigma_decay", "updates_per_step", "final_layer_scale",
                         "initial_action"});
    TrainConfig c;
    auto count = [&](const char* key, std::size_t& field) {
        if (root.has(key)) field = static_cast<std::size_t>(root.at(key).u64());
    };
    count("episodes", c.episode.episodes);
    count("steps_per_episode", c.episode.steps_per_episode);
    count("action_repeat", c.episode.action_repeat);
    count("hidden", c.hidden);
    count("batch", c.batch);
    count("buffer", c.buffer);
    count("updates_per_step", c.updates_per_step);
    if (root.has("init_spread")) {
        const auto v = root.at("init_spread").numbers();
        if (v.size() != kStates) root.at("init_spread").fail("expected 4 entries");
        for (std::size_t s = 0; s < kStates; ++s) c.episode.init_spread[s] = v[s];
    }
    if (root.has("noise")) c.episode.noise = root.at("noise").boolean();
    if (root.has("terminate_on_detection"))
        c.episode.terminate_on_detection = root.at("terminate_on_detection").boolean();
    if (root.has("reward")) {
        const JsonCursor r = root.at("reward");
        r.require_object({"w1", "w2", "w3", "variant"});
        c.weights.w1 = r.number_or("w1", c.weights.w1);
        c.weights.w2 = r.number_or("w2", c.weights.w2);
        c.weights.w3 = r.number_or("w3", c.weights.w3);
        if (r.has("variant")) {
            const std::string v = r.at("variant").string();
            if (v == "sum_product") c.variant = RewardVariant::sum_product;
            else if (v == "all_product") c.variant = RewardVariant::all_product;
            else r.at("variant").fail("expected \"sum_product\" or \"all_product\"");
        }
    }
    c.gamma = root.number_or("gamma", c.gamma);
    c.tau = root.number_or("tau", c.tau);
    c.actor_lr = root.number_or("actor_lr", c.actor_lr);
    c.critic_lr = root.number_or("critic_lr", c.critic_lr);
    c.sigma0 = root.number_or("sigma0", c.sigma0);
    c.sigma_decay = root.number_or("sigma_decay", c.sigma_decay);
    c.final_layer_scale = root.number_or("final_layer_scale", c.final_layer_scale);
    c.initial_action = root.number_or("initial_action", c.initial_action);
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("$: ") + e.what());
    }
    return c;
}

// Falsification config
// {"d", "range": [[lo, hi], [lo, hi]], "mask": [[0|1, 0|1] per generator]
//  or "attacked_outputs": [0|1, 0|1] for every generator, "control_points",
//  "horizon", "semantics": "until_unsafe" | "whole_trace", "signal_basis",
//  "budget", "restarts", "sigma0", "sigma_floor", "reject_window", "cooling",
//  "cooling_window", "lattice_levels", "noise_seeds"}

struct FalsifySettings {
    std::optional<std::size_t> d;  ///< defaults to the LAA schedule length
    OutputRange range{Interval{0.0, 0.0}, Interval{-0.05, 0.05}};
    std::optional<std::vector<OutputMask>> mask;  ///< defaults to output 2 of every generator
    bool mask_for_all = false;                    ///< mask holds one entry from attacked_outputs
    std::size_t control_points = 10;
    std::size_t horizon = 0;
    StealthSemantics semantics = StealthSemantics::until_unsafe;
    std::optional<SignalBasis> basis;
    FalsifyOptions search;
    std::size_t noise_seeds = 20;

    /// Problem for `grid` and a given LAA schedule.
    [[nodiscard]] FalsificationProblem problem(const GridModel& grid, const BreakerSchedule& laa,
                                               SignalBasis fallback_basis) const {
        FalsificationProblem p;
        p.grid = &grid;
        p.laa = laa;
        p.d = d.value_or(laa.d());
        p.range = range;
        p.mask = mask.value_or(std::vector<OutputMask>(grid.n(), OutputMask{0, 1}));
        p.control_points = std::min(control_points, p.d);
        p.horizon = horizon;
        p.semantics = semantics;
        p.basis = basis.value_or(fallback_basis);
        return p;
    }
};

inline FalsifySettings falsify_settings_from_json(const json& doc) {
    const JsonCursor root(doc, "$");
    root.require_object({"description", "d", "range", "mask", "attacked_outputs", "control_points", "horizon",
                         "semantics", "signal_basis", "budget", "restarts", "sigma0", "sigma_floor",
                         "reject_window", "cooling", "cooling_window", "lattice_levels", "noise_seeds"});
    FalsifySettings s;
    if (root.has("d")) {
        s.d = static_cast<std::size_t>(root.at("d").u64());
        if (*s.d < 1) root.at("d").fail("must be >= 1");
    }
    if (root.has("range")) s.range = detail::range_from_json(root.at("range"));
    if (root.has("mask") && root.has("attacked_outputs")) root.fail("give either mask or attacked_outputs, not both");
    if (root.has("mask")) {
        const JsonCursor m = root.at("mask");
        std::vector<OutputMask> masks;
        for (std::size_t i = 0; i < m.array_size(); ++i) {
            const auto bits = m.at(i).bits();
            if (bits.size() != kOutputs) m.at(i).fail("expected two entries");
            masks.push_back({bits[0], bits[1]});
        }
        s.mask = std::move(masks);
    }
    if (root.has("attacked_outputs")) {
        const auto bits = root.at("attacked_outputs").bits();
        if (bits.size() != kOutputs) root.at("attacked_outputs").fail("expected two entries");
        s.mask = std::vector<OutputMask>{OutputMask{bits[0], bits[1]}};
        s.mask_for_all = true;
    }
    if (root.has("control_points")) s.control_points = static_cast<std::size_t>(root.at("control_points").u64());
    if (root.has("horizon")) s.horizon = static_cast<std::size_t>(root.at("horizon").u64());
    if (root.has("semantics")) {
        const std::string v = root.at("semantics").string();
        if (v == "until_unsafe") s.semantics = StealthSemantics::until_unsafe;
        else if (v == "whole_trace") s.semantics = StealthSemantics::whole_trace;
        else root.at("semantics").fail("expected \"until_unsafe\" or \"whole_trace\"");
    }
    if (root.has("signal_basis")) {
        try {
            s.basis = parse_signal_basis(root.at("signal_basis").string());
        } catch (const InvalidArgument& e) {
            root.at("signal_basis").fail(e.what());
        }
    }
    auto count = [&](const char* key, std::size_t& field) {
        if (root.has(key)) field = static_cast<std::size_t>(root.at(key).u64());
    };
    count("budget", s.search.budget);
    count("restarts", s.search.restarts);
    count("reject_window", s.search.reject_window);
    count("cooling_window", s.search.cooling_window);
    count("lattice_levels", s.search.lattice_levels);
    count("noise_seeds", s.noise_seeds);
    s.search.sigma0 = root.number_or("sigma0", s.search.sigma0);
    s.search.sigma_floor = root.number_or("sigma_floor", s.search.sigma_floor);
    s.search.cooling = root.number_or("cooling", s.search.cooling);
    if (s.control_points < 1) root.at("control_points").fail("must be >= 1");
    if (s.search.budget < 1) root.at("budget").fail("must be >= 1");
    if (s.search.restarts < 1) root.at("restarts").fail("must be >= 1");
    if (!(s.search.sigma0 > 0) || !(s.search.sigma_floor > 0)) root.fail("sigma0 and sigma_floor must be > 0");
    if (!(s.search.cooling > 0 && s.search.cooling <= 1)) root.at("cooling").fail("must lie in (0, 1]");
    if (s.search.reject_window < 1 || s.search.cooling_window < 1) root.fail("windows must be >= 1");
    return s;
}

/// Expands an `attacked_outputs` mask to every generator and checks sizes.
inline void bind_mask(FalsifySettings& s, const GridModel& grid) {
    if (!s.mask) return;
    if (s.mask_for_all) {
        s.mask->assign(grid.n(), s.mask->front());
        s.mask_for_all = false;
    }
    if (s.mask->size() != grid.n())
        throw ConfigError("$.mask: expected one mask per generator (" + std::to_string(grid.n()) + ")");
}

inline TrainConfig load_train_config(const std::filesystem::path& path) {
    try {
        return train_config_from_json(read_json_file(path));
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        if (what.rfind(path.string(), 0) == 0) throw;
        throw ConfigError(path.string() + ": " + what);
    }
}

inline FalsifySettings load_falsify_settings(const std::filesystem::path& path) {
    try {
        return falsify_settings_from_json(read_json_file(path));
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        if (what.rfind(path.string(), 0) == 0) throw;
        throw ConfigError(path.string() + ": " + what);
    }
}

}  // namespace gridstorm
