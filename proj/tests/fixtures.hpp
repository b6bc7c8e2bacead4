#pragma once

// Small grids shared by the suites.

#include <string>

#include "gridstorm/io/config.hpp"

namespace fixture {

using gridstorm::json;

inline std::string source_path(const std::string& rel) { return std::string(GRIDSTORM_SOURCE_DIR) + "/" + rel; }

/// One generator on the rad/s speed base, two breakers, explicit thresholds.
inline json toy_grid_doc(double threshold = 0.05) {
    json doc = json::parse(R"({
      "sampling_period_s": 0.01,
      "generators": [{"params": {"H": 5.0, "R": 1.0, "T_TR": 0.5, "T_G": 0.2, "K_ref": 7.0}}],
      "load_map": {"matrix": [[0.1, 0.05]], "b_nom": [1, 1]},
      "envelope": {"f_lo": 59.5, "f_hi": 60.5, "pe_lo": -0.1, "pe_hi": 0.1}
    })");
    doc["thresholds"] = json::array({threshold});
    return doc;
}

inline gridstorm::GridModel toy_grid(double threshold = 0.05) {
    return gridstorm::load_grid_config(toy_grid_doc(threshold));
}

/// Three generators, three breakers, explicit thresholds.
inline json three_gen_doc() {
    return json::parse(R"({
      "sampling_period_s": 0.01,
      "generators": [
        {"params": {"H": 4.0, "R": 1.0, "T_TR": 0.5, "T_G": 0.2, "K_ref": 7.0}},
        {"params": {"H": 5.0, "R": 1.0, "T_TR": 0.5, "T_G": 0.2, "K_ref": 7.0}},
        {"params": {"H": 6.0, "R": 1.0, "T_TR": 0.5, "T_G": 0.2, "K_ref": 7.0}}
      ],
      "load_map": {"matrix": [[0.1, 0.03, 0.0], [0.0, 0.1, 0.03], [0.03, 0.0, 0.1]], "b_nom": [1, 1, 1]},
      "thresholds": [0.02, 0.02, 0.02]
    })");
}

}  // namespace fixture
