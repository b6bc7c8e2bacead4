#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "gridstorm/model/loop.hpp"

namespace gridstorm {

/// Breaker-to-load topology: M(i, j) is the per-unit load that breaker j's
/// feeder presents to generator i; b_nom holds the nominal (1 = closed) state.
struct LoadMap {
    Matrix M;
    std::vector<int> b_nom;

    [[nodiscard]] std::size_t generators() const noexcept { return M.rows(); }
    [[nodiscard]] std::size_t breakers() const noexcept { return M.cols(); }

    void validate() const {
        if (M.cols() == 0) throw InvalidArgument("LoadMap: at least one breaker is required");
        if (b_nom.size() != M.cols())
            throw InvalidArgument("LoadMap: b_nom has " + std::to_string(b_nom.size()) +
                                  " entries, matrix has " + std::to_string(M.cols()) + " columns");
        for (int b : b_nom)
            if (b != 0 && b != 1) throw InvalidArgument("LoadMap: b_nom entries must be 0 or 1");
        for (std::size_t j = 0; j < M.cols(); ++j) {
            bool any = false;
            for (std::size_t i = 0; i < M.rows(); ++i) {
                const double v = M(i, j);
                if (!std::isfinite(v) || v < 0)
                    throw InvalidArgument("LoadMap: entries must be finite and >= 0");
                any = any || v > 0;
            }
            if (!any)
                throw InvalidArgument("LoadMap: breaker " + std::to_string(j) +
                                      " feeds no load (all-zero column)");
        }
    }
};

/// Per-generator load deviation h(b): sum_j M(i, j) (b_j - b_nom_j).
inline std::vector<double> apply_load_map(const LoadMap& map, std::span<const int> breaker_state) {
    if (breaker_state.size() != map.breakers())
        throw InvalidArgument("apply_load_map: breaker state has " +
                              std::to_string(breaker_state.size()) + " entries, expected " +
                              std::to_string(map.breakers()));
    std::vector<double> dpl(map.generators(), 0.0);
    for (std::size_t j = 0; j < map.breakers(); ++j) {
        const int b = breaker_state[j];
        if (b != 0 && b != 1) throw InvalidArgument("apply_load_map: breaker state must be binary");
        const int delta = b - map.b_nom[j];
        if (delta == 0) continue;
        for (std::size_t i = 0; i < map.generators(); ++i) dpl[i] += map.M(i, j) * delta;
    }
    return dpl;
}

struct SafetyEnvelope {
    double f_lo = 59.5;
    double f_hi = 60.5;
    double pe_lo = -0.1;  ///< per-unit, relative to the scheduled load
    double pe_hi = 0.1;

    void validate() const {
        if (!(f_lo < f_hi)) throw InvalidArgument("SafetyEnvelope: f_lo must be < f_hi");
        if (!(pe_lo < pe_hi)) throw InvalidArgument("SafetyEnvelope: pe_lo must be < pe_hi");
    }

    /// Signed margin in Hz: positive inside the band, negative outside.
    [[nodiscard]] double frequency_margin(double f) const noexcept {
        return std::min(f_hi - f, f - f_lo);
    }
    [[nodiscard]] bool frequency_safe(double f) const noexcept { return f >= f_lo && f <= f_hi; }
    [[nodiscard]] bool power_safe(double pe_dev) const noexcept {
        return pe_dev >= pe_lo && pe_dev <= pe_hi;
    }
};

struct Generator {
    std::string name;
    AgcParams params;
    DiscreteLoop loop;
    std::vector<double> init = std::vector<double>(kStates, 0.0);
};

/// Threshold floor applied when the nominal residue is identically zero.
inline constexpr double kThresholdFloor = 1e-9;

/// n generator loops, the breaker topology, the safety envelope and the
/// per-generator detector thresholds. Immutable once validated.
struct GridModel {
    std::vector<Generator> generators;
    LoadMap load_map;
    SafetyEnvelope envelope;
    std::vector<double> thresholds;
    /// scheduled_load[i][k]: scheduled dP_L of generator i at step k; the
    /// last entry is held beyond the end, an empty row means zero.
    std::vector<std::vector<double>> scheduled_load;
    /// Fraction of the false data that reaches the governor/integrator
    /// inputs of the physical plant. 0: false data only misleads the
    /// estimator; 1: the plant consumes the falsified measurement.
    double fdia_governor_gain = 0.0;

    [[nodiscard]] std::size_t n() const noexcept { return generators.size(); }
    [[nodiscard]] std::size_t m() const noexcept { return load_map.breakers(); }
    [[nodiscard]] double ts() const noexcept {
        return generators.empty() ? 0.0 : generators.front().loop.Ts;
    }

    [[nodiscard]] double scheduled(std::size_t gen, std::size_t step) const noexcept {
        if (gen >= scheduled_load.size() || scheduled_load[gen].empty()) return 0.0;
        const auto& row = scheduled_load[gen];
        return row[std::min(step, row.size() - 1)];
    }

    /// Validates everything except thresholds (which may still be pending
    /// calibration).
    void validate_structure() const {
        if (generators.empty()) throw InvalidArgument("GridModel: at least one generator is required");
        load_map.validate();
        if (load_map.generators() != n())
            throw InvalidArgument("GridModel: load map has " + std::to_string(load_map.generators()) +
                                  " rows, expected one per generator (" + std::to_string(n()) + ")");
        envelope.validate();
        const double ts0 = generators.front().loop.Ts;
        for (const auto& g : generators) {
            g.params.validate();
            g.loop.validate();
            if (g.loop.Ts != ts0) throw InvalidArgument("GridModel: generators must share Ts");
            if (g.init.size() != kStates) throw InvalidArgument("GridModel: init must have 4 entries");
        }
        if (!scheduled_load.empty() && scheduled_load.size() != n())
            throw InvalidArgument("GridModel: scheduled_load needs one row per generator");
    }

    void validate() const {
        validate_structure();
        if (thresholds.size() != n())
            throw InvalidArgument("GridModel: need one threshold per generator");
        if (!(fdia_governor_gain >= 0 && fdia_governor_gain <= 1))
            throw InvalidArgument("GridModel: fdia_governor_gain must lie in [0, 1]");
        for (double th : thresholds)
            if (!(th > 0) || !std::isfinite(th)) throw InvalidArgument("GridModel: thresholds must be > 0");
    }

    /// FNV-1a over every numeric field, used to tag traces and manifests.
    [[nodiscard]] std::uint64_t hash() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto mix = [&h](double v) {
            std::uint64_t bits = 0;
            std::memcpy(&bits, &v, sizeof bits);
            for (int i = 0; i < 8; ++i) {
                h ^= (bits >> (8 * i)) & 0xffU;
                h *= 0x100000001b3ULL;
            }
        };
        auto mix_matrix = [&](const Matrix& m) {
            mix(static_cast<double>(m.rows()));
            for (double v : m.entries()) mix(v);
        };
        for (const auto& g : generators) {
            mix_matrix(g.loop.A);
            mix_matrix(g.loop.B);
            mix_matrix(g.loop.F);
            mix_matrix(g.loop.K);
            mix_matrix(g.loop.L);
            mix_matrix(g.loop.Q_n);
            mix_matrix(g.loop.R_n);
            mix(g.params.nominal_frequency);
            mix(g.params.D);
            for (double v : g.init) mix(v);
        }
        mix_matrix(load_map.M);
        for (int b : load_map.b_nom) mix(b);
        mix(envelope.f_lo);
        mix(envelope.f_hi);
        mix(envelope.pe_lo);
        mix(envelope.pe_hi);
        if (!(fdia_governor_gain >= 0 && fdia_governor_gain <= 1))
            throw InvalidArgument("GridModel: fdia_governor_gain must lie in [0, 1]");
        for (double th : thresholds) mix(th);
        for (const auto& row : scheduled_load)
            for (double v : row) mix(v);
        mix(fdia_governor_gain);
        return h;
    }
};

}  // namespace gridstorm
