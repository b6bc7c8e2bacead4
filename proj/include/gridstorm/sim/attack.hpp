#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "gridstorm/model/grid.hpp"

namespace gridstorm {

/// d x m binary breaker commands; row k is applied during the transition
/// from step k to step k + 1.
struct BreakerSchedule {
    std::vector<std::vector<int>> signals;

    [[nodiscard]] std::size_t d() const noexcept { return signals.size(); }
    [[nodiscard]] std::size_t m() const noexcept { return signals.empty() ? 0 : signals.front().size(); }

    static BreakerSchedule constant(std::size_t d, std::span<const int> state) {
        return {std::vector<std::vector<int>>(d, std::vector<int>(state.begin(), state.end()))};
    }

    void validate(std::size_t breakers) const {
        if (signals.empty()) throw InvalidArgument("BreakerSchedule: d must be >= 1");
        for (const auto& row : signals) {
            if (row.size() != breakers)
                throw InvalidArgument("BreakerSchedule: row has " + std::to_string(row.size()) +
                                      " signals, expected " + std::to_string(breakers));
            for (int b : row)
                if (b != 0 && b != 1) throw InvalidArgument("BreakerSchedule: signals must be 0 or 1");
        }
    }
};

using OutputMask = std::array<int, kOutputs>;

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    [[nodiscard]] bool contains(double v) const noexcept { return v >= lo && v <= hi; }
    [[nodiscard]] double width() const noexcept { return hi - lo; }
};

using OutputRange = std::array<Interval, kOutputs>;

/// Additive false data on the measured outputs. values[i] is d x q for
/// generator i; row k is added to the measurement at step k + 1.
struct FalseDataSchedule {
    std::vector<Matrix> values;
    std::vector<OutputMask> mask;
    OutputRange range{};

    [[nodiscard]] std::size_t d() const noexcept { return values.empty() ? 0 : values.front().rows(); }

    static FalseDataSchedule zeros(std::size_t generators, std::size_t d) {
        FalseDataSchedule s;
        s.values.assign(generators, Matrix(d, kOutputs));
        s.mask.assign(generators, OutputMask{0, 0});
        return s;
    }

    void validate(std::size_t generators) const {
        if (values.size() != generators || mask.size() != generators)
            throw InvalidArgument("FalseDataSchedule: need one value block and mask per generator");
        const std::size_t steps = d();
        if (steps == 0) throw InvalidArgument("FalseDataSchedule: d must be >= 1");
        for (std::size_t j = 0; j < kOutputs; ++j)
            if (!(range[j].lo <= range[j].hi)) throw InvalidArgument("FalseDataSchedule: empty range");
        for (std::size_t i = 0; i < generators; ++i) {
            const Matrix& v = values[i];
            if (v.rows() != steps || v.cols() != kOutputs)
                throw InvalidArgument("FalseDataSchedule: generator " + std::to_string(i) +
                                      " block must be d x 2");
            for (std::size_t k = 0; k < steps; ++k) {
                for (std::size_t j = 0; j < kOutputs; ++j) {
                    const double a = v(k, j);
                    if (mask[i][j] == 0 && a != 0.0)
                        throw InvalidArgument("FalseDataSchedule: masked-off output carries false data");
                    if (mask[i][j] != 0 && !range[j].contains(a))
                        throw InvalidArgument("FalseDataSchedule: value outside declared range");
                }
            }
        }
    }
};

struct AttackVector {
    BreakerSchedule breaker_schedule;
    FalseDataSchedule false_data;

    [[nodiscard]] std::size_t d() const noexcept { return breaker_schedule.d(); }

    void validate(const GridModel& grid) const {
        breaker_schedule.validate(grid.m());
        false_data.validate(grid.n());
        if (false_data.d() != breaker_schedule.d())
            throw InvalidArgument("AttackVector: breaker and false-data schedules differ in length");
    }

    [[nodiscard]] std::uint64_t hash() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto mix_bytes = [&h](const void* p, std::size_t n) {
            const auto* b = static_cast<const unsigned char*>(p);
            for (std::size_t i = 0; i < n; ++i) {
                h ^= b[i];
                h *= 0x100000001b3ULL;
            }
        };
        for (const auto& row : breaker_schedule.signals) mix_bytes(row.data(), row.size() * sizeof(int));
        for (const auto& v : false_data.values) mix_bytes(v.entries().data(), v.size() * sizeof(double));
        for (const auto& m : false_data.mask) mix_bytes(m.data(), m.size() * sizeof(int));
        return h;
    }
};

/// Attack that only toggles breakers.
inline AttackVector laa_only(const BreakerSchedule& laa, std::size_t generators) {
    return {laa, FalseDataSchedule::zeros(generators, laa.d())};
}

}  // namespace gridstorm
