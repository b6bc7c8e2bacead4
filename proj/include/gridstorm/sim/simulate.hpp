#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gridstorm/numerics/rng.hpp"
#include "gridstorm/sim/attack.hpp"

namespace gridstorm {

using StateVec = std::array<double, kStates>;
using OutputVec = std::array<double, kOutputs>;

/// One generator's slice of a simulation step. The inputs are the ones that
/// drove the transition into this step.
struct GenStep {
    StateVec x{};          ///< true (attacked) state
    StateVec xhat{};       ///< estimator state
    double u_believed = 0; ///< input the estimator assumed (per-unit)
    double u_actual = 0;   ///< load the plant actually saw (per-unit)
    OutputVec y{};         ///< C x
    OutputVec y_meas{};    ///< C x + false data + measurement noise
    OutputVec r{};         ///< y_meas - C xhat
    double r_inf = 0;
    double f_hz = 0;       ///< from the true speed deviation
    double f_meas_hz = 0;  ///< from the measured speed deviation
    double pe_pu = 0;      ///< u_actual + D dw
    double pe_dev = 0;     ///< pe_pu minus the scheduled load
    bool stealthy = true;  ///< r_inf <= threshold
};

struct StepRecord {
    std::size_t k = 0;
    std::vector<GenStep> gens;
};

/// Ordered step records 0..horizon. Truncated (and flagged) if the state
/// became non-finite.
struct SimTrace {
    std::vector<StepRecord> steps;
    std::uint64_t seed = 0;
    std::uint64_t grid_hash = 0;
    std::uint64_t attack_hash = 0;
    double ts = 0.0;
    bool blew_up = false;

    [[nodiscard]] std::size_t size() const noexcept { return steps.size(); }
    [[nodiscard]] bool empty() const noexcept { return steps.empty(); }
    [[nodiscard]] std::size_t generators() const noexcept {
        return steps.empty() ? 0 : steps.front().gens.size();
    }
};

/// Incremental closed-loop stepper shared by `simulate` and the RL
/// environment so that both produce bit-identical records.
class ClosedLoopStepper {
public:
    ClosedLoopStepper(const GridModel& grid, bool noise, RngStream* rng,
                      const std::vector<StateVec>* init = nullptr)
        : grid_(&grid), noise_(noise), rng_(rng) {
        const std::size_t n = grid.n();
        if (noise_ && rng_ == nullptr) throw InvalidArgument("ClosedLoopStepper: noise needs an RngStream");
        if (init != nullptr && init->size() != n)
            throw InvalidArgument("ClosedLoopStepper: init needs one state per generator");
        x_.resize(n);
        xhat_.resize(n);
        r_.assign(n, OutputVec{});
        ay_.assign(n, OutputVec{});
        if (noise_) {
            chol_q_.reserve(n);
            chol_r_.reserve(n);
            for (const auto& g : grid.generators) {
                chol_q_.push_back(cholesky_psd(g.loop.Q_n));
                chol_r_.push_back(cholesky_psd(g.loop.R_n));
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            StateVec x0{};
            if (init != nullptr) {
                x0 = (*init)[i];
            } else {
                for (std::size_t s = 0; s < kStates; ++s) x0[s] = grid.generators[i].init[s];
            }
            x_[i] = x0;
            xhat_[i] = x0;
        }
    }

    /// Record for step 0 (no transition yet; inputs are the nominal schedule).
    StepRecord initial() {
        StepRecord rec;
        rec.k = 0;
        rec.gens.resize(grid_->n());
        for (std::size_t i = 0; i < grid_->n(); ++i) {
            const double sched = grid_->scheduled(i, 0);
            const double u_bel = sched + gain_times(i, xhat_[i]);
            finish(i, rec.gens[i], sched, sched, u_bel, OutputVec{});
        }
        k_ = 0;
        return rec;
    }

    /// Advances one sampling period. `breakers` is the breaker state held
    /// during the transition k -> k+1; `false_data[i]` is added to generator
    /// i's measurement at step k+1 (pass nullptr for none).
    StepRecord step(std::span<const int> breakers, const std::vector<OutputVec>* false_data) {
        const std::size_t n = grid_->n();
        const std::vector<double> dpl = apply_load_map(grid_->load_map, breakers);
        const double gain = grid_->fdia_governor_gain;
        StepRecord rec;
        rec.k = k_ + 1;
        rec.gens.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const DiscreteLoop& loop = grid_->generators[i].loop;
            const double sched = grid_->scheduled(i, k_);
            const double u_act = sched + dpl[i];
            const double u_bel = sched + gain_times(i, xhat_[i]);

            StateVec xn{};
            StateVec xhn{};
            for (std::size_t r = 0; r < kStates; ++r) {
                double acc = loop.B(r, 0) * u_act;
                double acch = loop.B(r, 0) * u_bel;
                for (std::size_t c = 0; c < kStates; ++c) {
                    acc += loop.A(r, c) * x_[i][c];
                    acch += loop.A(r, c) * xhat_[i][c];
                }
                if (gain != 0.0) {
                    for (std::size_t j = 0; j < kOutputs; ++j) acc += gain * loop.F(r, j) * ay_[i][j];
                }
                for (std::size_t j = 0; j < kOutputs; ++j) acch += loop.L(r, j) * r_[i][j];
                xn[r] = acc;
                xhn[r] = acch;
            }
            if (noise_) add_noise(chol_q_[i], xn);
            x_[i] = xn;
            xhat_[i] = xhn;

            OutputVec ay{};
            if (false_data != nullptr) ay = (*false_data)[i];
            finish(i, rec.gens[i], sched, u_act, u_bel, ay);
        }
        ++k_;
        return rec;
    }

    [[nodiscard]] std::size_t k() const noexcept { return k_; }

private:
    double gain_times(std::size_t i, const StateVec& xh) const {
        const Matrix& kg = grid_->generators[i].loop.K;
        double s = 0.0;
        for (std::size_t c = 0; c < kStates; ++c) s += kg(0, c) * xh[c];
        return s;
    }

    template <std::size_t N>
    void add_noise(const Matrix& chol, std::array<double, N>& v) {
        std::array<double, N> z{};
        for (auto& e : z) e = rng_->normal();
        for (std::size_t r = 0; r < N; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c <= r; ++c) s += chol(r, c) * z[c];
            v[r] += s;
        }
    }

    void finish(std::size_t i, GenStep& g, double sched, double u_act, double u_bel,
                const OutputVec& ay) {
        const Generator& gen = grid_->generators[i];
        const DiscreteLoop& loop = gen.loop;
        g.x = x_[i];
        g.xhat = xhat_[i];
        g.u_actual = u_act;
        g.u_believed = u_bel;
        g.y = {x_[i][kOmega], x_[i][kPref]};
        OutputVec noise{};
        if (noise_) add_noise(chol_r_[i], noise);
        const OutputVec yhat = {xhat_[i][kOmega], xhat_[i][kPref]};
        for (std::size_t j = 0; j < kOutputs; ++j) {
            g.y_meas[j] = g.y[j] + ay[j] + noise[j];
            g.r[j] = g.y_meas[j] - yhat[j];
        }
        // C is the fixed selector of (dw, dPref); keep the general product
        // honest if a loop carries a different C.
        if (loop.C != output_selector()) {
            const auto cx = multiply(loop.C, x_[i]);
            const auto cxh = multiply(loop.C, xhat_[i]);
            for (std::size_t j = 0; j < kOutputs; ++j) {
                g.y[j] = cx[j];
                g.y_meas[j] = cx[j] + ay[j] + noise[j];
                g.r[j] = g.y_meas[j] - cxh[j];
            }
        }
        g.r_inf = std::max(std::abs(g.r[0]), std::abs(g.r[1]));
        g.f_hz = frequency_hz(g.y[0], gen.params.nominal_frequency);
        g.f_meas_hz = frequency_hz(g.y_meas[0], gen.params.nominal_frequency);
        g.pe_pu = u_act + gen.params.D * x_[i][kOmega];
        g.pe_dev = g.pe_pu - sched;
        g.stealthy = i < grid_->thresholds.size() ? g.r_inf <= grid_->thresholds[i] : true;
        r_[i] = g.r;
        ay_[i] = ay;
    }

    const GridModel* grid_;
    bool noise_;
    RngStream* rng_;
    std::vector<StateVec> x_;
    std::vector<StateVec> xhat_;
    std::vector<OutputVec> r_;
    std::vector<OutputVec> ay_;
    std::vector<Matrix> chol_q_;
    std::vector<Matrix> chol_r_;
    std::size_t k_ = 0;
};

inline bool record_finite(const StepRecord& rec) {
    for (const auto& g : rec.gens) {
        for (double v : g.x)
            if (!std::isfinite(v)) return false;
        for (double v : g.xhat)
            if (!std::isfinite(v)) return false;
        if (!std::isfinite(g.r_inf)) return false;
    }
    return true;
}

struct SimulateOptions {
    std::size_t horizon = 100;
    bool noise = false;
    /// Per-generator initial state; defaults to each generator's `init`.
    std::optional<std::vector<StateVec>> init;
};

/// Runs the (possibly attacked) closed loop for `horizon` steps. After the
/// attack's d steps the breakers revert to nominal and the false data to 0.
inline SimTrace simulate(const GridModel& grid, const AttackVector* attack,
                         const SimulateOptions& opts, RngStream* rng = nullptr) {
    if (opts.horizon < 1) throw InvalidArgument("simulate: horizon must be >= 1");
    if (attack != nullptr) {
        attack->validate(grid);
        if (attack->d() > opts.horizon)
            throw InvalidArgument("simulate: attack length exceeds the horizon");
    }
    const std::size_t n = grid.n();
    ClosedLoopStepper stepper(grid, opts.noise, rng, opts.init ? &*opts.init : nullptr);

    SimTrace trace;
    trace.seed = rng != nullptr ? rng->seed() : 0;
    trace.grid_hash = grid.hash();
    trace.attack_hash = attack != nullptr ? attack->hash() : 0;
    trace.ts = grid.ts();
    trace.steps.reserve(opts.horizon + 1);
    trace.steps.push_back(stepper.initial());

    std::vector<OutputVec> ay(n);
    const std::size_t d = attack != nullptr ? attack->d() : 0;
    for (std::size_t k = 1; k <= opts.horizon; ++k) {
        const std::size_t row = k - 1;
        std::span<const int> breakers = grid.load_map.b_nom;
        const std::vector<OutputVec>* fd = nullptr;
        if (row < d) {
            breakers = attack->breaker_schedule.signals[row];
            for (std::size_t i = 0; i < n; ++i) {
                const Matrix& v = attack->false_data.values[i];
                const OutputMask& mask = attack->false_data.mask[i];
                for (std::size_t j = 0; j < kOutputs; ++j) ay[i][j] = mask[j] != 0 ? v(row, j) : 0.0;
            }
            fd = &ay;
        }
        StepRecord rec = stepper.step(breakers, fd);
        if (!record_finite(rec)) {
            trace.blew_up = true;
            break;
        }
        trace.steps.push_back(std::move(rec));
    }
    return trace;
}

}  // namespace gridstorm
