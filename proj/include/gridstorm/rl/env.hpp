#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "gridstorm/sim/detect.hpp"

namespace gridstorm {

struct RewardWeights {
    double w1 = 1.0;
    double w2 = 1.0;
    double w3 = 0.25;

    void validate() const {
        if (!(w1 >= 0 && w2 >= 0 && w3 >= 0)) throw InvalidArgument("RewardWeights: weights must be >= 0");
        if (!(w1 > 0 || w2 > 0 || w3 > 0)) throw InvalidArgument("RewardWeights: at least one weight must be > 0");
    }
};

/// `sum_product`: term1 multiplies two sums, term2 pairs per generator.
/// `all_product`: term2 also multiplies the two sums.
enum class RewardVariant { sum_product, all_product };

/// Per-step attacker reward. `pe` is the electrical power deviation from
/// the schedule; the envelope's pe bounds apply to it.
inline double reward(std::span<const double> f, std::span<const double> r_inf, std::span<const double> pe,
                     const RewardWeights& w, const SafetyEnvelope& env, std::span<const double> thresholds,
                     RewardVariant variant = RewardVariant::sum_product) {
    const std::size_t n = f.size();
    if (r_inf.size() != n || pe.size() != n || thresholds.size() != n)
        throw InvalidArgument("reward: vectors must all have length n");
    double unsafe_pe = 0, unsafe_f = 0, stealth = 0, paired = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = r_inf[i] <= thresholds[i] ? 1.0 : 0.0;
        const double uf = env.frequency_safe(f[i]) ? 0.0 : 1.0;
        unsafe_pe += env.power_safe(pe[i]) ? 0.0 : 1.0;
        unsafe_f += uf;
        stealth += s;
        paired += uf * s;
    }
    const double term2 = variant == RewardVariant::sum_product ? paired : unsafe_f * stealth;
    return w.w1 * unsafe_pe * stealth + w.w2 * term2 + w.w3 * stealth;
}

struct EpisodeConfig {
    std::size_t steps_per_episode = 100;
    std::size_t episodes = 50;
    /// Initial states are drawn uniformly in +-init_spread[s] around each
    /// generator's configured init (all zero: deterministic reset).
    std::array<double, kStates> init_spread{};
    std::size_t action_repeat = 1;
    bool noise = false;
    /// End the episode at the first step any residue exceeds its threshold.
    bool terminate_on_detection = false;

    void validate() const {
        if (steps_per_episode < 1) throw InvalidArgument("EpisodeConfig: steps_per_episode must be >= 1");
        if (episodes < 1) throw InvalidArgument("EpisodeConfig: episodes must be >= 1");
        if (action_repeat < 1) throw InvalidArgument("EpisodeConfig: action_repeat must be >= 1");
        for (double s : init_spread)
            if (!(s >= 0)) throw InvalidArgument("EpisodeConfig: init_spread must be >= 0");
    }
};

using Observation = std::vector<double>;

struct EnvStep {
    Observation obs;
    double reward = 0.0;
    bool done = false;
};

/// Breaker-toggling environment: observation per generator (f, ||r||_inf,
/// P_e deviation) followed by the previous action.
class LaaEnv {
public:
    LaaEnv(const GridModel& grid, EpisodeConfig cfg, RewardWeights w = {},
           RewardVariant variant = RewardVariant::sum_product)
        : grid_(&grid), cfg_(cfg), w_(w), variant_(variant) {
        grid.validate();
        cfg_.validate();
        w_.validate();
    }

    [[nodiscard]] std::size_t obs_dim() const noexcept { return 3 * grid_->n() + grid_->m(); }
    [[nodiscard]] std::size_t act_dim() const noexcept { return grid_->m(); }
    [[nodiscard]] const GridModel& grid() const noexcept { return *grid_; }
    [[nodiscard]] const EpisodeConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] bool done() const noexcept { return done_; }
    [[nodiscard]] std::size_t steps_taken() const noexcept { return steps_; }
    [[nodiscard]] const std::vector<StateVec>& initial_state() const noexcept { return init_; }
    /// Breaker rows actually applied so far (one per simulator step).
    [[nodiscard]] const BreakerSchedule& executed() const noexcept { return executed_; }

    /// Offsets and scales that bring observations to O(1); used by agents.
    [[nodiscard]] std::pair<std::vector<double>, std::vector<double>> observation_scaling() const {
        std::vector<double> off(obs_dim(), 0.0), scale(obs_dim(), 1.0);
        const SafetyEnvelope& e = grid_->envelope;
        for (std::size_t i = 0; i < grid_->n(); ++i) {
            off[3 * i] = 0.5 * (e.f_lo + e.f_hi);
            scale[3 * i] = 0.5 * (e.f_hi - e.f_lo);
            scale[3 * i + 1] = grid_->thresholds[i];
            scale[3 * i + 2] = std::max(std::abs(e.pe_lo), std::abs(e.pe_hi));
        }
        return {off, scale};
    }

    Observation reset(RngStream& rng) {
        init_.assign(grid_->n(), StateVec{});
        for (std::size_t i = 0; i < grid_->n(); ++i) {
            for (std::size_t s = 0; s < kStates; ++s) {
                const double spread = cfg_.init_spread[s];
                init_[i][s] = grid_->generators[i].init[s] + (spread > 0 ? rng.uniform(-spread, spread) : 0.0);
            }
        }
        noise_rng_.reset();
        if (cfg_.noise) noise_rng_ = std::make_unique<RngStream>(rng.split(rng.next_u64()));
        stepper_ = std::make_unique<ClosedLoopStepper>(*grid_, cfg_.noise, noise_rng_.get(), &init_);
        last_ = stepper_->initial();
        prev_action_.assign(grid_->m(), 0.0);
        executed_.signals.clear();
        steps_ = 0;
        done_ = false;
        return observe();
    }

    /// Breaker command from an actor output: closed iff value > 0.
    [[nodiscard]] static std::vector<int> decode_action(std::span<const double> a) {
        std::vector<int> b(a.size());
        for (std::size_t j = 0; j < a.size(); ++j) b[j] = a[j] > 0 ? 1 : 0;
        return b;
    }

    EnvStep step(std::span<const double> action) {
        if (!stepper_) throw InvalidArgument("LaaEnv::step: reset() has not been called");
        if (done_) throw InvalidArgument("LaaEnv::step: episode already finished");
        if (action.size() != act_dim()) throw InvalidArgument("LaaEnv::step: action size mismatch");
        std::vector<double> a(action.begin(), action.end());
        for (double& v : a) v = std::isfinite(v) ? std::clamp(v, -1.0, 1.0) : 0.0;
        const std::vector<int> breakers = decode_action(a);
        EnvStep out;
        for (std::size_t rep = 0; rep < cfg_.action_repeat && !done_; ++rep) {
            StepRecord rec = stepper_->step(breakers, nullptr);
            executed_.signals.push_back(breakers);
            ++steps_;
            if (!record_finite(rec)) {
                done_ = true;
                break;
            }
            last_ = std::move(rec);
            out.reward += step_reward(last_);
            if (steps_ >= cfg_.steps_per_episode) done_ = true;
            if (cfg_.terminate_on_detection && detected(last_)) done_ = true;
        }
        prev_action_ = a;
        out.obs = observe();
        out.done = done_;
        return out;
    }

    [[nodiscard]] bool detected(const StepRecord& rec) const {
        for (std::size_t i = 0; i < rec.gens.size(); ++i)
            if (rec.gens[i].r_inf > grid_->thresholds[i]) return true;
        return false;
    }

    [[nodiscard]] double step_reward(const StepRecord& rec) const {
        const std::size_t n = grid_->n();
        std::vector<double> f(n), r(n), pe(n);
        for (std::size_t i = 0; i < n; ++i) {
            f[i] = rec.gens[i].f_meas_hz;
            r[i] = rec.gens[i].r_inf;
            pe[i] = rec.gens[i].pe_dev;
        }
        return reward(f, r, pe, w_, grid_->envelope, grid_->thresholds, variant_);
    }

private:
    Observation observe() const {
        Observation o;
        o.reserve(obs_dim());
        for (const auto& g : last_.gens) {
            o.push_back(g.f_meas_hz);
            o.push_back(g.r_inf);
            o.push_back(g.pe_dev);
        }
        for (double v : prev_action_) o.push_back(v);
        return o;
    }

    const GridModel* grid_;
    EpisodeConfig cfg_;
    RewardWeights w_;
    RewardVariant variant_;
    std::unique_ptr<RngStream> noise_rng_;
    std::unique_ptr<ClosedLoopStepper> stepper_;
    StepRecord last_;
    std::vector<double> prev_action_;
    std::vector<StateVec> init_;
    BreakerSchedule executed_;
    std::size_t steps_ = 0;
    bool done_ = false;
};

}  // namespace gridstorm
