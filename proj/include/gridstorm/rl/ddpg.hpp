#pragma once

#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "gridstorm/rl/env.hpp"
#include "gridstorm/rl/mlp.hpp"

namespace gridstorm {

/// Training stopped because a loss or a weight became non-finite.
class TrainingAborted : public NumericalError {
public:
    using NumericalError::NumericalError;
};

struct Transition {
    std::vector<double> obs;
    std::vector<double> act;
    double reward = 0.0;
    std::vector<double> next_obs;
    bool done = false;
};

/// Fixed-capacity ring of transitions.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw InvalidArgument("ReplayBuffer: capacity must be >= 1");
        data_.reserve(std::min<std::size_t>(capacity, 4096));
    }

    void push(Transition t) {
        if (data_.size() < capacity_) {
            data_.push_back(std::move(t));
        } else {
            data_[head_] = std::move(t);
        }
        head_ = (head_ + 1) % capacity_;
    }

    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }
    [[nodiscard]] const Transition& operator[](std::size_t i) const { return data_.at(i); }

    /// `batch` distinct indices, uniformly (partial Fisher-Yates).
    std::vector<std::size_t> sample_indices(std::size_t batch, RngStream& rng) const {
        if (batch > data_.size()) throw InvalidArgument("ReplayBuffer: batch larger than buffer");
        std::vector<std::size_t> idx(data_.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t i = 0; i < batch; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(batch);
        return idx;
    }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Transition> data_;
};

struct TrainConfig {
    EpisodeConfig episode;
    RewardWeights weights;
    RewardVariant variant = RewardVariant::sum_product;
    std::size_t hidden = 64;
    double gamma = 0.99;
    double tau = 0.005;
    double actor_lr = 1e-4;
    double critic_lr = 1e-3;
    std::size_t batch = 64;
    std::size_t buffer = 100'000;
    double sigma0 = 0.2;
    double sigma_decay = 0.995;
    std::size_t updates_per_step = 1;
    /// Half-width of the uniform init of both networks' last layer.
    double final_layer_scale = 3e-3;
    /// Actor output before training; breakers start closed with
    /// probability P(initial_action + noise > 0).
    double initial_action = 0.0;

    void validate() const {
        episode.validate();
        weights.validate();
        if (!(gamma >= 0 && gamma <= 1)) throw InvalidArgument("TrainConfig: gamma must lie in [0, 1]");
        if (!(tau > 0 && tau <= 1)) throw InvalidArgument("TrainConfig: tau must lie in (0, 1]");
        if (!(actor_lr > 0 && critic_lr > 0)) throw InvalidArgument("TrainConfig: learning rates must be > 0");
        if (batch < 1 || buffer < batch) throw InvalidArgument("TrainConfig: need 1 <= batch <= buffer");
        if (hidden < 1) throw InvalidArgument("TrainConfig: hidden size must be >= 1");
        if (!(sigma0 >= 0)) throw InvalidArgument("TrainConfig: sigma0 must be >= 0");
        if (!(std::abs(initial_action) < 1)) throw InvalidArgument("TrainConfig: initial_action must lie in (-1, 1)");
    }
};

/// Actor/critic pair with observation scaling baked in.
class DdpgAgent {
public:
    DdpgAgent(std::size_t obs_dim, std::size_t act_dim, const TrainConfig& cfg, std::vector<double> obs_offset,
              std::vector<double> obs_scale, RngStream& rng)
        : cfg_(cfg),
          actor_({obs_dim, cfg.hidden, cfg.hidden, act_dim}, OutputActivation::tanh),
          critic_({obs_dim + act_dim, cfg.hidden, cfg.hidden, 1}, OutputActivation::identity),
          off_(std::move(obs_offset)),
          scale_(std::move(obs_scale)) {
        actor_.init_uniform(rng, cfg.final_layer_scale);
        if (cfg.initial_action != 0.0) actor_.shift_output_bias(std::atanh(cfg.initial_action));
        critic_.init_uniform(rng, cfg.final_layer_scale);
        actor_target_ = actor_;
        critic_target_ = critic_;
        actor_opt_ = Adam(actor_.params().size(), cfg.actor_lr);
        critic_opt_ = Adam(critic_.params().size(), cfg.critic_lr);
    }

    [[nodiscard]] std::vector<double> scale(std::span<const double> obs) const {
        std::vector<double> s(obs.size());
        for (std::size_t i = 0; i < obs.size(); ++i) s[i] = (obs[i] - off_[i]) / scale_[i];
        return s;
    }

    [[nodiscard]] std::vector<double> act(std::span<const double> obs) const { return actor_.forward(scale(obs)); }

    /// One critic and one actor step on a minibatch; returns the critic loss.
    double update(const ReplayBuffer& buf, RngStream& rng) {
        const auto idx = buf.sample_indices(cfg_.batch, rng);
        const double inv_b = 1.0 / static_cast<double>(idx.size());
        std::vector<double> gc(critic_.params().size(), 0.0);
        double loss = 0.0;
        Mlp::Tape tape;
        for (std::size_t b : idx) {
            const Transition& t = buf[b];
            double target = t.reward;
            if (!t.done && cfg_.gamma > 0) {
                const auto sn = scale(t.next_obs);
                const auto an = actor_target_.forward(sn);
                target += cfg_.gamma * critic_target_.forward(concat(sn, an))[0];
            }
            critic_.forward(concat(scale(t.obs), t.act), tape);
            const double err = tape.act.back()[0] - target;
            loss += err * err * inv_b;
            const double g = 2.0 * err * inv_b;
            critic_.backward(tape, std::span<const double>(&g, 1), gc);
        }
        if (!std::isfinite(loss)) throw TrainingAborted("critic loss is not finite");
        critic_opt_.step(critic_.params(), gc);

        std::vector<double> ga(actor_.params().size(), 0.0);
        std::vector<double> dummy(critic_.params().size(), 0.0);
        Mlp::Tape atape, ctape;
        const std::size_t obs_dim = actor_.input_size();
        for (std::size_t b : idx) {
            const auto s = scale(buf[b].obs);
            actor_.forward(s, atape);
            critic_.forward(concat(s, atape.act.back()), ctape);
            // Ascend Q: minimize -Q.
            const double g = -inv_b;
            const auto din = critic_.backward(ctape, std::span<const double>(&g, 1), dummy);
            actor_.backward(atape, std::span<const double>(din.data() + obs_dim, din.size() - obs_dim), ga);
        }
        actor_opt_.step(actor_.params(), ga);
        if (!actor_.all_finite() || !critic_.all_finite()) throw TrainingAborted("network weights became non-finite");
        actor_.soft_update_into(actor_target_, cfg_.tau);
        critic_.soft_update_into(critic_target_, cfg_.tau);
        return loss;
    }

    [[nodiscard]] double q_value(std::span<const double> obs, std::span<const double> a) const {
        return critic_.forward(concat(scale(obs), a))[0];
    }

    [[nodiscard]] const Mlp& actor() const noexcept { return actor_; }
    [[nodiscard]] const Mlp& critic() const noexcept { return critic_; }
    [[nodiscard]] const std::vector<double>& obs_offset() const noexcept { return off_; }
    [[nodiscard]] const std::vector<double>& obs_scale() const noexcept { return scale_; }

    static std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
        std::vector<double> out(a.begin(), a.end());
        out.insert(out.end(), b.begin(), b.end());
        return out;
    }

private:
    TrainConfig cfg_;
    Mlp actor_, critic_, actor_target_, critic_target_;
    Adam actor_opt_, critic_opt_;
    std::vector<double> off_, scale_;
};

/// Deployable policy: actor weights plus the observation scaling.
struct Policy {
    Mlp actor;
    std::vector<double> obs_offset;
    std::vector<double> obs_scale;

    [[nodiscard]] std::vector<double> act(std::span<const double> obs) const {
        std::vector<double> s(obs.size());
        for (std::size_t i = 0; i < obs.size(); ++i) s[i] = (obs[i] - obs_offset[i]) / obs_scale[i];
        return actor.forward(s);
    }
};

struct TrainArtifacts {
    Policy policy;
    Mlp critic;
    std::vector<double> reward_curve;
    BreakerSchedule best_schedule;  ///< executed breaker rows of the best episode
    std::vector<StateVec> best_init;
    double best_reward = 0.0;
    std::size_t best_episode = 0;
    std::uint64_t seed = 0;
};

/// Optional per-episode hook (episode index, episode reward).
using EpisodeCallback = std::function<void(std::size_t, double)>;

inline TrainArtifacts ddpg_train(const GridModel& grid, const TrainConfig& cfg, std::uint64_t seed,
                                 const EpisodeCallback& on_episode = {}) {
    cfg.validate();
    LaaEnv env(grid, cfg.episode, cfg.weights, cfg.variant);
    RngStream init_rng(seed, 1), explore_rng(seed, 2), batch_rng(seed, 3), reset_rng(seed, 4);
    auto [off, scl] = env.observation_scaling();
    DdpgAgent agent(env.obs_dim(), env.act_dim(), cfg, off, scl, init_rng);
    ReplayBuffer buffer(cfg.buffer);

    TrainArtifacts art;
    art.seed = seed;
    art.reward_curve.reserve(cfg.episode.episodes);
    double sigma = cfg.sigma0;
    bool have_best = false;
    for (std::size_t ep = 0; ep < cfg.episode.episodes; ++ep) {
        Observation obs = env.reset(reset_rng);
        double total = 0.0;
        while (!env.done()) {
            std::vector<double> a = agent.act(obs);
            for (double& v : a) v = std::clamp(v + sigma * explore_rng.normal(), -1.0, 1.0);
            EnvStep st = env.step(a);
            total += st.reward;
            buffer.push({obs, a, st.reward, st.obs, st.done});
            obs = std::move(st.obs);
            if (buffer.size() >= cfg.batch) {
                for (std::size_t u = 0; u < cfg.updates_per_step; ++u) {
                    try {
                        agent.update(buffer, batch_rng);
                    } catch (const TrainingAborted& e) {
                        std::ostringstream os;
                        os << e.what() << " (episode " << ep << ", step " << env.steps_taken()
                           << ", buffer " << buffer.size() << ", sigma " << sigma << ")";
                        throw TrainingAborted(os.str());
                    }
                }
            }
        }
        art.reward_curve.push_back(total);
        if (!have_best || total > art.best_reward) {
            have_best = true;
            art.best_reward = total;
            art.best_episode = ep;
            art.best_schedule = env.executed();
            art.best_init = env.initial_state();
        }
        if (on_episode) on_episode(ep, total);
        sigma *= cfg.sigma_decay;
    }
    art.policy = {agent.actor(), agent.obs_offset(), agent.obs_scale()};
    art.critic = agent.critic();
    return art;
}

/// Deterministic (no exploration) rollout; returns the executed schedule.
inline BreakerSchedule rollout_policy(const Policy& policy, LaaEnv& env, RngStream& reset_rng,
                                      double* total_reward = nullptr) {
    Observation obs = env.reset(reset_rng);
    double total = 0.0;
    while (!env.done()) {
        EnvStep st = env.step(policy.act(obs));
        total += st.reward;
        obs = std::move(st.obs);
    }
    if (total_reward != nullptr) *total_reward = total;
    return env.executed();
}

/// Reward a breaker schedule earns when replayed through `simulate`, scored
/// exactly as the environment scores an episode.
inline double replay_reward(const GridModel& grid, const BreakerSchedule& schedule,
                            const std::vector<StateVec>& init, const RewardWeights& w,
                            RewardVariant variant = RewardVariant::sum_product,
                            bool terminate_on_detection = false) {
    const AttackVector atk = laa_only(schedule, grid.n());
    SimulateOptions opts;
    opts.horizon = schedule.d();
    opts.init = init;
    const SimTrace trace = simulate(grid, &atk, opts);
    EpisodeConfig ec;
    ec.steps_per_episode = schedule.d();
    LaaEnv scorer(grid, ec, w, variant);
    double total = 0.0;
    for (std::size_t k = 1; k < trace.steps.size(); ++k) {
        total += scorer.step_reward(trace.steps[k]);
        if (terminate_on_detection && scorer.detected(trace.steps[k])) break;
    }
    return total;
}

}  // namespace gridstorm
