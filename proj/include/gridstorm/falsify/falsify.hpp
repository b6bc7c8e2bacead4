#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gridstorm/sim/detect.hpp"

namespace gridstorm {

/// Search for a false-data sequence that, paired with a fixed breaker
/// schedule, makes the stealth-until-unsafe property fail (rho < 0).
struct FalsificationProblem {
    const GridModel* grid = nullptr;
    BreakerSchedule laa;
    std::size_t d = 0;
    OutputRange range{};
    std::vector<OutputMask> mask;  ///< one per generator
    std::optional<std::vector<StateVec>> init;
    std::size_t control_points = 10;
    SignalBasis basis = SignalBasis::measured;
    StealthSemantics semantics = StealthSemantics::until_unsafe;
    /// Simulated steps; 0 means d.
    std::size_t horizon = 0;

    [[nodiscard]] std::size_t sim_horizon() const noexcept { return horizon == 0 ? d : horizon; }

    /// Attacked (generator, output) pairs in knot-vector order.
    [[nodiscard]] std::vector<std::pair<std::size_t, std::size_t>> channels() const {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (std::size_t i = 0; i < mask.size(); ++i)
            for (std::size_t j = 0; j < kOutputs; ++j)
                if (mask[i][j] != 0) out.emplace_back(i, j);
        return out;
    }

    [[nodiscard]] std::size_t dimension() const { return channels().size() * control_points; }

    void validate() const {
        if (grid == nullptr) throw InvalidArgument("FalsificationProblem: no grid");
        if (d < 1) throw InvalidArgument("FalsificationProblem: d must be >= 1");
        if (laa.d() != d) throw InvalidArgument("FalsificationProblem: LAA schedule length must equal d");
        laa.validate(grid->m());
        if (mask.size() != grid->n()) throw InvalidArgument("FalsificationProblem: one mask per generator");
        for (const auto& r : range)
            if (!(r.lo <= r.hi)) throw InvalidArgument("FalsificationProblem: range lower bound exceeds upper");
        if (control_points < 1 || control_points > d)
            throw InvalidArgument("FalsificationProblem: control points must lie in [1, d]");
        if (channels().empty()) throw InvalidArgument("FalsificationProblem: mask attacks no output");
        if (sim_horizon() < d) throw InvalidArgument("FalsificationProblem: horizon shorter than d");
    }
};

/// Knot values, P per attacked channel, channel-major.
struct Candidate {
    std::vector<double> knots;
};

/// Step k of a d-step schedule held from knot floor(k P / d)'s segment:
/// knot j covers steps floor(j d / P) .. floor((j + 1) d / P) - 1.
inline std::vector<double> decode_control_points(std::span<const double> knots, std::size_t d) {
    const std::size_t p = knots.size();
    if (p < 1 || p > d) throw InvalidArgument("decode_control_points: need 1 <= P <= d");
    std::vector<double> out(d);
    for (std::size_t j = 0; j < p; ++j) {
        const std::size_t begin = j * d / p;
        const std::size_t end = (j + 1) * d / p;
        for (std::size_t k = begin; k < end; ++k) out[k] = knots[j];
    }
    return out;
}

inline FalseDataSchedule decode_candidate(const FalsificationProblem& prob, const Candidate& c) {
    const auto chans = prob.channels();
    if (c.knots.size() != chans.size() * prob.control_points)
        throw InvalidArgument("decode_candidate: knot count does not match the problem");
    FalseDataSchedule fd = FalseDataSchedule::zeros(prob.grid->n(), prob.d);
    fd.mask = prob.mask;
    fd.range = prob.range;
    for (std::size_t ch = 0; ch < chans.size(); ++ch) {
        const auto [i, j] = chans[ch];
        const std::span<const double> knots(c.knots.data() + ch * prob.control_points, prob.control_points);
        const auto steps = decode_control_points(knots, prob.d);
        for (std::size_t k = 0; k < prob.d; ++k) fd.values[i](k, j) = steps[k];
    }
    return fd;
}

inline AttackVector build_attack(const FalsificationProblem& prob, const Candidate& c) {
    return {prob.laa, decode_candidate(prob, c)};
}

inline SimTrace simulate_candidate(const FalsificationProblem& prob, const Candidate& c) {
    const AttackVector atk = build_attack(prob, c);
    SimulateOptions opts;
    opts.horizon = prob.sim_horizon();
    opts.noise = false;
    opts.init = prob.init;
    return simulate(*prob.grid, &atk, opts, nullptr);
}

/// Robustness of the combined attack; +inf if the simulation blew up.
inline double objective(const FalsificationProblem& prob, const Candidate& c) {
    const SimTrace trace = simulate_candidate(prob, c);
    if (trace.blew_up) return std::numeric_limits<double>::infinity();
    return robustness(trace, prob.grid->envelope, prob.grid->thresholds, prob.basis, prob.semantics);
}

/// Per-coordinate bounds of the knot vector.
inline std::vector<Interval> knot_bounds(const FalsificationProblem& prob) {
    std::vector<Interval> out;
    for (const auto& [i, j] : prob.channels()) {
        (void)i;
        for (std::size_t p = 0; p < prob.control_points; ++p) out.push_back(prob.range[j]);
    }
    return out;
}

inline Candidate sample_candidate(const FalsificationProblem& prob, RngStream& rng) {
    Candidate c;
    for (const Interval& b : knot_bounds(prob)) c.knots.push_back(b.width() > 0 ? rng.uniform(b.lo, b.hi) : b.lo);
    return c;
}

struct FalsifyOptions {
    std::size_t budget = 2000;  ///< total objective evaluations across restarts
    std::size_t restarts = 4;
    std::size_t threads = 0;    ///< 0: GRIDSTORM_THREADS or hardware concurrency
    double sigma0 = 0.10;       ///< proposal sd as a fraction of box width
    double sigma_floor = 0.005;
    std::size_t reject_window = 20;
    double cooling = 0.98;
    std::size_t cooling_window = 10;
    /// Snap knots to this many evenly spaced levels (0 disables). When the
    /// whole lattice fits in the budget it is enumerated exhaustively.
    std::size_t lattice_levels = 0;
    /// Restart 0 starts from the box point closest to zero (no false data)
    /// instead of a random sample.
    bool anchor_first_restart = true;
};

struct RestartHistory {
    double initial_rho = 0.0;
    double best_rho = 0.0;
    std::size_t evaluations = 0;
    std::vector<double> best_so_far;  ///< best rho after each evaluation
};

struct FalsifyResult {
    Candidate best;
    FalseDataSchedule schedule;
    double rho = std::numeric_limits<double>::infinity();
    std::size_t evaluations = 0;
    bool success = false;
    std::size_t best_restart = 0;
    std::vector<RestartHistory> history;
};

inline std::size_t configured_threads(std::size_t requested) {
    std::size_t n = requested;
    if (n == 0) {
        n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
        if (const char* env = std::getenv("GRIDSTORM_THREADS")) {
            char* end = nullptr;
            const unsigned long v = std::strtoul(env, &end, 10);
            if (end != env && *end == '\0' && v > 0) n = std::min<std::size_t>(n, v);
        }
    }
    return std::max<std::size_t>(1, n);
}

namespace detail {

inline double snap(double v, const Interval& b, std::size_t levels) {
    if (levels < 2 || b.width() <= 0) return std::clamp(v, b.lo, b.hi);
    const double step = b.width() / static_cast<double>(levels - 1);
    const double idx = std::round((std::clamp(v, b.lo, b.hi) - b.lo) / step);
    return b.lo + idx * step;
}

inline RestartHistory run_restart(const FalsificationProblem& prob, const FalsifyOptions& opt,
                                  std::size_t budget, RngStream rng, Candidate& best_out, bool anchored = false) {
    const auto bounds = knot_bounds(prob);
    RestartHistory h;
    Candidate x = sample_candidate(prob, rng);
    if (anchored)
        for (std::size_t q = 0; q < bounds.size(); ++q) x.knots[q] = std::clamp(0.0, bounds[q].lo, bounds[q].hi);
    for (std::size_t q = 0; q < bounds.size(); ++q) x.knots[q] = snap(x.knots[q], bounds[q], opt.lattice_levels);
    double rho = objective(prob, x);
    h.initial_rho = rho;
    h.evaluations = 1;
    Candidate best = x;
    double best_rho = rho;
    h.best_so_far.push_back(best_rho);

    double temp = std::isfinite(rho) ? std::abs(rho) : 1.0;
    if (temp == 0.0) temp = 1e-12;
    double sigma = opt.sigma0;
    std::size_t rejects = 0;
    std::size_t proposals = 0;
    while (h.evaluations < budget && !(best_rho < 0)) {
        // Alternate between moving every knot and moving a single one.
        Candidate y = x;
        if (proposals % 2 == 0) {
            for (std::size_t q = 0; q < bounds.size(); ++q) {
                const double w = bounds[q].width();
                if (w <= 0) continue;
                y.knots[q] = snap(x.knots[q] + rng.normal() * sigma * w, bounds[q], opt.lattice_levels);
            }
        } else {
            const std::size_t q = rng.below(bounds.size());
            y.knots[q] = snap(x.knots[q] + rng.normal() * 2.0 * sigma * bounds[q].width(), bounds[q],
                              opt.lattice_levels);
        }
        const double rho_y = objective(prob, y);
        ++h.evaluations;
        ++proposals;
        const double delta = rho_y - rho;
        bool accept = delta <= 0;
        if (!accept && std::isfinite(delta)) accept = rng.uniform() < std::exp(-delta / temp);
        if (accept) {
            x = std::move(y);
            rho = rho_y;
            rejects = 0;
            if (rho < best_rho) {
                best_rho = rho;
                best = x;
            }
        } else if (++rejects >= opt.reject_window) {
            sigma = std::max(sigma * 0.5, opt.sigma_floor);
            rejects = 0;
        }
        if (proposals % opt.cooling_window == 0) temp *= opt.cooling;
        h.best_so_far.push_back(best_rho);
    }
    h.best_rho = best_rho;
    best_out = std::move(best);
    return h;
}

/// Exhaustive sweep of the snapped lattice, used when it fits the budget.
inline FalsifyResult enumerate_lattice(const FalsificationProblem& prob, std::size_t levels) {
    const auto bounds = knot_bounds(prob);
    const std::size_t dim = bounds.size();
    FalsifyResult res;
    std::vector<std::size_t> idx(dim, 0);
    RestartHistory h;
    for (;;) {
        Candidate c;
        for (std::size_t q = 0; q < dim; ++q) {
            const Interval& b = bounds[q];
            c.knots.push_back(b.width() > 0 ? b.lo + b.width() * static_cast<double>(idx[q]) /
                                                         static_cast<double>(levels - 1)
                                            : b.lo);
        }
        const double rho = objective(prob, c);
        ++res.evaluations;
        if (res.evaluations == 1) h.initial_rho = rho;
        if (rho < res.rho) {
            res.rho = rho;
            res.best = c;
        }
        h.best_so_far.push_back(res.rho);
        std::size_t q = 0;
        while (q < dim && ++idx[q] == levels) idx[q++] = 0;
        if (q == dim) break;
    }
    h.best_rho = res.rho;
    h.evaluations = res.evaluations;
    res.history.push_back(std::move(h));
    return res;
}

inline bool lattice_fits(std::size_t levels, std::size_t dim, std::size_t budget) {
    double total = 1.0;
    for (std::size_t q = 0; q < dim; ++q) total *= static_cast<double>(levels);
    return total <= static_cast<double>(budget);
}

}  // namespace detail

/// Monte-Carlo starts plus simulated-annealing refinement. Restarts run in
/// parallel on independent streams (seed, restart index); the global best is
/// the lowest rho, ties to the earliest restart.
inline FalsifyResult falsify_sa(const FalsificationProblem& prob, const FalsifyOptions& opt, std::uint64_t seed) {
    prob.validate();
    if (opt.budget < 1) throw InvalidArgument("falsify_sa: budget must be >= 1");
    if (opt.restarts < 1) throw InvalidArgument("falsify_sa: restarts must be >= 1");

    FalsifyResult res;
    if (opt.lattice_levels >= 2 && detail::lattice_fits(opt.lattice_levels, prob.dimension(), opt.budget)) {
        res = detail::enumerate_lattice(prob, opt.lattice_levels);
    } else {
        const std::size_t r = opt.restarts;
        std::vector<RestartHistory> hist(r);
        std::vector<Candidate> bests(r);
        std::vector<std::string> errors(r);
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next++; i < r; i = next++) {
                const std::size_t share = opt.budget / r + (i < opt.budget % r ? 1 : 0);
                try {
                    hist[i] = detail::run_restart(prob, opt, std::max<std::size_t>(share, 1),
                                                  RngStream(seed, 0x5A00 + i), bests[i],
                                                  opt.anchor_first_restart && i == 0);
                } catch (const std::exception& e) {
                    errors[i] = e.what();
                }
            }
        };
        const std::size_t threads = std::min(configured_threads(opt.threads), r);
        if (threads <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
        for (const auto& e : errors)
            if (!e.empty()) throw Error("falsify_sa: " + e);
        for (std::size_t i = 0; i < r; ++i) {
            res.evaluations += hist[i].evaluations;
            if (i == 0 || hist[i].best_rho < res.rho) {
                res.rho = hist[i].best_rho;
                res.best = bests[i];
                res.best_restart = i;
            }
        }
        res.history = std::move(hist);
    }
    res.success = res.rho < 0;
    res.schedule = decode_candidate(prob, res.best);
    return res;
}

struct SynthesisResult {
    FalsifyResult search;
    std::optional<AttackVector> attack;
    std::optional<SuccessReport> report;
};

/// Runs the search and, on success, re-simulates the attack from init and
/// insists that the success predicate holds. Disagreement is an internal
/// invariant breach.
inline SynthesisResult synthesize_and_validate(const FalsificationProblem& prob, const FalsifyOptions& opt,
                                               std::uint64_t seed) {
    SynthesisResult out;
    out.search = falsify_sa(prob, opt, seed);
    if (!out.search.success) return out;
    AttackVector atk = build_attack(prob, out.search.best);
    atk.validate(*prob.grid);
    const SimTrace trace = simulate_candidate(prob, out.search.best);
    const SuccessReport rep =
        check_success(trace, prob.grid->envelope, prob.grid->thresholds, prob.basis, prob.semantics);
    const double rho = robustness(trace, prob.grid->envelope, prob.grid->thresholds, prob.basis, prob.semantics);
    if (!rep.success || rho != out.search.rho)
        throw InvariantBreach("synthesize_and_validate: re-simulation disagrees with the search result");
    out.attack = std::move(atk);
    out.report = rep;
    return out;
}

/// Fraction of noisy replays (independent seeds) in which the attack still
/// succeeds.
inline double noisy_success_fraction(const GridModel& grid, const AttackVector& atk, std::size_t horizon,
                                     SignalBasis basis, std::size_t seeds, std::uint64_t seed,
                                     const std::optional<std::vector<StateVec>>& init = std::nullopt) {
    if (seeds == 0) return 0.0;
    std::size_t wins = 0;
    for (std::size_t s = 0; s < seeds; ++s) {
        RngStream rng(seed, 0xB0B0 + s);
        SimulateOptions opts;
        opts.horizon = horizon;
        opts.noise = true;
        opts.init = init;
        const SimTrace tr = simulate(grid, &atk, opts, &rng);
        wins += check_success(tr, grid.envelope, grid.thresholds, basis).success ? 1 : 0;
    }
    return static_cast<double>(wins) / static_cast<double>(seeds);
}

}  // namespace gridstorm
