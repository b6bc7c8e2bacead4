#pragma once

#include <algorithm>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include "gridstorm/sim/simulate.hpp"

namespace gridstorm {

/// Which frequency drives the success predicate: the (possibly falsified)
/// measured speed, or the true state.
enum class SignalBasis { measured, true_state };

/// `until_unsafe`: stealth is required only before the first unsafe step.
/// `whole_trace`: stealth is required over every step of the trace.
enum class StealthSemantics { until_unsafe, whole_trace };

inline std::string_view to_string(SignalBasis b) {
    return b == SignalBasis::measured ? "measured" : "true";
}

inline SignalBasis parse_signal_basis(std::string_view s) {
    if (s == "measured") return SignalBasis::measured;
    if (s == "true" || s == "true_state") return SignalBasis::true_state;
    throw InvalidArgument("signal basis must be 'measured' or 'true', got '" + std::string(s) + "'");
}

inline double basis_frequency(const GenStep& g, SignalBasis basis) noexcept {
    return basis == SignalBasis::measured ? g.f_meas_hz : g.f_hz;
}

/// First step with any ||r^i||_inf > Th^i (strict).
inline std::optional<std::size_t> detect(const SimTrace& trace, std::span<const double> thresholds) {
    for (const auto& rec : trace.steps) {
        if (rec.gens.size() != thresholds.size())
            throw InvalidArgument("detect: one threshold per generator is required");
        for (std::size_t i = 0; i < rec.gens.size(); ++i)
            if (rec.gens[i].r_inf > thresholds[i]) return rec.k;
    }
    return std::nullopt;
}

/// First step at which any generator's frequency leaves the band.
inline std::optional<std::size_t> first_unsafe(const SimTrace& trace, const SafetyEnvelope& env,
                                               SignalBasis basis) {
    for (const auto& rec : trace.steps)
        for (const auto& g : rec.gens)
            if (!env.frequency_safe(basis_frequency(g, basis))) return rec.k;
    return std::nullopt;
}

struct BasisVerdict {
    bool success = false;
    std::optional<std::size_t> k_prime;
};

struct SuccessReport {
    bool success = false;
    std::optional<std::size_t> k_prime;
    std::optional<std::size_t> first_detection;
    bool stealthy_until_unsafe = false;
    SignalBasis signal_basis = SignalBasis::measured;
    /// Same predicate evaluated on the other basis, for inspection.
    BasisVerdict other_basis;
};

namespace detail {
inline BasisVerdict verdict(std::optional<std::size_t> unsafe, std::optional<std::size_t> detection,
                            StealthSemantics sem) {
    BasisVerdict v;
    v.k_prime = unsafe;
    if (!unsafe) return v;
    if (sem == StealthSemantics::whole_trace)
        v.success = !detection.has_value();
    else
        v.success = !detection || *detection >= *unsafe;
    return v;
}
}  // namespace detail

inline SuccessReport check_success(const SimTrace& trace, const SafetyEnvelope& env,
                                   std::span<const double> thresholds,
                                   SignalBasis basis = SignalBasis::measured,
                                   StealthSemantics sem = StealthSemantics::until_unsafe) {
    if (trace.empty()) throw InvalidArgument("check_success: empty trace");
    const SignalBasis other =
        basis == SignalBasis::measured ? SignalBasis::true_state : SignalBasis::measured;
    const auto detection = detect(trace, thresholds);
    const BasisVerdict main = detail::verdict(first_unsafe(trace, env, basis), detection, sem);

    SuccessReport rep;
    rep.success = main.success;
    rep.k_prime = main.k_prime;
    rep.first_detection = detection;
    rep.signal_basis = basis;
    rep.stealthy_until_unsafe = main.k_prime ? (!detection || *detection >= *main.k_prime)
                                             : !detection.has_value();
    rep.other_basis = detail::verdict(first_unsafe(trace, env, other), detection, sem);
    return rep;
}

/// Quantitative semantics of the stealth-until-unsafe property:
///   rho = min_k' max(s(k'), g(k'))
/// s(k') is the smallest signed frequency margin over generators at k',
/// g(k') the largest ||r^i_k||_inf - Th^i over k < k'. A residue exactly at
/// the threshold counts as stealthy, so g = 0 is nudged below zero. The
/// empty max is -min Th. rho < 0 iff check_success.
inline double robustness(const SimTrace& trace, const SafetyEnvelope& env,
                         std::span<const double> thresholds,
                         SignalBasis basis = SignalBasis::measured,
                         StealthSemantics sem = StealthSemantics::until_unsafe) {
    if (trace.empty()) throw InvalidArgument("robustness: empty trace");
    if (thresholds.empty()) throw InvalidArgument("robustness: no thresholds");
    const double empty_g = -*std::min_element(thresholds.begin(), thresholds.end());
    auto excess = [&](const StepRecord& rec) {
        if (rec.gens.size() != thresholds.size())
            throw InvalidArgument("robustness: one threshold per generator is required");
        double e = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < rec.gens.size(); ++i) e = std::max(e, rec.gens[i].r_inf - thresholds[i]);
        return e;
    };
    auto nudge = [](double g) { return g == 0.0 ? -std::numeric_limits<double>::denorm_min() : g; };

    double whole = -std::numeric_limits<double>::infinity();
    if (sem == StealthSemantics::whole_trace) {
        for (const auto& rec : trace.steps) whole = std::max(whole, excess(rec));
    }

    double rho = std::numeric_limits<double>::infinity();
    double g_prefix = -std::numeric_limits<double>::infinity();
    for (const auto& rec : trace.steps) {
        double s = std::numeric_limits<double>::infinity();
        for (const auto& g : rec.gens) s = std::min(s, env.frequency_margin(basis_frequency(g, basis)));
        double g = sem == StealthSemantics::whole_trace ? whole : g_prefix;
        g = std::isinf(g) && g < 0 ? empty_g : nudge(g);
        rho = std::min(rho, std::max(s, g));
        g_prefix = std::max(g_prefix, excess(rec));
    }
    return rho;
}

/// Th^i = margin * max_k ||r^i_k||_inf over an unattacked run, floored at
/// kThresholdFloor.
inline std::vector<double> calibrate_threshold(const GridModel& grid, std::size_t nominal_horizon,
                                               double margin, RngStream* rng, bool noise = true) {
    if (!(margin >= 1.0)) throw InvalidArgument("calibrate_threshold: margin must be >= 1");
    grid.validate_structure();
    SimulateOptions opts;
    opts.horizon = nominal_horizon;
    opts.noise = noise;
    const SimTrace trace = simulate(grid, nullptr, opts, rng);
    if (trace.blew_up) throw ConfigError("calibrate_threshold: nominal run diverged");
    if (first_unsafe(trace, grid.envelope, SignalBasis::true_state))
        throw ConfigError("calibrate_threshold: nominal run leaves the safe frequency band");
    std::vector<double> th(grid.n(), 0.0);
    for (const auto& rec : trace.steps)
        for (std::size_t i = 0; i < grid.n(); ++i) th[i] = std::max(th[i], rec.gens[i].r_inf);
    for (double& t : th) t = std::max(margin * t, kThresholdFloor);
    return th;
}

inline std::string format_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline void write_trace_csv(std::ostream& out, const SimTrace& trace) {
    out << "k,t_s,gen,x1,x2,x3,x4,xhat1,xhat2,xhat3,xhat4,u_believed,u_actual,y1,y2,ymeas1,ymeas2,"
           "r1,r2,rinf,f_hz,pe_pu,stealthy\n";
    for (const auto& rec : trace.steps) {
        for (std::size_t i = 0; i < rec.gens.size(); ++i) {
            const GenStep& g = rec.gens[i];
            out << rec.k << ',' << format_g9(static_cast<double>(rec.k) * trace.ts) << ',' << i;
            for (double v : g.x) out << ',' << format_g9(v);
            for (double v : g.xhat) out << ',' << format_g9(v);
            out << ',' << format_g9(g.u_believed) << ',' << format_g9(g.u_actual);
            for (double v : g.y) out << ',' << format_g9(v);
            for (double v : g.y_meas) out << ',' << format_g9(v);
            for (double v : g.r) out << ',' << format_g9(v);
            out << ',' << format_g9(g.r_inf) << ',' << format_g9(g.f_hz) << ',' << format_g9(g.pe_pu)
                << ',' << (g.stealthy ? 1 : 0) << '\n';
        }
    }
}

}  // namespace gridstorm
