#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gridstorm/falsify/falsify.hpp"
#include "gridstorm/io/attack_io.hpp"
#include "gridstorm/io/manifest.hpp"
#include "gridstorm/io/run_config.hpp"
#include "gridstorm/io/svg.hpp"
#include "gridstorm/rl/ddpg.hpp"

namespace gridstorm {

enum ExitCode : int {
    kExitOk = 0,
    kExitPredicateFalse = 1,
    kExitInputError = 2,
    kExitNoCounterExample = 3,
    kExitBreach = 4,
};

/// Parsed command line shared by every subcommand.
struct CommandOptions {
    std::string command;
    std::vector<std::string> argv;
    std::filesystem::path config;
    std::optional<std::filesystem::path> attack;
    std::optional<std::filesystem::path> laa;
    std::optional<std::filesystem::path> train_config;
    std::optional<std::filesystem::path> falsify_config;
    std::uint64_t seed = 0;
    std::optional<std::size_t> horizon;
    std::optional<std::filesystem::path> out;
    std::optional<SignalBasis> basis;
    bool noise = false;
    bool assert_improving = false;
    bool laa_only = false;
    bool fdia_only = false;
    bool combined = false;

    [[nodiscard]] std::filesystem::path out_dir() const { return out.value_or("out"); }
};

/// Raised for bad arguments that a parser cannot catch (exit 2).
class UsageError : public Error {
public:
    using Error::Error;
};

// Stream ids of the per-stage RNG streams split from the master seed.
inline constexpr std::uint64_t kSimNoiseStream = 1;
inline constexpr std::uint64_t kNoisyReplayStream = 0xB0B0;

namespace detail {

inline std::filesystem::path prepare_out(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, text);
}

inline std::string svg_string(const Plot& p) {
    std::ostringstream os;
    write_svg(os, p);
    return os.str();
}

inline RunManifest start_manifest(const CommandOptions& o, const GridModel& grid) {
    RunManifest m;
    m.command = o.command;
    m.argv = o.argv;
    m.config_path = o.config.string();
    m.config_file_hash = file_hash(o.config);
    m.grid_hash = grid.hash();
    m.master_seed = o.seed;
    m.started = manifest_clock();
    return m;
}

inline std::vector<double> time_axis(const SimTrace& tr) {
    std::vector<double> t;
    t.reserve(tr.steps.size());
    for (const auto& rec : tr.steps) t.push_back(static_cast<double>(rec.k) * tr.ts);
    return t;
}

inline std::string gen_label(const GridModel& g, std::size_t i) {
    const std::string& name = g.generators[i].name;
    return name.empty() ? "GEN" + std::to_string(i + 1) : name;
}

inline json optional_step(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

/// Frequency, residue and power plots of one trace, all generators overlaid.
inline std::vector<std::pair<std::string, Plot>> trace_plots(const GridModel& grid, const SimTrace& tr) {
    const auto t = time_axis(tr);
    const auto det = detect(tr, grid.thresholds);
    Plot f{"Generator frequency", "time (s)", "frequency (Hz)", {}, {}, {}, {}};
    Plot r{"Residue infinity-norm", "time (s)", "||r||_inf", {}, {}, {}, {}};
    Plot p{"Electrical power deviation", "time (s)", "P_e - scheduled (pu)", {}, {}, {}, {}};
    for (std::size_t i = 0; i < grid.n(); ++i) {
        PlotSeries sf{gen_label(grid, i), t, {}}, sr{gen_label(grid, i), t, {}}, sp{gen_label(grid, i), t, {}};
        for (const auto& rec : tr.steps) {
            sf.y.push_back(rec.gens[i].f_hz);
            sr.y.push_back(rec.gens[i].r_inf);
            sp.y.push_back(rec.gens[i].pe_dev);
        }
        f.series.push_back(std::move(sf));
        r.series.push_back(std::move(sr));
        p.series.push_back(std::move(sp));
        r.lines.push_back({"Th " + gen_label(grid, i), grid.thresholds[i]});
    }
    f.bands.push_back({"safe band", grid.envelope.f_lo, grid.envelope.f_hi});
    p.bands.push_back({"safe band", grid.envelope.pe_lo, grid.envelope.pe_hi});
    if (det) {
        const PlotMarker m{"first detection", static_cast<double>(*det) * tr.ts};
        f.markers.push_back(m);
        r.markers.push_back(m);
        p.markers.push_back(m);
    }
    return {{"frequency.svg", std::move(f)}, {"residue.svg", std::move(r)}, {"power.svg", std::move(p)}};
}

inline json report_json(const SuccessReport& rep) {
    json j;
    j["success"] = rep.success;
    j["signal_basis"] = std::string(to_string(rep.signal_basis));
    j["k_prime"] = optional_step(rep.k_prime);
    j["first_detection"] = optional_step(rep.first_detection);
    j["stealthy_until_unsafe"] = rep.stealthy_until_unsafe;
    const SignalBasis other =
        rep.signal_basis == SignalBasis::measured ? SignalBasis::true_state : SignalBasis::measured;
    j["other_basis"] = {{"signal_basis", std::string(to_string(other))},
                        {"success", rep.other_basis.success},
                        {"k_prime", optional_step(rep.other_basis.k_prime)}};
    return j;
}

/// Mean of the first and last `w` entries.
inline std::pair<double, double> moving_average_ends(const std::vector<double>& v, std::size_t w) {
    w = std::clamp<std::size_t>(w, 1, v.size());
    double a = 0, b = 0;
    for (std::size_t i = 0; i < w; ++i) {
        a += v[i];
        b += v[v.size() - w + i];
    }
    return {a / static_cast<double>(w), b / static_cast<double>(w)};
}

/// Horizon stored by `falsify` in the attack provenance, if any.
inline std::optional<std::size_t> provenance_horizon(const json& prov) {
    if (prov.is_object() && prov.contains("horizon") && prov["horizon"].is_number_unsigned())
        return prov["horizon"].get<std::size_t>();
    return std::nullopt;
}

inline BreakerSchedule pad_schedule(BreakerSchedule s, std::size_t d, const std::vector<int>& nominal) {
    if (s.d() < d) s.signals.resize(d, nominal);
    return s;
}

}  // namespace detail

inline int cmd_simulate(const CommandOptions& o, std::ostream& log) {
    const GridModel grid = load_grid_file(o.config);
    std::optional<AttackVector> atk;
    if (o.attack) atk = load_attack_file(*o.attack, grid);
    if (o.horizon && *o.horizon == 0) throw UsageError("--horizon must be >= 1");
    const std::size_t horizon = o.horizon.value_or(std::max<std::size_t>(100, atk ? atk->d() : 0));
    if (atk && atk->d() > horizon)
        throw UsageError("--horizon " + std::to_string(horizon) + " is shorter than the attack (" +
                         std::to_string(atk->d()) + " steps)");

    const auto dir = detail::prepare_out(o.out_dir());
    RunManifest man = detail::start_manifest(o, grid);
    SimulateOptions so;
    so.horizon = horizon;
    so.noise = o.noise;
    RngStream rng(o.seed, kSimNoiseStream);
    if (o.noise) man.stage_streams["noise"] = kSimNoiseStream;
    const SimTrace tr = simulate(grid, atk ? &*atk : nullptr, so, o.noise ? &rng : nullptr);

    std::ostringstream csv;
    write_trace_csv(csv, tr);
    detail::write_text(dir / "trace.csv", csv.str());
    man.outputs.push_back("trace.csv");
    for (const auto& [name, plot] : detail::trace_plots(grid, tr)) {
        detail::write_text(dir / name, detail::svg_string(plot));
        man.outputs.push_back(name);
    }
    const auto det = detect(tr, grid.thresholds);
    const auto uns = first_unsafe(tr, grid.envelope, o.basis.value_or(SignalBasis::measured));
    log << "simulated " << horizon << " steps" << (tr.blew_up ? " (diverged)" : "") << "; first detection "
        << (det ? std::to_string(*det) : "none") << ", first unsafe " << (uns ? std::to_string(*uns) : "none")
        << '\n';
    write_manifest(dir, man);
    return kExitOk;
}

inline int cmd_train_laa(const CommandOptions& o, std::ostream& log) {
    const GridModel grid = load_grid_file(o.config);
    const TrainConfig cfg = o.train_config ? load_train_config(*o.train_config) : TrainConfig{};
    const auto dir = detail::prepare_out(o.out_dir());
    RunManifest man = detail::start_manifest(o, grid);
    man.stage_streams = {{"actor_init", 1}, {"exploration", 2}, {"minibatch", 3}, {"reset", 4}};

    TrainArtifacts art;
    try {
        art = ddpg_train(grid, cfg, o.seed);
    } catch (const TrainingAborted& e) {
        log << "training aborted: " << e.what() << '\n';
        return kExitBreach;
    }

    {
        std::ostringstream w;
        write_weights(w, art.policy.actor);
        detail::write_text(dir / "actor.gsrl", w.str());
    }
    std::ostringstream csv;
    write_reward_csv(csv, art.reward_curve);
    detail::write_text(dir / "reward.csv", csv.str());

    Plot rp{"Episode reward", "episode", "reward", {}, {}, {}, {}};
    PlotSeries s{"reward", {}, art.reward_curve};
    for (std::size_t e = 0; e < art.reward_curve.size(); ++e) s.x.push_back(static_cast<double>(e));
    rp.series.push_back(std::move(s));
    detail::write_text(dir / "reward.svg", detail::svg_string(rp));

    const BreakerSchedule best =
        detail::pad_schedule(art.best_schedule, cfg.episode.steps_per_episode, grid.load_map.b_nom);
    detail::write_text(dir / "best_schedule.json", dump_json(schedule_to_json(best)));
    man.outputs = {"actor.gsrl", "reward.csv", "reward.svg", "best_schedule.json"};

    const auto [start, end] =
        detail::moving_average_ends(art.reward_curve, std::max<std::size_t>(1, art.reward_curve.size() / 5));
    log << "trained " << art.reward_curve.size() << " episodes; best reward " << format_g9(art.best_reward)
        << " (episode " << art.best_episode << "); moving average " << format_g9(start) << " -> "
        << format_g9(end) << '\n';
    int code = kExitOk;
    if (o.assert_improving && end < start) {
        log << "reward trend is not improving\n";
        code = kExitPredicateFalse;
    }
    man.exit_code = code;
    write_manifest(dir, man);
    return code;
}

inline int cmd_falsify(const CommandOptions& o, std::ostream& log) {
    const GridModel grid = load_grid_file(o.config);
    if (!o.laa) throw UsageError("falsify needs --laa <schedule file>");
    FalsifySettings fs = o.falsify_config ? load_falsify_settings(*o.falsify_config) : FalsifySettings{};
    bind_mask(fs, grid);
    BreakerSchedule laa = load_schedule_file(*o.laa, grid.m());
    if (fs.d && *fs.d != laa.d())
        throw ConfigError(o.laa->string() + ": schedule has " + std::to_string(laa.d()) +
                          " rows but the falsification horizon d is " + std::to_string(*fs.d));
    if (o.horizon) fs.horizon = *o.horizon;
    FalsificationProblem prob = fs.problem(grid, laa, SignalBasis::measured);
    if (o.basis) prob.basis = *o.basis;
    try {
        prob.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("falsification problem: ") + e.what());
    }

    const auto dir = detail::prepare_out(o.out_dir());
    RunManifest man = detail::start_manifest(o, grid);
    for (std::size_t r = 0; r < fs.search.restarts; ++r) man.stage_streams["restart" + std::to_string(r)] = 0x5A00 + r;

    const SynthesisResult syn = synthesize_and_validate(prob, fs.search, o.seed);
    const FalsifyResult& res = syn.search;

    std::ostringstream rep;
    rep << "falsification report\n";
    rep << "grid hash        " << hex64(grid.hash()) << '\n';
    rep << "seed             " << o.seed << '\n';
    rep << "d                " << prob.d << '\n';
    rep << "horizon          " << prob.sim_horizon() << '\n';
    rep << "control points   " << prob.control_points << '\n';
    rep << "dimension        " << prob.dimension() << '\n';
    rep << "signal basis     " << to_string(prob.basis) << '\n';
    rep << "evaluations      " << res.evaluations << '\n';
    rep << "best rho         " << format_g9(res.rho) << '\n';
    rep << "success          " << (res.success ? "yes" : "no") << '\n';
    if (syn.report) {
        rep << "k_prime          " << (syn.report->k_prime ? std::to_string(*syn.report->k_prime) : "none") << '\n';
        rep << "first detection  "
            << (syn.report->first_detection ? std::to_string(*syn.report->first_detection) : "none") << '\n';
    }
    rep << "\nrestart  evaluations  initial_rho  best_rho\n";
    for (std::size_t r = 0; r < res.history.size(); ++r) {
        const auto& h = res.history[r];
        rep << std::setw(7) << r << "  " << std::setw(11) << h.evaluations << "  " << std::setw(11)
            << format_g9(h.initial_rho) << "  " << format_g9(h.best_rho) << '\n';
    }
    rep << "\nbest rho history (restart " << res.best_restart << ", every 100 evaluations)\n";
    if (!res.history.empty()) {
        const auto& hist = res.history[res.best_restart].best_so_far;
        for (std::size_t e = 0; e < hist.size(); e += 100) rep << e + 1 << ' ' << format_g9(hist[e]) << '\n';
        if (!hist.empty()) rep << hist.size() << ' ' << format_g9(hist.back()) << '\n';
    }
    detail::write_text(dir / "report.txt", rep.str());
    man.outputs.push_back("report.txt");

    int code = kExitNoCounterExample;
    if (syn.attack) {
        json prov;
        prov["tool"] = "gridstorm";
        prov["version"] = kToolVersion;
        prov["seed"] = o.seed;
        prov["grid_hash"] = hex64(grid.hash());
        prov["rho"] = res.rho;
        prov["evaluations"] = res.evaluations;
        prov["horizon"] = prob.sim_horizon();
        prov["signal_basis"] = std::string(to_string(prob.basis));
        prov["semantics"] = prob.semantics == StealthSemantics::whole_trace ? "whole_trace" : "until_unsafe";
        detail::write_text(dir / "attack.json", dump_json(attack_to_json(*syn.attack, prov)));
        man.outputs.push_back("attack.json");
        code = kExitOk;
        log << "counter-example found: rho " << format_g9(res.rho) << ", k' " << *syn.report->k_prime << '\n';
    } else {
        log << "no counter-example after " << res.evaluations << " evaluations (best rho " << format_g9(res.rho)
            << ")\n";
    }
    man.exit_code = code;
    write_manifest(dir, man);
    return code;
}

/// Re-simulates an attack and prints its SuccessReport as JSON on `out`.
inline int cmd_validate(const CommandOptions& o, std::ostream& out, std::ostream& log) {
    const GridModel grid = load_grid_file(o.config);
    if (!o.attack) throw UsageError("validate needs --attack <attack file>");
    json prov;
    const AttackVector atk = load_attack_file(*o.attack, grid, &prov);
    std::size_t noise_seeds = 20;
    if (o.falsify_config) noise_seeds = load_falsify_settings(*o.falsify_config).noise_seeds;
    if (o.horizon && *o.horizon == 0) throw UsageError("--horizon must be >= 1");
    const std::size_t horizon = o.horizon.value_or(detail::provenance_horizon(prov).value_or(atk.d()));
    if (horizon < atk.d()) throw UsageError("--horizon is shorter than the attack");
    SignalBasis basis = o.basis.value_or(SignalBasis::measured);
    if (!o.basis && prov.is_object() && prov.contains("signal_basis") && prov["signal_basis"].is_string())
        basis = parse_signal_basis(prov["signal_basis"].get<std::string>());

    SimulateOptions so;
    so.horizon = horizon;
    const SimTrace tr = simulate(grid, &atk, so);
    const SuccessReport rep = check_success(tr, grid.envelope, grid.thresholds, basis);
    json doc = detail::report_json(rep);
    doc["horizon"] = horizon;
    doc["rho"] = robustness(tr, grid.envelope, grid.thresholds, basis);
    doc["noisy_success_fraction"] =
        noisy_success_fraction(grid, atk, horizon, basis, noise_seeds, o.seed);
    doc["noise_seeds"] = noise_seeds;
    const std::string text = dump_json(doc);
    out << text;
    if (o.out) {
        const auto dir = detail::prepare_out(*o.out);
        RunManifest man = detail::start_manifest(o, grid);
        man.stage_streams["noisy_replay"] = kNoisyReplayStream;
        detail::write_text(dir / "report.json", text);
        man.outputs.push_back("report.json");
        man.exit_code = rep.success ? kExitOk : kExitPredicateFalse;
        write_manifest(dir, man);
    }
    log << (rep.success ? "attack succeeds" : "attack does not succeed") << " under the " << to_string(basis)
        << " basis\n";
    return rep.success ? kExitOk : kExitPredicateFalse;
}

/// Outcome of one compare mode.
struct ModeOutcome {
    std::string mode;
    SimTrace trace;
    std::optional<std::size_t> first_detection;
    std::optional<std::size_t> first_unsafe;  ///< true frequency
    SuccessReport success;
    bool in_band_at_end = false;
    double max_abs_deviation_hz = 0.0;
};

struct CompareVerdict {
    bool laa_stealthy_recovers = false;
    bool fdia_detected_first = false;
    bool combined_succeeds = false;
    bool combined_hides_longer = false;
    [[nodiscard]] bool ordering() const {
        return laa_stealthy_recovers && fdia_detected_first && combined_succeeds && combined_hides_longer;
    }
};

inline constexpr std::size_t kCompareMaxKPrime = 50;

inline CompareVerdict compare_verdict(const std::vector<ModeOutcome>& modes) {
    const ModeOutcome* laa = nullptr;
    const ModeOutcome* fdia = nullptr;
    const ModeOutcome* comb = nullptr;
    for (const auto& m : modes) {
        if (m.mode == "laa-only") laa = &m;
        if (m.mode == "fdia-only") fdia = &m;
        if (m.mode == "combined") comb = &m;
    }
    CompareVerdict v;
    if (laa) v.laa_stealthy_recovers = !laa->first_detection && laa->in_band_at_end;
    if (fdia)
        v.fdia_detected_first =
            fdia->first_detection && (!fdia->first_unsafe || *fdia->first_detection <= *fdia->first_unsafe);
    if (comb)
        v.combined_succeeds = comb->success.success && comb->success.k_prime &&
                              *comb->success.k_prime <= kCompareMaxKPrime;
    if (comb && fdia && fdia->first_detection)
        v.combined_hides_longer = !comb->first_detection || *comb->first_detection > *fdia->first_detection;
    return v;
}

inline int cmd_compare(const CommandOptions& o, std::ostream& log) {
    const GridModel grid = load_grid_file(o.config);
    if (!o.laa_only && !o.fdia_only && !o.combined)
        throw UsageError("compare needs at least one of --laa-only, --fdia-only, --combined");
    std::optional<AttackVector> atk;
    if (o.attack) atk = load_attack_file(*o.attack, grid);
    std::optional<BreakerSchedule> laa;
    if (o.laa) laa = load_schedule_file(*o.laa, grid.m());
    if ((o.fdia_only || o.combined) && !atk) throw UsageError("--fdia-only and --combined need --attack");
    if (o.laa_only && !atk && !laa) throw UsageError("--laa-only needs --laa or --attack");
    if (o.horizon && *o.horizon == 0) throw UsageError("--horizon must be >= 1");
    const std::size_t d = atk ? atk->d() : laa->d();
    const std::size_t horizon = o.horizon.value_or(std::max<std::size_t>(300, d));
    if (horizon < d) throw UsageError("--horizon is shorter than the attack");
    const SignalBasis basis = o.basis.value_or(SignalBasis::measured);

    std::vector<std::pair<std::string, AttackVector>> runs;
    if (o.laa_only) runs.emplace_back("laa-only", laa_only(laa ? *laa : atk->breaker_schedule, grid.n()));
    if (o.fdia_only) {
        AttackVector f = *atk;
        f.breaker_schedule = BreakerSchedule::constant(f.d(), grid.load_map.b_nom);
        runs.emplace_back("fdia-only", std::move(f));
    }
    if (o.combined) runs.emplace_back("combined", *atk);

    std::vector<ModeOutcome> modes;
    for (auto& [name, a] : runs) {
        SimulateOptions so;
        so.horizon = horizon;
        ModeOutcome m;
        m.mode = name;
        m.trace = simulate(grid, &a, so);
        m.first_detection = detect(m.trace, grid.thresholds);
        m.first_unsafe = first_unsafe(m.trace, grid.envelope, SignalBasis::true_state);
        m.success = check_success(m.trace, grid.envelope, grid.thresholds, basis);
        m.in_band_at_end = true;
        for (const auto& g : m.trace.steps.back().gens)
            m.in_band_at_end = m.in_band_at_end && grid.envelope.frequency_safe(g.f_hz);
        for (const auto& rec : m.trace.steps)
            for (std::size_t i = 0; i < grid.n(); ++i)
                m.max_abs_deviation_hz = std::max(
                    m.max_abs_deviation_hz, std::abs(rec.gens[i].f_hz - grid.generators[i].params.nominal_frequency));
        modes.push_back(std::move(m));
    }

    const auto dir = detail::prepare_out(o.out_dir());
    RunManifest man = detail::start_manifest(o, grid);

    // One curve per mode: the generator with the largest excursion, and the
    // residue as a fraction of its own threshold (worst generator).
    Plot fp{"Frequency under attack", "time (s)", "frequency (Hz)", {}, {}, {}, {}};
    Plot rp{"Residue under attack", "time (s)", "max_i ||r_i||_inf / Th_i", {}, {}, {}, {}};
    for (const auto& m : modes) {
        std::size_t worst = 0;
        double worst_dev = -1;
        for (std::size_t i = 0; i < grid.n(); ++i)
            for (const auto& rec : m.trace.steps) {
                const double dev = std::abs(rec.gens[i].f_hz - grid.generators[i].params.nominal_frequency);
                if (dev > worst_dev) {
                    worst_dev = dev;
                    worst = i;
                }
            }
        const auto t = detail::time_axis(m.trace);
        PlotSeries sf{m.mode + " (" + detail::gen_label(grid, worst) + ")", t, {}};
        PlotSeries sr{m.mode, t, {}};
        for (const auto& rec : m.trace.steps) {
            sf.y.push_back(rec.gens[worst].f_hz);
            double ratio = 0;
            for (std::size_t i = 0; i < grid.n(); ++i) ratio = std::max(ratio, rec.gens[i].r_inf / grid.thresholds[i]);
            sr.y.push_back(ratio);
        }
        fp.series.push_back(std::move(sf));
        rp.series.push_back(std::move(sr));
        if (m.first_detection) {
            const PlotMarker mk{m.mode + " detected", static_cast<double>(*m.first_detection) * m.trace.ts};
            fp.markers.push_back(mk);
            rp.markers.push_back(mk);
        }
    }
    fp.bands.push_back({"safe band", grid.envelope.f_lo, grid.envelope.f_hi});
    rp.lines.push_back({"threshold", 1.0});
    detail::write_text(dir / "compare_frequency.svg", detail::svg_string(fp));
    detail::write_text(dir / "compare_residue.svg", detail::svg_string(rp));

    const CompareVerdict v = compare_verdict(modes);
    json doc;
    doc["horizon"] = horizon;
    doc["d"] = d;
    doc["signal_basis"] = std::string(to_string(basis));
    json jm = json::array();
    for (const auto& m : modes) {
        json j;
        j["mode"] = m.mode;
        j["first_detection"] = detail::optional_step(m.first_detection);
        j["first_unsafe"] = detail::optional_step(m.first_unsafe);
        j["success"] = detail::report_json(m.success);
        j["in_band_at_end"] = m.in_band_at_end;
        j["max_abs_deviation_hz"] = m.max_abs_deviation_hz;
        jm.push_back(std::move(j));
    }
    doc["modes"] = std::move(jm);
    if (o.laa_only && o.fdia_only && o.combined) {
        doc["verdict"] = {{"laa_only_stealthy_with_recovery", v.laa_stealthy_recovers},
                          {"fdia_only_detected_before_unsafe", v.fdia_detected_first},
                          {"combined_unsafe_before_detection", v.combined_succeeds},
                          {"combined_hides_longer_than_fdia_only", v.combined_hides_longer},
                          {"ordering_reproduced", v.ordering()}};
    }
    detail::write_text(dir / "compare.json", dump_json(doc));
    man.outputs = {"compare_frequency.svg", "compare_residue.svg", "compare.json"};
    write_manifest(dir, man);

    for (const auto& m : modes)
        log << std::left << std::setw(10) << m.mode << " detection "
            << (m.first_detection ? std::to_string(*m.first_detection) : "none") << ", unsafe "
            << (m.first_unsafe ? std::to_string(*m.first_unsafe) : "none") << ", max |df| "
            << format_g9(m.max_abs_deviation_hz) << " Hz\n";
    if (doc.contains("verdict")) log << "ordering " << (v.ordering() ? "reproduced" : "not reproduced") << '\n';
    return kExitOk;
}

/// Dispatches on o.command and maps exceptions to exit codes.
inline int run_command(const CommandOptions& o, std::ostream& out, std::ostream& err) {
    try {
        if (o.command == "simulate") return cmd_simulate(o, err);
        if (o.command == "train-laa") return cmd_train_laa(o, err);
        if (o.command == "falsify") return cmd_falsify(o, err);
        if (o.command == "validate") return cmd_validate(o, out, err);
        if (o.command == "compare") return cmd_compare(o, err);
        err << "unknown command '" << o.command << "'\n";
        return kExitInputError;
    } catch (const InvariantBreach& e) {
        err << "error: " << e.what() << '\n';
        return kExitBreach;
    } catch (const TrainingAborted& e) {
        err << "error: " << e.what() << '\n';
        return kExitBreach;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitBreach;
    }
}

}  // namespace gridstorm
