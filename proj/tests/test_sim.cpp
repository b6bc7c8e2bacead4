#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "gridstorm/io/config.hpp"

using namespace gridstorm;

namespace {

/// Single-generator trace with the given frequencies and residue norms.
SimTrace synthetic(const std::vector<double>& f, const std::vector<double>& rinf) {
    SimTrace t;
    for (std::size_t k = 0; k < f.size(); ++k) {
        StepRecord rec;
        rec.k = k;
        GenStep g;
        g.f_hz = f[k];
        g.f_meas_hz = f[k];
        g.r_inf = rinf[k];
        rec.gens.push_back(g);
        t.steps.push_back(rec);
    }
    return t;
}

SafetyEnvelope band() {
    SafetyEnvelope e;
    e.f_lo = 59.5;
    e.f_hi = 60.5;
    e.pe_lo = -0.1;
    e.pe_hi = 0.1;
    return e;
}

/// Brute-force reading of the predicate: some k' is unsafe and every
/// residue before it stays at or under its threshold.
std::optional<std::size_t> oracle_success(const SimTrace& t, const SafetyEnvelope& env,
                                          const std::vector<double>& th) {
    for (std::size_t kp = 0; kp < t.size(); ++kp) {
        bool unsafe = false;
        for (const auto& g : t.steps[kp].gens) unsafe |= !env.frequency_safe(g.f_meas_hz);
        if (!unsafe) continue;
        bool stealthy = true;
        for (std::size_t k = 0; k < kp; ++k)
            for (std::size_t i = 0; i < th.size(); ++i) stealthy &= t.steps[k].gens[i].r_inf <= th[i];
        if (stealthy) return kp;
    }
    return std::nullopt;
}

std::optional<std::size_t> oracle_detect(const SimTrace& t, const std::vector<double>& th) {
    for (std::size_t k = 0; k < t.size(); ++k)
        for (std::size_t i = 0; i < th.size(); ++i)
            if (t.steps[k].gens[i].r_inf > th[i]) return k;
    return std::nullopt;
}

/// Random breakers and false data; with `hold` each channel keeps one value.
AttackVector random_attack(const GridModel& g, std::size_t d, RngStream& rng, double amp, bool hold = false) {
    BreakerSchedule bs;
    for (std::size_t k = 0; k < d; ++k) {
        std::vector<int> row(g.m());
        for (auto& b : row) b = rng.uniform() < 0.7 ? 1 : 0;
        bs.signals.push_back(row);
    }
    AttackVector a = laa_only(bs, g.n());
    a.false_data.range = {Interval{-amp, amp}, Interval{-amp, amp}};
    for (std::size_t i = 0; i < g.n(); ++i) {
        a.false_data.mask[i] = {1, 1};
        const OutputVec held{rng.uniform(-amp, amp), rng.uniform(-amp, amp)};
        for (std::size_t k = 0; k < d; ++k)
            for (std::size_t j = 0; j < kOutputs; ++j)
                a.false_data.values[i](k, j) = hold ? held[j] : rng.uniform(-amp, amp);
    }
    return a;
}

GridModel shipped() { return load_grid_file(fixture::source_path("configs/default_grid.json")); }

}  // namespace

TEST_CASE("apply_load_map: hand-evaluated map") {
    LoadMap lm;
    lm.M = Matrix{{0.2, 0, 0}, {0, 0.3, 0}, {0, 0, 0.1}};
    lm.b_nom = {1, 1, 1};
    const auto dpl = apply_load_map(lm, std::vector<int>{0, 1, 1});
    CHECK(dpl[0] == Catch::Approx(-0.2));
    CHECK(dpl[1] == 0.0);
    CHECK(dpl[2] == 0.0);
    // Same result as M (b - b_nom).
    const auto ref = multiply(lm.M, std::vector<double>{-1, 0, 0});
    for (std::size_t i = 0; i < 3; ++i) CHECK(dpl[i] == ref[i]);
}

TEST_CASE("apply_load_map: toggling a breaker twice restores zero") {
    const GridModel g = load_grid_config(fixture::three_gen_doc());
    std::vector<int> b = g.load_map.b_nom;
    b[1] ^= 1;
    CHECK(apply_load_map(g.load_map, b) != std::vector<double>(3, 0.0));
    b[1] ^= 1;
    CHECK(apply_load_map(g.load_map, b) == std::vector<double>(3, 0.0));
}

TEST_CASE("simulate: equilibrium stays at zero") {
    const GridModel g = shipped();
    const SimTrace t = simulate(g, nullptr, {500, false, {}});
    REQUIRE(t.size() == 501);
    for (const auto& rec : t.steps)
        for (const auto& s : rec.gens) {
            for (double v : s.x) CHECK(v == 0.0);
            for (double v : s.r) CHECK(v == 0.0);
            CHECK(s.f_hz == 60.0);
        }
    CHECK_FALSE(detect(t, g.thresholds).has_value());
}

TEST_CASE("simulate: scheduled load step keeps residue at zero and frequency recovers") {
    GridModel g = shipped();
    g.scheduled_load.assign(g.n(), std::vector<double>(3000, 0.0));
    for (std::size_t k = 10; k < 3000; ++k) g.scheduled_load[0][k] = 0.05;
    const SimTrace t = simulate(g, nullptr, {2999, false, {}});
    double peak = 0;
    for (const auto& rec : t.steps) {
        for (const auto& s : rec.gens) CHECK(s.r_inf == 0.0);
        peak = std::max(peak, std::abs(rec.gens[0].x[kOmega]));
    }
    CHECK(peak > 1e-4);
    CHECK(std::abs(t.steps.back().gens[0].x[kOmega]) < 1e-2 * peak);
}

TEST_CASE("simulate: 1000-step noise-free unattacked run has zero residue for any schedule") {
    GridModel g = shipped();
    RngStream rng(3, 0);
    g.scheduled_load.assign(g.n(), std::vector<double>(1001));
    for (auto& row : g.scheduled_load)
        for (auto& v : row) v = rng.uniform(-0.05, 0.05);
    const SimTrace t = simulate(g, nullptr, {1000, false, {}});
    for (const auto& rec : t.steps)
        for (const auto& s : rec.gens) CHECK(s.r_inf == 0.0);
}

TEST_CASE("simulate: record identities") {
    const GridModel g = shipped();
    RngStream arng(4, 0), nrng(4, 1);
    const AttackVector a = random_attack(g, 40, arng, 0.05);
    const SimTrace t = simulate(g, &a, {80, true, {}}, &nrng);
    for (std::size_t k = 0; k < t.size(); ++k) {
        CHECK(t.steps[k].k == k);
        for (std::size_t i = 0; i < g.n(); ++i) {
            const GenStep& s = t.steps[k].gens[i];
            CHECK(s.r[0] == s.y_meas[0] - s.xhat[kOmega]);
            CHECK(s.r[1] == s.y_meas[1] - s.xhat[kPref]);
            CHECK(s.f_hz == Catch::Approx(60.0 + s.x[kOmega] / (2 * std::numbers::pi)).epsilon(1e-14));
            CHECK(s.r_inf == std::max(std::abs(s.r[0]), std::abs(s.r[1])));
            CHECK(s.stealthy == (s.r_inf <= g.thresholds[i]));
        }
    }
}

TEST_CASE("simulate: plant recursion matches a direct matrix evaluation") {
    const GridModel g = load_grid_config(fixture::three_gen_doc());
    RngStream arng(9, 0);
    const AttackVector a = random_attack(g, 30, arng, 0.01);
    const SimTrace t = simulate(g, &a, {30, false, {}});
    for (std::size_t i = 0; i < g.n(); ++i) {
        const DiscreteLoop& L = g.generators[i].loop;
        std::vector<double> x(kStates, 0.0), xh(kStates, 0.0), r(kOutputs, 0.0);
        for (std::size_t k = 1; k <= 30; ++k) {
            const double u = apply_load_map(g.load_map, a.breaker_schedule.signals[k - 1])[i];
            auto xn = multiply(L.A, x);
            auto xhn = multiply(L.A, xh);
            const auto lr = multiply(L.L, r);
            for (std::size_t s = 0; s < kStates; ++s) {
                xn[s] += L.B(s, 0) * u;
                xhn[s] += lr[s];
            }
            x = xn;
            xh = xhn;
            for (std::size_t j = 0; j < kOutputs; ++j) {
                const std::size_t idx = j == 0 ? kOmega : kPref;
                r[j] = x[idx] + a.false_data.values[i](k - 1, j) - xh[idx];
            }
            for (std::size_t s = 0; s < kStates; ++s)
                CHECK(t.steps[k].gens[i].x[s] == Catch::Approx(x[s]).margin(1e-13));
            for (std::size_t j = 0; j < kOutputs; ++j)
                CHECK(t.steps[k].gens[i].r[j] == Catch::Approx(r[j]).margin(1e-13));
        }
    }
}

TEST_CASE("simulate: deterministic for a fixed seed") {
    const GridModel g = shipped();
    RngStream arng(11, 0);
    const AttackVector a = random_attack(g, 50, arng, 0.05);
    auto csv = [&](std::uint64_t seed) {
        RngStream rng(seed, 1);
        std::ostringstream out;
        write_trace_csv(out, simulate(g, &a, {120, true, {}}, &rng));
        return out.str();
    };
    CHECK(csv(5) == csv(5));
    CHECK(csv(5) != csv(6));
}

TEST_CASE("simulate: argument errors") {
    const GridModel g = shipped();
    CHECK_THROWS_AS(simulate(g, nullptr, {0, false, {}}), InvalidArgument);
    const AttackVector a = laa_only(BreakerSchedule::constant(20, g.load_map.b_nom), g.n());
    CHECK_THROWS_AS(simulate(g, &a, {10, false, {}}), InvalidArgument);
    CHECK_THROWS_AS(simulate(g, nullptr, {10, true, {}}), InvalidArgument);
}

TEST_CASE("simulate: unstable state is truncated and flagged") {
    GridModel g = load_grid_config(fixture::toy_grid_doc());
    std::vector<StateVec> init{StateVec{1e300, 0, 0, 0}};
    g.generators[0].loop.A = g.generators[0].loop.A * 1e10;
    const SimTrace t = simulate(g, nullptr, {100, false, init});
    CHECK(t.blew_up);
    CHECK(t.size() < 101);
}

TEST_CASE("simulate: LAA-only excursion recovers toward the band") {
    const GridModel g = shipped();
    BreakerSchedule bs = BreakerSchedule::constant(50, g.load_map.b_nom);
    for (auto& row : bs.signals) row[0] = 0;
    const AttackVector a = laa_only(bs, g.n());
    const SimTrace t = simulate(g, &a, {1500, false, {}});
    double peak = 0;
    for (const auto& rec : t.steps) peak = std::max(peak, std::abs(rec.gens[0].f_hz - 60.0));
    CHECK(peak > 0.05);
    const double end = std::abs(t.steps.back().gens[0].f_hz - 60.0);
    CHECK(end < 0.1 * peak);
    CHECK(g.envelope.frequency_safe(t.steps.back().gens[0].f_hz));
}

TEST_CASE("simulate: false data alone is detected before the same data paired with a load change") {
    // By linearity the paired run's residue is the breaker response plus the
    // false-data response; choose the false data to cancel the former.
    const GridModel g = shipped();
    const std::size_t d = 60;
    BreakerSchedule bs = BreakerSchedule::constant(d, g.load_map.b_nom);
    for (auto& row : bs.signals) row[0] = 0;

    ClosedLoopStepper stepper(g, false, nullptr);
    stepper.initial();
    FalseDataSchedule fd = FalseDataSchedule::zeros(g.n(), d);
    fd.range = {Interval{-10, 10}, Interval{-10, 10}};
    for (auto& m : fd.mask) m = {1, 1};
    for (std::size_t k = 0; k < d; ++k) {
        ClosedLoopStepper probe = stepper;
        const StepRecord dry = probe.step(bs.signals[k], nullptr);
        std::vector<OutputVec> ay(g.n());
        for (std::size_t i = 0; i < g.n(); ++i)
            for (std::size_t j = 0; j < kOutputs; ++j) ay[i][j] = fd.values[i](k, j) = -dry.gens[i].r[j];
        stepper.step(bs.signals[k], &ay);
    }
    const AttackVector combined{bs, fd};
    const AttackVector fdia_only{BreakerSchedule::constant(d, g.load_map.b_nom), fd};

    const auto det_combined = detect(simulate(g, &combined, {d, false, {}}), g.thresholds);
    const auto det_fdia = detect(simulate(g, &fdia_only, {d, false, {}}), g.thresholds);
    REQUIRE(det_fdia.has_value());
    CHECK((!det_combined.has_value() || *det_fdia < *det_combined));
}

TEST_CASE("detect: boundary and empty cases") {
    const std::vector<double> th{0.5};
    CHECK_FALSE(detect(synthetic(std::vector<double>(10, 60.0), std::vector<double>(10, 0.0)), th).has_value());
    std::vector<double> r(10, 0.0);
    r[5] = 0.5 - 1e-9;
    r[6] = 0.5;
    r[7] = 0.5 + 1e-9;
    CHECK(detect(synthetic(std::vector<double>(10, 60.0), r), th) == std::optional<std::size_t>{7});
    CHECK_THROWS_AS(detect(synthetic({60.0}, {0.0}), std::vector<double>{0.1, 0.1}), InvalidArgument);
}

TEST_CASE("detect: random traces match a linear scan and prefixes never detect later") {
    RngStream rng(77, 0);
    for (int t = 0; t < 500; ++t) {
        const std::size_t len = 1 + rng.below(60);
        std::vector<double> f(len, 60.0), r(len);
        for (auto& v : r) v = rng.uniform(0, 1.2);
        const SimTrace tr = synthetic(f, r);
        const std::vector<double> th{1.0};
        const auto full = detect(tr, th);
        CHECK(full == oracle_detect(tr, th));
        SimTrace prefix = tr;
        prefix.steps.resize(1 + rng.below(len));
        const auto pre = detect(prefix, th);
        if (pre) CHECK((full && *full <= *pre));
    }
}

TEST_CASE("check_success: constructed traces") {
    const std::vector<double> th{0.1};
    const SafetyEnvelope env = band();
    CHECK_FALSE(check_success(synthetic(std::vector<double>(50, 60.0), std::vector<double>(50, 0.0)), env, th).success);

    std::vector<double> f(50, 60.0), r(50, 0.0);
    for (std::size_t k = 30; k < 50; ++k) f[k] = 60.6;
    r[25] = 0.2;
    const auto late = check_success(synthetic(f, r), env, th);
    CHECK_FALSE(late.success);
    CHECK(late.first_detection == std::optional<std::size_t>{25});

    for (std::size_t k = 20; k < 50; ++k) f[k] = 60.6;
    const auto early = check_success(synthetic(f, r), env, th);
    CHECK(early.success);
    CHECK(early.k_prime == std::optional<std::size_t>{20});
    CHECK(early.stealthy_until_unsafe);
}

TEST_CASE("check_success: signal bases are reported side by side") {
    SimTrace t = synthetic(std::vector<double>(10, 60.0), std::vector<double>(10, 0.0));
    t.steps[4].gens[0].f_meas_hz = 60.7;
    const std::vector<double> th{0.1};
    const auto meas = check_success(t, band(), th, SignalBasis::measured);
    CHECK(meas.success);
    CHECK_FALSE(meas.other_basis.success);
    const auto truth = check_success(t, band(), th, SignalBasis::true_state);
    CHECK_FALSE(truth.success);
    CHECK(truth.other_basis.success);
}

TEST_CASE("robustness: hand-evaluated cases") {
    const SafetyEnvelope env = band();
    const std::vector<double> th{0.05};
    CHECK(robustness(synthetic(std::vector<double>(20, 60.0), std::vector<double>(20, 0.0)), env, th) > 0);

    std::vector<double> f(20, 60.0);
    f[5] = 60.6;
    const double rho = robustness(synthetic(f, std::vector<double>(20, 0.0)), env, th);
    CHECK(rho == Catch::Approx(std::max(-0.1, -0.05)));
    CHECK(rho < 0);
}

TEST_CASE("robustness: sign agrees with check_success on synthetic traces") {
    RngStream rng(2024, 0);
    const SafetyEnvelope env = band();
    for (int t = 0; t < 1000; ++t) {
        const std::size_t len = 1 + rng.below(40);
        std::vector<double> f(len), r(len);
        for (std::size_t k = 0; k < len; ++k) {
            f[k] = 60.0 + rng.uniform(-0.7, 0.7);
            r[k] = rng.below(4) == 0 ? 0.1 : rng.uniform(0, 0.15);
        }
        const SimTrace tr = synthetic(f, r);
        const std::vector<double> th{0.1};
        const auto rep = check_success(tr, env, th);
        CHECK((robustness(tr, env, th) < 0) == rep.success);
        CHECK(rep.k_prime.has_value() == first_unsafe(tr, env, SignalBasis::measured).has_value());
        CHECK(rep.success == oracle_success(tr, env, th).has_value());
    }
}

TEST_CASE("robustness: sign agrees with check_success on simulated traces") {
    const GridModel g = shipped();
    RngStream rng(31, 0);
    int successes = 0;
    for (int t = 0; t < 1000; ++t) {
        const double amp = rng.uniform(0.0, 1.0);
        const AttackVector a = random_attack(g, 50, rng, amp, t % 2 == 0);
        const SimTrace tr = simulate(g, &a, {60, false, {}});
        std::vector<double> th = g.thresholds;
        const double scale = std::exp(rng.uniform(0.0, std::log(30.0)));
        for (auto& v : th) v *= scale;
        for (auto basis : {SignalBasis::measured, SignalBasis::true_state})
            for (auto sem : {StealthSemantics::until_unsafe, StealthSemantics::whole_trace}) {
                const bool ok = check_success(tr, g.envelope, th, basis, sem).success;
                CHECK((robustness(tr, g.envelope, th, basis, sem) < 0) == ok);
                successes += ok;
            }
    }
    // The corpus exercises both outcomes.
    CHECK(successes > 0);
}

TEST_CASE("write_trace_csv: header and nine significant digits") {
    const GridModel g = load_grid_config(fixture::toy_grid_doc());
    std::ostringstream out;
    write_trace_csv(out, simulate(g, nullptr, {2, false, {}}));
    const std::string csv = out.str();
    CHECK(csv.rfind("k,t_s,gen,x1,x2,x3,x4,xhat1,xhat2,xhat3,xhat4,u_believed,u_actual,y1,y2,ymeas1,ymeas2,r1,r2,"
                    "rinf,f_hz,pe_pu,stealthy\n",
                    0) == 0);
    CHECK(format_g9(1.0 / 3.0) == "0.333333333");
    CHECK(format_g9(60.0) == "60");
}
