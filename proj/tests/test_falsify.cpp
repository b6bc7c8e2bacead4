#include <catch_amalgamated.hpp>

#include <cmath>

#include "fixtures.hpp"
#include "gridstorm/falsify/falsify.hpp"
#include "gridstorm/io/config.hpp"

using namespace gridstorm;

namespace {

/// Toy generator whose detector tolerates large residues; false data on
/// the speed measurement can then push the measured frequency out of band.
GridModel loose_toy() { return load_grid_config(fixture::toy_grid_doc(5.0)); }

FalsificationProblem speed_problem(const GridModel& g, double half_width, std::size_t p, std::size_t d = 20) {
    FalsificationProblem prob;
    prob.grid = &g;
    prob.d = d;
    prob.laa = BreakerSchedule::constant(d, g.load_map.b_nom);
    prob.range = {Interval{-half_width, half_width}, Interval{0, 0}};
    prob.mask = {OutputMask{1, 0}};
    prob.control_points = p;
    return prob;
}

double knot_at(const Interval& b, std::size_t i, std::size_t levels) {
    return b.lo + b.width() * static_cast<double>(i) / static_cast<double>(levels - 1);
}

}  // namespace

TEST_CASE("decode_control_points: identity, constant and segment lengths") {
    const std::vector<double> knots{1, 2, 3, 4, 5};
    CHECK(decode_control_points(knots, 5) == knots);
    CHECK(decode_control_points(std::vector<double>{0.3}, 7) == std::vector<double>(7, 0.3));

    const auto steps = decode_control_points(std::vector<double>{0, 1, 2, 3}, 100);
    std::vector<int> count(4, 0);
    for (double v : steps) ++count[static_cast<std::size_t>(v)];
    CHECK(count == std::vector<int>{25, 25, 25, 25});
    // Segments are contiguous and ordered.
    CHECK(std::is_sorted(steps.begin(), steps.end()));

    CHECK_THROWS_AS(decode_control_points(std::vector<double>{}, 4), InvalidArgument);
    CHECK_THROWS_AS(decode_control_points(std::vector<double>{1, 2, 3}, 2), InvalidArgument);
}

TEST_CASE("decode_control_points: uneven split covers every step once") {
    for (std::size_t d = 1; d <= 40; ++d)
        for (std::size_t p = 1; p <= d; ++p) {
            std::vector<double> knots(p);
            for (std::size_t j = 0; j < p; ++j) knots[j] = static_cast<double>(j);
            const auto s = decode_control_points(knots, d);
            for (std::size_t k = 0; k < d; ++k) {
                std::size_t owner = p;
                for (std::size_t j = 0; j < p; ++j)
                    if (j * d / p <= k && k < (j + 1) * d / p) owner = j;
                CHECK(s[k] == static_cast<double>(owner));
            }
        }
}

TEST_CASE("decode_candidate: respects mask and range") {
    const GridModel g = load_grid_config(fixture::three_gen_doc());
    FalsificationProblem prob;
    prob.grid = &g;
    prob.d = 12;
    prob.laa = BreakerSchedule::constant(12, g.load_map.b_nom);
    prob.range = {Interval{-0.1, 0.1}, Interval{-0.2, 0.2}};
    prob.mask = {OutputMask{0, 1}, OutputMask{0, 0}, OutputMask{1, 1}};
    prob.control_points = 3;
    REQUIRE(prob.dimension() == 9);
    RngStream rng(1, 0);
    const Candidate c = sample_candidate(prob, rng);
    const FalseDataSchedule fd = decode_candidate(prob, c);
    CHECK_NOTHROW(fd.validate(g.n()));
    CHECK(fd.values[0](0, 1) == c.knots[0]);
    CHECK(fd.values[2](11, 0) == c.knots[5]);
    CHECK(fd.values[2](11, 1) == c.knots[8]);
    for (std::size_t k = 0; k < 12; ++k) {
        CHECK(fd.values[0](k, 0) == 0.0);
        CHECK(fd.values[1](k, 0) == 0.0);
        CHECK(fd.values[1](k, 1) == 0.0);
    }
}

TEST_CASE("sample_candidate: point box, range and mean") {
    const GridModel g = loose_toy();
    FalsificationProblem prob = speed_problem(g, 1.0, 4);
    prob.range[0] = Interval{0.25, 0.25};
    RngStream rng(2, 0);
    for (double v : sample_candidate(prob, rng).knots) CHECK(v == 0.25);

    prob.range[0] = Interval{-1, 1};
    std::vector<double> mean(4, 0.0);
    const int draws = 100000;
    for (int t = 0; t < draws; ++t) {
        const Candidate c = sample_candidate(prob, rng);
        for (std::size_t q = 0; q < 4; ++q) {
            if (t < 10000) CHECK((c.knots[q] >= -1 && c.knots[q] <= 1));
            mean[q] += c.knots[q] / draws;
        }
    }
    for (double m : mean) CHECK(std::abs(m) <= 0.02);
}

TEST_CASE("FalsificationProblem: validation") {
    const GridModel g = loose_toy();
    FalsificationProblem prob = speed_problem(g, 1.0, 4);
    CHECK_NOTHROW(prob.validate());
    auto bad = prob;
    bad.control_points = 0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = prob;
    bad.control_points = 21;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = prob;
    bad.mask = {OutputMask{0, 0}};
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = prob;
    bad.range[0] = Interval{1, -1};
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = prob;
    bad.laa = BreakerSchedule::constant(5, g.load_map.b_nom);
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = prob;
    bad.horizon = 10;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("objective: benign zero candidate is robust and evaluation is pure") {
    const GridModel g = load_grid_file(fixture::source_path("configs/default_grid.json"));
    FalsificationProblem prob;
    prob.grid = &g;
    prob.d = 50;
    prob.laa = BreakerSchedule::constant(50, g.load_map.b_nom);
    prob.range = {Interval{0, 0}, Interval{-0.5, 0.5}};
    prob.mask = {OutputMask{0, 1}, OutputMask{0, 0}, OutputMask{0, 0}};
    Candidate zero{std::vector<double>(prob.dimension(), 0.0)};
    CHECK(objective(prob, zero) > 0);
    RngStream rng(3, 0);
    for (int t = 0; t < 20; ++t) {
        const Candidate c = sample_candidate(prob, rng);
        const double a = objective(prob, c);
        const double b = objective(prob, c);
        CHECK(std::memcmp(&a, &b, sizeof a) == 0);
    }
}

TEST_CASE("falsify_sa: one knot against an exhaustive 101-point grid") {
    const GridModel g = loose_toy();
    const FalsificationProblem prob = speed_problem(g, 4.0, 1);
    double grid_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < 101; ++i)
        grid_min = std::min(grid_min, objective(prob, Candidate{{knot_at(prob.range[0], i, 101)}}));

    FalsifyOptions lattice;
    lattice.lattice_levels = 101;
    lattice.budget = 101;
    const FalsifyResult exhaustive = falsify_sa(prob, lattice, 1);
    CHECK(exhaustive.evaluations == 101);
    CHECK(exhaustive.rho == grid_min);

    FalsifyOptions sa;
    sa.budget = 2000;
    const FalsifyResult res = falsify_sa(prob, sa, 1);
    CHECK(res.rho <= grid_min + 1e-9);
    CHECK(res.success == (res.rho < 0));
}

TEST_CASE("falsify_sa: annealing on a lattice too large to enumerate reaches its minimum") {
    // No point of this box succeeds, so there is no early exit.
    const GridModel g = loose_toy();
    const FalsificationProblem prob = speed_problem(g, 2.0, 3);
    const std::size_t levels = 21;
    double grid_min = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < levels; ++a)
        for (std::size_t b = 0; b < levels; ++b)
            for (std::size_t c = 0; c < levels; ++c)
                grid_min = std::min(grid_min, objective(prob, Candidate{{knot_at(prob.range[0], a, levels),
                                                                         knot_at(prob.range[0], b, levels),
                                                                         knot_at(prob.range[0], c, levels)}}));
    REQUIRE(grid_min > 0);
    FalsifyOptions opt;
    opt.lattice_levels = levels;
    opt.budget = 4000;
    REQUIRE(opt.budget < levels * levels * levels);
    const FalsifyResult res = falsify_sa(prob, opt, 5);
    CHECK(res.rho == grid_min);
}

TEST_CASE("falsify_sa: best-so-far is non-increasing within each restart") {
    const GridModel g = loose_toy();
    const FalsificationProblem prob = speed_problem(g, 3.0, 4);
    FalsifyOptions opt;
    opt.budget = 800;
    const FalsifyResult res = falsify_sa(prob, opt, 9);
    REQUIRE(res.history.size() == opt.restarts);
    std::size_t total = 0;
    for (const auto& h : res.history) {
        CHECK(h.best_so_far.size() == h.evaluations);
        for (std::size_t k = 1; k < h.best_so_far.size(); ++k) CHECK(h.best_so_far[k] <= h.best_so_far[k - 1]);
        CHECK(h.best_rho == h.best_so_far.back());
        total += h.evaluations;
    }
    CHECK(total == res.evaluations);
    CHECK(total <= opt.budget);
}

TEST_CASE("falsify_sa: a violating region of at least 5 percent is found in 9 of 10 seeds") {
    const GridModel g = loose_toy();
    const FalsificationProblem prob = speed_problem(g, 3.6, 2);
    // Exhaustive 41 x 41 grid sizes the violating region.
    int violating = 0;
    for (std::size_t a = 0; a < 41; ++a)
        for (std::size_t b = 0; b < 41; ++b)
            violating += objective(prob, Candidate{{knot_at(prob.range[0], a, 41), knot_at(prob.range[0], b, 41)}}) < 0;
    const double fraction = violating / (41.0 * 41.0);
    INFO("violating fraction " << fraction);
    REQUIRE(fraction >= 0.05);
    REQUIRE(fraction <= 0.5);

    FalsifyOptions opt;
    opt.budget = 2000;
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const FalsifyResult res = falsify_sa(prob, opt, seed);
        CHECK(res.evaluations <= 2000);
        wins += res.success;
    }
    CHECK(wins >= 9);
}

TEST_CASE("falsify_sa: early exit when the start already violates") {
    // A point box whose only value already lifts the measured frequency
    // out of band while staying under the threshold.
    const GridModel g = loose_toy();
    FalsificationProblem prob = speed_problem(g, 0.0, 2, 40);
    prob.range[0] = Interval{4.0, 4.0};
    FalsifyOptions opt;
    opt.budget = 2000;
    const FalsifyResult res = falsify_sa(prob, opt, 1);
    CHECK(res.success);
    CHECK(res.evaluations == opt.restarts);
}

TEST_CASE("falsify_sa: empty box with a benign schedule gives no counter-example") {
    const GridModel g = load_grid_file(fixture::source_path("configs/default_grid.json"));
    FalsificationProblem prob;
    prob.grid = &g;
    prob.d = 30;
    prob.laa = BreakerSchedule::constant(30, g.load_map.b_nom);
    prob.range = {Interval{0, 0}, Interval{0, 0}};
    prob.mask = {OutputMask{0, 1}, OutputMask{0, 1}, OutputMask{0, 1}};
    FalsifyOptions opt;
    opt.budget = 200;
    const SynthesisResult out = synthesize_and_validate(prob, opt, 1);
    CHECK_FALSE(out.search.success);
    CHECK(out.search.rho > 0);
    CHECK_FALSE(out.attack.has_value());
    CHECK(out.search.evaluations == opt.budget);
}

TEST_CASE("falsify_sa: deterministic across thread counts") {
    const GridModel g = loose_toy();
    const FalsificationProblem prob = speed_problem(g, 3.0, 4);
    FalsifyOptions one;
    one.budget = 600;
    one.threads = 1;
    FalsifyOptions many = one;
    many.threads = 4;
    const FalsifyResult a = falsify_sa(prob, one, 3);
    const FalsifyResult b = falsify_sa(prob, many, 3);
    CHECK(a.rho == b.rho);
    CHECK(a.best.knots == b.best.knots);
    CHECK(a.best_restart == b.best_restart);
    CHECK(a.evaluations == b.evaluations);
}

TEST_CASE("synthesize_and_validate: returned attack honours the contract") {
    const GridModel g = loose_toy();
    const FalsificationProblem prob = speed_problem(g, 3.6, 2);
    FalsifyOptions opt;
    opt.budget = 2000;
    const SynthesisResult out = synthesize_and_validate(prob, opt, 2);
    REQUIRE(out.attack.has_value());
    const AttackVector& atk = *out.attack;
    CHECK_NOTHROW(atk.validate(g));
    CHECK(atk.breaker_schedule.signals == prob.laa.signals);
    for (std::size_t k = 0; k < prob.d; ++k) {
        CHECK(atk.false_data.values[0](k, 1) == 0.0);
        CHECK(prob.range[0].contains(atk.false_data.values[0](k, 0)));
    }
    auto replay = [&] {
        const SimTrace t = simulate(g, &atk, {prob.d, false, {}});
        return check_success(t, g.envelope, g.thresholds);
    };
    const SuccessReport r1 = replay(), r2 = replay();
    CHECK(r1.success);
    CHECK(r1.k_prime == r2.k_prime);
    CHECK(r1.first_detection == r2.first_detection);
    CHECK(r1.k_prime == out.report->k_prime);

    const double frac = noisy_success_fraction(g, atk, prob.d, SignalBasis::measured, 10, 1);
    CHECK((frac >= 0.0 && frac <= 1.0));
}

TEST_CASE("falsify_sa: argument errors") {
    const GridModel g = loose_toy();
    const FalsificationProblem prob = speed_problem(g, 1.0, 2);
    FalsifyOptions opt;
    opt.budget = 0;
    CHECK_THROWS_AS(falsify_sa(prob, opt, 1), InvalidArgument);
    opt.budget = 10;
    opt.restarts = 0;
    CHECK_THROWS_AS(falsify_sa(prob, opt, 1), InvalidArgument);
}
