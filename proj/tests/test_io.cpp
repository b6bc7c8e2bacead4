#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "gridstorm/io/manifest.hpp"
#include "gridstorm/io/run_config.hpp"
#include "gridstorm/io/svg.hpp"

using namespace gridstorm;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

GridModel shipped() { return load_grid_file(fixture::source_path("configs/default_grid.json")); }

AttackVector sample_attack(const GridModel& g, std::size_t d) {
    RngStream rng(4, 0);
    BreakerSchedule bs;
    for (std::size_t k = 0; k < d; ++k) {
        std::vector<int> row(g.m());
        for (auto& b : row) b = static_cast<int>(rng.below(2));
        bs.signals.push_back(row);
    }
    AttackVector a = laa_only(bs, g.n());
    a.false_data.range = {Interval{0, 0}, Interval{-0.5, 0.5}};
    a.false_data.mask[0] = {0, 1};
    for (std::size_t k = 0; k < d; ++k) a.false_data.values[0](k, 1) = rng.uniform(-0.5, 0.5);
    return a;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("gridstorm_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("attack file: round trip is exact") {
    const GridModel g = shipped();
    const AttackVector a = sample_attack(g, 17);
    const json prov = {{"seed", 3}, {"rho", -0.25}};
    const std::string text = dump_json(attack_to_json(a, prov));
    json back_prov;
    const AttackVector b = attack_from_json(json::parse(text), g, &back_prov);
    CHECK(b.breaker_schedule.signals == a.breaker_schedule.signals);
    CHECK(b.false_data.mask == a.false_data.mask);
    for (std::size_t i = 0; i < g.n(); ++i) CHECK(b.false_data.values[i] == a.false_data.values[i]);
    CHECK(b.false_data.range[1].lo == -0.5);
    CHECK(b.hash() == a.hash());
    CHECK(back_prov == prov);
    CHECK(dump_json(attack_to_json(b, back_prov)) == text);
}

TEST_CASE("attack file: schema errors carry a JSON path") {
    const GridModel g = shipped();
    const json good = attack_to_json(sample_attack(g, 5));

    json doc = good;
    doc["extra"] = 1;
    CHECK_THROWS_WITH(attack_from_json(doc, g), ContainsSubstring("$.extra"));

    doc = good;
    doc["breaker_schedule"][2] = json::array({1, 1});
    CHECK_THROWS_WITH(attack_from_json(doc, g), ContainsSubstring("$.breaker_schedule[2]"));

    doc = good;
    doc["breaker_schedule"][0][0] = 2;
    CHECK_THROWS_AS(attack_from_json(doc, g), ConfigError);

    doc = good;
    doc["false_data"][0][1][0] = 0.1;  // masked-off output
    CHECK_THROWS_WITH(attack_from_json(doc, g), ContainsSubstring("masked-off"));

    doc = good;
    doc["false_data"][0][1][1] = 0.9;  // outside the range
    CHECK_THROWS_WITH(attack_from_json(doc, g), ContainsSubstring("range"));

    doc = good;
    doc["range"] = json::array({json::array({1, 0}), json::array({0, 0})});
    CHECK_THROWS_AS(attack_from_json(doc, g), ConfigError);

    doc = good;
    doc["d"] = 6;
    CHECK_THROWS_WITH(attack_from_json(doc, g), ContainsSubstring("$.breaker_schedule"));

    doc = good;
    doc["false_data"].erase(doc["false_data"].begin());
    CHECK_THROWS_WITH(attack_from_json(doc, g), ContainsSubstring("$.false_data"));
}

TEST_CASE("attack file: load prefixes the path") {
    const GridModel g = shipped();
    const fs::path dir = scratch("attack");
    {
        std::ofstream out(dir / "bad.json");
        out << "{\"d\": 1}";
    }
    CHECK_THROWS_WITH(load_attack_file(dir / "bad.json", g), ContainsSubstring((dir / "bad.json").string()));
    {
        std::ofstream out(dir / "broken.json");
        out << "{not json";
    }
    CHECK_THROWS_AS(load_attack_file(dir / "broken.json", g), ConfigError);
    CHECK_THROWS(load_attack_file(dir / "missing.json", g));
}

TEST_CASE("schedule file: round trip and errors") {
    BreakerSchedule s{{{1, 0, 1}, {0, 0, 1}, {1, 1, 1}}};
    const json doc = schedule_to_json(s);
    CHECK(schedule_from_json(doc).signals == s.signals);
    CHECK(schedule_from_json(doc, 3).signals == s.signals);
    CHECK_THROWS_WITH(schedule_from_json(doc, 2), ContainsSubstring("$.m"));

    json bad = doc;
    bad["format"] = "other";
    CHECK_THROWS_WITH(schedule_from_json(bad), ContainsSubstring("$.format"));
    bad = doc;
    bad["signals"][1] = json::array({0, 1});
    CHECK_THROWS_WITH(schedule_from_json(bad), ContainsSubstring("$.signals[1]"));
    bad = doc;
    bad["d"] = 0;
    CHECK_THROWS_AS(schedule_from_json(bad), ConfigError);
    bad = doc;
    bad.erase("signals");
    CHECK_THROWS_WITH(schedule_from_json(bad), ContainsSubstring("signals"));
}

TEST_CASE("train config: defaults, overrides and errors") {
    const TrainConfig def = train_config_from_json(json::object());
    CHECK(def.hidden == 64);
    CHECK(def.gamma == 0.99);
    CHECK(def.tau == 0.005);
    CHECK(def.actor_lr == 1e-4);
    CHECK(def.critic_lr == 1e-3);
    CHECK(def.batch == 64);
    CHECK(def.buffer == 100000);
    CHECK(def.sigma0 == 0.2);
    CHECK(def.sigma_decay == 0.995);
    CHECK(def.weights.w1 == 1.0);
    CHECK(def.weights.w2 == 1.0);
    CHECK(def.weights.w3 == 0.25);

    const TrainConfig c = train_config_from_json(json::parse(
        R"({"episodes": 7, "steps_per_episode": 30, "reward": {"w3": 0.5, "variant": "all_product"},
            "terminate_on_detection": true, "init_spread": [0.01, 0, 0, 0]})"));
    CHECK(c.episode.episodes == 7);
    CHECK(c.episode.steps_per_episode == 30);
    CHECK(c.weights.w3 == 0.5);
    CHECK(c.weights.w1 == 1.0);
    CHECK(c.variant == RewardVariant::all_product);
    CHECK(c.episode.terminate_on_detection);
    CHECK(c.episode.init_spread[0] == 0.01);

    CHECK_THROWS_WITH(train_config_from_json(json::parse(R"({"epochs": 3})")), ContainsSubstring("$.epochs"));
    CHECK_THROWS_WITH(train_config_from_json(json::parse(R"({"reward": {"variant": "x"}})")),
                      ContainsSubstring("$.reward.variant"));
    CHECK_THROWS_AS(train_config_from_json(json::parse(R"({"gamma": 2})")), ConfigError);
    CHECK_THROWS_AS(train_config_from_json(json::parse(R"({"episodes": -1})")), ConfigError);
    CHECK_THROWS_AS(train_config_from_json(json::parse(R"({"init_spread": [1, 2]})")), ConfigError);
}

TEST_CASE("falsify settings: defaults, mask expansion and errors") {
    const GridModel g = shipped();
    const BreakerSchedule laa = BreakerSchedule::constant(40, g.load_map.b_nom);

    FalsifySettings s = falsify_settings_from_json(json::object());
    bind_mask(s, g);
    const FalsificationProblem p = s.problem(g, laa, SignalBasis::measured);
    CHECK(p.d == 40);
    CHECK(p.control_points == 10);
    CHECK(p.range[1].lo == -0.05);
    CHECK(p.range[1].hi == 0.05);
    CHECK(p.mask == std::vector<OutputMask>(3, OutputMask{0, 1}));
    CHECK(s.noise_seeds == 20);

    FalsifySettings t = falsify_settings_from_json(
        json::parse(R"({"attacked_outputs": [1, 1], "control_points": 80, "signal_basis": "true",
                        "budget": 300, "semantics": "whole_trace"})"));
    bind_mask(t, g);
    const FalsificationProblem q = t.problem(g, laa, SignalBasis::measured);
    CHECK(q.mask == std::vector<OutputMask>(3, OutputMask{1, 1}));
    CHECK(q.control_points == 40);
    CHECK(q.basis == SignalBasis::true_state);
    CHECK(q.semantics == StealthSemantics::whole_trace);
    CHECK(t.search.budget == 300);

    CHECK_THROWS_AS(falsify_settings_from_json(json::parse(R"({"mask": [[0,1]], "attacked_outputs": [0,1]})")),
                    ConfigError);
    CHECK_THROWS_WITH(falsify_settings_from_json(json::parse(R"({"semantics": "sometimes"})")),
                      ContainsSubstring("$.semantics"));
    CHECK_THROWS_WITH(falsify_settings_from_json(json::parse(R"({"range": [[0, 1]]})")),
                      ContainsSubstring("$.range"));
    CHECK_THROWS_WITH(falsify_settings_from_json(json::parse(R"({"budgets": 1})")), ContainsSubstring("$.budgets"));

    FalsifySettings wrong = falsify_settings_from_json(json::parse(R"({"mask": [[0, 1]]})"));
    CHECK_THROWS_AS(bind_mask(wrong, g), ConfigError);
}

TEST_CASE("shipped run configs load") {
    CHECK_NOTHROW(load_train_config(fixture::source_path("configs/train_default.json")));
    CHECK_NOTHROW(load_train_config(fixture::source_path("configs/train_toy.json")));
    CHECK_NOTHROW(load_falsify_settings(fixture::source_path("configs/falsify_default.json")));
    CHECK_NOTHROW(load_falsify_settings(fixture::source_path("configs/falsify_toy.json")));
    CHECK_NOTHROW(load_grid_file(fixture::source_path("configs/toy_grid.json")));
}

TEST_CASE("reward csv: header and rows") {
    std::ostringstream out;
    write_reward_csv(out, {1.5, 2.0 / 3.0});
    CHECK(out.str() == "episode,reward\n0,1.5\n1,0.666666667\n");
}

TEST_CASE("manifest: fields, atomic write and missing outputs") {
    const fs::path dir = scratch("manifest");
    write_file_atomic(dir / "a.txt", "hello");
    CHECK_FALSE(fs::exists(dir / "a.txt.tmp"));
    CHECK(file_hash(dir / "a.txt") == file_hash(dir / "a.txt"));

    RunManifest m;
    m.command = "simulate";
    m.argv = {"gridstorm", "simulate"};
    m.config_path = "grid.json";
    m.config_file_hash = 0xabc;
    m.master_seed = 7;
    m.stage_streams = {{"noise", 1}};
    m.outputs = {"a.txt"};
    write_manifest(dir, m);
    const json doc = read_json_file(dir / "manifest.json");
    CHECK(doc["command"] == "simulate");
    CHECK(doc["seeds"]["master"] == 7);
    CHECK(doc["seeds"]["streams"]["noise"] == 1);
    CHECK(doc["config"]["file_hash"] == "0000000000000abc");
    CHECK(doc["outputs"] == json::array({"a.txt"}));
    CHECK(doc["version"] == kToolVersion);

    m.outputs.push_back("missing.csv");
    CHECK_THROWS_AS(write_manifest(dir, m), IoError);
}

TEST_CASE("manifest: SOURCE_DATE_EPOCH pins the clock") {
    ::setenv("SOURCE_DATE_EPOCH", "86400", 1);
    CHECK(manifest_clock() == 86400);
    CHECK(iso8601_utc(manifest_clock()) == "1970-01-02T00:00:00Z");
    ::unsetenv("SOURCE_DATE_EPOCH");
    CHECK(manifest_clock() > 1'600'000'000);
}

TEST_CASE("svg: deterministic document with series, band, line and marker") {
    Plot p;
    p.title = "f & r <test>";
    p.x_label = "time (s)";
    p.y_label = "Hz";
    p.series.push_back({"GEN1", {0, 1, 2}, {60.0, 60.2, 59.9}});
    p.bands.push_back({"safe", 59.5, 60.5});
    p.lines.push_back({"Th", 60.4});
    p.markers.push_back({"detect", 1.0});
    std::ostringstream a, b;
    write_svg(a, p);
    write_svg(b, p);
    CHECK(a.str() == b.str());
    CHECK_THAT(a.str(), ContainsSubstring("<svg"));
    CHECK_THAT(a.str(), ContainsSubstring("<polyline"));
    CHECK_THAT(a.str(), ContainsSubstring("f &amp; r &lt;test&gt;"));
    CHECK_THAT(a.str(), ContainsSubstring("</svg>"));
}
