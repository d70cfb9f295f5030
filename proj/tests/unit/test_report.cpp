#include <doctest.h>

#include <cmath>

#include "driftbench/report.hpp"
#include "tmpdir.hpp"

using namespace driftbench;
using namespace driftbench::report;

namespace {

std::string config_error_field(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<accepted>";
}

}  // namespace

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.9, 0.0}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("config parsing") {
  const auto cfg = parse_config(json::parse(R"({
    "scenario": {"kind": "sudden_shift", "n_batches": 600, "change_point_fraction": 0.5, "seed": 3},
    "policy": {"cadence": "never", "window": {"kind": "expanding"}, "hp_policy": "retune",
               "model": {"kind": "conformal", "alpha": 0.2}, "hyperparams": {"n_estimators": 30, "max_depth": null}},
    "output_dir": "x"
  })"));
  REQUIRE(cfg.scenario.has_value());
  CHECK(cfg.scenario->n_batches == 600);
  CHECK(cfg.scenario->seed == 3);
  REQUIRE(cfg.policy.has_value());
  CHECK_FALSE(cfg.policy->cadence.has_value());
  CHECK(cfg.policy->window == replay::Window::expanding());
  CHECK(cfg.policy->hp_policy == replay::HpPolicy::Retune);
  CHECK(cfg.policy->model == replay::ModelKind::conformal(0.2));
  CHECK(cfg.policy->hyperparams == forest::Hyperparams{30, std::nullopt});
  CHECK(cfg.output_dir == "x");
}

TEST_CASE("config errors name the field") {
  CHECK(config_error_field(json::parse(R"({"scenario": {"n_batches": 10}})")) == "scenario.n_batches");
  CHECK(config_error_field(json::parse(R"({"scenario": {"kind": "wobble"}})")) == "scenario.kind");
  CHECK(config_error_field(json::parse(R"({"scenario": {"n_batches": "many"}})")) == "scenario.n_batches");
  CHECK(config_error_field(json::parse(R"({"bogus": 1})")) == "bogus");
  CHECK(config_error_field(json::parse(R"({"policy": {"cadence": 0}})")) == "policy.cadence");
  CHECK(config_error_field(json::parse(R"({"policy": {"window": {"kind": "fixed", "size": 500}}})")) ==
        "policy.window.size");
  CHECK(config_error_field(json::parse(R"({"policy": {"model": {"kind": "conformal", "alpha": 1.0}}})")) ==
        "policy.model.alpha");
  CHECK(config_error_field(json::parse(R"({"policy": {}, "grid": {}})")) != "<accepted>");
  CHECK(config_error_field(json::parse(R"({"alpha_sweep": [0.1]})")) == "train_size_sweep");
  CHECK(config_error_field(json::parse(R"({"alpha_sweep": [], "train_size_sweep": []})")) == "alpha_sweep");
  const auto grid = json::parse(R"({"grid": {"scenarios": [{"name": "a"}], "cadences": [5], "windows": [],
                                             "hp_policies": ["frozen"], "model_kinds": [{"kind": "point"}]}})");
  CHECK(config_error_field(grid) == "grid.windows");
  const auto bad_name = json::parse(R"({"grid": {"scenarios": [{"name": "../x"}], "cadences": [5],
    "windows": ["expanding"], "hp_policies": ["frozen"], "model_kinds": [{"kind": "point"}]}})");
  CHECK(config_error_field(bad_name) == "grid.scenarios[0].name");
  CHECK(config_error_field(json::parse(R"({"grid": {"scenarios": [{}], "cadences": [5], "windows": ["expanding"],
    "hp_policies": ["frozen"], "model_kinds": ["point"], "search": {"n_iter": 0}}})")) == "grid.search.n_iter");
}

TEST_CASE("seed override reaches every seed") {
  auto cfg = parse_config(json::parse(R"({"scenario": {"seed": 1}, "policy": {"seed": 2}})"));
  apply_seed_override(cfg, 99);
  CHECK(cfg.scenario->seed == 99);
  CHECK(cfg.policy->seed == 99);
}

TEST_CASE("dataset files round-trip exactly") {
  const TempDir tmp("dataset");
  const auto ds = generate(DriftScenario::gradual(60, 0.05, 4));
  write_dataset(tmp.path, ds);
  const auto header = read_csv(tmp.path / "dataset.csv").front();
  CHECK(header.front() == "index");
  CHECK(header[1] == "f0");
  CHECK(header.back() == "target");
  const auto back = read_dataset(tmp.path / "dataset.csv");
  REQUIRE(back.size() == ds.size());
  for (std::size_t t = 0; t < ds.size(); ++t) {
    CHECK(back.batches[t].features == ds.batches[t].features);
    CHECK(back.batches[t].target == ds.batches[t].target);
  }
  CHECK(back.limits.lcl() == ds.limits.lcl());
  CHECK(back.limits.ucl() == ds.limits.ucl());
  CHECK(back.scenario.walk_step == ds.scenario.walk_step);
}

TEST_CASE("predictions round-trip and reproduce metrics") {
  const TempDir tmp("preds");
  const auto ds = generate(DriftScenario::sudden(140, 0.5, 2));
  replay::ReplayPolicy p;
  p.warmup = 60;
  p.window = replay::Window::fixed(50);
  p.cadence = 10;
  p.model = replay::ModelKind::conformal(0.1);
  p.hyperparams = forest::Hyperparams{10, 5};
  const auto r = replay::run_replay(ds, p);
  write_replay_outputs(tmp.path, r);
  const auto records = read_predictions_csv(tmp.path / "predictions.csv");
  const auto agg = replay::aggregate(records, r.limits);
  const auto m = json::parse(read_text(tmp.path / "metrics.json"));
  CHECK(std::abs(agg.coverage.value() - m["coverage"].get<double>()) <= 1e-9);
  CHECK(std::abs(agg.rmse_ratio - m["rmse_ratio"].get<double>()) <= 1e-9);
  CHECK(std::abs(*agg.mean_width_ratio - m["mean_width_ratio"].get<double>()) <= 1e-9);
  CHECK(agg.tiers.counts[2] == m["point_tiers"]["poor"]["count"].get<std::size_t>());
  CHECK(read_csv(tmp.path / "predictions.csv").front() ==
        std::vector<std::string>{"index", "point", "lower", "upper", "actual", "decision", "tier", "width_tier"});
  CHECK(fs::exists(tmp.path / "conditional.csv"));
  CHECK(read_text(tmp.path / "metrics.json").find("seconds") == std::string::npos);
}

TEST_CASE("manifest detects tampering") {
  const TempDir tmp("manifest");
  write_text(tmp.path / "a.csv", "x\n1\n");
  write_text(tmp.path / "sub" / "b.json", "{}\n");
  write_manifest(tmp.path, json{{"tool", "t"}});
  CHECK(verify_manifest(tmp.path).empty());
  const auto m = json::parse(read_text(tmp.path / "manifest.json"));
  CHECK(m["files"].contains("sub/b.json"));
  CHECK(m["files"]["a.csv"] == sha256_hex("x\n1\n"));
  write_text(tmp.path / "a.csv", "x\n2\n");
  CHECK(verify_manifest(tmp.path) == std::vector<std::string>{"a.csv"});
}

TEST_CASE("sha256 of a known vector") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("run directories never collide") {
  const TempDir tmp("runs");
  const json cfg{{"a", 1}};
  const auto a = make_run_dir(tmp.path, cfg), b = make_run_dir(tmp.path, cfg);
  CHECK(a != b);
  CHECK(fs::is_directory(a));
  CHECK(a.filename().string().find(sha256_hex(cfg.dump()).substr(0, 8)) != std::string::npos);
}

TEST_CASE("shipped example configs parse") {
  int count = 0;
  for (const auto& e : std::filesystem::directory_iterator(DRIFTBENCH_CONFIGS)) {
    if (e.path().extension() != ".json") continue;
    CAPTURE(e.path().string());
    CHECK_NOTHROW(load_config(e.path()));
    ++count;
  }
  CHECK(count >= 5);
}
