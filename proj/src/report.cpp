#include "driftbench/report.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace driftbench::report {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

template <class T>
T get_as(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path, "wrong type (" + std::string(j.type_name()) + ")");
  }
}

void reject_unknown(const json& j, const std::string& path, const std::set<std::string>& known) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError(path.empty() ? key : path + "." + key, "unknown field");
  }
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Rethrows module precondition failures as config errors. Messages that open
// with a dotted field ("search.n_iter must ...") are re-anchored below `path`.
template <class F>
void validated(const std::string& path, F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& ex) {
    std::string msg = ex.what();
    const auto dot = path.rfind('.');
    const std::string leaf = path.substr(dot == std::string::npos ? 0 : dot + 1) + ".";
    if (msg.rfind(leaf, 0) != 0) throw ConfigError(path, msg);
    auto end = msg.find(' ');
    std::string field = msg.substr(0, end);
    if (!field.empty() && field.back() == ':') field.pop_back();
    msg = end == std::string::npos ? "invalid" : msg.substr(end + 1);
    const std::string prefix = dot == std::string::npos ? "" : path.substr(0, dot + 1);
    throw ConfigError(prefix + field, msg);
  }
}

}  // namespace

// ------------------------------------------------------------- scenario / policy json

json to_json(const DriftScenario& s) {
  return json{{"kind", to_string(s.kind)},
              {"n_batches", s.n_batches},
              {"n_features", s.n_features},
              {"change_point_fraction", s.change_point_fraction},
              {"shift_magnitude", s.shift_magnitude},
              {"concept_rotation", s.concept_rotation},
              {"walk_step", s.walk_step},
              {"seasonal_amplitude", s.seasonal_amplitude},
              {"seasonal_period", s.seasonal_period},
              {"noise_sigma", s.noise_sigma},
              {"seed", s.seed}};
}

DriftScenario scenario_from_json(const json& j, const std::string& path) {
  static const std::set<std::string> known{"name", "kind", "n_batches", "n_features", "change_point_fraction",
                                           "shift_magnitude", "concept_rotation", "walk_step",
                                           "seasonal_amplitude", "seasonal_period", "noise_sigma", "seed"};
  reject_unknown(j, path, known);
  DriftKind kind = DriftKind::SuddenShift;
  if (j.contains("kind")) {
    const auto k = get_as<std::string>(j["kind"], join(path, "kind"));
    validated(join(path, "kind"), [&] { kind = drift_kind_from_string(k); });
  }
  DriftScenario s;
  if (kind == DriftKind::None) s = DriftScenario::stationary(s.n_batches, 0);
  if (kind == DriftKind::GradualDrift) s = DriftScenario::gradual(s.n_batches, 0.05, 0);
  if (kind == DriftKind::Combined) s.walk_step = 0.05;
  s.kind = kind;
  auto num = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = get_as<double>(j[key], join(path, key));
  };
  auto integer = [&](const char* key, int& dst) {
    if (j.contains(key)) dst = get_as<int>(j[key], join(path, key));
  };
  integer("n_batches", s.n_batches);
  integer("n_features", s.n_features);
  num("change_point_fraction", s.change_point_fraction);
  num("shift_magnitude", s.shift_magnitude);
  num("concept_rotation", s.concept_rotation);
  num("walk_step", s.walk_step);
  num("seasonal_amplitude", s.seasonal_amplitude);
  integer("seasonal_period", s.seasonal_period);
  num("noise_sigma", s.noise_sigma);
  if (j.contains("seed")) s.seed = get_as<std::uint64_t>(j["seed"], join(path, "seed"));
  try {
    s.validate();
  } catch (const std::invalid_argument& ex) {
    // validate() reports "scenario.<field>: ..."; re-anchor it at this path.
    std::string msg = ex.what();
    std::string field = path;
    if (msg.rfind("scenario.", 0) == 0) {
      const auto colon = msg.find(':');
      field = join(path, msg.substr(9, colon - 9));
      msg = msg.substr(colon + 2);
    }
    throw ConfigError(field, msg);
  }
  return s;
}

json to_json(const forest::Hyperparams& hp) {
  return json{{"n_estimators", hp.n_estimators},
              {"max_depth", hp.max_depth ? json(*hp.max_depth) : json(nullptr)}};
}

namespace {

forest::Hyperparams hp_from_json(const json& j, const std::string& path) {
  reject_unknown(j, path, {"n_estimators", "max_depth"});
  forest::Hyperparams hp;
  if (j.contains("n_estimators")) hp.n_estimators = get_as<int>(j["n_estimators"], join(path, "n_estimators"));
  if (j.contains("max_depth") && !j["max_depth"].is_null()) {
    hp.max_depth = get_as<int>(j["max_depth"], join(path, "max_depth"));
  }
  validated(path, [&] { hp.validate(); });
  return hp;
}

forest::IntRange range_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(path, "expected [lo, hi]");
  return {get_as<int>(j[0], path + "[0]"), get_as<int>(j[1], path + "[1]")};
}

forest::SearchSpace search_from_json(const json& j, const std::string& path) {
  reject_unknown(j, path, {"n_estimators", "max_depth", "include_unbounded", "n_iter"});
  forest::SearchSpace s;
  if (j.contains("n_estimators")) s.n_estimators = range_from_json(j["n_estimators"], join(path, "n_estimators"));
  if (j.contains("max_depth")) s.max_depth = range_from_json(j["max_depth"], join(path, "max_depth"));
  if (j.contains("include_unbounded")) {
    s.include_unbounded = get_as<bool>(j["include_unbounded"], join(path, "include_unbounded"));
  }
  if (j.contains("n_iter")) s.n_iter = get_as<int>(j["n_iter"], join(path, "n_iter"));
  validated(path, [&] { s.validate(); });
  return s;
}

json search_to_json(const forest::SearchSpace& s) {
  return json{{"n_estimators", {s.n_estimators.lo, s.n_estimators.hi}},
              {"max_depth", {s.max_depth.lo, s.max_depth.hi}},
              {"include_unbounded", s.include_unbounded},
              {"n_iter", s.n_iter}};
}

replay::Cadence cadence_from_json(const json& j, const std::string& path) {
  if (j.is_string()) {
    if (j.get<std::string>() == "never") return std::nullopt;
    throw ConfigError(path, "expected a positive integer or \"never\"");
  }
  const int c = get_as<int>(j, path);
  if (c < 1) throw ConfigError(path, "cadence must be positive");
  return c;
}

json cadence_to_json(const replay::Cadence& c) { return c ? json(*c) : json("never"); }

replay::Window window_from_json(const json& j, const std::string& path) {
  if (j.is_string()) {
    if (j.get<std::string>() == "expanding") return replay::Window::expanding();
    throw ConfigError(path, "expected \"expanding\" or {\"kind\": \"fixed\", \"size\": N}");
  }
  reject_unknown(j, path, {"kind", "size"});
  const auto kind = get_as<std::string>(j.value("kind", json("fixed")), join(path, "kind"));
  if (kind == "expanding") return replay::Window::expanding();
  if (kind != "fixed") throw ConfigError(join(path, "kind"), "expected fixed or expanding");
  if (!j.contains("size")) throw ConfigError(join(path, "size"), "fixed window needs a size");
  return replay::Window::fixed(get_as<int>(j["size"], join(path, "size")));
}

json window_to_json(const replay::Window& w) {
  if (w.kind == replay::Window::Kind::Expanding) return json{{"kind", "expanding"}};
  return json{{"kind", "fixed"}, {"size", w.size}};
}

replay::HpPolicy hp_policy_from_json(const json& j, const std::string& path) {
  const auto s = get_as<std::string>(j, path);
  if (s == "frozen") return replay::HpPolicy::Frozen;
  if (s == "retune") return replay::HpPolicy::Retune;
  throw ConfigError(path, "expected frozen or retune");
}

replay::ModelKind model_from_json(const json& j, const std::string& path) {
  if (j.is_string() && j.get<std::string>() == "point") return replay::ModelKind::point();
  reject_unknown(j, path, {"kind", "alpha"});
  const auto kind = get_as<std::string>(j.value("kind", json("point")), join(path, "kind"));
  if (kind == "point") return replay::ModelKind::point();
  if (kind != "conformal") throw ConfigError(join(path, "kind"), "expected point or conformal");
  const double alpha = get_as<double>(j.value("alpha", json(0.1)), join(path, "alpha"));
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError(join(path, "alpha"), "alpha must lie in (0, 1)");
  return replay::ModelKind::conformal(alpha);
}

json model_to_json(const replay::ModelKind& m) {
  if (!m.is_conformal()) return json{{"kind", "point"}};
  return json{{"kind", "conformal"}, {"alpha", m.alpha}};
}

replay::ReplayPolicy policy_from_json(const json& j, const std::string& path) {
  reject_unknown(j, path, {"cadence", "window", "hp_policy", "model", "warmup", "seed", "search", "cv_folds",
                           "conformal_folds", "hyperparams"});
  replay::ReplayPolicy p;
  if (j.contains("cadence")) p.cadence = cadence_from_json(j["cadence"], join(path, "cadence"));
  if (j.contains("window")) p.window = window_from_json(j["window"], join(path, "window"));
  if (j.contains("hp_policy")) p.hp_policy = hp_policy_from_json(j["hp_policy"], join(path, "hp_policy"));
  if (j.contains("model")) p.model = model_from_json(j["model"], join(path, "model"));
  if (j.contains("warmup")) p.warmup = get_as<int>(j["warmup"], join(path, "warmup"));
  if (j.contains("seed")) p.seed = get_as<std::uint64_t>(j["seed"], join(path, "seed"));
  if (j.contains("search")) p.search = search_from_json(j["search"], join(path, "search"));
  if (j.contains("cv_folds")) p.cv_folds = get_as<int>(j["cv_folds"], join(path, "cv_folds"));
  if (j.contains("conformal_folds")) p.conformal_folds = get_as<int>(j["conformal_folds"], join(path, "conformal_folds"));
  if (j.contains("hyperparams")) p.hyperparams = hp_from_json(j["hyperparams"], join(path, "hyperparams"));
  validated(path, [&] { p.validate(); });
  return p;
}

template <class T, class F>
std::vector<T> axis_from_json(const json& j, const std::string& path, F&& parse) {
  if (!j.is_array()) throw ConfigError(path, "expected an array");
  if (j.empty()) throw ConfigError(path, "axis must not be empty");
  std::vector<T> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

replay::GridSpec grid_from_json(const json& j, const std::string& path) {
  reject_unknown(j, path, {"scenarios", "cadences", "windows", "hp_policies", "model_kinds", "replications",
                           "warmup", "seed", "search", "cv_folds", "conformal_folds", "hyperparams"});
  for (const char* axis : {"scenarios", "cadences", "windows", "hp_policies", "model_kinds"}) {
    if (!j.contains(axis)) throw ConfigError(join(path, axis), "missing axis");
  }
  replay::GridSpec g;
  g.scenarios = axis_from_json<replay::NamedScenario>(j["scenarios"], join(path, "scenarios"),
                                                      [](const json& s, const std::string& p) {
                                                        replay::NamedScenario ns;
                                                        ns.scenario = scenario_from_json(s, p);
                                                        ns.name = s.contains("name") ? get_as<std::string>(s["name"], p + ".name")
                                                                                     : to_string(ns.scenario.kind);
                                                        // Names become directory components.
                                                        const bool safe = !ns.name.empty() &&
                                                            std::all_of(ns.name.begin(), ns.name.end(), [](unsigned char ch) {
                                                              return std::isalnum(ch) || ch == '_' || ch == '-';
                                                            });
                                                        if (!safe) throw ConfigError(p + ".name", "use letters, digits, '_' or '-'");
                                                        return ns;
                                                      });
  g.cadences = axis_from_json<replay::Cadence>(j["cadences"], join(path, "cadences"), cadence_from_json);
  g.windows = axis_from_json<replay::Window>(j["windows"], join(path, "windows"), window_from_json);
  g.hp_policies = axis_from_json<replay::HpPolicy>(j["hp_policies"], join(path, "hp_policies"), hp_policy_from_json);
  g.model_kinds = axis_from_json<replay::ModelKind>(j["model_kinds"], join(path, "model_kinds"), model_from_json);
  if (j.contains("replications")) g.replications = get_as<int>(j["replications"], join(path, "replications"));
  if (j.contains("warmup")) g.warmup = get_as<int>(j["warmup"], join(path, "warmup"));
  if (j.contains("seed")) g.seed = get_as<std::uint64_t>(j["seed"], join(path, "seed"));
  if (j.contains("search")) g.search = search_from_json(j["search"], join(path, "search"));
  if (j.contains("cv_folds")) g.cv_folds = get_as<int>(j["cv_folds"], join(path, "cv_folds"));
  if (j.contains("conformal_folds")) g.conformal_folds = get_as<int>(j["conformal_folds"], join(path, "conformal_folds"));
  if (j.contains("hyperparams")) g.hyperparams = hp_from_json(j["hyperparams"], join(path, "hyperparams"));
  std::set<std::string> names;
  for (const auto& s : g.scenarios) {
    if (!names.insert(s.name).second) throw ConfigError(join(path, "scenarios"), "duplicate scenario name " + s.name);
  }
  validated(path, [&] { g.validate(); });
  return g;
}

}  // namespace

json to_json(const replay::ReplayPolicy& p) {
  json j{{"cadence", cadence_to_json(p.cadence)},
         {"window", window_to_json(p.window)},
         {"hp_policy", replay::to_string(p.hp_policy)},
         {"model", model_to_json(p.model)},
         {"warmup", p.warmup},
         {"seed", p.seed},
         {"search", search_to_json(p.search)},
         {"cv_folds", p.cv_folds},
         {"conformal_folds", p.conformal_folds}};
  j["hyperparams"] = p.hyperparams ? to_json(*p.hyperparams) : json(nullptr);
  return j;
}

ExperimentConfig parse_config(const json& doc) {
  reject_unknown(doc, "", {"scenario", "dataset", "policy", "grid", "output_dir", "alpha_sweep", "train_size_sweep",
                           "sweep_test_size", "learning_curve_sizes", "analysis_hyperparams", "pca"});
  ExperimentConfig c;
  c.source = doc;
  if (doc.contains("scenario")) c.scenario = scenario_from_json(doc["scenario"], "scenario");
  if (doc.contains("dataset")) c.dataset_path = get_as<std::string>(doc["dataset"], "dataset");
  if (c.scenario && c.dataset_path) throw ConfigError("dataset", "give either scenario or dataset, not both");
  if (doc.contains("policy")) c.policy = policy_from_json(doc["policy"], "policy");
  if (doc.contains("grid")) c.grid = grid_from_json(doc["grid"], "grid");
  if (c.policy && c.grid) throw ConfigError("grid", "give either policy or grid, not both");
  if (doc.contains("output_dir")) c.output_dir = get_as<std::string>(doc["output_dir"], "output_dir");
  if (doc.contains("alpha_sweep")) {
    c.alpha_sweep = axis_from_json<double>(doc["alpha_sweep"], "alpha_sweep", [](const json& v, const std::string& p) {
      const double a = get_as<double>(v, p);
      if (!(a > 0.0 && a < 1.0)) throw ConfigError(p, "alpha must lie in (0, 1)");
      return a;
    });
  }
  auto sizes = [](const json& v, const std::string& p) {
    const auto s = get_as<std::size_t>(v, p);
    if (s < 2) throw ConfigError(p, "size must be >= 2");
    return s;
  };
  if (doc.contains("train_size_sweep")) {
    c.train_size_sweep = axis_from_json<std::size_t>(doc["train_size_sweep"], "train_size_sweep", sizes);
  }
  if (c.alpha_sweep.empty() != c.train_size_sweep.empty()) {
    throw ConfigError(c.alpha_sweep.empty() ? "alpha_sweep" : "train_size_sweep",
                      "alpha_sweep and train_size_sweep go together");
  }
  if (doc.contains("sweep_test_size")) c.sweep_test_size = get_as<std::size_t>(doc["sweep_test_size"], "sweep_test_size");
  if (doc.contains("learning_curve_sizes")) {
    c.learning_curve_sizes = axis_from_json<std::size_t>(doc["learning_curve_sizes"], "learning_curve_sizes", sizes);
  }
  if (doc.contains("analysis_hyperparams")) c.analysis_hp = hp_from_json(doc["analysis_hyperparams"], "analysis_hyperparams");
  if (doc.contains("pca")) {
    const json& p = doc["pca"];
    reject_unknown(p, "pca", {"n_blocks", "n_components", "standardize"});
    if (p.contains("n_blocks")) c.pca.n_blocks = get_as<std::size_t>(p["n_blocks"], "pca.n_blocks");
    if (p.contains("n_components")) c.pca.n_components = get_as<std::size_t>(p["n_components"], "pca.n_components");
    if (p.contains("standardize")) c.pca.standardize = get_as<bool>(p["standardize"], "pca.standardize");
    if (c.pca.n_blocks < 1) throw ConfigError("pca.n_blocks", "must be positive");
    if (c.pca.n_components < 2) throw ConfigError("pca.n_components", "block summaries need at least 2 components");
  }
  return c;
}

ExperimentConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("", "cannot open config file " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& ex) {
    throw ConfigError("", std::string("malformed JSON: ") + ex.what());
  }
  return parse_config(doc);
}

void apply_seed_override(ExperimentConfig& c, std::uint64_t seed) {
  if (c.scenario) c.scenario->seed = seed;
  if (c.policy) c.policy->seed = seed;
  if (c.grid) {
    c.grid->seed = seed;
    for (auto& s : c.grid->scenarios) s.scenario.seed = seed;
  }
  c.source["seed_override"] = seed;
}

// ----------------------------------------------------------------- files

void write_text(const fs::path& file, const std::string& content) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + file.string());
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& file) {
  std::istringstream in(read_text(file));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

namespace {

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::runtime_error("bad number '" + s + "' in " + where);
  return v;
}

std::size_t parse_index(const std::string& s, const std::string& where) {
  std::size_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::runtime_error("bad index '" + s + "' in " + where);
  return v;
}

}  // namespace

void write_dataset(const fs::path& dir, const Dataset& ds) {
  std::string csv = "index";
  for (std::size_t j = 0; j < ds.n_features(); ++j) csv += ",f" + std::to_string(j);
  csv += ",target\n";
  for (const auto& b : ds.batches) {
    csv += std::to_string(b.index);
    for (double x : b.features) csv += "," + format_double(x);
    csv += "," + format_double(b.target) + "\n";
  }
  write_text(dir / "dataset.csv", csv);
  json side = to_json(ds.scenario);
  side["lcl"] = ds.limits.lcl();
  side["ucl"] = ds.limits.ucl();
  write_text(dir / "dataset.json", side.dump(2) + "\n");
}

Dataset read_dataset(const fs::path& csv_path) {
  fs::path side = csv_path;
  side.replace_extension(".json");
  json meta;
  try {
    meta = json::parse(read_text(side));
  } catch (const json::parse_error& ex) {
    throw std::runtime_error("malformed dataset manifest " + side.string() + ": " + ex.what());
  }
  Dataset ds;
  json scenario_part = meta;
  scenario_part.erase("lcl");
  scenario_part.erase("ucl");
  ds.scenario = scenario_from_json(scenario_part, "dataset");
  ds.limits = ControlLimits(meta.at("lcl").get<double>(), meta.at("ucl").get<double>());

  const auto rows = read_csv(csv_path);
  if (rows.empty()) throw std::runtime_error("empty dataset file " + csv_path.string());
  const auto& header = rows.front();
  if (header.size() < 3 || header.front() != "index" || header.back() != "target") {
    throw std::runtime_error("dataset header must be index,f0..f{k-1},target");
  }
  const std::size_t k = header.size() - 2;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].empty() || (rows[r].size() == 1 && rows[r][0].empty())) continue;
    if (rows[r].size() != header.size()) throw std::runtime_error("ragged dataset row " + std::to_string(r));
    Batch b;
    const std::string where = csv_path.string() + ":" + std::to_string(r + 1);
    b.index = parse_index(rows[r][0], where);
    if (b.index != ds.batches.size()) throw std::runtime_error("non-consecutive batch index at " + where);
    for (std::size_t j = 0; j < k; ++j) b.features.push_back(parse_double(rows[r][j + 1], where));
    b.target = parse_double(rows[r].back(), where);
    ds.batches.push_back(std::move(b));
  }
  return ds;
}

void write_predictions_csv(const fs::path& file, const replay::ReplayReport& r) {
  const bool conformal = !r.records.empty() && r.records.front().lower.has_value();
  std::string out = conformal ? "index,point,lower,upper,actual,decision,tier,width_tier\n" : "index,point,actual,tier\n";
  for (const auto& rec : r.records) {
    out += std::to_string(rec.index) + "," + format_double(rec.point) + ",";
    if (conformal) {
      out += format_double(*rec.lower) + "," + format_double(*rec.upper) + "," + format_double(rec.actual) + "," +
             conformal::to_string(*rec.decision) + "," + metrics::to_string(rec.tier) + "," +
             metrics::to_string(*rec.width_tier) + "\n";
    } else {
      out += format_double(rec.actual) + "," + metrics::to_string(rec.tier) + "\n";
    }
  }
  write_text(file, out);
}

std::vector<replay::BatchRecord> read_predictions_csv(const fs::path& file) {
  const auto rows = read_csv(file);
  if (rows.empty()) throw std::runtime_error("empty predictions file");
  const auto& h = rows.front();
  auto col = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < h.size(); ++i)
      if (h[i] == name) return i;
    return std::nullopt;
  };
  const auto c_index = col("index"), c_point = col("point"), c_actual = col("actual"), c_tier = col("tier");
  const auto c_lower = col("lower"), c_upper = col("upper"), c_decision = col("decision"), c_wt = col("width_tier");
  if (!c_index || !c_point || !c_actual || !c_tier) throw std::runtime_error("predictions header missing columns");
  std::vector<replay::BatchRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = file.string() + ":" + std::to_string(r + 1);
    replay::BatchRecord rec;
    rec.index = parse_index(row.at(*c_index), where);
    rec.point = parse_double(row.at(*c_point), where);
    rec.actual = parse_double(row.at(*c_actual), where);
    rec.tier = metrics::tier_from_string(row.at(*c_tier));
    if (c_lower && c_upper) {
      rec.lower = parse_double(row.at(*c_lower), where);
      rec.upper = parse_double(row.at(*c_upper), where);
    }
    if (c_decision) rec.decision = conformal::decision_from_string(row.at(*c_decision));
    if (c_wt) rec.width_tier = metrics::tier_from_string(row.at(*c_wt));
    out.push_back(rec);
  }
  return out;
}

void write_retrain_events_csv(const fs::path& file, const replay::ReplayReport& r) {
  std::string out = "at_index,window_begin,window_end,n_estimators,max_depth,cv_score,train_seconds\n";
  for (const auto& e : r.retrain_events) {
    out += std::to_string(e.at_index) + "," + std::to_string(e.window_begin) + "," + std::to_string(e.window_end) +
           "," + std::to_string(e.hp.n_estimators) + "," + (e.hp.max_depth ? std::to_string(*e.hp.max_depth) : "none") +
           "," + opt(e.cv_score) + "," + format_double(e.train_seconds) + "\n";
  }
  write_text(file, out);
}

namespace {

json tiers_json(const metrics::TierReport& t) {
  json j{{"n", t.n}};
  for (auto tier : {metrics::Tier::Good, metrics::Tier::Mediocre, metrics::Tier::Poor}) {
    j[metrics::to_string(tier)] = json{{"count", t.counts[static_cast<std::size_t>(tier)]}, {"fraction", t.fraction(tier)}};
  }
  return j;
}

}  // namespace

json metrics_json(const replay::ReplayReport& r) {
  const auto& a = r.aggregates;
  json j;
  j["n_predictions"] = r.records.size();
  j["limits"] = json{{"lcl", r.limits.lcl()}, {"ucl", r.limits.ucl()}, {"clr", r.limits.clr()}};
  j["point_tiers"] = tiers_json(a.tiers);
  j["width_tiers"] = a.width_tiers ? tiers_json(*a.width_tiers) : json(nullptr);
  j["coverage"] = opt_json(a.coverage);
  j["mean_width_ratio"] = opt_json(a.mean_width_ratio);
  j["n_ooc"] = a.n_ooc;
  j["sensitivity_point"] = opt_json(a.sensitivity_point);
  j["sensitivity_interval"] = opt_json(a.sensitivity_interval);
  j["rmse_ratio"] = a.rmse_ratio;
  j["initial_hyperparams"] = to_json(r.initial.hp);
  j["n_retrain_events"] = r.retrain_events.size();
  return j;
}

std::string metrics_text(const replay::ReplayReport& r) {
  const auto& a = r.aggregates;
  std::ostringstream os;
  auto line = [&](const std::string& k, const std::string& v) { os << std::left << std::setw(24) << k << v << "\n"; };
  line("predictions", std::to_string(r.records.size()));
  line("retrain events", std::to_string(r.retrain_events.size()));
  line("lcl / ucl", format_double(r.limits.lcl()) + " / " + format_double(r.limits.ucl()));
  for (auto tier : {metrics::Tier::Good, metrics::Tier::Mediocre, metrics::Tier::Poor}) {
    line("point " + metrics::to_string(tier), format_double(a.tiers.fraction(tier)));
  }
  if (a.width_tiers) {
    for (auto tier : {metrics::Tier::Good, metrics::Tier::Mediocre, metrics::Tier::Poor}) {
      line("width " + metrics::to_string(tier), format_double(a.width_tiers->fraction(tier)));
    }
  }
  line("rmse / clr", format_double(a.rmse_ratio));
  line("coverage", a.coverage ? format_double(*a.coverage) : "-");
  line("width / clr", a.mean_width_ratio ? format_double(*a.mean_width_ratio) : "-");
  line("ooc actuals", std::to_string(a.n_ooc));
  line("sensitivity (point)", a.sensitivity_point ? format_double(*a.sensitivity_point) : "-");
  line("sensitivity (interval)", a.sensitivity_interval ? format_double(*a.sensitivity_interval) : "-");
  return os.str();
}

void write_conditional_csv(const fs::path& file, const metrics::ConditionalReport& c) {
  std::string out = "bin,target_min,target_max,n,coverage,rmse\n";
  for (std::size_t b = 0; b < c.bins.size(); ++b) {
    const auto& bin = c.bins[b];
    out += std::to_string(b) + "," + format_double(bin.target_min) + "," + format_double(bin.target_max) + "," +
           std::to_string(bin.n) + "," + format_double(bin.coverage) + "," + format_double(bin.rmse) + "\n";
  }
  write_text(file, out);
}

void write_replay_outputs(const fs::path& dir, const replay::ReplayReport& r) {
  fs::create_directories(dir);
  write_predictions_csv(dir / "predictions.csv", r);
  write_retrain_events_csv(dir / "retrain_events.csv", r);
  write_text(dir / "metrics.json", metrics_json(r).dump(2) + "\n");
  write_text(dir / "metrics.txt", metrics_text(r));
  if (r.aggregates.coverage && r.records.size() >= 20) {
    const auto pis = r.intervals();
    write_conditional_csv(dir / "conditional.csv", metrics::conditional_report(pis, r.points(), r.actuals(), 20));
  }
}

void write_grid_summary_csv(const fs::path& file, const replay::GridSpec& grid, const replay::GridResult& result) {
  std::string out =
      "scenario,cadence,window,hp_policy,model_kind,baseline_only,replications_ok,replications_failed,"
      "frac_good,frac_mediocre,frac_poor,pct_baseline_good,pct_baseline_mediocre,pct_baseline_poor,"
      "coverage,width_ratio,sensitivity_point,sensitivity_interval,rmse_ratio,train_seconds\n";
  for (const auto& s : result.summary) {
    out += grid.scenarios[s.key.scenario].name + "," + replay::cadence_label(s.key.cadence) + "," + s.key.window.label() +
           "," + replay::to_string(s.key.hp_policy) + "," + s.key.model.label() + "," + (s.baseline_only ? "1" : "0") +
           "," + std::to_string(s.replications_ok) + "," + std::to_string(s.replications_failed);
    for (auto tier : {metrics::Tier::Good, metrics::Tier::Mediocre, metrics::Tier::Poor}) {
      out += "," + (s.tiers.n ? format_double(s.tiers.fraction(tier)) : std::string());
    }
    for (const auto& p : s.pct_of_baseline) out += "," + opt(p);
    out += "," + opt(s.coverage) + "," + opt(s.mean_width_ratio) + "," + opt(s.sensitivity_point) + "," +
           opt(s.sensitivity_interval) + "," + opt(s.rmse_ratio) + "," + format_double(s.train_seconds) + "\n";
  }
  write_text(file, out);
}

void write_coverage_sweep_csv(const fs::path& file, const std::vector<replay::SweepPoint>& sweep) {
  std::string out = "train_size,alpha,coverage,width_ratio\n";
  for (const auto& p : sweep) {
    out += std::to_string(p.train_size) + "," + format_double(p.alpha) + "," + format_double(p.coverage) + "," +
           format_double(p.mean_width_ratio) + "\n";
  }
  write_text(file, out);
}

void write_learning_curve_csv(const fs::path& file, const replay::LearningCurve& lc) {
  std::string out = "size,cv_rmse,plateau\n";
  for (const auto& p : lc.points) {
    out += std::to_string(p.size) + "," + format_double(p.cv_rmse) + "," +
           (lc.plateau_size && *lc.plateau_size == p.size ? "1" : "0") + "\n";
  }
  write_text(file, out);
}

void write_pca_outputs(const fs::path& dir, const Dataset& ds, const pca::PcaModel& model,
                       const std::vector<pca::BlockSummary>& blocks) {
  std::string scores = "index,pc1,pc2\n";
  for (const auto& b : ds.batches) {
    const auto s = pca::project(model, b.features);
    scores += std::to_string(b.index) + "," + format_double(s[0]) + "," + format_double(s[1]) + "\n";
  }
  write_text(dir / "pca_scores.csv", scores);
  json j;
  j["standardized"] = model.standardized;
  j["eigenvalues"] = model.eigenvalues;
  j["components"] = model.components;
  j["mean"] = model.mean;
  j["scale"] = model.scale;
  auto& arr = j["blocks"] = json::array();
  for (const auto& b : blocks) {
    arr.push_back(json{{"block_index", b.block_index},
                       {"n", b.n},
                       {"mean", {b.mean[0], b.mean[1]}},
                       {"cov", {{b.cov[0][0], b.cov[0][1]}, {b.cov[1][0], b.cov[1][1]}}}});
  }
  write_text(dir / "pca_blocks.json", j.dump(2) + "\n");
}

// ------------------------------------------------------------- manifests

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

std::string sha256_file(const fs::path& file) { return sha256_hex(read_text(file)); }

void write_manifest(const fs::path& dir, json manifest, const std::vector<fs::path>& only) {
  std::vector<fs::path> files;
  if (only.empty()) {
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
    }
  } else {
    for (const auto& f : only) files.push_back(dir / f);
  }
  std::sort(files.begin(), files.end());
  json hashes = json::object();
  for (const auto& f : files) hashes[fs::relative(f, dir).generic_string()] = sha256_file(f);
  manifest["files"] = hashes;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<std::string> verify_manifest(const fs::path& dir) {
  const json m = json::parse(read_text(dir / "manifest.json"));
  std::vector<std::string> bad;
  for (const auto& [rel, hash] : m.at("files").items()) {
    const fs::path f = dir / rel;
    if (!fs::exists(f) || sha256_file(f) != hash.get<std::string>()) bad.push_back(rel);
  }
  return bad;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

fs::path make_run_dir(const fs::path& root, const json& config) {
  const std::string base = utc_timestamp() + "-" + sha256_hex(config.dump()).substr(0, 8);
  fs::path dir = root / base;
  for (int i = 1; fs::exists(dir); ++i) dir = root / (base + "-" + std::to_string(i));
  fs::create_directories(dir);
  return dir;
}

}  // namespace driftbench::report
