#include "qedgix/cli/experiment.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <type_traits>

#include "qedgix/env/scenario_io.hpp"
#include "qedgix/error.hpp"

namespace qedgix::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::Qedgix: return "qedgix";
    case Algorithm::Qmix: return "qmix";
    case Algorithm::AggGnn: return "agg-gnn";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& tag) {
  if (tag == "qedgix") return Algorithm::Qedgix;
  if (tag == "qmix") return Algorithm::Qmix;
  if (tag == "agg-gnn") return Algorithm::AggGnn;
  throw ConfigError("algorithm", "unknown algorithm '" + tag + "' (expected qedgix, qmix or agg-gnn)");
}

encoder::GraphVariant variant_for(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::Qedgix: return encoder::GraphVariant::EdgeConv;
    case Algorithm::Qmix: return encoder::GraphVariant::None;
    case Algorithm::AggGnn: return encoder::GraphVariant::Aggregation;
  }
  return encoder::GraphVariant::EdgeConv;
}

encoder::EncoderConfig ExperimentConfig::encoder_for_algorithm() const {
  encoder::EncoderConfig e = encoder;
  e.variant = variant_for(algorithm);
  return e;
}

namespace {

// JSON built in code stores literals as signed; accept those when non-negative.
bool is_count(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
}

// Reads typed values out of one JSON section and reports errors with the
// dotted key path.
class Section {
 public:
  Section(const json& j, std::string prefix, std::set<std::string> allowed) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected a JSON object");
    for (const auto& [key, value] : j_.items())
      if (!allowed.contains(key)) throw ConfigError(path(key), "unknown key");
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  void read(const std::string& key, double& out) const {
    if (auto it = j_.find(key); it != j_.end()) {
      if (!it->is_number()) throw ConfigError(path(key), "expected a number");
      out = it->get<double>();
    }
  }
  template <typename T>
    requires std::is_unsigned_v<T>
  void read(const std::string& key, T& out) const {
    if (auto it = j_.find(key); it != j_.end()) {
      if (!is_count(*it)) throw ConfigError(path(key), "expected a non-negative integer");
      out = it->template get<T>();
    }
  }
  void read(const std::string& key, bool& out) const {
    if (auto it = j_.find(key); it != j_.end()) {
      if (!it->is_boolean()) throw ConfigError(path(key), "expected true or false");
      out = it->get<bool>();
    }
  }
  void read(const std::string& key, std::string& out) const {
    if (auto it = j_.find(key); it != j_.end()) {
      if (!it->is_string()) throw ConfigError(path(key), "expected a string");
      out = it->get<std::string>();
    }
  }
  const json* find(const std::string& key) const {
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

 private:
  const json& j_;
  std::string prefix_;
};

void check(bool ok, const std::string& key, const std::string& message) {
  if (!ok) throw ConfigError(key, message);
}

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig c;
  const Section root(j, "",
                     {"scenario", "algorithm", "train", "encoder", "mixer", "evaluation", "checkpoint_interval",
                      "output_dir", "seeds"});
  if (const json* s = root.find("scenario")) {
    try {
      c.scenario = env::scenario_from_json(*s);
    } catch (const ConfigError& e) {
      const std::string what = e.what();
      const auto cut = what.find("': ");
      throw ConfigError("scenario." + e.key(), cut == std::string::npos ? what : what.substr(cut + 3));
    }
  }
  if (const json* a = root.find("algorithm")) {
    if (!a->is_string()) throw ConfigError("algorithm", "expected a string");
    c.algorithm = parse_algorithm(a->get<std::string>());
  }
  if (const json* t = root.find("train")) {
    const Section s(*t, "train",
                    {"learning_rate", "batch_size", "gamma", "epsilon", "target_sync_period", "total_episodes",
                     "warmup_episodes", "train_steps_per_episode", "buffer_capacity", "reward_scale",
                     "grad_clip_norm", "random_layouts"});
    auto& tc = c.train;
    s.read("learning_rate", tc.learning_rate);
    s.read("batch_size", tc.batch_size);
    s.read("gamma", tc.gamma);
    s.read("epsilon", tc.epsilon);
    s.read("target_sync_period", tc.target_sync_period);
    s.read("total_episodes", tc.total_episodes);
    s.read("warmup_episodes", tc.warmup_episodes);
    s.read("train_steps_per_episode", tc.train_steps_per_episode);
    s.read("buffer_capacity", tc.buffer_capacity);
    s.read("reward_scale", tc.reward_scale);
    s.read("grad_clip_norm", tc.grad_clip_norm);
    s.read("random_layouts", tc.random_layouts);
    check(tc.learning_rate > 0.0, "train.learning_rate", "must be positive");
    check(tc.batch_size > 0, "train.batch_size", "must be positive");
    check(tc.gamma > 0.0 && tc.gamma <= 1.0, "train.gamma", "must lie in (0, 1]");
    check(tc.epsilon >= 0.0 && tc.epsilon <= 1.0, "train.epsilon", "must lie in [0, 1]");
    check(tc.target_sync_period > 0, "train.target_sync_period", "must be positive");
    check(tc.buffer_capacity >= tc.batch_size, "train.buffer_capacity", "must be at least batch_size");
    check(tc.reward_scale >= 0.0, "train.reward_scale", "must not be negative");
    check(tc.grad_clip_norm >= 0.0, "train.grad_clip_norm", "must not be negative");
  }
  if (const json* e = root.find("encoder")) {
    const Section s(*e, "encoder", {"feature_width", "recurrent_width", "graph_layers", "edge_hidden_width"});
    s.read("feature_width", c.encoder.feature_width);
    s.read("recurrent_width", c.encoder.recurrent_width);
    s.read("graph_layers", c.encoder.graph_layers);
    s.read("edge_hidden_width", c.encoder.edge_hidden_width);
    check(c.encoder.feature_width > 0, "encoder.feature_width", "must be positive");
    check(c.encoder.recurrent_width == c.encoder.feature_width, "encoder.recurrent_width",
          "must equal encoder.feature_width");
    check(c.encoder.edge_hidden_width > 0, "encoder.edge_hidden_width", "must be positive");
    check(c.encoder.graph_layers >= 1, "encoder.graph_layers", "must be at least 1");
  }
  if (const json* m = root.find("mixer")) {
    const Section s(*m, "mixer", {"embed_width", "hyper_hidden_width"});
    s.read("embed_width", c.mixer.embed_width);
    s.read("hyper_hidden_width", c.mixer.hyper_hidden_width);
    check(c.mixer.embed_width > 0, "mixer.embed_width", "must be positive");
    check(c.mixer.hyper_hidden_width > 0, "mixer.hyper_hidden_width", "must be positive");
  }
  if (const json* e = root.find("evaluation")) {
    const Section s(*e, "evaluation", {"episodes", "interval", "seed"});
    s.read("episodes", c.evaluation.episodes);
    s.read("interval", c.evaluation.interval);
    s.read("seed", c.evaluation.seed);
  }
  root.read("checkpoint_interval", c.checkpoint_interval);
  root.read("output_dir", c.output_dir);
  check(!c.output_dir.empty(), "output_dir", "must not be empty");
  if (const json* s = root.find("seeds")) {
    if (!s->is_array() || s->empty()) throw ConfigError("seeds", "expected a non-empty array of integers");
    c.seeds.clear();
    for (const auto& v : *s) {
      if (!is_count(v)) throw ConfigError("seeds", "expected non-negative integers");
      c.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  return c;
}

json experiment_to_json(const ExperimentConfig& c) {
  const auto& t = c.train;
  return json{
      {"scenario", env::scenario_to_json(c.scenario)},
      {"algorithm", to_string(c.algorithm)},
      {"train",
       {{"learning_rate", t.learning_rate},
        {"batch_size", t.batch_size},
        {"gamma", t.gamma},
        {"epsilon", t.epsilon},
        {"target_sync_period", t.target_sync_period},
        {"total_episodes", t.total_episodes},
        {"warmup_episodes", t.warmup_episodes},
        {"train_steps_per_episode", t.train_steps_per_episode},
        {"buffer_capacity", t.buffer_capacity},
        {"reward_scale", t.reward_scale},
        {"grad_clip_norm", t.grad_clip_norm},
        {"random_layouts", t.random_layouts}}},
      {"encoder",
       {{"feature_width", c.encoder.feature_width},
        {"recurrent_width", c.encoder.recurrent_width},
        {"graph_layers", c.encoder.graph_layers},
        {"edge_hidden_width", c.encoder.edge_hidden_width}}},
      {"mixer", {{"embed_width", c.mixer.embed_width}, {"hyper_hidden_width", c.mixer.hyper_hidden_width}}},
      {"evaluation",
       {{"episodes", c.evaluation.episodes}, {"interval", c.evaluation.interval}, {"seed", c.evaluation.seed}}},
      {"checkpoint_interval", c.checkpoint_interval},
      {"output_dir", c.output_dir},
      {"seeds", c.seeds}};
}

ExperimentConfig load_experiment(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("parse error: ") + e.what());
  }
  return experiment_from_json(j);
}

ExperimentConfig SweepSpec::apply(const ExperimentConfig& base, const SweepCell& cell, Algorithm algorithm) const {
  ExperimentConfig c = base;
  c.algorithm = algorithm;
  if (key == SweepKey::DetectionRange) {
    c.scenario.detection_range_xi = cell.detection_range_xi;
    check(c.scenario.detection_range_xi >= c.scenario.transmission_range_xi, "detection_range_xi",
          "swept value " + cell.label + " is below the transmission range");
  } else {
    c.scenario.num_uavs = cell.num_uavs;
    c.scenario.num_users = cell.num_users;
    check(cell.num_uavs >= 1 && cell.num_uavs <= cell.num_users, "num_uavs",
          "cell " + cell.label + " needs 1 <= num_uavs <= num_users");
  }
  return c;
}

SweepSpec sweep_from_json(const json& j) {
  const Section root(j, "", {"key", "values", "range", "uavs", "users", "repetitions", "algorithms"});
  std::string key;
  root.read("key", key);
  SweepSpec spec;
  root.read("repetitions", spec.repetitions);
  check(spec.repetitions >= 1, "repetitions", "must be at least 1");
  if (const json* a = root.find("algorithms")) {
    if (!a->is_array()) throw ConfigError("algorithms", "expected an array of algorithm tags");
    for (const auto& tag : *a) {
      if (!tag.is_string()) throw ConfigError("algorithms", "expected strings");
      spec.algorithms.push_back(parse_algorithm(tag.get<std::string>()));
    }
  }

  if (key == "detection_range_xi") {
    spec.key = SweepKey::DetectionRange;
    std::vector<double> values;
    if (const json* v = root.find("values")) {
      if (!v->is_array()) throw ConfigError("values", "expected an array of numbers");
      for (const auto& x : *v) {
        if (!x.is_number()) throw ConfigError("values", "expected numbers");
        values.push_back(x.get<double>());
      }
    } else if (const json* r = root.find("range")) {
      const Section s(*r, "range", {"start", "stop", "step"});
      double start = 0, stop = 0, step = 0;
      s.read("start", start);
      s.read("stop", stop);
      s.read("step", step);
      check(step > 0.0 && stop >= start, "range", "needs step > 0 and stop >= start");
      const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
      for (std::size_t i = 0; i < count; ++i) values.push_back(start + static_cast<double>(i) * step);
    } else {
      throw ConfigError("values", "detection sweep needs 'values' or 'range'");
    }
    check(!values.empty(), "values", "must not be empty");
    for (double v : values) {
      check(v > 0.0, "values", "detection ranges must be positive");
      spec.cells.push_back(SweepCell{format_number(v), v, 0, 0});
    }
  } else if (key == "num_uavs x num_users" || key == "num_uavs×num_users" || key == "scale") {
    spec.key = SweepKey::Scale;
    std::vector<std::pair<std::size_t, std::size_t>> grid;
    if (const json* v = root.find("values")) {
      if (!v->is_array()) throw ConfigError("values", "expected an array of [num_uavs, num_users] pairs");
      for (const auto& pair : *v) {
        if (!pair.is_array() || pair.size() != 2 || !is_count(pair[0]) || !is_count(pair[1]))
          throw ConfigError("values", "expected [num_uavs, num_users] pairs");
        grid.emplace_back(pair[0].get<std::size_t>(), pair[1].get<std::size_t>());
      }
    } else {
      const json* u = root.find("uavs");
      const json* n = root.find("users");
      if (!u || !n || !u->is_array() || !n->is_array())
        throw ConfigError("uavs", "scale sweep needs 'values' or both 'uavs' and 'users' arrays");
      for (const auto& m : *u)
        for (const auto& k : *n) {
          if (!is_count(m) || !is_count(k))
            throw ConfigError("uavs", "expected non-negative integers");
          grid.emplace_back(m.get<std::size_t>(), k.get<std::size_t>());
        }
    }
    check(!grid.empty(), "values", "must not be empty");
    for (auto [m, n] : grid) {
      check(m >= 1 && m <= n, "values", "each cell needs 1 <= num_uavs <= num_users");
      spec.cells.push_back(SweepCell{std::to_string(m) + "x" + std::to_string(n), 0.0, m, n});
    }
  } else {
    throw ConfigError("key", "unsupported sweep key '" + key + "' (detection_range_xi or num_uavs x num_users)");
  }
  return spec;
}

SweepSpec load_sweep(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open sweep spec '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("parse error: ") + e.what());
  }
  return sweep_from_json(j);
}

fs::path run_directory(const ExperimentConfig& config, std::uint64_t seed) {
  std::ostringstream name;
  name << to_string(config.algorithm) << "_m" << config.scenario.num_uavs << "_n" << config.scenario.num_users
       << "_d" << format_number(config.scenario.detection_range_xi) << "_seed" << seed;
  return fs::path(config.output_dir) / name.str();
}

nn::Checkpoint make_checkpoint(const ExperimentConfig& config, trainer::Learner& learner) {
  nn::Checkpoint cp;
  const auto& enc = learner.policy().config();
  cp.meta["algorithm"] = to_string(config.algorithm);
  cp.meta["variant"] = encoder::to_string(enc.variant);
  cp.meta["num_uavs"] = std::to_string(learner.world().num_uavs);
  cp.meta["num_users"] = std::to_string(learner.world().num_users);
  cp.meta["feature_width"] = std::to_string(enc.feature_width);
  cp.meta["recurrent_width"] = std::to_string(enc.recurrent_width);
  cp.meta["graph_layers"] = std::to_string(enc.graph_layers);
  cp.meta["edge_hidden_width"] = std::to_string(enc.edge_hidden_width);
  cp.meta["position_scale"] = format_number(learner.policy().scaling().position);
  cp.meta["aoi_scale"] = format_number(learner.policy().scaling().aoi);
  cp.meta["area_scale"] = format_number(learner.policy().scaling().area);
  cp.meta["embed_width"] = std::to_string(learner.mixer().config().embed_width);
  cp.meta["hyper_hidden_width"] = std::to_string(learner.mixer().config().hyper_hidden_width);
  cp.meta["random_layouts"] = learner.config().random_layouts ? "1" : "0";
  cp.meta["episodes"] = std::to_string(learner.episodes_done());
  cp.meta["gradient_steps"] = std::to_string(learner.gradient_steps());
  cp.put("policy", learner.policy().parameters());
  cp.put("mixer", learner.mixer().parameters());
  return cp;
}

namespace {

std::size_t meta_size(const nn::Checkpoint& cp, const std::string& key) {
  auto it = cp.meta.find(key);
  if (it == cp.meta.end()) throw nn::CheckpointError("checkpoint: missing metadata '" + key + "'");
  std::size_t v = 0;
  auto [end, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (ec != std::errc()) throw nn::CheckpointError("checkpoint: malformed metadata '" + key + "'");
  return v;
}

double meta_double(const nn::Checkpoint& cp, const std::string& key) {
  auto it = cp.meta.find(key);
  if (it == cp.meta.end()) throw nn::CheckpointError("checkpoint: missing metadata '" + key + "'");
  double v = 0;
  auto [end, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (ec != std::errc()) throw nn::CheckpointError("checkpoint: malformed metadata '" + key + "'");
  return v;
}

}  // namespace

LoadedPolicy policy_from_checkpoint(const nn::Checkpoint& cp, const env::WorldConfig& scenario) {
  LoadedPolicy out;
  out.num_uavs = meta_size(cp, "num_uavs");
  out.num_users = meta_size(cp, "num_users");
  if (out.num_uavs != scenario.num_uavs || out.num_users != scenario.num_users) {
    throw ShapeMismatch("checkpoint was trained for " + std::to_string(out.num_uavs) + " UAVs / " +
                        std::to_string(out.num_users) + " users, scenario has " +
                        std::to_string(scenario.num_uavs) + " UAVs / " + std::to_string(scenario.num_users) +
                        " users");
  }
  auto it = cp.meta.find("algorithm");
  if (it == cp.meta.end()) throw nn::CheckpointError("checkpoint: missing metadata 'algorithm'");
  out.algorithm = parse_algorithm(it->second);
  encoder::EncoderConfig enc;
  enc.feature_width = meta_size(cp, "feature_width");
  enc.recurrent_width = meta_size(cp, "recurrent_width");
  enc.graph_layers = meta_size(cp, "graph_layers");
  enc.edge_hidden_width = meta_size(cp, "edge_hidden_width");
  enc.variant = variant_for(out.algorithm);
  // Inputs are scaled with the scenario's own ranges, as during training.
  (void)meta_double(cp, "position_scale");
  out.policy = encoder::PolicyNetwork(enc, out.num_uavs, out.num_users, encoder::scaling_for(scenario), 0);
  try {
    cp.restore("policy", out.policy.parameters());
  } catch (const nn::CheckpointError& e) {
    throw ShapeMismatch(e.what());
  }
  return out;
}

namespace {

void write_json_line(std::ofstream& out, const json& record) {
  out << record.dump() << '\n';
  out.flush();
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory '" + dir.string() + "'");
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, std::uint64_t seed, bool quiet) {
  RunResult result;
  result.directory = run_directory(config, seed);
  ensure_directory(result.directory);
  ensure_directory(result.directory / "checkpoints");
  ensure_directory(result.directory / "trajectories");

  ExperimentConfig resolved = config;
  resolved.seeds = {seed};
  open_output(result.directory / "config.json") << experiment_to_json(resolved).dump(2) << '\n';

  trainer::TrainConfig train = config.train;
  train.seed = seed;
  trainer::Learner learner(config.scenario, config.encoder_for_algorithm(), config.mixer, train);

  std::ofstream metrics = open_output(result.directory / "metrics.jsonl");
  std::ofstream evaluations = open_output(result.directory / "evaluations.jsonl");
  learner.train([&](const trainer::EpisodeStats& s) {
    write_json_line(metrics, json{{"episode", s.episode},
                                  {"steps", s.steps},
                                  {"return", s.episode_return},
                                  {"mean_aoi", s.mean_aoi},
                                  {"loss_avg", s.loss_avg ? json(*s.loss_avg) : json(nullptr)},
                                  {"epsilon", s.epsilon},
                                  {"wall_ms", s.wall_ms}});
    const std::size_t done = s.episode + 1;
    if (config.evaluation.interval > 0 && done % config.evaluation.interval == 0) {
      const auto eval = trainer::evaluate_policy(config.scenario, learner.policy(), config.evaluation.episodes,
                                                 config.evaluation.seed, train.random_layouts);
      write_json_line(evaluations, json{{"episode", done}, {"mean_aoi", eval.mean_aoi}, {"return", eval.mean_return}});
      if (!quiet)
        std::cerr << result.directory.filename().string() << " episode " << done << " greedy mean AoI "
                  << eval.mean_aoi << '\n';
    }
    if (config.checkpoint_interval > 0 && done % config.checkpoint_interval == 0 && done < train.total_episodes) {
      nn::save_checkpoint(result.directory / "checkpoints" / ("episode_" + std::to_string(done) + ".ckpt"),
                          make_checkpoint(config, learner));
    }
  });
  if (!metrics) throw IoError("write failed for metrics stream in '" + result.directory.string() + "'");
  try {
    nn::save_checkpoint(result.directory / "checkpoints" / "final.ckpt", make_checkpoint(config, learner));
  } catch (const nn::CheckpointError& e) {
    throw IoError(e.what());
  }

  const auto eval =
      trainer::evaluate_policy(config.scenario, learner.policy(), config.evaluation.episodes, config.evaluation.seed,
                               train.random_layouts);
  for (std::size_t e = 0; e < eval.trajectories.size(); ++e)
    env::write_trajectory_csv(result.directory / "trajectories" / ("episode_" + std::to_string(e) + ".csv"),
                              eval.trajectories[e]);
  open_output(result.directory / "summary.json")
      << json{{"episodes", config.evaluation.episodes},
              {"seed", config.evaluation.seed},
              {"mean_aoi", eval.mean_aoi},
              {"mean_return", eval.mean_return},
              {"episode_mean_aoi", eval.episode_mean_aoi}}
             .dump(2)
      << '\n';
  result.mean_aoi = eval.mean_aoi;
  result.mean_return = eval.mean_return;
  return result;
}

}  // namespace qedgix::cli
