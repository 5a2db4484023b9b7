#include "qedgix/cli/commands.hpp"

#include <charconv>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "qedgix/cli/experiment.hpp"
#include "qedgix/env/scenario_io.hpp"
#include "qedgix/error.hpp"

namespace qedgix::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

template <typename Fn>
int guarded(const char* command, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << command << ": " << e.what() << '\n';
    return kConfigError;
  } catch (const ShapeMismatch& e) {
    std::cerr << command << ": shape mismatch: " << e.what() << '\n';
    return kShapeMismatch;
  } catch (const IoError& e) {
    std::cerr << command << ": " << e.what() << '\n';
    return kIoError;
  } catch (const nn::CheckpointError& e) {
    std::cerr << command << ": " << e.what() << '\n';
    return kIoError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << command << ": " << e.what() << '\n';
    return kIoError;
  } catch (const ContractViolation& e) {
    std::cerr << command << ": invalid configuration: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace

int cmd_train(const fs::path& config_path, std::optional<std::uint64_t> seed) {
  return guarded("train", [&] {
    ExperimentConfig config = load_experiment(config_path);
    config.scenario.validate();
    const std::vector<std::uint64_t> seeds = seed ? std::vector<std::uint64_t>{*seed} : config.seeds;
    for (std::uint64_t s : seeds) {
      const RunResult r = run_experiment(config, s);
      std::cout << r.directory.string() << " mean_aoi " << r.mean_aoi << " return " << r.mean_return << '\n';
    }
    return int{kOk};
  });
}

int cmd_eval(const fs::path& checkpoint_path, const fs::path& scenario_path, std::size_t episodes,
             std::uint64_t seed, std::optional<fs::path> output_dir) {
  return guarded("eval", [&] {
    const env::WorldConfig scenario = env::load_scenario(scenario_path);
    if (episodes == 0) throw ConfigError("episodes", "must be positive");
    const nn::Checkpoint cp = nn::load_checkpoint(checkpoint_path);
    LoadedPolicy loaded = policy_from_checkpoint(cp, scenario);

    const fs::path out = output_dir ? *output_dir : checkpoint_path.parent_path() / "eval";
    std::error_code ec;
    fs::create_directories(out / "trajectories", ec);
    if (ec) throw IoError("cannot create directory '" + out.string() + "': " + ec.message());

    // Policies trained on one layout are evaluated on the scenario's layout.
    const auto mode = cp.meta.find("random_layouts");
    const bool random_layouts = mode != cp.meta.end() && mode->second == "1";
    const auto result = trainer::evaluate_policy(scenario, loaded.policy, episodes, seed, random_layouts);
    for (std::size_t e = 0; e < result.trajectories.size(); ++e)
      env::write_trajectory_csv(out / "trajectories" / ("episode_" + std::to_string(e) + ".csv"),
                                result.trajectories[e]);
    std::ofstream summary(out / "summary.json");
    if (!summary) throw IoError("cannot write '" + (out / "summary.json").string() + "'");
    summary << json{{"checkpoint", checkpoint_path.string()},
                    {"algorithm", to_string(loaded.algorithm)},
                    {"episodes", episodes},
                    {"seed", seed},
                    {"mean_aoi", result.mean_aoi},
                    {"mean_return", result.mean_return},
                    {"episode_mean_aoi", result.episode_mean_aoi}}
                   .dump(2)
            << '\n';
    std::cout << "mean_aoi " << result.mean_aoi << " return " << result.mean_return << '\n';
    return int{kOk};
  });
}

namespace {

constexpr const char* kResultsHeader = "swept_value,algorithm,seed,mean_aoi,return";
constexpr const char* kFailuresHeader = "swept_value,algorithm,seed,error";

struct CellJob {
  std::string swept_value;
  Algorithm algorithm;
  std::uint64_t seed;
  ExperimentConfig config;
};

struct CellOutcome {
  const CellJob* job = nullptr;
  std::optional<RunResult> result;
  std::string error;
};

std::string cell_key(const std::string& value, const std::string& algorithm, const std::string& seed) {
  return value + ',' + algorithm + ',' + seed;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  return fields;
}

// Opens `path` for appending, writing `header` first if the file is new or empty.
std::ofstream open_append(const fs::path& path, const char* header) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  if (fresh) out << header << '\n';
  return out;
}

std::string csv_field(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ' ';
  return s;
}

void write_summary(const fs::path& results_path, const fs::path& summary_path) {
  std::ifstream in(results_path);
  std::string line;
  std::getline(in, line);
  // (swept_value, algorithm) in first-seen order -> samples
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>> samples;
  while (std::getline(in, line)) {
    const auto f = split_csv(line);
    if (f.size() != 5) continue;
    const auto key = std::make_pair(f[0], f[1]);
    if (!samples.contains(key)) order.push_back(key);
    samples[key].first.push_back(std::stod(f[3]));
    samples[key].second.push_back(std::stod(f[4]));
  }
  auto stats = [](const std::vector<double>& v) {
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    // sample standard deviation; 0 for a single run
    const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
    return std::make_pair(mean, sd);
  };
  std::ofstream out(summary_path);
  if (!out) throw IoError("cannot write '" + summary_path.string() + "'");
  out << "swept_value,algorithm,runs,mean_aoi_mean,mean_aoi_std,return_mean,return_std\n";
  for (const auto& key : order) {
    const auto& [aoi, ret] = samples[key];
    const auto [am, as] = stats(aoi);
    const auto [rm, rs] = stats(ret);
    out << key.first << ',' << key.second << ',' << aoi.size() << ',' << number(am) << ',' << number(as) << ','
        << number(rm) << ',' << number(rs) << '\n';
  }
}

}  // namespace

int cmd_sweep(const fs::path& config_path, const fs::path& sweep_path, bool resume, std::size_t jobs) {
  return guarded("sweep", [&]() -> int {
    const ExperimentConfig base = load_experiment(config_path);
    const SweepSpec spec = load_sweep(sweep_path);
    const std::vector<Algorithm> algorithms =
        spec.algorithms.empty() ? std::vector<Algorithm>{base.algorithm} : spec.algorithms;

    std::vector<std::uint64_t> seeds;
    for (std::size_t r = 0; r < spec.repetitions; ++r)
      seeds.push_back(r < base.seeds.size() ? base.seeds[r] : base.seeds.back() + (r - base.seeds.size() + 1));

    const fs::path out_dir = base.output_dir;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create directory '" + out_dir.string() + "': " + ec.message());
    const fs::path results_path = out_dir / "sweep_results.csv";
    const fs::path failures_path = out_dir / "sweep_failures.csv";

    std::set<std::string> completed;
    if (resume && fs::exists(results_path)) {
      std::ifstream in(results_path);
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        const auto f = split_csv(line);
        if (f.size() == 5) completed.insert(cell_key(f[0], f[1], f[2]));
      }
    } else {
      fs::remove(results_path, ec);
      fs::remove(failures_path, ec);
    }

    // Build and validate every cell before any training starts.
    std::vector<CellJob> todo;
    for (const SweepCell& cell : spec.cells)
      for (Algorithm alg : algorithms)
        for (std::uint64_t s : seeds) {
          if (completed.contains(cell_key(cell.label, to_string(alg), std::to_string(s)))) continue;
          todo.push_back(CellJob{cell.label, alg, s, spec.apply(base, cell, alg)});
        }
    std::ofstream results = open_append(results_path, kResultsHeader);
    std::ofstream failures = open_append(failures_path, kFailuresHeader);

    std::mutex mutex;
    std::condition_variable ready;
    std::deque<CellOutcome> finished;
    std::size_t next = 0;
    auto worker = [&] {
      for (;;) {
        const CellJob* job = nullptr;
        {
          std::lock_guard lock(mutex);
          if (next >= todo.size()) return;
          job = &todo[next++];
        }
        CellOutcome outcome{job, std::nullopt, {}};
        try {
          job->config.scenario.validate();
          outcome.result = run_experiment(job->config, job->seed, true);
        } catch (const std::exception& e) {
          outcome.error = e.what();
        }
        {
          std::lock_guard lock(mutex);
          finished.push_back(std::move(outcome));
        }
        ready.notify_one();
      }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, todo.size()));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers && !todo.empty(); ++w) pool.emplace_back(worker);

    // This thread is the only writer of the aggregated files.
    std::size_t successes = 0;
    std::size_t failed = 0;
    for (std::size_t done = 0; done < todo.size(); ++done) {
      CellOutcome outcome;
      {
        std::unique_lock lock(mutex);
        ready.wait(lock, [&] { return !finished.empty(); });
        outcome = std::move(finished.front());
        finished.pop_front();
      }
      const CellJob& job = *outcome.job;
      if (outcome.result) {
        ++successes;
        results << job.swept_value << ',' << to_string(job.algorithm) << ',' << job.seed << ','
                << number(outcome.result->mean_aoi) << ',' << number(outcome.result->mean_return) << '\n';
        results.flush();
        std::cerr << "sweep: " << job.swept_value << ' ' << to_string(job.algorithm) << " seed " << job.seed
                  << " mean_aoi " << outcome.result->mean_aoi << '\n';
      } else {
        ++failed;
        failures << job.swept_value << ',' << to_string(job.algorithm) << ',' << job.seed << ','
                 << csv_field(outcome.error) << '\n';
        failures.flush();
        std::cerr << "sweep: cell " << job.swept_value << ' ' << to_string(job.algorithm) << " seed " << job.seed
                  << " failed: " << outcome.error << '\n';
      }
    }
    for (auto& t : pool) t.join();
    if (!results || !failures) throw IoError("write failed under '" + out_dir.string() + "'");
    results.close();
    write_summary(results_path, out_dir / "sweep_summary.csv");

    if (!todo.empty() && successes == 0 && completed.empty()) {
      std::cerr << "sweep: all " << failed << " cells failed\n";
      return kAllCellsFailed;
    }
    return kOk;
  });
}

}  // namespace qedgix::cli
