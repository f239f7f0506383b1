// Command-line front end: pretrain, train, eval, run (live sysfs control), plot.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <iostream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "aptc/errors.hpp"
#include "aptc/harness/config.hpp"
#include "aptc/harness/plots.hpp"
#include "aptc/harness/runner.hpp"

using namespace aptc;
using namespace aptc::harness;

namespace {

enum Exit { kOk = 0, kUsage = 1, kRuntime = 2, kSafety = 3 };

struct Common {
  std::string config;
  std::string resume;
  std::optional<std::uint64_t> seed;
  std::string plant;
  std::optional<int> episodes;
  bool deterministic = false;
  std::string out;
  std::string policy = "checkpoint";
  bool verbose = false;
};

void add_common(CLI::App* app, Common& c, bool with_resume, bool with_deterministic) {
  app->add_option("--config", c.config, "JSON run configuration");
  if (with_resume) app->add_option("--resume", c.resume, "checkpoint to resume from or evaluate");
  app->add_option("--seed", c.seed, "random seed (overrides config)");
  app->add_option("--plant", c.plant, "log | cooling | sysfs (overrides config)")
      ->check(CLI::IsMember({"log", "cooling", "sysfs"}));
  app->add_option("--episodes", c.episodes, "episode budget (overrides config)")->check(CLI::NonNegativeNumber);
  if (with_deterministic) app->add_flag("--deterministic", c.deterministic, "act with tanh(mean)");
  app->add_option("--out", c.out, "output directory (overrides config)");
  app->add_flag("-v,--verbose", c.verbose, "per-episode log lines");
}

RunConfig load(const Common& c, std::optional<PlantKind> forced = std::nullopt) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : parse_config(c.config);
  if (forced) cfg.plant = *forced;
  if (!c.plant.empty()) cfg.plant = plant_kind_from_string(c.plant);
  if (c.seed) cfg.seed = *c.seed;
  if (c.episodes) cfg.episodes = *c.episodes;
  if (!c.out.empty()) cfg.out_dir = c.out;
  cfg.sac.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

void print_train(const TrainResult& r) {
  std::int64_t longest = 0;
  for (const EpisodeSummary& e : r.episodes) longest = std::max(longest, e.length);
  nlohmann::json j{{"episodes_run", r.episodes.size()},
                   {"episodes_total", r.episodes_completed},
                   {"total_steps", r.total_steps},
                   {"longest_episode", longest},
                   {"safety_trips", r.safety_trips},
                   {"metrics", r.metrics_path.string()},
                   {"checkpoint", r.checkpoint_path.string()}};
  std::cout << j.dump(2) << '\n';
}

void print_eval(const EvalSummary& s) {
  nlohmann::json j{{"episodes", s.episodes.size()},
                   {"mean_length", s.mean_length},
                   {"median_length", s.median_length},
                   {"max_length", s.max_length},
                   {"mean_reward", s.mean_reward},
                   {"safety_trips", s.safety_trips}};
  std::cout << j.dump(2) << '\n';
}

int do_train(const Common& c, std::optional<PlantKind> forced) {
  const RunConfig cfg = load(c, forced);
  TrainOptions opts;
  if (!c.resume.empty()) opts.resume = c.resume;
  if (c.verbose) {
    opts.on_episode = [](const EpisodeSummary& e) {
      spdlog::info("episode {:4d}  length {:5d}  reward {:9.3f}  {}", e.episode, e.length, e.total_reward,
                   env::to_string(e.end_event));
      return true;
    };
  }
  std::unique_ptr<LiveSession> live;
  if (cfg.plant == PlantKind::sysfs) {
    live = std::make_unique<LiveSession>(cfg);
    opts.live = live.get();
  }
  print_train(train(cfg, std::move(opts)));
  return kOk;
}

int do_eval(const Common& c, std::optional<PlantKind> forced, bool live_run) {
  RunConfig cfg = load(c, forced);
  EvalOptions opts;
  opts.episodes = c.episodes.value_or(cfg.eval_episodes);
  opts.metrics_path = cfg.out_dir / (live_run ? "run_metrics.csv" : "eval_metrics.csv");
  std::unique_ptr<LiveSession> live;
  if (cfg.plant == PlantKind::sysfs) {
    live = std::make_unique<LiveSession>(cfg);
    opts.live = live.get();
  }
  EvalSummary s;
  if (c.policy == "checkpoint") {
    if (c.resume.empty()) throw UsageError("--resume <checkpoint> is required for a checkpoint policy");
    s = evaluate_checkpoint(cfg, c.resume, c.deterministic, std::move(opts));
  } else {
    s = evaluate(cfg, scripted_policy(c.policy == "all-off" ? ScriptedPolicy::all_off : ScriptedPolicy::all_high),
                 std::move(opts));
  }
  print_eval(s);
  return live_run && s.safety_trips > 0 ? kSafety : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermal control of a multicore board with Soft Actor-Critic"};
  app.require_subcommand(1);
  Common c;

  CLI::App* pretrain = app.add_subcommand("pretrain", "train on the log plant (defaults: 60 episodes)");
  add_common(pretrain, c, true, false);
  CLI::App* train_cmd = app.add_subcommand("train", "train, optionally resuming from a checkpoint");
  add_common(train_cmd, c, true, false);
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint or scripted policy without learning");
  add_common(eval, c, true, true);
  eval->add_option("--policy", c.policy, "checkpoint | all-off | all-high")
      ->check(CLI::IsMember({"checkpoint", "all-off", "all-high"}));
  CLI::App* run = app.add_subcommand("run", "live control of the sysfs board with a checkpoint policy");
  add_common(run, c, true, true);
  CLI::App* plot = app.add_subcommand("plot", "write plot documents from a metrics file");
  std::string metrics;
  std::string plot_out = "plots";
  std::optional<std::int64_t> trace_episode;
  plot->add_option("metrics", metrics, "metrics CSV")->required();
  plot->add_option("--out", plot_out, "output directory");
  plot->add_option("--episode", trace_episode, "episode for the temperature trace (default: last)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }
  spdlog::set_level(c.verbose ? spdlog::level::info : spdlog::level::warn);

  try {
    if (pretrain->parsed()) return do_train(c, PlantKind::log);
    if (train_cmd->parsed()) return do_train(c, std::nullopt);
    if (eval->parsed()) return do_eval(c, std::nullopt, false);
    if (run->parsed()) {
      if (!c.plant.empty() && c.plant != "sysfs") throw UsageError("run controls the sysfs plant only");
      return do_eval(c, PlantKind::sysfs, true);
    }
    if (plot->parsed()) {
      const PlotReport r = emit_plots(metrics, plot_out, trace_episode);
      nlohmann::json j{{"episodes", r.episodes},
                       {"empty", r.empty},
                       {"trace_episode", r.trace_episode},
                       {"lengths_svg", r.lengths_svg.string()},
                       {"trace_svg", r.trace_svg.string()}};
      std::cout << j.dump(2) << '\n';
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const SafetyTripped& e) {
    std::cerr << "safety trip: " << e.what() << '\n';
    return kSafety;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
