#include "aptc/harness/runner.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <fstream>

#include "aptc/errors.hpp"

namespace fs = std::filesystem;

namespace aptc::harness {

namespace {

struct EpisodeContext {
  env::Environment& environment;
  MetricsWriter* metrics;
  std::int64_t episode;
  std::uint64_t& total_steps;
  LiveSession* live;
  std::chrono::steady_clock::time_point started;
};

double wall_time(const EpisodeContext& c) {
  if (c.live != nullptr) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - c.started).count();
  }
  // Simulated plants report simulated time so that runs stay reproducible.
  return static_cast<double>(c.total_steps) * c.environment.plant().step_seconds();
}

// Plays one episode. `choose` picks the raw action for an observation; `learn`
// sees every completed transition.
template <typename Choose, typename Learn>
EpisodeSummary run_episode(EpisodeContext& c, Choose&& choose, Learn&& learn) {
  env::Environment& e = c.environment;
  const env::EnvConfig& cfg = e.config();
  if (c.live != nullptr) c.live->ensure_load();
  env::Observation obs = e.reset();
  EpisodeSummary s;
  s.episode = c.episode;
  for (;;) {
    const env::RawAction action = choose(obs);
    MetricsRow row;
    row.episode = c.episode;
    env::StepResult r;
    bool tripped = false;
    try {
      r = e.step(action);
    } catch (const SafetyTripped&) {
      tripped = true;
    }
    ++c.total_steps;
    ++s.length;
    if (tripped) {
      const double t = c.live != nullptr ? c.live->guard().last_temperature() : e.temperature();
      row.step = e.step_index() + 1;
      row.temperature_C = t;
      row.margin_C = cfg.t_limit - t;
      row.cpus_on = 1;
      row.cpus_high = 0;
      row.p_norm = 1.0 / (2.0 * cfg.n_cpus);
      row.event = env::StepEvent::safety_trip;
      spdlog::warn("episode {} aborted by the safety guard at step {}", c.episode, row.step);
    } else {
      row.step = r.info.step_index;
      row.temperature_C = r.info.temperature;
      row.margin_C = cfg.t_limit - r.info.temperature;
      row.slope = r.info.slope;
      row.p_norm = r.observation.p_norm;
      row.cpus_on = r.info.command.k_on;
      row.cpus_high = r.info.command.k_high;
      row.reward = r.reward;
      row.event = r.terminated ? env::StepEvent::terminated
                  : r.truncated ? env::StepEvent::truncated
                                : env::StepEvent::none;
    }
    row.wall_time_s = wall_time(c);
    if (c.metrics != nullptr) c.metrics->write(row);
    s.total_reward += row.reward;
    s.final_temperature = row.temperature_C;
    s.end_event = row.event;
    if (tripped) break;
    learn(obs, action, r);
    obs = r.observation;
    if (r.terminated || r.truncated) break;
  }
  s.total_steps = c.total_steps;
  if (c.metrics != nullptr) c.metrics->flush();
  return s;
}

void write_config_snapshot(const RunConfig& config, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw EnvironmentError("cannot write " + path.string());
  out << to_json(config).dump(2) << '\n';
}

fs::path checkpoint_name(const fs::path& dir, std::uint64_t episodes) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%06llu.aptc", static_cast<unsigned long long>(episodes));
  return dir / buf;
}

void prune_checkpoints(const fs::path& dir, int keep) {
  std::vector<fs::path> all = list_checkpoints(dir);
  const std::size_t k = static_cast<std::size_t>(keep);
  for (std::size_t i = 0; i + k < all.size(); ++i) fs::remove(all[i]);
}

EvalSummary summarize(std::vector<EpisodeSummary> episodes) {
  EvalSummary out;
  std::vector<double> lengths;
  for (const EpisodeSummary& e : episodes) {
    lengths.push_back(static_cast<double>(e.length));
    out.mean_length += static_cast<double>(e.length);
    out.mean_reward += e.total_reward;
    out.max_length = std::max(out.max_length, e.length);
    if (e.end_event == env::StepEvent::safety_trip) ++out.safety_trips;
  }
  if (!episodes.empty()) {
    out.mean_length /= static_cast<double>(episodes.size());
    out.mean_reward /= static_cast<double>(episodes.size());
    out.median_length = median(lengths);
  }
  out.episodes = std::move(episodes);
  return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<fs::path> list_checkpoints(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("ckpt_", 0) == 0 && entry.path().extension() == ".aptc") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::unique_ptr<env::Plant> make_simulated_plant(const RunConfig& config) {
  return make_simulated_plant(config, config.plant);
}

std::unique_ptr<env::Plant> make_simulated_plant(const RunConfig& config, PlantKind kind) {
  switch (kind) {
    case PlantKind::log:
      return std::make_unique<env::LogPlant>(config.log.t_init, config.log.dx, config.cooling.dt);
    case PlantKind::cooling:
      return std::make_unique<env::CoolingPlant>(config.cooling);
    case PlantKind::sysfs:
      break;
  }
  throw UsageError("the sysfs plant needs a live session");
}

sac::Transition make_transition(const env::Observation& observation, const env::RawAction& action,
                                const env::StepResult& result) {
  return {observation.as_array(), action, result.reward, result.observation.as_array(), result.terminated};
}

TrainResult train(const RunConfig& config, TrainOptions options) {
  config.validate();
  sac::SacConfig sac_cfg = config.sac;
  sac_cfg.seed = config.seed;

  sac::AgentNetworks nets;
  std::uint64_t total_steps = 0;
  std::uint64_t episodes_done = 0;
  if (options.resume) {
    const Checkpoint ckpt = load_checkpoint(*options.resume);
    nets = restore_agent(ckpt);
    total_steps = ckpt.total_steps;
    episodes_done = ckpt.episodes;
    spdlog::info("resumed from {}: {} steps, {} episodes", options.resume->string(), total_steps, episodes_done);
  } else {
    nets = sac::AgentNetworks::create(sac_cfg);
  }
  std::mt19937_64 rng(options.resume ? mix_seed(config.seed, total_steps, episodes_done) : config.seed);

  std::unique_ptr<env::Plant> plant = std::move(options.plant);
  if (!plant) plant = options.live != nullptr ? options.live->make_plant() : make_simulated_plant(config);
  env::Environment environment(config.env, std::move(plant));
  sac::ReplayBuffer buffer(sac_cfg.buffer_capacity);

  fs::create_directories(config.out_dir);
  const fs::path ckpt_dir = config.out_dir / "checkpoints";
  fs::create_directories(ckpt_dir);
  write_config_snapshot(config, config.out_dir / "config.json");
  TrainResult result;
  result.metrics_path = config.out_dir / "metrics.csv";
  MetricsWriter metrics(result.metrics_path, options.resume.has_value());

  std::ofstream eval_log;
  if (config.eval_every > 0) {
    eval_log.open(config.out_dir / "eval.csv", options.resume ? std::ios::app : std::ios::trunc);
    if (!options.resume) eval_log << "episode,mean_length,median_length,max_length,mean_reward\n";
  }

  const auto save = [&] {
    result.checkpoint_path = checkpoint_name(ckpt_dir, episodes_done);
    save_checkpoint(result.checkpoint_path, make_checkpoint(config, nets, total_steps, episodes_done));
    prune_checkpoints(ckpt_dir, config.keep_checkpoints);
  };

  std::uniform_real_distribution<double> explore(-1.0, 1.0);
  EpisodeContext ctx{environment, &metrics, 0, total_steps, options.live, std::chrono::steady_clock::now()};
  for (int k = 0; k < config.episodes; ++k) {
    ctx.episode = static_cast<std::int64_t>(episodes_done) + 1;
    EpisodeSummary s = run_episode(
        ctx,
        [&](const env::Observation& obs) -> env::RawAction {
          if (total_steps < sac_cfg.learning_starts) return {explore(rng), explore(rng)};
          return sac::sample_action(nets.actor, obs.as_array(), rng, sac_cfg).action;
        },
        [&](const env::Observation& obs, const env::RawAction& a, const env::StepResult& r) {
          buffer.push(make_transition(obs, a, r));
          sac::update(nets, buffer, sac_cfg, rng, total_steps);
        });
    ++episodes_done;
    s.alpha = nets.alpha();
    if (s.end_event == env::StepEvent::safety_trip) ++result.safety_trips;
    result.episodes.push_back(s);
    spdlog::debug("episode {} length {} reward {:.3f} end {}", s.episode, s.length, s.total_reward,
                  env::to_string(s.end_event));

    if (episodes_done % static_cast<std::uint64_t>(config.checkpoint_every) == 0) save();
    if (config.eval_every > 0 && episodes_done % static_cast<std::uint64_t>(config.eval_every) == 0 &&
        options.live == nullptr) {
      std::mt19937_64 eval_rng(mix_seed(config.seed, episodes_done, 0xE7A1));
      EvalOptions eo;
      eo.episodes = config.eval_episodes;
      const EvalSummary es = evaluate(config, agent_policy(nets, sac_cfg, true, eval_rng), std::move(eo));
      eval_log << episodes_done << ',' << es.mean_length << ',' << es.median_length << ',' << es.max_length << ','
               << es.mean_reward << '\n';
      eval_log.flush();
    }
    if (options.on_episode && !options.on_episode(s)) break;
  }
  save();
  metrics.flush();
  result.total_steps = total_steps;
  result.episodes_completed = episodes_done;
  return result;
}

Policy scripted_policy(ScriptedPolicy kind) {
  const double v = kind == ScriptedPolicy::all_high ? 1.0 : -1.0;
  return [v](const env::Observation&) { return env::RawAction{v, v}; };
}

Policy agent_policy(const sac::AgentNetworks& nets, const sac::SacConfig& config, bool deterministic,
                    std::mt19937_64& rng) {
  return [&nets, config, deterministic, &rng](const env::Observation& obs) {
    return sac::sample_action(nets.actor, obs.as_array(), rng, config, deterministic).action;
  };
}

EvalSummary evaluate(const RunConfig& config, const Policy& policy, EvalOptions options) {
  config.validate();
  std::unique_ptr<env::Plant> plant = std::move(options.plant);
  if (!plant) plant = options.live != nullptr ? options.live->make_plant() : make_simulated_plant(config);
  env::Environment environment(config.env, std::move(plant));
  std::optional<MetricsWriter> metrics;
  if (options.metrics_path) {
    if (options.metrics_path->has_parent_path()) fs::create_directories(options.metrics_path->parent_path());
    metrics.emplace(*options.metrics_path, false);
  }
  std::uint64_t steps = 0;
  EpisodeContext ctx{environment, metrics ? &*metrics : nullptr, 0, steps, options.live,
                     std::chrono::steady_clock::now()};
  std::vector<EpisodeSummary> episodes;
  for (int k = 0; k < options.episodes; ++k) {
    ctx.episode = k + 1;
    episodes.push_back(run_episode(ctx, policy, [](auto&&...) {}));
  }
  return summarize(std::move(episodes));
}

EvalSummary evaluate_checkpoint(const RunConfig& config, const fs::path& checkpoint, bool deterministic,
                                EvalOptions options) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const sac::AgentNetworks nets = restore_agent(ckpt);
  std::mt19937_64 rng(config.seed);
  return evaluate(config, agent_policy(nets, config.sac, deterministic, rng), std::move(options));
}

}  // namespace aptc::harness
