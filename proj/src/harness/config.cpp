#include "aptc/harness/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "aptc/errors.hpp"

using nlohmann::json;

namespace aptc::harness {

namespace {

const char* type_name(const json& j) { return j.type_name(); }

// Walks one JSON object, copying known keys into typed fields and remembering
// which keys were consumed so leftovers can be rejected.
class Reader {
 public:
  Reader(const json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) throw ConfigError(where() + ": expected an object, got " + type_name(object_));
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = object_.find(key);
    if (it == object_.end()) return;
    const std::string p = where(key);
    const json& v = *it;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(p, "boolean", v);
      out = v.get<bool>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(p, "number", v);
      out = v.get<double>();
      if (!std::isfinite(out)) throw ConfigError(p + ": must be finite");
    } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) fail(p, "non-negative integer", v);
      out = static_cast<T>(v.get<unsigned long long>());
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(p, "integer", v);
      out = static_cast<T>(v.get<long long>());
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(p, "string", v);
      out = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
      if (!v.is_string()) fail(p, "string", v);
      out = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
      if (!v.is_array()) fail(p, "array of strings", v);
      out.clear();
      for (const json& e : v) {
        if (!e.is_string()) fail(p + "[]", "string", e);
        out.push_back(e.get<std::string>());
      }
    } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
      if (!v.is_array()) fail(p, "array of integers", v);
      out.clear();
      for (const json& e : v) {
        if (!e.is_number_unsigned()) fail(p + "[]", "non-negative integer", e);
        out.push_back(e.get<std::size_t>());
      }
    } else {
      static_assert(sizeof(T) == 0, "unsupported config field type");
    }
  }

  /// Nested object, or nullptr when absent.
  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = object_.find(key);
    return it == object_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : object_.items()) {
      if (!seen_.count(key)) throw ConfigError(where(key) + ": unknown key");
    }
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  [[noreturn]] static void fail(const std::string& path, const char* expected, const json& got) {
    throw ConfigError(path + ": expected " + expected + ", got " + type_name(got));
  }

  const json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_env(const json& j, env::EnvConfig& c) {
  Reader r(j, "env");
  r.get("n_cpus", c.n_cpus);
  r.get("t_limit", c.t_limit);
  r.get("max_steps", c.max_steps);
  r.get("c_high", c.c_high);
  r.get("c_low", c.c_low);
  r.get("c_off", c.c_off);
  r.get("terminal_penalty", c.terminal_penalty);
  r.get("switch_penalty_lambda", c.switch_penalty_lambda);
  r.get("margin_scale", c.margin_scale);
  r.get("slope_scale", c.slope_scale);
  r.finish();
}

void read_sac(const json& j, sac::SacConfig& c) {
  Reader r(j, "sac");
  r.get("gamma", c.gamma);
  r.get("tau", c.tau);
  r.get("batch_size", c.batch_size);
  r.get("lr", c.lr);
  r.get("learning_starts", c.learning_starts);
  r.get("entropy_target", c.entropy_target);
  r.get("auto_entropy", c.auto_entropy);
  r.get("initial_alpha", c.initial_alpha);
  r.get("log_std_min", c.log_std_min);
  r.get("log_std_max", c.log_std_max);
  r.get("buffer_capacity", c.buffer_capacity);
  r.get("hidden", c.hidden);
  r.finish();
}

void read_cooling(const json& j, plant::CoolingParams& c) {
  Reader r(j, "cooling");
  r.get("t_ambient", c.t_ambient);
  r.get("alpha", c.alpha);
  r.get("beta", c.beta);
  r.get("dt", c.dt);
  r.finish();
}

void read_log(const json& j, LogPlantConfig& c) {
  Reader r(j, "log");
  r.get("t_init", c.t_init);
  r.get("dx", c.dx);
  r.finish();
}

void read_safety(const json& j, sysboard::SafetyConfig& c) {
  Reader r(j, "safety");
  r.get("hard_limit", c.hard_limit);
  r.get("hysteresis", c.hysteresis);
  r.get("poll_interval", c.poll_interval);
  r.get("load_command", c.load_command);
  r.finish();
}

void read_sysfs(const json& j, SysfsConfig& c) {
  Reader r(j, "sysfs");
  r.get("root", c.layout.root);
  r.get("cpu_online_template", c.layout.cpu_online_template);
  r.get("cpufreq_template", c.layout.cpufreq_template);
  r.get("sensors", c.layout.sensors);
  r.get("reset_below", c.reset_below);
  r.get("reset_timeout_seconds", c.reset_timeout_seconds);
  r.finish();
}

// Domain validators throw with module-level messages; re-tag them as config errors.
template <typename F>
void as_config_error(F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

std::string to_string(PlantKind kind) {
  switch (kind) {
    case PlantKind::log: return "log";
    case PlantKind::cooling: return "cooling";
    case PlantKind::sysfs: return "sysfs";
  }
  return "?";
}

PlantKind plant_kind_from_string(const std::string& text) {
  if (text == "log") return PlantKind::log;
  if (text == "cooling") return PlantKind::cooling;
  if (text == "sysfs") return PlantKind::sysfs;
  throw ConfigError("plant: expected one of log, cooling, sysfs; got '" + text + "'");
}

void RunConfig::validate() const {
  as_config_error([&] { env.validate(); });
  as_config_error([&] { sac.validate(); });
  as_config_error([&] { cooling.validate(); });
  if (!(log.dx > 0.0)) throw ConfigError("log.dx must be > 0");
  if (episodes < 0) throw ConfigError("episodes must be >= 0");
  if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
  if (keep_checkpoints < 1) throw ConfigError("keep_checkpoints must be >= 1");
  if (!(step_interval_seconds > 0.0)) throw ConfigError("step_interval_seconds must be > 0");
  safety.validate(env.t_limit);
  if (safety.load_command.empty()) throw ConfigError("safety.load_command must not be empty");
  if (!(sysfs.reset_timeout_seconds > 0.0)) throw ConfigError("sysfs.reset_timeout_seconds must be > 0");
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return c;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Reader r(root, "");
  std::string plant = to_string(c.plant);
  r.get("plant", plant);
  c.plant = plant_kind_from_string(plant);
  r.get("seed", c.seed);
  r.get("episodes", c.episodes);
  r.get("eval_every", c.eval_every);
  r.get("eval_episodes", c.eval_episodes);
  r.get("checkpoint_every", c.checkpoint_every);
  r.get("keep_checkpoints", c.keep_checkpoints);
  r.get("out_dir", c.out_dir);
  r.get("step_interval_seconds", c.step_interval_seconds);
  if (const json* j = r.child("env")) read_env(*j, c.env);
  if (const json* j = r.child("sac")) read_sac(*j, c.sac);
  if (const json* j = r.child("cooling")) read_cooling(*j, c.cooling);
  if (const json* j = r.child("log")) read_log(*j, c.log);
  if (const json* j = r.child("safety")) read_safety(*j, c.safety);
  if (const json* j = r.child("sysfs")) read_sysfs(*j, c.sysfs);
  r.finish();
  c.sac.seed = c.seed;
  c.validate();
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

json to_json(const RunConfig& c) {
  json j;
  j["plant"] = to_string(c.plant);
  j["seed"] = c.seed;
  j["episodes"] = c.episodes;
  j["eval_every"] = c.eval_every;
  j["eval_episodes"] = c.eval_episodes;
  j["checkpoint_every"] = c.checkpoint_every;
  j["keep_checkpoints"] = c.keep_checkpoints;
  j["out_dir"] = c.out_dir.string();
  j["step_interval_seconds"] = c.step_interval_seconds;
  j["env"] = {{"n_cpus", c.env.n_cpus},
              {"t_limit", c.env.t_limit},
              {"max_steps", c.env.max_steps},
              {"c_high", c.env.c_high},
              {"c_low", c.env.c_low},
              {"c_off", c.env.c_off},
              {"terminal_penalty", c.env.terminal_penalty},
              {"switch_penalty_lambda", c.env.switch_penalty_lambda},
              {"margin_scale", c.env.margin_scale},
              {"slope_scale", c.env.slope_scale}};
  j["sac"] = {{"gamma", c.sac.gamma},
              {"tau", c.sac.tau},
              {"batch_size", c.sac.batch_size},
              {"lr", c.sac.lr},
              {"learning_starts", c.sac.learning_starts},
              {"entropy_target", c.sac.entropy_target},
              {"auto_entropy", c.sac.auto_entropy},
              {"initial_alpha", c.sac.initial_alpha},
              {"log_std_min", c.sac.log_std_min},
              {"log_std_max", c.sac.log_std_max},
              {"buffer_capacity", c.sac.buffer_capacity},
              {"hidden", c.sac.hidden}};
  j["cooling"] = {{"t_ambient", c.cooling.t_ambient},
                  {"alpha", c.cooling.alpha},
                  {"beta", c.cooling.beta},
                  {"dt", c.cooling.dt}};
  j["log"] = {{"t_init", c.log.t_init}, {"dx", c.log.dx}};
  j["safety"] = {{"hard_limit", c.safety.hard_limit},
                 {"hysteresis", c.safety.hysteresis},
                 {"poll_interval", c.safety.poll_interval},
                 {"load_command", c.safety.load_command}};
  j["sysfs"] = {{"root", c.sysfs.layout.root.string()},
                {"cpu_online_template", c.sysfs.layout.cpu_online_template},
                {"cpufreq_template", c.sysfs.layout.cpufreq_template},
                {"sensors", c.sysfs.layout.sensors},
                {"reset_below", c.sysfs.reset_below},
                {"reset_timeout_seconds", c.sysfs.reset_timeout_seconds}};
  return j;
}

}  // namespace aptc::harness
