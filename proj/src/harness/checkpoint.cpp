#include "aptc/harness/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "aptc/errors.hpp"

using nlohmann::json;

namespace aptc::harness {

namespace {

constexpr std::size_t kMagicSize = sizeof(kCheckpointMagic) - 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

std::uint64_t get_le(const std::string& in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int b = 0; b < bytes; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + b])) << (8 * b);
  return v;
}

std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::vector<float> to_float(std::span<const double> values) {
  std::vector<float> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<float>(values[i]);
  return out;
}

void add_network(std::vector<NamedArray>& arrays, const std::string& name, const neuro::Mlp& net) {
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    const auto& l = net.layer(k);
    arrays.push_back({name + "." + std::to_string(k) + ".weight", {l.in, l.out}, to_float(net.weight(k))});
    arrays.push_back({name + "." + std::to_string(k) + ".bias", {l.out}, to_float(net.bias(k))});
  }
}

void add_moments(std::vector<NamedArray>& arrays, const std::string& name, const neuro::AdamState& s) {
  arrays.push_back({name + ".adam.m", {s.m.size()}, to_float(s.m)});
  arrays.push_back({name + ".adam.v", {s.v.size()}, to_float(s.v)});
}

const NamedArray& require(const Checkpoint& c, const std::string& name, const std::vector<std::size_t>& shape) {
  const NamedArray* a = c.find(name);
  if (a == nullptr) throw LoadError("checkpoint: missing array " + name);
  if (a->shape != shape) throw LoadError("checkpoint: array " + name + " has the wrong shape");
  return *a;
}

void restore_network(const Checkpoint& c, const std::string& name, neuro::Mlp& net) {
  std::span<double> p = net.mutable_parameters();
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    const auto& l = net.layer(k);
    const NamedArray& w = require(c, name + "." + std::to_string(k) + ".weight", {l.in, l.out});
    const NamedArray& b = require(c, name + "." + std::to_string(k) + ".bias", {l.out});
    for (std::size_t i = 0; i < w.data.size(); ++i) p[l.weight_offset + i] = w.data[i];
    for (std::size_t i = 0; i < b.data.size(); ++i) p[l.bias_offset + i] = b.data[i];
  }
}

void restore_moments(const Checkpoint& c, const std::string& name, neuro::AdamState& s) {
  const NamedArray& m = require(c, name + ".adam.m", {s.m.size()});
  const NamedArray& v = require(c, name + ".adam.v", {s.v.size()});
  s.m.assign(m.data.begin(), m.data.end());
  s.v.assign(v.data.begin(), v.data.end());
  const auto it = c.optimizer_steps.find(name);
  if (it == c.optimizer_steps.end()) throw LoadError("checkpoint: missing optimizer step for " + name);
  s.step = it->second;
}

}  // namespace

const NamedArray* Checkpoint::find(const std::string& name) const {
  for (const NamedArray& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

Checkpoint make_checkpoint(const RunConfig& config, const sac::AgentNetworks& nets, std::uint64_t total_steps,
                           std::uint64_t episodes) {
  Checkpoint c;
  c.config = to_json(config);
  c.total_steps = total_steps;
  c.episodes = episodes;
  add_network(c.arrays, "actor", nets.actor);
  add_network(c.arrays, "critic1", nets.critic1);
  add_network(c.arrays, "critic2", nets.critic2);
  add_network(c.arrays, "target1", nets.target1);
  add_network(c.arrays, "target2", nets.target2);
  add_moments(c.arrays, "actor", nets.actor_opt);
  add_moments(c.arrays, "critic1", nets.critic1_opt);
  add_moments(c.arrays, "critic2", nets.critic2_opt);
  add_moments(c.arrays, "alpha", nets.alpha_opt);
  c.arrays.push_back({"log_alpha", {1}, {static_cast<float>(nets.log_alpha)}});
  c.optimizer_steps = {{"actor", nets.actor_opt.step},
                       {"critic1", nets.critic1_opt.step},
                       {"critic2", nets.critic2_opt.step},
                       {"alpha", nets.alpha_opt.step}};
  return c;
}

sac::AgentNetworks restore_agent(const Checkpoint& c) {
  RunConfig config;
  try {
    config = parse_config_text(c.config.dump());
  } catch (const ConfigError& e) {
    throw LoadError(std::string("checkpoint: embedded config invalid: ") + e.what());
  }
  sac::AgentNetworks nets = sac::AgentNetworks::create(config.sac);
  restore_network(c, "actor", nets.actor);
  restore_network(c, "critic1", nets.critic1);
  restore_network(c, "critic2", nets.critic2);
  restore_network(c, "target1", nets.target1);
  restore_network(c, "target2", nets.target2);
  restore_moments(c, "actor", nets.actor_opt);
  restore_moments(c, "critic1", nets.critic1_opt);
  restore_moments(c, "critic2", nets.critic2_opt);
  restore_moments(c, "alpha", nets.alpha_opt);
  nets.log_alpha = require(c, "log_alpha", {1}).data[0];
  return nets;
}

std::string serialize_checkpoint(const Checkpoint& c) {
  std::string payload;
  json directory = json::array();
  for (const NamedArray& a : c.arrays) {
    if (element_count(a.shape) != a.data.size()) throw InputError("checkpoint: array " + a.name + " shape mismatch");
    directory.push_back({{"name", a.name}, {"shape", a.shape}, {"offset", payload.size()}});
    for (float f : a.data) put_u32(payload, std::bit_cast<std::uint32_t>(f));
  }
  json meta;
  meta["config"] = c.config;
  meta["total_steps"] = c.total_steps;
  meta["episodes"] = c.episodes;
  meta["optimizer_steps"] = c.optimizer_steps;
  meta["arrays"] = directory;
  meta["payload_bytes"] = payload.size();
  const std::string text = meta.dump();

  std::string out(kCheckpointMagic, kMagicSize);
  put_u32(out, kCheckpointVersion);
  put_u64(out, text.size());
  out += text;
  out += payload;
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  const std::size_t header = kMagicSize + 4 + 8;
  if (bytes.size() < header || bytes.compare(0, kMagicSize, kCheckpointMagic) != 0) {
    throw LoadError("checkpoint: bad magic");
  }
  const auto version = static_cast<std::uint32_t>(get_le(bytes, kMagicSize, 4));
  if (version != kCheckpointVersion) throw LoadError("checkpoint: unsupported version " + std::to_string(version));
  const std::uint64_t meta_len = get_le(bytes, kMagicSize + 4, 8);
  if (meta_len > bytes.size() - header) throw LoadError("checkpoint: truncated metadata");

  json meta;
  Checkpoint c;
  std::vector<std::tuple<std::string, std::vector<std::size_t>, std::size_t>> entries;
  std::size_t payload_bytes = 0;
  try {
    meta = json::parse(bytes.substr(header, meta_len));
    c.config = meta.at("config");
    c.total_steps = meta.at("total_steps").get<std::uint64_t>();
    c.episodes = meta.at("episodes").get<std::uint64_t>();
    c.optimizer_steps = meta.at("optimizer_steps").get<std::map<std::string, std::uint64_t>>();
    payload_bytes = meta.at("payload_bytes").get<std::size_t>();
    for (const json& e : meta.at("arrays")) {
      entries.emplace_back(e.at("name").get<std::string>(), e.at("shape").get<std::vector<std::size_t>>(),
                           e.at("offset").get<std::size_t>());
    }
  } catch (const json::exception& e) {
    throw LoadError(std::string("checkpoint: bad metadata: ") + e.what());
  }

  const std::size_t payload_start = header + meta_len;
  if (bytes.size() - payload_start != payload_bytes) throw LoadError("checkpoint: payload size mismatch");
  std::size_t expected_offset = 0;
  for (const auto& [name, shape, offset] : entries) {
    const std::size_t n = element_count(shape);
    // Arrays are packed in directory order, so this also rules out overlap.
    if (offset != expected_offset || n > (payload_bytes - offset) / 4) {
      throw LoadError("checkpoint: array " + name + " lies outside the payload or overlaps another");
    }
    NamedArray a{name, shape, std::vector<float>(n)};
    for (std::size_t i = 0; i < n; ++i) {
      a.data[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, payload_start + offset + 4 * i, 4)));
    }
    expected_offset = offset + 4 * n;
    c.arrays.push_back(std::move(a));
  }
  if (expected_offset != payload_bytes) throw LoadError("checkpoint: payload has unreferenced bytes");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  const std::string bytes = serialize_checkpoint(c);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw EnvironmentError("cannot write checkpoint " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw EnvironmentError("cannot write checkpoint " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw EnvironmentError("cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace aptc::harness
