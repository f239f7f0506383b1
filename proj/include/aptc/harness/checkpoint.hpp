#pragma once

// Binary agent snapshot:
//   "APTC1\n" | u32 LE version | u64 LE metadata length | metadata JSON | payload
// The payload is a sequence of float32 LE arrays located by the metadata
// directory (name, shape, byte offset). Parameters are stored at 32-bit
// precision, so a loaded agent reproduces its saved file byte for byte.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aptc/harness/config.hpp"
#include "aptc/sac/agent.hpp"

namespace aptc::harness {

inline constexpr char kCheckpointMagic[] = "APTC1\n";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> data;
};

struct Checkpoint {
  nlohmann::json config;  // to_json(RunConfig) snapshot
  std::uint64_t total_steps = 0;
  std::uint64_t episodes = 0;
  std::map<std::string, std::uint64_t> optimizer_steps;
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
};

Checkpoint make_checkpoint(const RunConfig& config, const sac::AgentNetworks& nets, std::uint64_t total_steps,
                           std::uint64_t episodes);

/// Rebuilds the agent described by the checkpoint's own config. Throws
/// LoadError when arrays are missing or their shapes disagree with it.
sac::AgentNetworks restore_agent(const Checkpoint& checkpoint);

/// Throws EnvironmentError on I/O failure.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws LoadError for unreadable, truncated or inconsistent files.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes);

}  // namespace aptc::harness
