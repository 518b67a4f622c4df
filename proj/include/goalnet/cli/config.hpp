#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "goalnet/loggops/params.hpp"
#include "goalnet/nccl/nccl.hpp"
#include "goalnet/packet/backend.hpp"
#include "goalnet/sim/placement.hpp"
#include "goalnet/storage/storage.hpp"

namespace goalnet::cli {

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config", what) {}
};

// Flat `key = value` experiment configuration. Lines starting with '#' are
// comments. Unknown keys and malformed values are rejected when set, so a
// typo never silently falls back to a default.
class ExperimentConfig {
public:
    static ExperimentConfig parse(std::string_view text);
    static ExperimentConfig load(const std::filesystem::path& p);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return _values.count(key) != 0; }
    // Applies GOALNET_SEED when it is set.
    void apply_env();

    // Every known key with its effective value, sorted by key.
    std::map<std::string, std::string> resolved() const;
    std::string canonical() const;
    // FNV-1a 64 of canonical(), as 16 hex digits.
    std::string hash() const;

    std::uint64_t seed() const;
    loggops::Params loggops() const;
    packet::PacketNetConfig packet() const;
    storage::StorageCluster storage() const;
    nccl::NcclConfig nccl() const;
    nccl::GpuNodeMap gpu_map(const std::vector<nccl::GpuId>& gpus) const;
    sim::PlacementStrategy placement() const;
    std::string output(const std::string& which) const; // "json" or "csv"; empty when unset

    static const std::vector<std::string>& known_keys();

private:
    std::string get(const std::string& key) const;
    std::map<std::string, std::string> _values;
};

std::uint64_t fnv1a64(std::string_view data);

} // namespace goalnet::cli
