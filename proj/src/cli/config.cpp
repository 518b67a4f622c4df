#include "goalnet/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace goalnet::cli {

namespace {

enum class Type { UInt, Double, Bool, PerByte, Threshold, Text };

struct Key {
    std::string name;
    Type type;
    std::string def; // empty: derived from another key
    std::vector<std::string> choices = {};
};

const std::vector<Key>& table() {
    static const std::vector<Key> keys = {
        {"seed", Type::UInt, "0"},
        {"placement", Type::Text, "packed", {"packed", "random"}},
        {"placement.system_size", Type::UInt, "0"},
        {"loggops.preset", Type::Text, "ai", {"ai", "hpc"}},
        {"loggops.L", Type::UInt, ""},
        {"loggops.o", Type::UInt, ""},
        {"loggops.g", Type::UInt, ""},
        {"loggops.G", Type::PerByte, ""},
        {"loggops.O", Type::PerByte, ""},
        {"loggops.S", Type::Threshold, ""},
        {"fattree.hosts_per_tor", Type::UInt, "8"},
        {"fattree.tors", Type::UInt, "2"},
        {"fattree.uplinks_per_tor", Type::UInt, "8"},
        {"fattree.cores", Type::UInt, ""},
        {"fattree.link_gbps", Type::Double, "200"},
        {"fattree.latency_ns", Type::UInt, "500"},
        {"net.mtu", Type::UInt, "4096"},
        {"net.header_bytes", Type::UInt, "64"},
        {"net.ack_bytes", Type::UInt, "64"},
        {"net.queue_bytes", Type::UInt, "1048576"},
        {"net.ecn_kmin", Type::Double, "0.2"},
        {"net.ecn_kmax", Type::Double, "0.8"},
        {"net.cc", Type::Text, "mprdma", {"mprdma", "swift"}},
        {"net.routing", Type::Text, "ecmp", {"ecmp", "spray"}},
        {"net.rto_ns", Type::UInt, "200000"},
        {"net.sample_ns", Type::UInt, "10000"},
        {"net.seed", Type::UInt, ""},
        {"net.swift_beta", Type::Double, "0.8"},
        {"net.swift_beta_max", Type::Double, "0.5"},
        {"net.swift_hop_delay_ns", Type::UInt, "1000"},
        {"storage.hosts", Type::UInt, "4"},
        {"storage.ccs", Type::UInt, "1"},
        {"storage.bss", Type::UInt, "8"},
        {"storage.mds", Type::UInt, "1"},
        {"storage.gs", Type::UInt, "1"},
        {"storage.slb", Type::UInt, "1"},
        {"storage.replication", Type::UInt, "3"},
        {"storage.control_bytes", Type::UInt, "256"},
        {"storage.service_calc_ns", Type::UInt, "2000"},
        {"storage.stripe_blocks", Type::UInt, "2048"},
        {"storage.closed_loop", Type::Bool, "false"},
        {"storage.via_slb", Type::Bool, "false"},
        {"storage.via_gs", Type::Bool, "false"},
        {"nccl.nchannels", Type::UInt, "1"},
        {"nccl.proto", Type::Text, "simple", {"simple", "ll"}},
        {"nccl.slot_bytes_simple", Type::UInt, "524288"},
        {"nccl.slot_bytes_ll", Type::UInt, "32768"},
        {"nccl.ll_wire_factor", Type::Double, "2"},
        {"nccl.ring_order", Type::Text, ""},
        {"nccl.gpus_per_node", Type::UInt, "4"},
        {"nccl.intra_gbps", Type::Double, "150"},
        {"nccl.intra_latency_ns", Type::UInt, "0"},
        {"output.json", Type::Text, ""},
        {"output.csv", Type::Text, ""},
    };
    return keys;
}

const Key* find_key(const std::string& name) {
    for (const auto& k : table())
        if (k.name == name)
            return &k;
    return nullptr;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

std::uint64_t as_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty())
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

double as_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(d))
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    return d;
}

void check_value(const Key& k, const std::string& v) {
    switch (k.type) {
    case Type::UInt:
        as_uint(k.name, v);
        break;
    case Type::Double:
        as_double(k.name, v);
        break;
    case Type::Bool:
        if (v != "true" && v != "false")
            throw ConfigError(k.name + ": expected true or false, got '" + v + "'");
        break;
    case Type::PerByte:
        try {
            loggops::PerByte::parse(v);
        } catch (const Error& e) {
            throw ConfigError(k.name + ": " + e.what());
        }
        break;
    case Type::Threshold:
        if (v != "inf")
            as_uint(k.name, v);
        break;
    case Type::Text:
        if (!k.choices.empty() && std::find(k.choices.begin(), k.choices.end(), v) == k.choices.end()) {
            std::string list;
            for (const auto& c : k.choices)
                list += (list.empty() ? "" : ", ") + c;
            throw ConfigError(k.name + ": expected one of " + list + ", got '" + v + "'");
        }
        break;
    }
}

template <typename T>
T narrow(const std::string& key, std::uint64_t v) {
    if (v > std::numeric_limits<T>::max())
        throw ConfigError(key + ": value " + std::to_string(v) + " is too large");
    return static_cast<T>(v);
}

} // namespace

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

const std::vector<std::string>& ExperimentConfig::known_keys() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& k : table())
            out.push_back(k.name);
        return out;
    }();
    return names;
}

ExperimentConfig ExperimentConfig::parse(std::string_view text) {
    ExperimentConfig c;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        try {
            c.set(key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open config file " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    const Key* k = find_key(key);
    if (!k)
        throw ConfigError("unknown config key '" + key + "'");
    check_value(*k, value);
    _values[key] = value;
}

void ExperimentConfig::apply_env() {
    if (const char* s = std::getenv("GOALNET_SEED"); s && *s) {
        try {
            set("seed", s);
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("GOALNET_SEED: ") + e.what());
        }
    }
}

std::string ExperimentConfig::get(const std::string& key) const {
    if (auto it = _values.find(key); it != _values.end())
        return it->second;
    const Key* k = find_key(key);
    if (!k)
        throw ConfigError("unknown config key '" + key + "'");
    if (!k->def.empty() || k->type == Type::Text)
        return k->def;
    // derived defaults
    if (key == "net.seed")
        return get("seed");
    if (key == "fattree.cores")
        return get("fattree.uplinks_per_tor");
    const loggops::Params p =
        get("loggops.preset") == "hpc" ? loggops::Params::hpc_cluster() : loggops::Params::ai_cluster();
    if (key == "loggops.L")
        return std::to_string(p.L);
    if (key == "loggops.o")
        return std::to_string(p.o);
    if (key == "loggops.g")
        return std::to_string(p.g);
    if (key == "loggops.G")
        return p.G.to_string();
    if (key == "loggops.O")
        return p.O.to_string();
    if (key == "loggops.S")
        return p.S == kUnlimitedBytes ? "inf" : std::to_string(p.S);
    throw ConfigError("no default for '" + key + "'");
}

std::map<std::string, std::string> ExperimentConfig::resolved() const {
    std::map<std::string, std::string> out;
    for (const auto& k : table())
        out[k.name] = get(k.name);
    return out;
}

std::string ExperimentConfig::canonical() const {
    std::string out;
    for (const auto& [k, v] : resolved())
        out += k + "=" + v + "\n";
    return out;
}

std::string ExperimentConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical())));
    return buf;
}

std::uint64_t ExperimentConfig::seed() const { return as_uint("seed", get("seed")); }

loggops::Params ExperimentConfig::loggops() const {
    loggops::Params p;
    p.L = narrow<TimeNs>("loggops.L", as_uint("loggops.L", get("loggops.L")));
    p.o = narrow<TimeNs>("loggops.o", as_uint("loggops.o", get("loggops.o")));
    p.g = narrow<TimeNs>("loggops.g", as_uint("loggops.g", get("loggops.g")));
    p.G = loggops::PerByte::parse(get("loggops.G"));
    p.O = loggops::PerByte::parse(get("loggops.O"));
    const std::string S = get("loggops.S");
    p.S = S == "inf" ? kUnlimitedBytes : as_uint("loggops.S", S);
    return p;
}

packet::PacketNetConfig ExperimentConfig::packet() const {
    auto u = [&](const char* k) { return as_uint(k, get(k)); };
    auto d = [&](const char* k) { return as_double(k, get(k)); };
    packet::PacketNetConfig c;
    c.fattree.hosts_per_tor = narrow<std::uint32_t>("fattree.hosts_per_tor", u("fattree.hosts_per_tor"));
    c.fattree.num_tors = narrow<std::uint32_t>("fattree.tors", u("fattree.tors"));
    c.fattree.uplinks_per_tor = narrow<std::uint32_t>("fattree.uplinks_per_tor", u("fattree.uplinks_per_tor"));
    c.fattree.num_cores = narrow<std::uint32_t>("fattree.cores", u("fattree.cores"));
    c.fattree.link_rate_gbps = d("fattree.link_gbps");
    c.fattree.link_latency_ns = narrow<TimeNs>("fattree.latency_ns", u("fattree.latency_ns"));
    c.mtu_bytes = u("net.mtu");
    c.header_bytes = u("net.header_bytes");
    c.ack_bytes = u("net.ack_bytes");
    c.queue_capacity_bytes = u("net.queue_bytes");
    c.ecn_kmin_frac = d("net.ecn_kmin");
    c.ecn_kmax_frac = d("net.ecn_kmax");
    c.cc = get("net.cc") == "swift" ? packet::CongestionControl::Swift : packet::CongestionControl::Mprdma;
    c.routing = get("net.routing") == "spray" ? packet::Routing::PacketSpray : packet::Routing::EcmpPerFlow;
    c.rto_ns = narrow<TimeNs>("net.rto_ns", u("net.rto_ns"));
    c.sample_ns = narrow<TimeNs>("net.sample_ns", u("net.sample_ns"));
    c.seed = u("net.seed");
    c.swift.beta = d("net.swift_beta");
    c.swift.beta_max = d("net.swift_beta_max");
    c.swift.hop_delay_ns = narrow<TimeNs>("net.swift_hop_delay_ns", u("net.swift_hop_delay_ns"));
    try {
        c.check();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

storage::StorageCluster ExperimentConfig::storage() const {
    auto u32 = [&](const char* k) { return narrow<std::uint32_t>(k, as_uint(k, get(k))); };
    storage::StorageCluster c;
    c.hosts = u32("storage.hosts");
    c.ccs = u32("storage.ccs");
    c.bss = u32("storage.bss");
    c.mds = u32("storage.mds");
    c.gs = u32("storage.gs");
    c.slb = u32("storage.slb");
    c.replication = u32("storage.replication");
    c.control_bytes = as_uint("storage.control_bytes", get("storage.control_bytes"));
    c.service_ns = narrow<TimeNs>("storage.service_calc_ns", as_uint("storage.service_calc_ns", get("storage.service_calc_ns")));
    c.stripe_blocks = as_uint("storage.stripe_blocks", get("storage.stripe_blocks"));
    c.closed_loop = get("storage.closed_loop") == "true";
    c.via_slb = get("storage.via_slb") == "true";
    c.via_gs = get("storage.via_gs") == "true";
    c.seed = seed();
    try {
        c.check();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

nccl::NcclConfig ExperimentConfig::nccl() const {
    nccl::NcclConfig c;
    c.nchannels = narrow<std::uint32_t>("nccl.nchannels", as_uint("nccl.nchannels", get("nccl.nchannels")));
    c.proto = get("nccl.proto") == "ll" ? nccl::Proto::LL : nccl::Proto::Simple;
    c.slot_bytes_simple = as_uint("nccl.slot_bytes_simple", get("nccl.slot_bytes_simple"));
    c.slot_bytes_ll = as_uint("nccl.slot_bytes_ll", get("nccl.slot_bytes_ll"));
    c.ll_wire_factor = as_double("nccl.ll_wire_factor", get("nccl.ll_wire_factor"));
    const std::string order = get("nccl.ring_order");
    std::size_t start = 0;
    while (start < order.size()) {
        auto comma = order.find(',', start);
        if (comma == std::string::npos)
            comma = order.size();
        const std::string item(trim(std::string_view(order).substr(start, comma - start)));
        c.ring_order.push_back(narrow<nccl::GpuId>("nccl.ring_order", as_uint("nccl.ring_order", item)));
        start = comma + 1;
    }
    try {
        c.check();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

nccl::GpuNodeMap ExperimentConfig::gpu_map(const std::vector<nccl::GpuId>& gpus) const {
    const auto per = as_uint("nccl.gpus_per_node", get("nccl.gpus_per_node"));
    if (per == 0)
        throw ConfigError("nccl.gpus_per_node must be positive");
    nccl::GpuNodeMap m = nccl::GpuNodeMap::blocked(gpus, per);
    m.intra_bandwidth_GBps = as_double("nccl.intra_gbps", get("nccl.intra_gbps"));
    m.intra_latency_ns = narrow<TimeNs>("nccl.intra_latency_ns", as_uint("nccl.intra_latency_ns", get("nccl.intra_latency_ns")));
    if (!(m.intra_bandwidth_GBps > 0))
        throw ConfigError("nccl.intra_gbps must be positive");
    return m;
}

sim::PlacementStrategy ExperimentConfig::placement() const {
    return get("placement") == "random" ? sim::PlacementStrategy::Random : sim::PlacementStrategy::Packed;
}

std::string ExperimentConfig::output(const std::string& which) const { return get("output." + which); }

} // namespace goalnet::cli
