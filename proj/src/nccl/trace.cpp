#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "goalnet/nccl/nccl.hpp"
#include "json.hpp"

namespace goalnet::nccl {

using nlohmann::json;

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// numeric ids sort numerically, everything else after them lexicographically
bool stream_less(const std::string& a, const std::string& b) {
    auto numeric = [](const std::string& s) {
        return !s.empty() && s.size() < 19 && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
    };
    const bool na = numeric(a), nb = numeric(b);
    if (na != nb)
        return na;
    if (na)
        return std::stoll(a) != std::stoll(b) ? std::stoll(a) < std::stoll(b) : a < b;
    return a < b;
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end())
        throw ParseError(where + ": missing field '" + key + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ParseError(where + ": field '" + key + "' has the wrong type");
    }
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw Error("io", "cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

std::string_view to_string(NcclOp op) {
    switch (op) {
    case NcclOp::Broadcast: return "broadcast";
    case NcclOp::Allreduce: return "allreduce";
    case NcclOp::Allgather: return "allgather";
    case NcclOp::ReduceScatter: return "reduce_scatter";
    }
    return "?";
}

std::string_view to_string(Proto p) { return p == Proto::Simple ? "Simple" : "LL"; }

NcclOp parse_nccl_op(std::string_view s) {
    const std::string n = lower(s);
    for (NcclOp op : {NcclOp::Broadcast, NcclOp::Allreduce, NcclOp::Allgather, NcclOp::ReduceScatter})
        if (n == to_string(op))
            return op;
    if (n == "reducescatter")
        return NcclOp::ReduceScatter;
    throw InvalidArgument("unsupported NCCL collective '" + std::string(s) + "'");
}

Proto parse_proto(std::string_view s) {
    const std::string n = lower(s);
    if (n == "simple")
        return Proto::Simple;
    if (n == "ll")
        return Proto::LL;
    throw InvalidArgument("unknown NCCL protocol '" + std::string(s) + "'");
}

GpuTrace parse_gpu_trace(const std::vector<std::string>& per_gpu_json, std::string_view communicators_json) {
    GpuTrace t;
    json comms;
    try {
        comms = json::parse(communicators_json);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("communicators: ") + e.what());
    }
    if (!comms.is_object())
        throw ParseError("communicators: expected an object of comm id -> GPU list");
    for (const auto& [id, members] : comms.items()) {
        std::vector<GpuId> list;
        try {
            list = members.get<std::vector<GpuId>>();
        } catch (const json::exception&) {
            throw ParseError("communicator '" + id + "': expected a list of GPU ids");
        }
        std::set<GpuId> uniq(list.begin(), list.end());
        if (uniq.size() != list.size())
            throw ParseError("communicator '" + id + "' lists a GPU twice");
        t.communicators[id] = std::move(list);
    }
    for (std::size_t f = 0; f < per_gpu_json.size(); ++f) {
        const std::string where = "gpu trace #" + std::to_string(f);
        json doc;
        try {
            doc = json::parse(per_gpu_json[f]);
        } catch (const json::parse_error& e) {
            throw ParseError(where + ": " + e.what());
        }
        const auto gpu = field<GpuId>(doc, "gpu", where);
        if (t.gpus.count(gpu))
            throw ParseError(where + ": GPU " + std::to_string(gpu) + " appears in two trace files");
        auto& streams = t.gpus[gpu];
        const auto& js = doc.find("streams");
        if (js == doc.end() || !js->is_object())
            throw ParseError(where + ": missing 'streams' object");
        for (const auto& [sid, events] : js->items()) {
            if (!events.is_array())
                throw ParseError(where + ": stream " + sid + " is not an event array");
            GpuStream st;
            st.id = sid;
            for (std::size_t k = 0; k < events.size(); ++k) {
                const auto& ev = events[k];
                const std::string ew = "gpu " + std::to_string(gpu) + " stream " + sid + " event " + std::to_string(k);
                GpuKernelEvent e;
                e.gpu = gpu;
                e.stream = sid;
                const auto kind = lower(field<std::string>(ev, "kind", ew));
                e.ts = field<TimeNs>(ev, "ts", ew);
                e.te = field<TimeNs>(ev, "te", ew);
                if (e.ts < 0 || e.te < e.ts)
                    throw ParseError(ew + ": end time precedes start time");
                if (kind == "compute") {
                    e.compute = true;
                } else if (kind == "collective") {
                    try {
                        e.op = parse_nccl_op(field<std::string>(ev, "op", ew));
                    } catch (const InvalidArgument& ex) {
                        throw ParseError(ew + ": " + ex.what());
                    }
                    e.bytes = field<Bytes>(ev, "bytes", ew);
                    e.comm = field<std::string>(ev, "comm", ew);
                    auto c = t.communicators.find(e.comm);
                    if (c == t.communicators.end())
                        throw ParseError(ew + ": unknown communicator '" + e.comm + "'");
                    if (std::find(c->second.begin(), c->second.end(), gpu) == c->second.end())
                        throw ParseError(ew + ": GPU " + std::to_string(gpu) + " is not a member of communicator '" +
                                         e.comm + "'");
                    if (e.op == NcclOp::Broadcast) {
                        e.root = field<GpuId>(ev, "root", ew);
                        if (std::find(c->second.begin(), c->second.end(), e.root) == c->second.end())
                            throw ParseError(ew + ": broadcast root " + std::to_string(e.root) +
                                             " is not in communicator '" + e.comm + "'");
                    } else if (ev.contains("root") && !ev["root"].is_null()) {
                        e.root = field<GpuId>(ev, "root", ew);
                    }
                } else {
                    throw ParseError(ew + ": unknown kind '" + kind + "'");
                }
                st.events.push_back(std::move(e));
            }
            std::stable_sort(st.events.begin(), st.events.end(),
                             [](const GpuKernelEvent& a, const GpuKernelEvent& b) { return a.ts < b.ts; });
            for (std::size_t k = 1; k < st.events.size(); ++k)
                if (st.events[k].ts < st.events[k - 1].te)
                    throw ParseError("gpu " + std::to_string(gpu) + " stream " + sid + ": events [" +
                                     std::to_string(st.events[k - 1].ts) + "," + std::to_string(st.events[k - 1].te) +
                                     "] and [" + std::to_string(st.events[k].ts) + "," +
                                     std::to_string(st.events[k].te) + "] overlap");
            streams.push_back(std::move(st));
        }
        std::sort(streams.begin(), streams.end(),
                  [](const GpuStream& a, const GpuStream& b) { return stream_less(a.id, b.id); });
    }
    return t;
}

GpuTrace parse_gpu_trace_files(const std::vector<std::filesystem::path>& gpu_files,
                               const std::filesystem::path& communicators_file) {
    std::vector<std::string> docs;
    for (const auto& f : gpu_files)
        docs.push_back(read_file(f));
    return parse_gpu_trace(docs, read_file(communicators_file));
}

EmittedTrace emit_gpu_trace(const GpuTrace& t) {
    EmittedTrace out;
    json comms = json::object();
    for (const auto& [id, members] : t.communicators)
        comms[id] = members;
    out.communicators = comms.dump(2) + "\n";
    for (const auto& [gpu, streams] : t.gpus) {
        json doc;
        doc["gpu"] = gpu;
        doc["streams"] = json::object();
        for (const auto& st : streams) {
            json arr = json::array();
            for (const auto& e : st.events) {
                json ev;
                ev["kind"] = e.compute ? "compute" : "collective";
                if (!e.compute) {
                    ev["op"] = std::string(to_string(e.op));
                    ev["bytes"] = e.bytes;
                    ev["comm"] = e.comm;
                    ev["root"] = e.root;
                }
                ev["ts"] = e.ts;
                ev["te"] = e.te;
                arr.push_back(std::move(ev));
            }
            doc["streams"][st.id] = std::move(arr);
        }
        out.per_gpu.push_back(doc.dump(2) + "\n");
    }
    return out;
}

} // namespace goalnet::nccl
