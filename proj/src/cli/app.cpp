#include "goalnet/cli/app.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "goalnet/cli/config.hpp"
#include "goalnet/cli/report.hpp"
#include "goalnet/goal/binary.hpp"
#include "goalnet/goal/text.hpp"
#include "goalnet/goal/validate.hpp"
#include "goalnet/loggops/backend.hpp"
#include "goalnet/nccl/nccl.hpp"
#include "goalnet/packet/backend.hpp"
#include "goalnet/schedgen/microbench.hpp"
#include "goalnet/schedgen/mpi_trace.hpp"
#include "goalnet/sim/engine.hpp"
#include "goalnet/sim/placement.hpp"
#include "goalnet/storage/storage.hpp"

#ifndef GOALNET_VERSION
#define GOALNET_VERSION "0.0.0"
#endif

namespace goalnet::cli {

namespace {

namespace fs = std::filesystem;

class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error("usage", what) {}
};

class ValidationFailed : public Error {
public:
    explicit ValidationFailed(const std::string& what) : Error("validation", what) {}
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw Error("io", "cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

goal::GoalSchedule load_schedule(const fs::path& p) {
    const std::string data = read_file(p);
    std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(data.data()), data.size());
    if (goal::looks_binary(bytes))
        return goal::decode_binary(bytes);
    return goal::parse_text(data);
}

// Options shared by every subcommand that resolves an experiment config.
struct ConfigArgs {
    std::string path;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets; // key=value overrides

    void add(CLI::App* app, bool with_seed = true) {
        app->add_option("--config", path, "experiment config file");
        app->add_option("--set", sets, "override a config key (key=value)");
        if (with_seed)
            app->add_option("--seed", seed, "seed (overrides config and GOALNET_SEED)");
    }

    ExperimentConfig resolve() const {
        ExperimentConfig c = path.empty() ? ExperimentConfig{} : ExperimentConfig::load(path);
        c.apply_env();
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw UsageError("--set expects key=value, got '" + kv + "'");
            c.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (seed)
            c.set("seed", std::to_string(*seed));
        return c;
    }
};

RunInfo info_for(const ExperimentConfig& c, const std::string& input = {}) {
    RunInfo info;
    info.version = GOALNET_VERSION;
    info.config_hash = c.hash();
    info.config = c.resolved();
    info.input = input;
    return info;
}

struct OutputArgs {
    std::string path;
    std::string format; // text | bin, empty = by extension
    std::string layout = "packed";

    void add(CLI::App* app) {
        app->add_option("-o,--output", path, "output GOAL file")->required();
        app->add_option("--format", format, "text or bin (default: by extension)")
            ->check(CLI::IsMember({"text", "bin"}));
        app->add_option("--binary-layout", layout, "packed or fixed")->check(CLI::IsMember({"packed", "fixed"}));
    }

    bool binary() const {
        if (!format.empty())
            return format == "bin";
        return fs::path(path).extension() == ".bin";
    }

    void write(const goal::GoalSchedule& s, const RunInfo& info, const std::string& what) const {
        if (binary()) {
            // the binary layout has no room for a header
            const auto bytes = goal::encode_binary(s, layout == "fixed" ? goal::BinaryLayout::Fixed
                                                                         : goal::BinaryLayout::Packed);
            write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
        } else {
            write_file_atomic(path, goal::emit_text(s, header_line(info) + "\n" + what));
        }
    }
};

std::string summary(const goal::GoalSchedule& s) {
    return std::to_string(s.num_ranks()) + " ranks, " + std::to_string(s.task_count()) + " tasks, " +
           std::to_string(s.dep_count()) + " deps";
}

void print_error(std::ostream& err, const std::string& kind, const std::string& message) {
    nlohmann::ordered_json j;
    j["error"] = kind;
    j["message"] = message;
    err << j.dump() << "\n";
}

} // namespace

std::string version() { return GOALNET_VERSION; }

int exit_code_for(const std::string& kind) {
    if (kind == "usage")
        return kExitUsage;
    if (kind == "validation")
        return kExitValidation;
    if (kind == "config")
        return kExitConfig;
    if (kind == "parse" || kind == "format")
        return kExitInput;
    if (kind == "deadlock")
        return kExitDeadlock;
    return kExitFailure;
}

void write_file_atomic(const fs::path& p, const std::string& data) {
    fs::path tmp = p;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f)
            throw Error("io", "cannot write " + tmp.string());
        f.write(data.data(), static_cast<std::streamsize>(data.size()));
        f.flush();
        if (!f) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error("io", "short write to " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, p, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error("io", "cannot rename into " + p.string());
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Schedule generation and network simulation", "goalnet"};
    app.set_version_flag("--version", std::string("goalnet ") + GOALNET_VERSION);
    app.require_subcommand(1);

    std::function<void()> action;

    // generate
    auto* gen = app.add_subcommand("generate", "build a GOAL schedule");
    gen->require_subcommand(1);

    struct {
        std::string pattern;
        std::size_t n = 0;
        Bytes bytes = 0;
        std::size_t rounds = 1;
        std::string op = "allreduce";
        std::string algo = "ring";
        Rank root = 0;
        double reduce_ns_per_byte = 0;
        ConfigArgs cfg;
        OutputArgs out;
    } mb;
    auto* gmb = gen->add_subcommand("microbenchmark", "synthetic traffic pattern");
    gmb->add_option("--pattern", mb.pattern, "incast, permutation, ring or collective")
        ->required()
        ->check(CLI::IsMember({"incast", "permutation", "ring", "collective"}));
    gmb->add_option("--n", mb.n, "number of ranks")->required()->check(CLI::PositiveNumber);
    gmb->add_option("--bytes", mb.bytes, "message size")->required();
    gmb->add_option("--rounds", mb.rounds, "ring rounds");
    gmb->add_option("--op", mb.op, "collective operation");
    gmb->add_option("--algo", mb.algo, "collective algorithm");
    gmb->add_option("--root", mb.root, "collective root");
    gmb->add_option("--reduce-ns-per-byte", mb.reduce_ns_per_byte, "reduction cost");
    mb.cfg.add(gmb);
    mb.out.add(gmb);
    gmb->callback([&] {
        action = [&] {
            const ExperimentConfig c = mb.cfg.resolve();
            goal::GoalSchedule s;
            std::string what = "microbenchmark " + mb.pattern + " n=" + std::to_string(mb.n) +
                               " bytes=" + std::to_string(mb.bytes);
            try {
                if (mb.pattern == "incast") {
                    s = schedgen::gen_incast(mb.n, mb.bytes);
                } else if (mb.pattern == "permutation") {
                    s = schedgen::gen_permutation(mb.n, mb.bytes, c.seed());
                    what += " seed=" + std::to_string(c.seed());
                } else if (mb.pattern == "ring") {
                    s = schedgen::gen_ring_exchange(mb.n, mb.bytes, mb.rounds);
                    what += " rounds=" + std::to_string(mb.rounds);
                } else {
                    schedgen::CollectiveOptions o;
                    o.reduce_ns_per_byte = mb.reduce_ns_per_byte;
                    s = schedgen::gen_collective(schedgen::parse_op(mb.op), mb.n, mb.bytes,
                                                 schedgen::parse_algo(mb.algo), mb.root, o);
                    what += " op=" + mb.op + " algo=" + mb.algo;
                }
            } catch (const InvalidArgument& e) {
                throw UsageError(e.what());
            }
            mb.out.write(s, info_for(c), what);
            out << summary(s) << "\n";
        };
    });

    struct {
        std::vector<std::string> files;
        std::string allreduce = "ring", bcast = "binomial_tree", reduce_scatter = "ring", allgather = "ring",
                    alltoall = "linear", barrier = "recursive_doubling";
        double reduce_ns_per_byte = 0;
        ConfigArgs cfg;
        OutputArgs out;
    } mt;
    auto* gmt = gen->add_subcommand("mpi-trace", "per-rank MPI CSV traces, one file per rank in rank order");
    gmt->add_option("traces", mt.files, "trace files")->required()->check(CLI::ExistingFile);
    gmt->add_option("--allreduce", mt.allreduce);
    gmt->add_option("--bcast", mt.bcast);
    gmt->add_option("--reduce-scatter", mt.reduce_scatter);
    gmt->add_option("--allgather", mt.allgather);
    gmt->add_option("--alltoall", mt.alltoall);
    gmt->add_option("--barrier", mt.barrier);
    gmt->add_option("--reduce-ns-per-byte", mt.reduce_ns_per_byte, "reduction cost");
    mt.cfg.add(gmt, false);
    mt.out.add(gmt);
    gmt->callback([&] {
        action = [&] {
            const ExperimentConfig c = mt.cfg.resolve();
            schedgen::AlgoSelection sel;
            try {
                sel.allreduce = schedgen::parse_algo(mt.allreduce);
                sel.bcast = schedgen::parse_algo(mt.bcast);
                sel.reduce_scatter = schedgen::parse_algo(mt.reduce_scatter);
                sel.allgather = schedgen::parse_algo(mt.allgather);
                sel.alltoall = schedgen::parse_algo(mt.alltoall);
                sel.barrier = schedgen::parse_algo(mt.barrier);
            } catch (const InvalidArgument& e) {
                throw UsageError(e.what());
            }
            sel.options.reduce_ns_per_byte = mt.reduce_ns_per_byte;
            std::vector<fs::path> files(mt.files.begin(), mt.files.end());
            const auto s = schedgen::trace_to_goal(schedgen::parse_mpi_trace_files(files), sel);
            mt.out.write(s, info_for(c), "mpi-trace ranks=" + std::to_string(files.size()));
            out << summary(s) << "\n";
        };
    });

    struct {
        std::vector<std::string> files;
        std::string comms;
        ConfigArgs cfg;
        OutputArgs out;
    } gt;
    auto* ggt = gen->add_subcommand("gpu-trace", "per-GPU kernel traces plus a communicator map");
    ggt->add_option("traces", gt.files, "per-GPU JSON traces")->required()->check(CLI::ExistingFile);
    ggt->add_option("--comms", gt.comms, "communicator JSON")->required()->check(CLI::ExistingFile);
    gt.cfg.add(ggt, false);
    gt.out.add(ggt);
    ggt->callback([&] {
        action = [&] {
            const ExperimentConfig c = gt.cfg.resolve();
            std::vector<fs::path> files(gt.files.begin(), gt.files.end());
            const auto trace = nccl::parse_gpu_trace_files(files, gt.comms);
            std::vector<nccl::GpuId> gpus;
            for (const auto& [g, _] : trace.gpus)
                gpus.push_back(g);
            const auto s = nccl::nccl_to_goal(trace, c.nccl(), c.gpu_map(gpus));
            gt.out.write(s, info_for(c), "gpu-trace gpus=" + std::to_string(gpus.size()));
            out << summary(s) << "\n";
        };
    });

    struct {
        std::string trace;
        std::size_t synthetic = 0;
        std::string emit_trace;
        ConfigArgs cfg;
        OutputArgs out;
    } st;
    auto* gst = gen->add_subcommand("storage", "block I/O trace on a disaggregated storage cluster");
    auto* st_trace = gst->add_option("trace", st.trace, "SPC trace file")->check(CLI::ExistingFile);
    auto* st_syn = gst->add_option("--synthetic", st.synthetic, "generate this many synthetic requests instead");
    st_trace->excludes(st_syn);
    gst->add_option("--emit-trace", st.emit_trace, "also write the request trace in SPC form");
    st.cfg.add(gst);
    st.out.add(gst);
    gst->callback([&] {
        action = [&] {
            const ExperimentConfig c = st.cfg.resolve();
            std::vector<storage::IoRequest> reqs;
            std::string what;
            if (!st.trace.empty()) {
                reqs = storage::parse_spc_file(st.trace);
                what = "storage trace requests=" + std::to_string(reqs.size());
            } else if (st.synthetic > 0) {
                storage::SyntheticTraceOptions o;
                o.requests = st.synthetic;
                o.seed = c.seed();
                reqs = storage::synth_financial_trace(o);
                what = "storage synthetic requests=" + std::to_string(reqs.size()) + " seed=" + std::to_string(o.seed);
            } else {
                throw UsageError("storage needs a trace file or --synthetic N");
            }
            const auto s = storage::gen_direct_drive(reqs, c.storage());
            if (!st.emit_trace.empty())
                write_file_atomic(st.emit_trace, storage::emit_spc_trace(reqs));
            st.out.write(s, info_for(c), what);
            out << summary(s) << "\n";
        };
    });

    // convert
    struct {
        std::string input;
        ConfigArgs cfg;
        OutputArgs out;
    } cv;
    auto* conv = app.add_subcommand("convert", "convert between text and binary GOAL");
    conv->add_option("input", cv.input, "input GOAL file")->required()->check(CLI::ExistingFile);
    cv.cfg.add(conv, false);
    cv.out.add(conv);
    conv->callback([&] {
        action = [&] {
            const ExperimentConfig c = cv.cfg.resolve();
            const auto s = load_schedule(cv.input);
            cv.out.write(s, info_for(c), "converted from " + fs::path(cv.input).filename().string());
            out << summary(s) << "\n";
        };
    });

    // validate
    std::string val_input;
    auto* val = app.add_subcommand("validate", "check a GOAL schedule");
    val->add_option("input", val_input, "GOAL file")->required()->check(CLI::ExistingFile);
    val->callback([&] {
        action = [&] {
            const auto s = load_schedule(val_input);
            const auto rep = goal::validate(s);
            if (!rep.empty()) {
                out << rep.to_string(&s);
                throw ValidationFailed(std::to_string(rep.problem_count()) + " problem(s) in " + val_input);
            }
            out << "ok: " << summary(s) << "\n";
        };
    });

    // place
    struct {
        std::vector<std::string> jobs;
        std::string strategy;
        std::size_t system_size = 0;
        ConfigArgs cfg;
        OutputArgs out;
    } pl;
    auto* place = app.add_subcommand("place", "place several jobs on one system and merge them");
    place->add_option("jobs", pl.jobs, "job GOAL files")->required()->check(CLI::ExistingFile);
    place->add_option("--strategy", pl.strategy, "packed or random (default: config placement)")
        ->check(CLI::IsMember({"packed", "random"}));
    place->add_option("--system-size", pl.system_size, "ranks in the system (default: config, else sum of jobs)");
    pl.cfg.add(place);
    pl.out.add(place);
    place->callback([&] {
        action = [&] {
            ExperimentConfig c = pl.cfg.resolve();
            if (!pl.strategy.empty())
                c.set("placement", pl.strategy);
            if (pl.system_size > 0)
                c.set("placement.system_size", std::to_string(pl.system_size));
            std::vector<goal::GoalSchedule> jobs;
            std::size_t total = 0;
            for (const auto& f : pl.jobs) {
                jobs.push_back(load_schedule(f));
                total += jobs.back().num_ranks();
            }
            std::size_t size = std::stoull(c.resolved().at("placement.system_size"));
            if (size == 0)
                size = total;
            sim::Placement p;
            try {
                p = sim::place_jobs(jobs, c.placement(), size, c.seed());
            } catch (const InvalidArgument& e) {
                throw UsageError(e.what());
            }
            const RunInfo info = info_for(c);
            pl.out.write(p.schedule, info, "place jobs=" + std::to_string(jobs.size()) + " strategy=" +
                                               c.resolved().at("placement") + " size=" + std::to_string(size));
            nlohmann::ordered_json j;
            j["tool"] = "goalnet";
            j["version"] = info.version;
            j["config_hash"] = info.config_hash;
            j["system_size"] = size;
            j["assignment"] = p.assignment;
            out << j.dump(2) << "\n";
        };
    });

    // simulate
    struct {
        std::string input;
        std::string backend;
        std::string json_path;
        std::string csv_path;
        ConfigArgs cfg;
    } sm;
    auto* simc = app.add_subcommand("simulate", "run a schedule through a network backend");
    simc->add_option("input", sm.input, "GOAL file")->required()->check(CLI::ExistingFile);
    simc->add_option("--backend", sm.backend, "loggops or packet")
        ->required()
        ->check(CLI::IsMember({"loggops", "packet"}));
    simc->add_option("--json", sm.json_path, "also write the report JSON here");
    simc->add_option("--csv", sm.csv_path, "write per-message CSV here");
    sm.cfg.add(simc);
    simc->callback([&] {
        action = [&] {
            const ExperimentConfig c = sm.cfg.resolve();
            const auto s = load_schedule(sm.input);
            std::unique_ptr<sim::Backend> be;
            if (sm.backend == "loggops")
                be = std::make_unique<loggops::LogGOPSBackend>(c.loggops());
            else
                be = std::make_unique<packet::PacketBackend>(c.packet());
            const auto res = sim::run_simulation(s, *be);
            RunInfo info = info_for(c, fs::path(sm.input).filename().string());
            info.backend = be->name();
            const std::string json = report_json(res.report, info);
            const std::string json_path = sm.json_path.empty() ? c.output("json") : sm.json_path;
            const std::string csv_path = sm.csv_path.empty() ? c.output("csv") : sm.csv_path;
            if (!json_path.empty())
                write_file_atomic(json_path, json);
            if (!csv_path.empty())
                write_file_atomic(csv_path, report_csv(res.report, info));
            out << json;
        };
    });

    // stats
    struct {
        std::string input;
        ConfigArgs cfg;
    } ss;
    auto* stats = app.add_subcommand("stats", "recompute MCT percentiles from a per-message CSV");
    stats->add_option("input", ss.input, "CSV written by simulate --csv")->required()->check(CLI::ExistingFile);
    ss.cfg.add(stats, false);
    stats->callback([&] {
        action = [&] {
            const ExperimentConfig c = ss.cfg.resolve();
            const auto csv = parse_message_csv(read_file(ss.input));
            out << csv_stats_json(csv, info_for(c, fs::path(ss.input).filename().string()));
        };
    });

    std::vector<std::string> argv(args.rbegin(), args.rend()); // CLI11 takes them reversed
    try {
        app.parse(argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
            app.exit(e, out, err);
            return kExitOk;
        }
        print_error(err, "usage", e.what());
        return kExitUsage;
    }
    try {
        if (action)
            action();
        return kExitOk;
    } catch (const sim::DeadlockError& e) {
        print_error(err, e.kind(), e.what());
        return kExitDeadlock;
    } catch (const Error& e) {
        print_error(err, e.kind(), e.what());
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        print_error(err, "internal", e.what());
        return kExitFailure;
    }
}

} // namespace goalnet::cli
