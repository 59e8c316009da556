// mtm_sim: command-line front end.
//
//   mtm_sim run     <netlist> [-o DIR] [--step S] [--stop S] [--plot]
//   mtm_sim mtm     <netlist> [-o DIR] [--transport inproc|tcp] [--step S] [--stop S] [--plot]
//   mtm_sim wr      <netlist> [-o DIR] [--transport inproc|tcp] [--step S] [--stop S] [--plot]
//   mtm_sim compare <netlist> [-o DIR] [--transport ...] [--wr] [--threshold X]
//   mtm_sim counts  --method mtm|wr|dnr --t1 T --t2 T --step S [--K n] [--k n]
//
// Simulating subcommands also take --reltol, --abstol and --maxiter.
// Exit codes: 0 ok, 1 bad input, 2 Newton non-convergence, 3 compare threshold exceeded.

#include "mtm/mtm.hpp"
#include "mtm/netlist.hpp"
#include "mtm/partition.hpp"
#include "mtm/report.hpp"
#include "mtm/units.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kBadInput = 1, kNoConvergence = 2, kThreshold = 3 };

struct Options {
    std::string netlist;
    std::string out = ".";
    std::string transport = "inproc";
    std::optional<double> step;
    std::optional<double> stop;
    bool plot = false;
    bool wr = false;
    std::optional<double> threshold;
    long seed = 0;
    int wr_multiple = 1;
    mtm::NrTolerances nr;
};

struct BadInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void configure_logging() {
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("MTM_LOG")) {
        const std::string v = env;
        if (v == "debug") spdlog::set_level(spdlog::level::debug);
        else if (v == "info") spdlog::set_level(spdlog::level::info);
    }
}

mtm::Netlist load(const Options& o) {
    std::ifstream in(o.netlist);
    if (!in) throw BadInput("cannot open " + o.netlist);
    std::stringstream text;
    text << in.rdbuf();
    auto net = mtm::parse_netlist(text.str());
    bool bad = false;
    for (const auto& d : mtm::validate(net)) {
        if (d.severity == mtm::Diagnostic::Severity::error) {
            spdlog::error("{}", d.message);
            bad = true;
        } else {
            spdlog::warn("{}", d.message);
        }
    }
    if (bad) throw BadInput("netlist failed validation");
    return net;
}

std::pair<double, double> step_and_stop(const Options& o, const mtm::Netlist& net) {
    const auto& tran = net.directives.tran;
    const double step = o.step ? *o.step : tran ? tran->step : 0.0;
    const double stop = o.stop ? *o.stop : tran ? tran->stop : 0.0;
    if (!(step > 0.0) || !(stop > step)) throw BadInput("need a .tran directive or --step/--stop with stop > step > 0");
    return {step, stop};
}

mtm::TransportKind transport_of(const Options& o) {
    if (o.transport == "tcp") return mtm::TransportKind::tcp;
    if (o.transport == "inproc") return mtm::TransportKind::inproc;
    throw BadInput("unknown transport " + o.transport);
}

fs::path out_dir(const Options& o) {
    fs::path dir(o.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw BadInput("cannot create output directory " + o.out);
    return dir;
}

void write_traces(const Options& o, const mtm::Netlist& net, const mtm::TransientResult& r) {
    const auto dir = out_dir(o);
    const auto cols = mtm::report_columns(net, r);
    std::ofstream csv(dir / "trace.csv");
    mtm::write_trace_csv(csv, r, cols);
    if (o.plot) {
        std::ofstream svg(dir / "trace.svg");
        mtm::write_trace_svg(svg, r, cols);
    }
    spdlog::info("wrote {} rows to {}", r.time.size(), (dir / "trace.csv").string());
}

void write_stats(const Options& o, const std::vector<mtm::StatsRow>& rows) {
    std::ofstream csv(out_dir(o) / "stats.csv");
    mtm::write_stats_csv(csv, rows);
    for (const auto& r : rows)
        spdlog::info("{}: windows={} k_distri={} messages={} wall={:.3f}s", r.method, r.stats.windows,
                     r.stats.k_distri, r.stats.messages, r.stats.wall_seconds);
}

struct Distributed {
    mtm::Partition partition;
    mtm::MtmConfig config;
    bool lossy = false;
};

Distributed prepare(const Options& o, const mtm::Netlist& net) {
    const auto [step, stop] = step_and_stop(o, net);
    Distributed d;
    d.partition = mtm::tear_by_wires(net);
    for (const auto& diag : d.partition.diagnostics) spdlog::warn("{}", diag.message);
    d.config = mtm::make_config(d.partition, step, stop);
    d.config.transport = transport_of(o);
    d.config.solver.nr = o.nr;
    d.config.wr.window_multiple = o.wr_multiple;
    for (const auto& diag : mtm::validate_step(d.config.plan, d.partition)) spdlog::warn("{}", diag.message);
    for (const auto& w : d.partition.wires) d.lossy = d.lossy || !w.params.lossless();
    spdlog::debug("dt={} window={} K={} subcircuits={}", d.config.plan.dt, d.config.plan.window, d.config.plan.k,
                  d.partition.subcircuits.size());
    return d;
}

int cmd_run(const Options& o) {
    const auto net = load(o);
    const auto [step, stop] = step_and_stop(o, net);
    mtm::MtmConfig cfg;
    cfg.plan = {step, step, 1};
    cfg.stop = stop;
    cfg.solver.nr = o.nr;
    write_traces(o, net, mtm::run_monolithic(net, cfg));
    return kOk;
}

int cmd_mtm(const Options& o) {
    const auto net = load(o);
    const auto d = prepare(o, net);
    const auto r = d.lossy ? mtm::run_mtm_lossy(net, d.partition, d.config) : mtm::run_mtm(net, d.partition, d.config);
    write_traces(o, net, r.stitched());
    write_stats(o, {{"mtm", r.stats}});
    return kOk;
}

int cmd_wr(const Options& o) {
    const auto net = load(o);
    const auto d = prepare(o, net);
    const auto r = mtm::run_wr_baseline(net, d.partition, d.config);
    write_traces(o, net, r.stitched());
    write_stats(o, {{"wr", r.stats}});
    return kOk;
}

int cmd_compare(const Options& o) {
    const auto net = load(o);
    if (net.directives.partition_wires.empty()) throw BadInput("compare needs a .partition directive");
    const auto d = prepare(o, net);
    const auto mono = mtm::run_monolithic(net, d.config);
    const auto dist =
        d.lossy ? mtm::run_mtm_lossy(net, d.partition, d.config) : mtm::run_mtm(net, d.partition, d.config);
    const auto stitched = dist.stitched();

    std::vector<mtm::StatsRow> rows{{"mtm", dist.stats}};
    if (o.wr) rows.push_back({"wr", mtm::run_wr_baseline(net, d.partition, d.config).stats});

    const auto diffs = mtm::compare_traces(stitched, mono);
    const auto dir = out_dir(o);
    {
        std::ofstream csv(dir / "diff.csv");
        mtm::write_diff_csv(csv, diffs);
    }
    write_stats(o, rows);
    write_traces(o, net, stitched);

    const double threshold = o.threshold ? *o.threshold : 1e-6 * mtm::max_abs_value(mono);
    double worst = 0.0;
    for (const auto& df : diffs) worst = std::max(worst, df.max_abs);
    std::cout << "max |mtm - monolithic| = " << mtm::format_number(worst) << " V (threshold "
              << mtm::format_number(threshold) << " V)\n";
    return worst <= threshold ? kOk : kThreshold;
}

int cmd_counts(const std::string& method, double t1, double t2, double step, long big_k, long k) {
    static const std::map<std::string, mtm::CountMethod> methods{
        {"mtm", mtm::CountMethod::mtm}, {"wr", mtm::CountMethod::wr}, {"dnr", mtm::CountMethod::dnr}};
    const auto it = methods.find(method);
    if (it == methods.end()) throw BadInput("unknown method " + method);
    std::cout << mtm::predict_counts(it->second, t1, t2, step, big_k, k) << '\n';
    return kOk;
}

/// Accepts engineering suffixes ("100n", "1meg") on numeric options.
const CLI::Validator kEngineering(
    [](std::string& v) -> std::string {
        const auto x = mtm::parse_number(v);
        if (!x) return "not a number: " + v;
        v = mtm::format_number(*x);
        return {};
    },
    "NUMBER");

} // namespace

int main(int argc, char** argv) {
    configure_logging();
    CLI::App app{"Distributed transient simulation by transmission-line tearing"};
    app.require_subcommand(1);

    Options o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("netlist", o.netlist, "netlist file")->required();
        sub->add_option("-o,--out", o.out, "output directory");
        sub->add_option("--step", o.step, "time step override [s]")->transform(kEngineering);
        sub->add_option("--stop", o.stop, "stop time override [s]")->transform(kEngineering);
        sub->add_flag("--plot", o.plot, "also write trace.svg");
        sub->add_option("--seed", o.seed, "reserved");
        sub->add_option("--reltol", o.nr.reltol, "Newton relative tolerance")->transform(kEngineering);
        sub->add_option("--abstol", o.nr.abstol, "Newton current tolerance [A]")->transform(kEngineering);
        sub->add_option("--maxiter", o.nr.maxiter, "Newton iteration cap")->check(CLI::PositiveNumber);
    };
    auto add_distributed = [&](CLI::App* sub) {
        sub->add_option("--transport", o.transport, "inproc or tcp")->check(CLI::IsMember({"inproc", "tcp"}));
        sub->add_option("--wr-window", o.wr_multiple, "relaxation window in units of the MTM window");
    };

    auto* run = app.add_subcommand("run", "monolithic transient run");
    add_common(run);
    auto* mtm_cmd = app.add_subcommand("mtm", "distributed run, one exchange per window");
    add_common(mtm_cmd);
    add_distributed(mtm_cmd);
    auto* wr = app.add_subcommand("wr", "waveform-relaxation baseline");
    add_common(wr);
    add_distributed(wr);
    auto* compare = app.add_subcommand("compare", "monolithic vs distributed difference table");
    add_common(compare);
    add_distributed(compare);
    compare->add_flag("--wr", o.wr, "add the waveform-relaxation row");
    compare->add_option("--threshold", o.threshold, "max allowed |difference| [V]")->transform(kEngineering);

    std::string method = "mtm";
    double t1 = 0.0, t2 = 0.0, cstep = 0.0;
    long big_k = 1, k = 1;
    auto* counts = app.add_subcommand("counts", "predicted distributed-computation counts");
    counts->add_option("--method", method, "mtm, wr or dnr")->required();
    counts->add_option("--t1", t1, "start time [s]")->transform(kEngineering);
    counts->add_option("--t2", t2, "end time [s]")->required()->transform(kEngineering);
    counts->add_option("--step", cstep, "time step [s]")->required()->transform(kEngineering);
    counts->add_option("--K", big_k, "steps per window");
    counts->add_option("--k", k, "iterations per window (wr) or per step (dnr)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kBadInput;
    }

    try {
        if (*run) return cmd_run(o);
        if (*mtm_cmd) return cmd_mtm(o);
        if (*wr) return cmd_wr(o);
        if (*compare) return cmd_compare(o);
        return cmd_counts(method, t1, t2, cstep, big_k, k);
    } catch (const mtm::NoConvergence& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNoConvergence;
    } catch (const mtm::RunError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.nonconvergence() ? kNoConvergence : kBadInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kBadInput;
    }
}
