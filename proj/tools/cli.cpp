#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <json.hpp>

#include "taskcomm/demo.hpp"
#include "taskcomm/trace.hpp"
#include "taskcomm/transport/tcp.hpp"

namespace taskcomm::cli {

namespace {

struct BadArguments : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_output(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << text << '\n';
    return;
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << text << '\n';
}

void write_trace(const std::string& path, const std::vector<TraceRecord>& records) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_trace_csv(os, records);
}

int run_demo(const RunConfig& cfg, std::ostream& out) {
  const auto r = demo::run_deadlock_demo(
      {.interop = cfg.interop, .watchdog = cfg.watchdog, .polling_period = cfg.run.polling_period});
  nlohmann::ordered_json j;
  j["schema"] = kMetricsSchema;
  j["demo"] = "deadlock";
  j["interop"] = cfg.interop;
  j["completed"] = r.completed;
  j["watchdog_fired"] = r.watchdog_fired;
  j["elapsed_s"] = r.elapsed_s;
  j["tasks_paused"] = r.metrics.tasks_paused;
  write_output(cfg.metrics_out, j.dump(2), out);
  if (r.watchdog_fired) return kWatchdog;
  return r.completed ? kOk : kRuntimeFailure;
}

int run_variant(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  gs::RunResult result;
  bool report = true;
  if (cfg.hostfile.empty()) {
    gs::VariantConfig vc = cfg.run;
    vc.trace = !cfg.trace_out.empty();
    result = gs::run_variant(vc);
    if (vc.trace) write_trace(cfg.trace_out, result.trace);
  } else {
    const auto hosts = transport::read_hostfile(cfg.hostfile);
    transport::TcpEndpoint endpoint(cfg.rank, hosts);
    TraceRecorder recorder;
    const bool tracing = !cfg.trace_out.empty();
    result = gs::run_rank(cfg.run, endpoint, tracing ? &recorder : nullptr);
    if (tracing) write_trace(cfg.trace_out + "." + std::to_string(cfg.rank), recorder.records());
    report = cfg.rank == 0;
  }
  if (!report) return kOk;

  write_output(cfg.metrics_out, metrics_json(cfg, result), out);
  if (cfg.verify) {
    const auto expected =
        gs::sequential_oracle(cfg.run.rows, cfg.run.cols, cfg.run.seed, cfg.run.iterations);
    if (!(expected == result.checksum)) {
      err << "verify: checksum " << result.checksum.hex() << " differs from sequential "
          << expected.hex() << '\n';
      return kVerifyMismatch;
    }
  }
  return kOk;
}

}  // namespace

ParseResult parse_args(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Run a Gauss-Seidel heat benchmark variant or the deadlock demo.",
               "taskcomm-run"};
  RunConfig cfg;
  std::string variant;
  std::string transport = "inproc";
  std::string demo;
  std::string interop = "on";
  int bs = 0;
  int block_rows = 0;
  int block_cols = 0;
  long long polling_us = 0;
  long long watchdog_ms = cfg.watchdog.count();

  app.add_option("--variant", variant,
                 "pure-mpi | nbuffer | fork-join | sentinel | interop-blk | interop-nonblk");
  app.add_option("--rows", cfg.run.rows, "Interior rows")->capture_default_str();
  app.add_option("--cols", cfg.run.cols, "Interior columns")->capture_default_str();
  app.add_option("--bs", bs, "Square block size");
  app.add_option("--block-rows", block_rows, "Block rows (overrides --bs)");
  app.add_option("--block-cols", block_cols, "Block columns (overrides --bs)");
  auto* ranks_opt = app.add_option("--ranks", cfg.run.ranks, "Ranks")->capture_default_str();
  app.add_option("--workers", cfg.run.workers, "Workers per rank")->capture_default_str();
  app.add_option("--iters", cfg.run.iterations, "Iterations")->capture_default_str();
  app.add_option("--transport", transport, "inproc | tcp")->capture_default_str();
  app.add_option("--hostfile", cfg.hostfile, "host:port per line, line i is rank i (tcp)");
  app.add_option("--rank", cfg.rank, "This process's rank (tcp)");
  app.add_option("--polling-period-us", polling_us,
                 std::string("Polling period in microseconds (default 1000, or ") + kPollingEnv +
                     ")");
  app.add_option("--seed", cfg.run.seed, "Border seed")->capture_default_str();
  app.add_option("--metrics-out", cfg.metrics_out, "Metrics JSON path (default stdout)");
  app.add_option("--trace-out", cfg.trace_out, "Trace CSV path");
  app.add_flag("--verify", cfg.verify, "Compare against the sequential sweep");
  app.add_option("--demo", demo, "deadlock");
  app.add_option("--interop", interop, "on | off (demo)")->capture_default_str();
  app.add_option("--watchdog-ms", watchdog_ms, "Demo watchdog")->capture_default_str();

  try {
    app.parse(argc, argv);

    if (polling_us == 0) {
      if (auto env = polling_period_from_env()) polling_us = env->count();
    }
    if (polling_us < 0) throw BadArguments("--polling-period-us must be positive");
    if (polling_us > 0) cfg.run.polling_period = std::chrono::microseconds(polling_us);
    if (watchdog_ms <= 0) throw BadArguments("--watchdog-ms must be positive");
    cfg.watchdog = std::chrono::milliseconds(watchdog_ms);

    if (interop != "on" && interop != "off") throw BadArguments("--interop must be on or off");
    cfg.interop = interop == "on";

    if (!demo.empty()) {
      if (demo != "deadlock") throw BadArguments("unknown demo '" + demo + "'");
      if (!variant.empty()) throw BadArguments("--demo and --variant are exclusive");
      cfg.demo = true;
      return {cfg, kOk};
    }

    if (variant.empty()) throw BadArguments("--variant is required");
    const auto v = gs::parse_variant(variant);
    if (!v) throw BadArguments("unknown variant '" + variant + "'");
    cfg.run.variant = *v;

    if (bs < 0 || block_rows < 0 || block_cols < 0) {
      throw BadArguments("block sizes must be positive");
    }
    const int square = bs > 0 ? bs : 64;
    cfg.run.block_rows = block_rows > 0 ? block_rows : square;
    cfg.run.block_cols = block_cols > 0 ? block_cols : square;

    if (transport == "tcp") {
      if (cfg.hostfile.empty()) throw BadArguments("--transport tcp requires --hostfile");
      const auto hosts = transport::read_hostfile(cfg.hostfile);
      if (hosts.empty()) throw BadArguments("hostfile lists no ranks");
      if (ranks_opt->count() > 0 && cfg.run.ranks != static_cast<int>(hosts.size())) {
        throw BadArguments("--ranks disagrees with the hostfile");
      }
      cfg.run.ranks = static_cast<int>(hosts.size());
      if (cfg.rank < 0 || cfg.rank >= cfg.run.ranks) {
        throw BadArguments("--transport tcp requires --rank in [0, " +
                           std::to_string(cfg.run.ranks) + ")");
      }
      cfg.run.backend = gs::Backend::Tcp;
    } else if (transport == "inproc") {
      if (!cfg.hostfile.empty()) throw BadArguments("--hostfile requires --transport tcp");
      cfg.run.backend = gs::Backend::InProc;
    } else {
      throw BadArguments("--transport must be inproc or tcp");
    }

    gs::validate(cfg.run);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return {std::nullopt, code == 0 ? kOk : kBadArguments};
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return {std::nullopt, kBadArguments};
  }
  return {cfg, kOk};
}

std::string metrics_json(const RunConfig& config, const gs::RunResult& result) {
  const auto& r = config.run;
  nlohmann::ordered_json j;
  j["schema"] = kMetricsSchema;
  j["variant"] = gs::to_string(r.variant);
  j["rows"] = r.rows;
  j["cols"] = r.cols;
  if (r.block_rows == r.block_cols) {
    j["bs"] = r.block_rows;
  } else {
    j["bs"] = {r.block_rows, r.block_cols};
  }
  j["ranks"] = r.ranks;
  j["workers"] = r.workers;
  j["iterations"] = r.iterations;
  j["total_time_s"] = result.total_time_s;
  j["iterations_per_s"] = result.iterations_per_s;
  j["checksum_hex"] = result.checksum.hex();
  j["tasks_paused"] = result.comm.tasks_paused;
  j["fast_path_hits"] = result.comm.fast_path_hits;
  j["tickets_created"] = result.comm.tickets_created;
  j["events_bound"] = result.comm.events_bound;
  j["events_fulfilled"] = result.comm.events_fulfilled;
  return j.dump(2);
}

int run_main(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    return config.demo ? run_demo(config, out) : run_variant(config, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

}  // namespace taskcomm::cli
