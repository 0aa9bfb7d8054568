#include <algorithm>
#include <bit>
#include <exception>
#include <mutex>
#include <thread>

#include "taskcomm/gauss_seidel.hpp"
#include "taskcomm/transport/inproc.hpp"
#include "taskcomm/transport/tcp.hpp"

namespace taskcomm::gs {

namespace {

using transport::Communicator;
using transport::Endpoint;
using transport::Request;

constexpr int kGatherComm = 1;
constexpr int kGatherGridTag = 0;
constexpr int kGatherMetricsTag = 1;
constexpr int kRowTag = 0;

ThreadLevel level_of(const VariantConfig& c) {
  return c.thread_level.value_or(default_thread_level(c.variant));
}

struct Layout {
  int rank = 0;
  int ranks = 1;
  int rows = 0;
  int cols = 0;
  int local_rows = 0;
  int br = 0;
  int bc = 0;
  int nbr = 0;
  int nbc = 0;
  std::size_t stride = 0;

  Layout(const VariantConfig& c, int r)
      : rank(r),
        ranks(c.ranks),
        rows(c.rows),
        cols(c.cols),
        local_rows(c.rows / c.ranks),
        br(c.block_rows),
        bc(c.block_cols),
        nbr(local_rows / c.block_rows),
        nbc(c.cols / c.block_cols),
        stride(static_cast<std::size_t>(c.cols) + 2) {}

  bool has_top() const { return rank > 0; }
  bool has_bottom() const { return rank < ranks - 1; }

  std::uint64_t block(int bi, int bj) const {
    return static_cast<std::uint64_t>(bi) * static_cast<std::uint64_t>(nbc) +
           static_cast<std::uint64_t>(bj);
  }
  std::uint64_t halo_top(int bj) const {
    return static_cast<std::uint64_t>(nbr) * nbc + static_cast<std::uint64_t>(bj);
  }
  std::uint64_t halo_bottom(int bj) const {
    return static_cast<std::uint64_t>(nbr + 1) * nbc + static_cast<std::uint64_t>(bj);
  }
  std::uint64_t sentinel() const { return static_cast<std::uint64_t>(nbr + 2) * nbc; }
};

struct Rank {
  Layout L;
  std::vector<double> u;
  Endpoint& ep;
  TaskAwareComm& tac;
  Communicator world;
  Variant variant;
  int iterations;

  double* row(int i) { return u.data() + static_cast<std::size_t>(i) * L.stride; }

  std::span<double> segment(int i, int bj) {
    return {row(i) + 1 + static_cast<std::ptrdiff_t>(bj) * L.bc, static_cast<std::size_t>(L.bc)};
  }
  std::span<double> full_row(int i) { return {row(i) + 1, static_cast<std::size_t>(L.cols)}; }

  void compute(int bi, int bj) {
    update_block(u.data(), L.stride, 1 + bi * L.br, 1 + (bi + 1) * L.br, 1 + bj * L.bc,
                 1 + (bj + 1) * L.bc);
  }

  void recv_into(std::span<double> dst, int source, int tag) {
    auto bytes = std::as_writable_bytes(dst);
    if (variant == Variant::InteropNonBlk) {
      Request r = ep.irecv(bytes, source, tag, world);
      tac.ta_iwait(r);
    } else {
      tac.ta_recv(bytes, source, tag, world);
    }
  }

  void send_from(std::span<const double> src, int dest, int tag) {
    auto bytes = std::as_bytes(src);
    if (variant == Variant::InteropNonBlk) {
      Request r = ep.isend(bytes, dest, tag, world);
      tac.ta_iwait(r);
    } else {
      tac.ta_send(bytes, dest, tag, world);
    }
  }
};

void init_local(Rank& R, std::uint64_t seed) {
  const Layout& L = R.L;
  R.u.assign(static_cast<std::size_t>(L.local_rows + 2) * L.stride, 0.0);
  const Border b = make_border(L.rows, L.cols, seed);
  const int first = L.rank * L.local_rows;
  for (int i = 0; i < L.local_rows; ++i) {
    R.row(i + 1)[0] = b.left[static_cast<std::size_t>(first + i)];
    R.row(i + 1)[L.cols + 1] = b.right[static_cast<std::size_t>(first + i)];
  }
  if (!L.has_top()) std::copy(b.top.begin(), b.top.end(), R.row(0));
  if (!L.has_bottom()) std::copy(b.bottom.begin(), b.bottom.end(), R.row(L.local_rows + 1));
}

void spawn_computes(Rank& R, int k) {
  const Layout& L = R.L;
  for (int bi = 0; bi < L.nbr; ++bi) {
    for (int bj = 0; bj < L.nbc; ++bj) {
      std::vector<DataAccess> acc;
      acc.push_back(DataAccess::inout(L.block(bi, bj), 1));
      acc.push_back(bi > 0 ? DataAccess::in(L.block(bi - 1, bj), 1)
                           : DataAccess::in(L.halo_top(bj), 1));
      if (bj > 0) acc.push_back(DataAccess::in(L.block(bi, bj - 1), 1));
      if (bj < L.nbc - 1) acc.push_back(DataAccess::in(L.block(bi, bj + 1), 1));
      acc.push_back(bi < L.nbr - 1 ? DataAccess::in(L.block(bi + 1, bj), 1)
                                   : DataAccess::in(L.halo_bottom(bj), 1));
      spawn_task([&R, bi, bj] { R.compute(bi, bj); }, std::move(acc),
                 {.kind = kind::kCompute, .iteration = k});
    }
  }
}

// Sentinel, InteropBlk and InteropNonBlk: the whole iteration space as one
// task graph.
void run_hybrid(Rank& R) {
  const Layout& L = R.L;
  const bool sentinel = R.variant == Variant::Sentinel;
  auto comm_accesses = [&](DataAccess a) {
    std::vector<DataAccess> acc{a};
    if (sentinel) acc.push_back(DataAccess::inout(L.sentinel(), 1));
    return acc;
  };
  for (int k = 0; k < R.iterations; ++k) {
    if (L.has_top()) {
      for (int bj = 0; bj < L.nbc; ++bj) {
        spawn_task([&R, bj] { R.recv_into(R.segment(0, bj), R.L.rank - 1, bj); },
                   comm_accesses(DataAccess::out(L.halo_top(bj), 1)),
                   {.kind = kind::kRecvTop, .iteration = k});
      }
    }
    if (L.has_bottom() && k > 0) {
      for (int bj = 0; bj < L.nbc; ++bj) {
        spawn_task(
            [&R, bj] { R.recv_into(R.segment(R.L.local_rows + 1, bj), R.L.rank + 1, bj); },
            comm_accesses(DataAccess::out(L.halo_bottom(bj), 1)),
            {.kind = kind::kRecvBottom, .iteration = k});
      }
    }
    spawn_computes(R, k);
    if (L.has_top() && k < R.iterations - 1) {
      for (int bj = 0; bj < L.nbc; ++bj) {
        spawn_task([&R, bj] { R.send_from(R.segment(1, bj), R.L.rank - 1, bj); },
                   comm_accesses(DataAccess::in(L.block(0, bj), 1)),
                   {.kind = kind::kSendTop, .iteration = k});
      }
    }
    if (L.has_bottom()) {
      for (int bj = 0; bj < L.nbc; ++bj) {
        spawn_task([&R, bj] { R.send_from(R.segment(R.L.local_rows, bj), R.L.rank + 1, bj); },
                   comm_accesses(DataAccess::in(L.block(L.nbr - 1, bj), 1)),
                   {.kind = kind::kSendBottom, .iteration = k});
      }
    }
  }
}

void exchange_before(Rank& R, int k) {
  const Layout& L = R.L;
  if (L.has_top()) R.ep.recv(std::as_writable_bytes(R.full_row(0)), L.rank - 1, kRowTag, R.world);
  if (L.has_bottom() && k > 0) {
    R.ep.recv(std::as_writable_bytes(R.full_row(L.local_rows + 1)), L.rank + 1, kRowTag, R.world);
  }
}

void exchange_after(Rank& R, int k) {
  const Layout& L = R.L;
  if (L.has_bottom()) {
    R.ep.send(std::as_bytes(R.full_row(L.local_rows)), L.rank + 1, kRowTag, R.world);
  }
  if (L.has_top() && k < R.iterations - 1) {
    R.ep.send(std::as_bytes(R.full_row(1)), L.rank - 1, kRowTag, R.world);
  }
}

void run_fork_join(Rank& R) {
  for (int k = 0; k < R.iterations; ++k) {
    exchange_before(R, k);
    spawn_computes(R, k);
    taskwait();
    exchange_after(R, k);
  }
}

void run_pure(Rank& R) {
  const Layout& L = R.L;
  for (int k = 0; k < R.iterations; ++k) {
    exchange_before(R, k);
    update_block(R.u.data(), L.stride, 1, L.local_rows + 1, 1, L.cols + 1);
    exchange_after(R, k);
  }
}

// Column strips: halo segments are received as soon as they are needed and
// sent as soon as they are produced.
void run_nbuffer(Rank& R) {
  const Layout& L = R.L;
  std::vector<Request> top(static_cast<std::size_t>(L.nbc));
  std::vector<Request> bottom(static_cast<std::size_t>(L.nbc));
  std::vector<Request> sends;
  for (int k = 0; k < R.iterations; ++k) {
    for (int bj = 0; bj < L.nbc; ++bj) {
      if (L.has_top()) {
        top[bj] = R.ep.irecv(std::as_writable_bytes(R.segment(0, bj)), L.rank - 1, bj, R.world);
      }
      if (L.has_bottom() && k > 0) {
        bottom[bj] = R.ep.irecv(std::as_writable_bytes(R.segment(L.local_rows + 1, bj)),
                                L.rank + 1, bj, R.world);
      }
    }
    sends.clear();
    for (int bj = 0; bj < L.nbc; ++bj) {
      if (top[bj]) R.ep.wait(top[bj]);
      if (bottom[bj]) R.ep.wait(bottom[bj]);
      update_block(R.u.data(), L.stride, 1, L.local_rows + 1, 1 + bj * L.bc, 1 + (bj + 1) * L.bc);
      if (L.has_bottom()) {
        sends.push_back(
            R.ep.isend(std::as_bytes(R.segment(L.local_rows, bj)), L.rank + 1, bj, R.world));
      }
      if (L.has_top() && k < R.iterations - 1) {
        sends.push_back(R.ep.isend(std::as_bytes(R.segment(1, bj)), L.rank - 1, bj, R.world));
      }
    }
    R.ep.waitall(sends);
  }
}

constexpr std::size_t kPackedFields = 14;

std::array<std::uint64_t, kPackedFields> pack(const RunResult& r) {
  return {r.comm.tasks_paused,
          r.comm.fast_path_hits,
          r.comm.tickets_created,
          r.comm.events_bound,
          r.comm.events_fulfilled,
          r.comm.paused_high_water,
          r.runtime.tasks_spawned,
          r.runtime.tasks_completed,
          r.runtime.pauses,
          r.runtime.paused_high_water,
          static_cast<std::uint64_t>(r.runtime.max_concurrency),
          r.leaked_tickets,
          r.quiescent ? 1u : 0u,
          std::bit_cast<std::uint64_t>(r.total_time_s)};
}

void accumulate(RunResult& into, const std::array<std::uint64_t, kPackedFields>& p) {
  into.comm.tasks_paused += p[0];
  into.comm.fast_path_hits += p[1];
  into.comm.tickets_created += p[2];
  into.comm.events_bound += p[3];
  into.comm.events_fulfilled += p[4];
  into.comm.paused_high_water = std::max(into.comm.paused_high_water, p[5]);
  into.runtime.tasks_spawned += p[6];
  into.runtime.tasks_completed += p[7];
  into.runtime.pauses += p[8];
  into.runtime.paused_high_water = std::max(into.runtime.paused_high_water, p[9]);
  into.runtime.max_concurrency = std::max(into.runtime.max_concurrency, static_cast<int>(p[10]));
  into.leaked_tickets += p[11];
  into.quiescent = into.quiescent && p[12] == 1;
  into.total_time_s = std::max(into.total_time_s, std::bit_cast<double>(p[13]));
}

}  // namespace

void validate(const VariantConfig& c) {
  auto require = [](bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
  };
  require(c.rows > 0 && c.cols > 0, "rows and cols must be positive");
  require(c.block_rows > 0 && c.block_cols > 0, "block sizes must be positive");
  require(c.ranks > 0, "ranks must be positive");
  require(c.workers > 0, "workers must be positive");
  require(c.iterations > 0, "iterations must be positive");
  require(c.polling_period.count() > 0, "polling period must be positive");
  require(c.rows % c.ranks == 0, "rows (" + std::to_string(c.rows) +
                                     ") must be divisible by ranks (" +
                                     std::to_string(c.ranks) + ")");
  require((c.rows / c.ranks) % c.block_rows == 0,
          "rows per rank (" + std::to_string(c.rows / c.ranks) +
              ") must be divisible by the block row count (" + std::to_string(c.block_rows) + ")");
  require(c.cols % c.block_cols == 0, "cols (" + std::to_string(c.cols) +
                                          ") must be divisible by the block column count (" +
                                          std::to_string(c.block_cols) + ")");
  const ThreadLevel level = level_of(c);
  if (c.variant == Variant::PureMPI || c.variant == Variant::NBuffer) {
    require(c.workers == 1, std::string(to_string(c.variant)) + " runs one worker per rank");
  }
  if (c.variant == Variant::Sentinel) {
    require(level != ThreadLevel::TaskMultiple,
            "sentinel serializes raw blocking calls; task-multiple would drop the sentinel");
    require(level == ThreadLevel::Multiple, "sentinel requires the multiple thread level");
  }
  if (c.variant == Variant::InteropBlk || c.variant == Variant::InteropNonBlk) {
    require(level == ThreadLevel::TaskMultiple,
            std::string(to_string(c.variant)) + " requires the task-multiple thread level");
  }
}

RunResult run_rank(const VariantConfig& config, Endpoint& endpoint, TraceRecorder* trace) {
  validate(config);
  if (endpoint.size() != config.ranks) {
    throw ConfigError("endpoint group has " + std::to_string(endpoint.size()) +
                      " ranks, configuration expects " + std::to_string(config.ranks));
  }
  RuntimeConfig rc;
  rc.workers = static_cast<std::size_t>(config.workers);
  rc.polling_period = config.polling_period;
  rc.rank = endpoint.rank();
  rc.trace = trace;
  Runtime runtime(rc);
  TaskAwareComm tac(runtime, endpoint);
  tac.init_thread(level_of(config));

  Rank R{Layout(config, endpoint.rank()), {}, endpoint, tac, endpoint.world(), config.variant,
         config.iterations};
  init_local(R, config.seed);

  const auto start = std::chrono::steady_clock::now();
  runtime.run([&R] {
    switch (R.variant) {
      case Variant::PureMPI: run_pure(R); break;
      case Variant::NBuffer: run_nbuffer(R); break;
      case Variant::ForkJoin: run_fork_join(R); break;
      case Variant::Sentinel:
      case Variant::InteropBlk:
      case Variant::InteropNonBlk: run_hybrid(R); break;
    }
  });
  const auto stop = std::chrono::steady_clock::now();

  RunResult local;
  local.total_time_s = std::chrono::duration<double>(stop - start).count();
  local.comm = tac.metrics();
  local.runtime = runtime.stats();
  local.leaked_tickets = tac.pending_tickets();
  try {
    tac.shutdown();
  } catch (const ShutdownError&) {
  }
  local.quiescent = local.leaked_tickets == 0 &&
                    local.runtime.tasks_spawned == local.runtime.tasks_completed &&
                    local.comm.events_bound == local.comm.events_fulfilled;

  const Communicator gather = endpoint.communicator(kGatherComm);
  const Layout& L = R.L;
  const std::size_t rank_values = static_cast<std::size_t>(L.local_rows) * L.stride;
  if (endpoint.rank() != 0) {
    endpoint.send(std::as_bytes(std::span<const double>(R.row(1), rank_values)), 0,
                  kGatherGridTag, gather);
    const auto packed = pack(local);
    endpoint.send(std::as_bytes(std::span<const std::uint64_t>(packed)), 0, kGatherMetricsTag,
                  gather);
    local.iterations_per_s = config.iterations / std::max(local.total_time_s, 1e-12);
    return local;
  }

  RunResult result = local;
  result.grid = make_grid(config.rows, config.cols, config.seed);
  std::copy_n(R.row(1), rank_values, result.grid.data() + L.stride);
  for (int src = 1; src < config.ranks; ++src) {
    double* dst = result.grid.data() + (1 + static_cast<std::size_t>(src) * L.local_rows) * L.stride;
    endpoint.recv(std::as_writable_bytes(std::span<double>(dst, rank_values)), src, kGatherGridTag,
                  gather);
    std::array<std::uint64_t, kPackedFields> packed{};
    endpoint.recv(std::as_writable_bytes(std::span<std::uint64_t>(packed)), src,
                  kGatherMetricsTag, gather);
    accumulate(result, packed);
  }
  result.checksum = checksum(result.grid);
  result.iterations_per_s = config.iterations / std::max(result.total_time_s, 1e-12);
  return result;
}

RunResult run_variant(const VariantConfig& config) {
  validate(config);
  std::unique_ptr<transport::InProcWorld> world;
  std::vector<std::unique_ptr<transport::TcpEndpoint>> tcp;
  std::vector<Endpoint*> endpoints;
  if (config.backend == Backend::InProc) {
    world = std::make_unique<transport::InProcWorld>(config.ranks);
    for (int r = 0; r < config.ranks; ++r) endpoints.push_back(&world->endpoint(r));
  } else {
    tcp = transport::make_local_tcp_group(config.ranks);
    for (auto& e : tcp) endpoints.push_back(e.get());
  }

  TraceRecorder recorder;
  TraceRecorder* trace = config.trace ? &recorder : nullptr;
  RunResult result;
  std::mutex error_mutex;
  std::exception_ptr error;
  std::vector<std::thread> threads;
  for (int r = 0; r < config.ranks; ++r) {
    threads.emplace_back([&, r] {
      try {
        RunResult mine = run_rank(config, *endpoints[static_cast<std::size_t>(r)], trace);
        if (r == 0) result = std::move(mine);
      } catch (...) {
        {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
        for (auto* e : endpoints) e->abort();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
  if (trace) result.trace = recorder.records();
  return result;
}

}  // namespace taskcomm::gs
