#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "taskcomm/runtime.hpp"
#include "taskcomm/task_aware.hpp"
#include "taskcomm/trace.hpp"
#include "taskcomm/transport/transport.hpp"

namespace taskcomm::gs {

/// Interior of `rows` x `cols` cells surrounded by a one-cell fixed border.
/// Storage is row-major over the padded (rows + 2) x (cols + 2) array.
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t stride() const noexcept { return static_cast<std::size_t>(cols_) + 2; }

  /// Padded coordinates: 0 and rows + 1 are border rows.
  double& at(int i, int j) noexcept { return data_[static_cast<std::size_t>(i) * stride() + j]; }
  double at(int i, int j) const noexcept {
    return data_[static_cast<std::size_t>(i) * stride() + j];
  }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  const std::vector<double>& values() const noexcept { return data_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// Border values drawn from a 64-bit Mersenne Twister in the order: top row,
/// bottom row (both including corners), left column, right column. Values are
/// uniform in [0, 1).
struct Border {
  std::vector<double> top;     // cols + 2
  std::vector<double> bottom;  // cols + 2
  std::vector<double> left;    // rows
  std::vector<double> right;   // rows
};

Border make_border(int rows, int cols, std::uint64_t seed);

/// Seeded border, zero interior.
Grid make_grid(int rows, int cols, std::uint64_t seed);

/// In-place sweep over rows [r0, r1) and columns [c0, c1) of a padded array,
/// row-major: u = 0.25 * (up + down + left + right).
void update_block(double* data, std::size_t stride, int r0, int r1, int c0, int c1) noexcept;

/// One sweep over the whole interior.
void sweep(Grid& grid) noexcept;

struct Checksum {
  double sum = 0.0;          // row-major sum over the padded array
  std::uint64_t hash = 0;    // FNV-1a 64 over the bytes of the padded array

  std::string hex() const;
  friend bool operator==(const Checksum&, const Checksum&) = default;
};

Checksum checksum(const Grid& grid) noexcept;

/// Plain single-threaded reference.
Grid sequential_grid(int rows, int cols, std::uint64_t seed, int iterations);
Checksum sequential_oracle(int rows, int cols, std::uint64_t seed, int iterations);

enum class Variant { PureMPI, NBuffer, ForkJoin, Sentinel, InteropBlk, InteropNonBlk };

inline constexpr Variant kAllVariants[] = {Variant::PureMPI,  Variant::NBuffer,
                                           Variant::ForkJoin, Variant::Sentinel,
                                           Variant::InteropBlk, Variant::InteropNonBlk};

std::string_view to_string(Variant variant) noexcept;
std::optional<Variant> parse_variant(std::string_view name) noexcept;

/// Threading level the variant runs at unless overridden.
ThreadLevel default_thread_level(Variant variant) noexcept;

enum class Backend { InProc, Tcp };

struct VariantConfig {
  Variant variant = Variant::InteropBlk;
  int rows = 512;
  int cols = 512;
  int block_rows = 64;
  int block_cols = 64;
  int ranks = 1;
  int workers = 1;
  int iterations = 10;
  std::uint64_t seed = 1;
  std::chrono::microseconds polling_period{1000};
  std::optional<ThreadLevel> thread_level;  // default_thread_level if unset
  Backend backend = Backend::InProc;        // for run_variant's local group
  bool trace = false;
};

/// Throws ConfigError for inconsistent configurations.
void validate(const VariantConfig& config);

/// Trace labels.
namespace kind {
inline constexpr std::string_view kCompute = "compute";
inline constexpr std::string_view kRecvTop = "recv_top";
inline constexpr std::string_view kRecvBottom = "recv_bottom";
inline constexpr std::string_view kSendTop = "send_top";
inline constexpr std::string_view kSendBottom = "send_bottom";
bool is_communication(std::string_view k) noexcept;
}  // namespace kind

struct RunResult {
  Checksum checksum;
  Grid grid;                    // assembled global grid (rank 0 only for per-rank runs)
  double total_time_s = 0.0;    // slowest rank
  double iterations_per_s = 0.0;
  TaskAwareMetrics comm;        // summed over ranks
  RuntimeStats runtime;         // summed over ranks (max for concurrency/high water)
  std::uint64_t leaked_tickets = 0;
  bool quiescent = false;       // every spawned task completed, no ticket pending
  std::vector<TraceRecord> trace;
};

/// Runs every rank in this process, connected through the configured backend.
RunResult run_variant(const VariantConfig& config);

/// Runs the calling process's rank over `endpoint` and gathers the result on
/// rank 0 (communicator 1). Other ranks get their local metrics only.
RunResult run_rank(const VariantConfig& config, transport::Endpoint& endpoint,
                   TraceRecorder* trace = nullptr);

}  // namespace taskcomm::gs
