#include "taskcomm/gauss_seidel.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <random>

namespace taskcomm::gs {

Grid::Grid(int rows, int cols)
    : rows_(rows),
      cols_(cols),
      data_(static_cast<std::size_t>(rows + 2) * static_cast<std::size_t>(cols + 2), 0.0) {}

Border make_border(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto draw = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  Border b;
  b.top.resize(static_cast<std::size_t>(cols) + 2);
  b.bottom.resize(static_cast<std::size_t>(cols) + 2);
  b.left.resize(static_cast<std::size_t>(rows));
  b.right.resize(static_cast<std::size_t>(rows));
  for (auto& v : b.top) v = draw();
  for (auto& v : b.bottom) v = draw();
  for (auto& v : b.left) v = draw();
  for (auto& v : b.right) v = draw();
  return b;
}

Grid make_grid(int rows, int cols, std::uint64_t seed) {
  Grid g(rows, cols);
  const Border b = make_border(rows, cols, seed);
  for (int j = 0; j < cols + 2; ++j) {
    g.at(0, j) = b.top[static_cast<std::size_t>(j)];
    g.at(rows + 1, j) = b.bottom[static_cast<std::size_t>(j)];
  }
  for (int i = 0; i < rows; ++i) {
    g.at(i + 1, 0) = b.left[static_cast<std::size_t>(i)];
    g.at(i + 1, cols + 1) = b.right[static_cast<std::size_t>(i)];
  }
  return g;
}

void update_block(double* data, std::size_t stride, int r0, int r1, int c0, int c1) noexcept {
  for (int i = r0; i < r1; ++i) {
    double* row = data + static_cast<std::size_t>(i) * stride;
    const double* up = row - stride;
    const double* down = row + stride;
    for (int j = c0; j < c1; ++j) {
      row[j] = 0.25 * (((up[j] + down[j]) + row[j - 1]) + row[j + 1]);
    }
  }
}

void sweep(Grid& grid) noexcept {
  update_block(grid.data(), grid.stride(), 1, grid.rows() + 1, 1, grid.cols() + 1);
}

std::string Checksum::hex() const {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%016llx:%016llx",
                static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(sum)),
                static_cast<unsigned long long>(hash));
  return buf;
}

Checksum checksum(const Grid& grid) noexcept {
  Checksum c;
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (double v : grid.values()) {
    c.sum += v;
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char byte : bytes) {
      h ^= byte;
      h *= 0x100000001b3ull;
    }
  }
  c.hash = h;
  return c;
}

Grid sequential_grid(int rows, int cols, std::uint64_t seed, int iterations) {
  Grid g = make_grid(rows, cols, seed);
  for (int k = 0; k < iterations; ++k) sweep(g);
  return g;
}

Checksum sequential_oracle(int rows, int cols, std::uint64_t seed, int iterations) {
  return checksum(sequential_grid(rows, cols, seed, iterations));
}

std::string_view to_string(Variant variant) noexcept {
  switch (variant) {
    case Variant::PureMPI: return "pure-mpi";
    case Variant::NBuffer: return "nbuffer";
    case Variant::ForkJoin: return "fork-join";
    case Variant::Sentinel: return "sentinel";
    case Variant::InteropBlk: return "interop-blk";
    case Variant::InteropNonBlk: return "interop-nonblk";
  }
  return "unknown";
}

std::optional<Variant> parse_variant(std::string_view name) noexcept {
  for (Variant v : kAllVariants) {
    if (to_string(v) == name) return v;
  }
  return std::nullopt;
}

ThreadLevel default_thread_level(Variant variant) noexcept {
  switch (variant) {
    case Variant::PureMPI:
    case Variant::NBuffer: return ThreadLevel::Single;
    case Variant::ForkJoin: return ThreadLevel::Funneled;
    case Variant::Sentinel: return ThreadLevel::Multiple;
    case Variant::InteropBlk:
    case Variant::InteropNonBlk: return ThreadLevel::TaskMultiple;
  }
  return ThreadLevel::Single;
}

namespace kind {
bool is_communication(std::string_view k) noexcept {
  return k == kRecvTop || k == kRecvBottom || k == kSendTop || k == kSendBottom;
}
}  // namespace kind

}  // namespace taskcomm::gs
