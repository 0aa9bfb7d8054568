#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace taskcomm::transport {

/// TCP frame prefix: payload length, then source, dest, tag, comm and flags.
/// Every field is 4 bytes little-endian.
struct FrameHeader {
  std::uint32_t payload_length = 0;
  std::int32_t source = 0;
  std::int32_t dest = 0;
  std::int32_t tag = 0;
  std::int32_t comm = 0;
  std::uint32_t flags = 0;

  friend bool operator==(const FrameHeader&, const FrameHeader&) = default;
};

inline constexpr std::size_t kFramePrefixSize = 24;

namespace frame_flags {
inline constexpr std::uint32_t kSynchronous = 1u << 0;  // sender waits for an ack
inline constexpr std::uint32_t kAck = 1u << 1;          // matching receive posted
}  // namespace frame_flags

std::array<std::byte, kFramePrefixSize> encode_frame_prefix(const FrameHeader& header);
FrameHeader decode_frame_prefix(std::span<const std::byte, kFramePrefixSize> bytes);

}  // namespace taskcomm::transport
