#include "taskcomm/transport/frame.hpp"

namespace taskcomm::transport {

namespace {
void put_u32(std::byte* out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out[i] = static_cast<std::byte>((v >> (8 * i)) & 0xFFu);
}

std::uint32_t get_u32(const std::byte* in) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::to_integer<std::uint32_t>(in[i]) << (8 * i);
  return v;
}
}  // namespace

std::array<std::byte, kFramePrefixSize> encode_frame_prefix(const FrameHeader& header) {
  std::array<std::byte, kFramePrefixSize> out{};
  put_u32(out.data() + 0, header.payload_length);
  put_u32(out.data() + 4, static_cast<std::uint32_t>(header.source));
  put_u32(out.data() + 8, static_cast<std::uint32_t>(header.dest));
  put_u32(out.data() + 12, static_cast<std::uint32_t>(header.tag));
  put_u32(out.data() + 16, static_cast<std::uint32_t>(header.comm));
  put_u32(out.data() + 20, header.flags);
  return out;
}

FrameHeader decode_frame_prefix(std::span<const std::byte, kFramePrefixSize> bytes) {
  FrameHeader h;
  h.payload_length = get_u32(bytes.data() + 0);
  h.source = static_cast<std::int32_t>(get_u32(bytes.data() + 4));
  h.dest = static_cast<std::int32_t>(get_u32(bytes.data() + 8));
  h.tag = static_cast<std::int32_t>(get_u32(bytes.data() + 12));
  h.comm = static_cast<std::int32_t>(get_u32(bytes.data() + 16));
  h.flags = get_u32(bytes.data() + 20);
  return h;
}

}  // namespace taskcomm::transport
