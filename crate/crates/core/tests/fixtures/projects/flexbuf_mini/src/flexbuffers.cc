#include "flexbuffers.h"

namespace flexbuffers {

Reference GetRoot(const uint8_t *buffer, size_t size) {
  auto end = buffer + size;
  auto byte_width = *(end - 1);
  auto packed_type = *(end - 2);
  end -= byte_width;
  Reference r;
  r.data = end - byte_width;
  r.parent_width = byte_width;
  r.byte_width = static_cast<uint8_t>(1U << (packed_type & 3));
  r.type = static_cast<uint8_t>(packed_type >> 2);
  return r;
}

bool VerifyBuffer(const uint8_t *buf, size_t buf_len) {
  if (buf_len < 3)
    return false;
  uint8_t byte_width = buf[buf_len - 1];
  if (byte_width != 1 && byte_width != 2 && byte_width != 4 && byte_width != 8)
    return false;
  return byte_width + 2 <= buf_len;
}

int64_t AsInt64(const Reference &r) {
  int64_t v = 0;
  for (int i = r.byte_width - 1; i >= 0; i--)
    v = (v << 8) | r.data[i];
  return v;
}

}  // namespace flexbuffers
