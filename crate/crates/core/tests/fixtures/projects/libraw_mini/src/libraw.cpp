#include "crx.h"

int LibRaw::open_buffer(const uint8_t *data, size_t size) {
  if (!data || size < 8)
    return -1;
  buf_ = data;
  size_ = size;
  return 0;
}

int LibRaw::unpack() {
  return crxLoadRaw();
}
