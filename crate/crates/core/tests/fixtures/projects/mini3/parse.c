#include <stddef.h>

int parse_header(const unsigned char *buf, size_t len) {
  if (len < 4)
    return -1;
  return buf[0] | (buf[1] << 8);
}

unsigned checksum(const unsigned char *buf, size_t len) {
  unsigned sum = 0;
  for (size_t i = 0; i < len; i++)
    sum += buf[i];
  return sum;
}
