#include <stddef.h>

int checksum(const unsigned char *p, size_t n) {
  int s = 0;
  for (size_t i = 0; i < n; i++)
    s ^= p[i];
  return s;
}
