#include <stdio.h>
#include <stdlib.h>
#include "../include/crx.h"

static unsigned char file_buf[1 << 16];

int main(int argc, char **argv) {
  if (argc < 2)
    return 1;
  FILE *f = fopen(argv[1], "rb");
  if (!f)
    return 1;
  size_t n = fread(file_buf, 1, sizeof(file_buf), f);
  fclose(f);
  LibRaw raw;
  if (raw.open_buffer(file_buf, n) != 0)
    return 2;
  return raw.unpack();
}
