#include <stdio.h>
#include "flexbuffers.h"

static uint8_t contents[4096];

static int LoadFlexFile(const char *path) {
  FILE *f = fopen(path, "rb");
  if (!f)
    return -1;
  size_t len = fread(contents, 1, sizeof(contents), f);
  fclose(f);
  if (!flexbuffers::VerifyBuffer(contents, len)) {
    fprintf(stderr, "%s: not a valid FlexBuffer\n", path);
    return -1;
  }
  flexbuffers::Reference root = flexbuffers::GetRoot(contents, len);
  printf("%lld\n", (long long)flexbuffers::AsInt64(root));
  return 0;
}

int main(int argc, char **argv) {
  int rc = 0;
  for (int i = 1; i < argc; i++)
    rc |= LoadFlexFile(argv[i]);
  return rc;
}
