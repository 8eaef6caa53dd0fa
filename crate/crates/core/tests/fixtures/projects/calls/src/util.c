#include <stddef.h>

/* helpers shared by the api: log_msg("x") in a comment is not a call */
static int clamp(int v, int lo, int hi) {
  if (v < lo)
    return lo;
  if (v > hi)
    return hi;
  return v;
}

int scale(int v) {
  int a = clamp(v, 0, 100);
  int b = clamp(v * 2, 0, 100);
  return a + b;
}

unsigned long fact(unsigned n) {
  if (n < 2)
    return 1;
  return n * fact(n - 1);
}

void log_msg(const char *msg) {
  (void)msg;
}
