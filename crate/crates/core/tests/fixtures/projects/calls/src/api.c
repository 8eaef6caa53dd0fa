#include <stddef.h>

int scale(int v);
unsigned long fact(unsigned n);
void log_msg(const char *msg);

int api_score(const int *vals, size_t n) {
  int total = 0;
  for (size_t i = 0; i < n; i++)
    total += scale(vals[i]);
  log_msg("api_score(done)");
  return total;
}

unsigned long api_perm(unsigned n) {
  log_msg("perm");
  return fact(n);
}

int checksum(const unsigned char *p, size_t n) {
  int s = 0;
  while (n--)
    s += *p++;
  return s;
}
