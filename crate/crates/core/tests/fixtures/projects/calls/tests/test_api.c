int api_score(const int *vals, unsigned long n);
int scale(int v);

int test_scale(void) {
  return scale(10) == 30 ? 0 : 1;
}

int run_api_test(void) {
  int v[2] = {1, 2};
  return api_score(v, 2);
}
