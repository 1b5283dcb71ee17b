#include <math.h>
#include <stdio.h>
#include "fintime.h"

#define CHECK(cond)                                                   \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "FAIL %s:%d %s (%s)\n", __FILE__, __LINE__, #cond, \
              ft_last_error());                                       \
      return 1;                                                       \
    }                                                                 \
  } while (0)

int main(void) {
  const double a[4] = {-1.0, 0.0, 0.0, 2.0};
  FtProcess *p = NULL;
  CHECK(ft_process_constant_interval(2, a, 0.0, 1.0, 21, &p) == FT_STATUS_OK);
  CHECK(ft_process_dim(p) == 2);

  FtSpectrum *s = NULL;
  CHECK(ft_spectrum_compute(p, 64, 1, &s) == FT_STATUS_OK);
  CHECK(ft_spectrum_interval_count(s) == 2);
  double iv[4];
  CHECK(ft_spectrum_intervals(s, iv, 3) == FT_STATUS_BUFFER_TOO_SMALL);
  CHECK(ft_spectrum_intervals(s, iv, 4) == FT_STATUS_OK);
  CHECK(fabs(iv[0] + 1.0) < 1e-6 && fabs(iv[3] - 2.0) < 1e-6);
  bool hyp = false;
  int64_t k = -1;
  double radius = 0.0;
  CHECK(ft_spectrum_summary(s, &hyp, &k, &radius, NULL) == FT_STATUS_OK);
  CHECK(hyp && k == 1 && fabs(radius - 1.0) < 1e-6);

  FtProcess *q = NULL;
  CHECK(ft_process_shift(p, 2.0, &q) == FT_STATUS_OK);
  FtSpectrum *sq = NULL;
  CHECK(ft_spectrum_compute(q, 64, 1, &sq) == FT_STATUS_OK);
  CHECK(ft_spectrum_summary(sq, &hyp, NULL, NULL, NULL) == FT_STATUS_OK);
  CHECK(!hyp);

  CHECK(ft_spectrum_compute(NULL, 64, 1, &sq) == FT_STATUS_NULL_POINTER);
  printf("ok %s\n", ft_version());
  ft_spectrum_free(sq);
  ft_spectrum_free(s);
  ft_process_free(q);
  ft_process_free(p);
  return 0;
}
