#include <math.h>
#include <stdio.h>
#include "frgauss.h"

#define CHECK(cond)                                                    \
  do {                                                                 \
    if (!(cond)) {                                                     \
      char msg[256];                                                   \
      fr_last_error_message(msg, sizeof msg);                          \
      fprintf(stderr, "line %d: %s (%s)\n", __LINE__, #cond, msg);     \
      return 1;                                                        \
    }                                                                  \
  } while (0)

int main(void) {
  const double a[4] = {1.0, 0.0, 0.0, 1.0};
  const double b[4] = {4.0, 0.0, 0.0, 1.0};
  const double bad[4] = {1.0, 2.0, 2.0, 1.0};
  FrSpd *pa = NULL, *pb = NULL, *mid = NULL, *none = NULL;
  double d = 0.0, buf[4];

  CHECK(fr_spd_new(a, 2, &pa) == FR_STATUS_OK);
  CHECK(fr_spd_new(b, 2, &pb) == FR_STATUS_OK);
  CHECK(fr_distance(pa, pb, &d) == FR_STATUS_OK);
  CHECK(fabs(d - log(4.0) / sqrt(2.0)) < 1e-14);

  CHECK(fr_geodesic(pa, pb, 0.5, &mid) == FR_STATUS_OK);
  CHECK(fr_spd_copy(mid, buf, 4) == FR_STATUS_OK);
  CHECK(fabs(buf[0] - 2.0) < 1e-14 && fabs(buf[3] - 1.0) < 1e-14);

  CHECK(fr_spd_new(bad, 2, &none) == FR_STATUS_NOT_POSITIVE_DEFINITE);
  CHECK(none == NULL);
  CHECK(fr_last_error_message(NULL, 0) > 0);

  fr_spd_free(mid);
  fr_spd_free(pb);
  fr_spd_free(pa);
  puts("ok");
  return 0;
}
