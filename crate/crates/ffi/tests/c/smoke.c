#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "statfield.h"

#define CHECK(call)                                                            \
  do {                                                                         \
    SfStatus s_ = (call);                                                      \
    if (s_ != SF_STATUS_OK) {                                                  \
      const char *m_ = sf_last_error_message();                                \
      fprintf(stderr, "%s failed: %d %s\n", #call, (int)s_, m_ ? m_ : "");     \
      return 1;                                                                \
    }                                                                          \
  } while (0)

int main(void) {
  SfMeasure *m = NULL;
  SfGrid *g = NULL;
  SfGos *gos = NULL;
  double re[4], im[4];
  double c0 = 0.0;

  CHECK(sf_measure_fixture(&m));
  CHECK(sf_grid_new(1, 8.0, 512, &g));
  CHECK(sf_gamma_bumps(m, g, &c0, 0.5, &c0, 0.5, re, im, 4));
  printf("gamma %.12f %.12f %.12f %.12f\n", re[0], re[1], re[2], re[3]);

  const char *bad = "{\"d\":1,\"n\":2,\"atoms\":[{\"omega\":[0.0],"
                    "\"weight_re\":[[1.0,2.0],[2.0,1.0]]}]}";
  SfMeasure *indefinite = NULL;
  SfStatus s = sf_measure_from_json(bad, &indefinite);
  printf("indefinite %d %s\n", (int)s, sf_last_error_message());
  if (s != SF_STATUS_INVALID_MEASURE || indefinite != NULL) return 1;

  CHECK(sf_gos_new(m, 200, 42, &gos));
  size_t atoms[2] = {0, 2};
  size_t len = sf_gos_ensemble_size(gos) * sf_measure_dim_h(m);
  double *xr = malloc(len * sizeof(double));
  double *xi = malloc(len * sizeof(double));
  CHECK(sf_gos_xi_of_set(gos, atoms, 2, xr, xi, len));
  printf("xi %zu %.17g\n", len, xr[0]);
  if (sf_gos_xi_of_set(gos, atoms, 2, xr, xi, len - 1) != SF_STATUS_BUFFER_TOO_SMALL) return 1;

  free(xr);
  free(xi);
  sf_gos_free(gos);
  sf_grid_free(g);
  sf_measure_free(m);
  printf("version %s\n", sf_version());
  return 0;
}
