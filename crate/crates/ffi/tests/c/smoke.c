#include <stdio.h>
#include <string.h>
#include "swce.h"

#define CHECK(call)                                                             \
  do {                                                                          \
    SwceStatus st_ = (call);                                                    \
    if (st_ != SWCE_STATUS_OK) {                                                \
      fprintf(stderr, "%s -> %d: %s\n", #call, (int)st_, swce_last_error());    \
      return 1;                                                                 \
    }                                                                           \
  } while (0)

static const char *CONFIG =
    "{\"trials\": 1, \"master_seed\": 5,"
    " \"system\": {\"antennas\": 8, \"rf_chains\": 4, \"users\": 1,"
    " \"paths_per_user\": [1], \"frames\": 5, \"frame_len\": 8,"
    " \"delay_spread\": 2, \"snr_db\": 10.0}}";

int main(void) {
  SwceExperiment *exp = NULL;
  SwceResults *res = NULL;
  SwceScenario *sc = NULL;
  SwceEstimate *est = NULL;
  char *csv = NULL;
  size_t rows = 0, paths = 0, user = 0;
  double nmse = 0, theta = 0, tau = 0, re = 0, im = 0;

  if (swce_experiment_new("trials = 0", &exp) != SWCE_STATUS_INVALID_CONFIG || exp != NULL) return 2;
  if (strstr(swce_last_error(), "trials") == NULL) return 3;

  CHECK(swce_experiment_new(CONFIG, &exp));
  CHECK(swce_experiment_run(exp, &res));
  CHECK(swce_results_rows(res, &rows));
  CHECK(swce_results_csv(res, &csv));
  if (rows != 1 || strncmp(csv, "point,", 6) != 0) return 4;
  swce_string_free(csv);

  CHECK(swce_scenario_draw(exp, 3, &sc));
  CHECK(swce_scenario_estimate(sc, SWCE_ESTIMATOR_KIND_NFCFGS, &est));
  CHECK(swce_estimate_nmse(est, &nmse));
  CHECK(swce_estimate_path_count(est, &paths));
  if (paths == 0) return 5;
  CHECK(swce_estimate_path(est, 0, &theta, &tau, &user, &re, &im));
  if (swce_estimate_path(est, paths, &theta, &tau, &user, &re, &im) != SWCE_STATUS_INVALID_ARGUMENT) return 6;
  if (swce_scenario_estimate(sc, 42, &est) != SWCE_STATUS_INVALID_ARGUMENT) return 7;

  printf("version %s rows %zu paths %zu nmse %.4f theta %.4f\n", swce_version(), rows, paths, nmse, theta);
  swce_estimate_free(est);
  swce_scenario_free(sc);
  swce_results_free(res);
  swce_experiment_free(exp);
  return 0;
}
