/* Simulate the cyclic model, then fit it back from the observed coordinate.
 *
 *   cc simulate_and_fit.c -I../include -L../../../target/release -lhypoctrl_ffi -lm -lpthread -ldl
 */
#include <stdio.h>
#include <stdlib.h>

#include "hypoctrl.h"

static int report(hc_status s) {
    if (s == HC_STATUS_OK) return 0;
    char *msg = hc_last_error_message();
    fprintf(stderr, "error %d: %s\n", (int)s, msg ? msg : "(none)");
    hc_string_free(msg);
    return 1;
}

int main(void) {
    hc_model *model = NULL;
    if (report(hc_model_new("cyclic", &model))) return 1;

    size_t d_v, d_u, d_o, n_params;
    hc_model_dims(model, &d_v, &d_u, &d_o, &n_params);

    double truth[2] = {0.2, 0.15};
    double z0[3] = {0.0, 0.0, 0.0};
    hc_trajectory *traj = NULL;
    if (report(hc_simulate(model, truth, 2, z0, 3, 10.0, 1000, 7, &traj))) return 1;

    size_t points;
    double dt;
    hc_trajectory_shape(traj, &points, &dt);
    double *y = malloc(points * d_o * sizeof *y);
    hc_trajectory_observations(traj, y, points * d_o);

    double weights[2] = {1e15, 1e20};
    double init[2] = {0.3, 0.1};
    hc_estimate_t *est = NULL;
    if (report(hc_estimate(model, y, points, dt, weights, 2, init, 2, z0, 3, &est))) return 1;

    double psi[2], w_hat;
    hc_estimate_params(est, psi, 2, &w_hat);
    printf("nu=%.4f c=%.4f w=%.0e\n", psi[0], psi[1], w_hat);

    hc_estimate_free(est);
    hc_trajectory_free(traj);
    hc_model_free(model);
    free(y);
    return 0;
}
