/* Builds a distribution through the C interface, evaluates the
 * treatment-specific mean and its influence function, and checks that the
 * influence function has mean zero. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "eifcheck.h"

int main(void) {
    EifDistribution *d = NULL;
    if (eif_distribution_generate("{\"family\": \"point\", \"w_levels\": 3}", 5, &d) != EIF_STATUS_OK) {
        return 1;
    }
    size_t n = 0;
    eif_distribution_num_points(d, &n);
    double *joint = malloc(n * sizeof(double));
    double *values = malloc(n * sizeof(double));
    size_t written = 0;
    eif_distribution_joint(d, joint, n, &written);

    EifInfluence *f = NULL;
    if (eif_influence_new(d, "{\"kind\": \"tsm\"}", &f) != EIF_STATUS_OK) {
        return 2;
    }
    double psi = 0.0, var = 0.0;
    eif_influence_summary(f, &psi, &var);
    eif_influence_values(f, values, n, &written);
    double mean = 0.0;
    for (size_t i = 0; i < n; i++) {
        mean += joint[i] * values[i];
    }
    printf("points %zu psi %.12f var %.12f mean %.3e\n", n, psi, var, mean);

    EifDistribution *bad = NULL;
    EifStatus s = eif_distribution_from_json("{", &bad);
    char msg[256];
    eif_last_error(msg, sizeof msg);
    printf("parse status %d: %s\n", (int)s, msg);

    eif_influence_free(f);
    eif_distribution_free(d);
    free(joint);
    free(values);
    return (fabs(mean) < 1e-12 && s == EIF_STATUS_PARSE) ? 0 : 3;
}
