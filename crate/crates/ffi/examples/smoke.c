#include <math.h>
#include <stdio.h>

#include "fickjacobs.h"

int main(void) {
    FjProfile *throat = NULL;
    double v = 0.0;
    if (fj_profile_throat(2.0, 0.0, &throat) != FJ_STATUS_OK) return 1;
    if (fj_entropic_potential(throat, 0.5, &v) != FJ_STATUS_OK) return 2;
    fj_profile_free(throat);
    if (fabs(v - 1.0) > 1e-12) return 3;

    FjProfile *cell = NULL;
    fj_profile_sinusoidal(1.0, 1.0, 0, &cell);
    FjStatus s = fj_entropic_potential(cell, -1.0, &v);
    fj_profile_free(cell);
    if (s != FJ_STATUS_OUT_OF_DOMAIN || fj_last_error_message() == NULL) return 4;

    printf("%s %.3f\n", fj_version(), v);
    return 0;
}
