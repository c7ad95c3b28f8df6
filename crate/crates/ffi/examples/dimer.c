#include <stdio.h>
#include "logholder.h"

int main(void) {
    const double v[2] = {1.5, -1.5};
    LhPotential *pot = NULL;
    LhBands *bands = NULL;
    if (lh_potential_new(v, 2, &pot) != LH_STATUS_OK || lh_bands_new(pot, &bands) != LH_STATUS_OK) {
        char msg[256];
        lh_last_error_message(msg, sizeof msg);
        fprintf(stderr, "error: %s\n", msg);
        return 1;
    }
    for (size_t i = 0; i < lh_bands_count(bands); i++) {
        double lo, hi;
        lh_bands_get(bands, i, &lo, &hi);
        printf("band %zu: [%g, %g]\n", i + 1, lo, hi);
    }
    double k;
    lh_ids(bands, 0.0, &k);
    printf("k(0) = %g\n", k);
    lh_bands_free(bands);
    lh_potential_free(pot);
    return 0;
}
