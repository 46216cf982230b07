#include <math.h>
#include <stdio.h>
#include "riskratio.h"

int main(void) {
    double x[] = {0.0, 1.0, 2.0, 3.0};
    uint8_t t[] = {1, 1, 0, 0};
    double y[] = {2.0, 4.0, 1.0, 1.0};
    RrDataset *d = NULL;
    if (rr_dataset_new(x, 4, 1, t, y, &d) != RR_STATUS_OK) {
        fprintf(stderr, "new: %s\n", rr_last_error_message());
        return 1;
    }
    RrEstimateOptions o = rr_estimate_options_default();
    o.method = RR_METHOD_NEYMAN;
    RrResult r;
    if (rr_estimate(d, &o, &r) != RR_STATUS_OK) {
        fprintf(stderr, "estimate: %s\n", rr_last_error_message());
        return 1;
    }
    rr_dataset_free(d);
    if (fabs(r.point - 3.0) > 1e-12) {
        fprintf(stderr, "point %f\n", r.point);
        return 1;
    }
    double v, se;
    if (rr_true_rr("linear_rct", 100000, 1, &v, &se) != RR_STATUS_OK || v != 2.0) {
        return 1;
    }
    if (rr_true_rr("bogus", 100000, 1, &v, &se) != RR_STATUS_INVALID_ARGUMENT) {
        return 1;
    }
    printf("ok %s %.3f\n", rr_version(), r.point);
    return 0;
}
