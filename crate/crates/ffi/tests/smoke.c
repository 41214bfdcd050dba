#include <math.h>
#include <stdio.h>

#include "ssep.h"

#define CHECK(call)                                                          \
    do {                                                                     \
        SsepStatus status_ = (call);                                         \
        if (status_ != SSEP_STATUS_OK) {                                     \
            fprintf(stderr, "%s failed: %d %s\n", #call, (int)status_,      \
                    ssep_last_error_message());                              \
            return 1;                                                        \
        }                                                                    \
    } while (0)

int main(void) {
    SsepStationary *pi = NULL;
    CHECK(ssep_stationary_new(5, 1.0, 1e-13, &pi));
    size_t x = 2;
    double m = 0.0;
    CHECK(ssep_stationary_moment(pi, &x, 1, &m));
    ssep_stationary_free(pi);
    if (fabs(m - 2.0 / 6.0) > 1e-10) {
        fprintf(stderr, "m1(2) = %.17g\n", m);
        return 1;
    }

    SsepLadder *ladder = NULL;
    if (ssep_ladder_new(16, 1.0, 4, 5, 10, 1e-13, &ladder) != SSEP_STATUS_VALIDATION || ladder != NULL) {
        fprintf(stderr, "adjacent start accepted\n");
        return 1;
    }
    CHECK(ssep_ladder_new(16, 1.0, 4, 9, 10, 1e-13, &ladder));
    SsepLadderSummary s;
    CHECK(ssep_ladder_summary(ladder, &s));
    ssep_ladder_free(ladder);

    printf("ssep %s: m1(2) = %.12f, P_inf = %.12f\n", ssep_version(), m, s.p_inf);
    return 0;
}
