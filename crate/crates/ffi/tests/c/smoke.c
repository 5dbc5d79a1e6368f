#include <math.h>
#include <stdio.h>
#include "sos_almost.h"

#define CHECK(expr)                                            \
    do {                                                       \
        SosStatus s_ = (expr);                                 \
        if (s_ != SOS_STATUS_OK) {                             \
            char msg[256];                                     \
            sos_last_error_message(msg, sizeof msg, NULL);     \
            fprintf(stderr, "%s -> %d: %s\n", #expr, s_, msg); \
            return 1;                                          \
        }                                                      \
    } while (0)

int main(void) {
    SosPolynomial *f = NULL;
    CHECK(sos_polynomial_parse("x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 1", 2, &f));

    SosBound b;
    CHECK(sos_minimize(f, 5, 2.0, 1e-8, &b));
    if (!b.optimal || b.primal_value > 1e-3 || b.primal_value < -0.05) return 2;

    double radii[] = {1.0, 1.5, 2.0};
    uint32_t orders[] = {3, 4, 5, 6, 7, 8};
    SosCertificate *c = NULL;
    CHECK(sos_find_certificate(f, 0.5, radii, 3, orders, 6, 1e-8, &c));
    int passed = 0;
    double residual = 0.0;
    CHECK(sos_certificate_verify(c, &passed, &residual));
    if (!passed) return 3;

    size_t needed = 0;
    if (sos_certificate_to_json(c, NULL, 0, &needed) != SOS_STATUS_BUFFER_TOO_SMALL) return 4;
    char *json = malloc(needed);
    CHECK(sos_certificate_to_json(c, json, needed, NULL));
    SosCertificate *c2 = NULL;
    CHECK(sos_certificate_from_json(json, &c2));
    free(json);
    CHECK(sos_certificate_verify(c2, &passed, NULL));
    if (!passed) return 5;

    SosPolynomial *bad = NULL;
    if (sos_polynomial_parse("x1^", 1, &bad) != SOS_STATUS_PARSE || bad != NULL) return 6;

    printf("ok %g\n", residual);
    sos_certificate_free(c2);
    sos_certificate_free(c);
    sos_polynomial_free(f);
    return 0;
}
