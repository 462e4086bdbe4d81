#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "irs_chanest.h"

#define CHECK(call)                                                             \
    do {                                                                        \
        IrsStatus s_ = (call);                                                  \
        if (s_ != IRS_STATUS_OK) {                                              \
            const char *m_ = irs_last_error();                                  \
            fprintf(stderr, "%s failed: %s (%s)\n", #call, irs_status_string(s_), \
                    m_ ? m_ : "");                                              \
            return 1;                                                           \
        }                                                                       \
    } while (0)

int main(void) {
    IrsSetup *setup = NULL;
    IrsChannel *truth = NULL, *recon = NULL;
    IrsMeasurements *meas = NULL;
    IrsDictionary *dict = NULL;
    IrsEstimate *est = NULL;

    CHECK(irs_setup_preset("desk", &setup));
    CHECK(irs_setup_set_sounding(setup, 32, INFINITY));
    CHECK(irs_setup_set_model(setup, 3, 2));
    CHECK(irs_channel_generate(setup, 7, 0, &truth));
    CHECK(irs_sound(setup, truth, 7, 0, &meas));
    CHECK(irs_dictionary_new(setup, &dict));
    CHECK(irs_estimate(setup, meas, dict, &est));
    CHECK(irs_estimate_reconstruct(est, dict, &recon));

    double nmse = 0.0;
    CHECK(irs_nmse_db(truth, recon, &nmse));
    size_t support = irs_estimate_support_len(est);
    printf("atoms=%zu support=%zu nmse_db=%.2f\n", irs_dictionary_atoms(dict), support, nmse);

    if (irs_setup_preset("nope", &setup) != IRS_STATUS_INVALID_ARGUMENT || irs_last_error() == NULL) {
        fprintf(stderr, "bad preset was accepted\n");
        return 1;
    }

    irs_estimate_free(est);
    irs_dictionary_free(dict);
    irs_measurements_free(meas);
    irs_channel_free(recon);
    irs_channel_free(truth);
    irs_setup_free(setup);
    return nmse < 0.0 ? 0 : 1;
}
