/* Minimal C client: sizing report, then encode and decode an ARM command. */
#include <stdio.h>
#include <string.h>

#include "hexaflight.h"

static int fail(const char *what) {
    char msg[256];
    hf_last_error_message(msg, sizeof msg);
    fprintf(stderr, "%s: %s\n", what, msg);
    return 1;
}

int main(void) {
    HfSizingReport r;
    if (hf_sizing_reference(&r) != HF_STATUS_OK) return fail("sizing");
    printf("flight_time_min %.2f\n", r.flight_time_min);

    HfCodec *gcs = NULL, *vehicle = NULL;
    if (hf_codec_new(255, 190, &gcs) != HF_STATUS_OK) return fail("codec");
    if (hf_codec_new(1, 1, &vehicle) != HF_STATUS_OK) return fail("codec");

    const char *fields[] = {"target_system", "target_component", "command", "param1"};
    const double values[] = {1, 1, 400, 1};
    uint8_t buf[64];
    size_t n = 0;
    if (hf_codec_encode(gcs, "COMMAND", fields, values, 4, buf, sizeof buf, &n) != HF_STATUS_OK)
        return fail("encode");
    printf("frame_len %zu\n", n);

    size_t ready = 0;
    if (hf_codec_feed(vehicle, buf, n, &ready) != HF_STATUS_OK) return fail("feed");
    HfFrameInfo info;
    uint8_t payload[255];
    uint8_t got = 0;
    if (hf_codec_next_frame(vehicle, &info, payload, sizeof payload, &got) != HF_STATUS_OK || !got)
        return fail("next_frame");
    double cmd = 0;
    if (hf_codec_field(vehicle, info.msg_id, payload, info.payload_len, "command", 0, &cmd) != HF_STATUS_OK)
        return fail("field");
    printf("msg_id %u command %.0f\n", info.msg_id, cmd);

    hf_codec_free(gcs);
    hf_codec_free(vehicle);
    return 0;
}
