#include <math.h>
#include <stdio.h>
#include <string.h>

#include "jobbert.h"

int main(int argc, char **argv) {
    if (argc != 2) {
        fprintf(stderr, "usage: smoke CHECKPOINT\n");
        return 64;
    }
    jb_model *model = NULL;
    if (jb_model_load(argv[1], &model) != JB_STATUS_OK) {
        fprintf(stderr, "load: %s\n", jb_last_error_message());
        return 1;
    }
    size_t d = 0, p = 0;
    jb_model_dims(model, &d, &p);

    double v[64];
    size_t n = 0;
    if (jb_model_embed_title(model, "head chef", JB_SPACE_PROJECTED, v, 64, &n) != JB_STATUS_OK) {
        fprintf(stderr, "embed: %s\n", jb_last_error_message());
        return 1;
    }
    double sq = 0.0;
    for (size_t i = 0; i < n; i++) sq += v[i] * v[i];

    const char *labels[] = {"prepare dishes", "plan menus"};
    size_t m = 0;
    jb_status s = jb_model_embed_skill_set(model, labels, 2, v, 64, &m);

    jb_status bad = jb_model_embed_title(model, "   ", JB_SPACE_ENCODER, v, 64, &m);
    printf("dims %zu %zu len %zu norm %.12f skills %d blank %d\n", d, p, n, sqrt(sq), (int)s, (int)bad);
    jb_model_free(model);
    return 0;
}
