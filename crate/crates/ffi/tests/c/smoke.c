#include <math.h>
#include <stdio.h>
#include <string.h>

#include "dfpo.h"

#define CHECK(cond)                                                \
    do {                                                           \
        if (!(cond)) {                                             \
            fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
            return 1;                                              \
        }                                                          \
    } while (0)

int main(void) {
    double sol[4] = {1, 1, 0, 0};
    double draft[4] = {0.9, 0.4, 0, 0};
    size_t dl[4] = {2, 2, 2, 2};
    size_t sl[4] = {3, 3, 3, 3};
    DfpoRewardGroup *g = NULL;
    CHECK(dfpo_reward_group_new(sol, draft, dl, sl, 4, &g) == DFPO_STATUS_OK);
    CHECK(dfpo_reward_group_len(g) == 4);

    double a_d[4], a_s[4], bias[4];
    CHECK(dfpo_advantages(g, true, a_d, a_s, bias, 4) == DFPO_STATUS_OK);
    CHECK(fabs(a_s[0] - 1.0) < 1e-12 && fabs(a_s[3] + 1.0) < 1e-12);

    double obj = 0;
    CHECK(dfpo_group_objective(g, true, &obj) == DFPO_STATUS_OK);
    dfpo_reward_group_free(g);

    CHECK(dfpo_reward_group_new(sol, draft, dl, sl, 1, &g) == DFPO_STATUS_INVALID_ARGUMENT);
    char msg[128];
    CHECK(dfpo_last_error_message(msg, sizeof msg) > 0);

    DfpoEvalSpec *spec = NULL;
    CHECK(dfpo_eval_spec_route("text", "python string", &spec) == DFPO_STATUS_OK);
    double score = -1;
    uint8_t bin = 9;
    CHECK(dfpo_evaluate(spec, "\"Paris\"", "\"paris\"", &score, &bin) == DFPO_STATUS_OK);
    dfpo_eval_spec_free(spec);

    double f1 = 0;
    CHECK(dfpo_token_f1("a b c", "a b c", &f1) == DFPO_STATUS_OK && f1 == 1.0);

    printf("%s ok score=%g objective=%g\n", dfpo_version(), score, obj);
    return 0;
}
