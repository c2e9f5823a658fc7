#ifndef CASCADE_RL_H_
#define CASCADE_RL_H_

/*
 * C interface to the cascade simulator and its learning harness.
 *
 * Every function returns CRL_OK (0) or a negative error code; the message of
 * the most recent failure on the calling thread is available from
 * crl_last_error(). Strings handed out through char** parameters are owned by
 * the caller and must be released with crl_string_free().
 */

#include <stddef.h>
#include <stdint.h>

#if defined(CRL_BUILDING_LIBRARY)
  #define CRL_API __attribute__((visibility("default")))
#else
  #define CRL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

enum crl_error_code {
    CRL_OK = 0,
    CRL_ERROR_INVALID_ARGUMENT = -1,
    CRL_ERROR_CONFIG = -2,
    CRL_ERROR_CASE = -3,
    CRL_ERROR_NUMERICAL = -4,
    CRL_ERROR_IO = -5,
    CRL_ERROR_INVALID_OBJECT = -6,
    CRL_ERROR_UNKNOWN = -100,
};

CRL_API const char* crl_version(void);
CRL_API const char* crl_error_description(int code);

/* Message of the last failed call on this thread ("" if none). */
CRL_API const char* crl_last_error(void);

CRL_API void crl_string_free(char* str);

/* Network handles */
typedef struct crl_network_struct* crl_network_t;

CRL_API int crl_network_load(crl_network_t* net, const char* path);
CRL_API int crl_network_parse(crl_network_t* net, const char* text);
CRL_API int crl_network_destroy(crl_network_t net);

/* Serializes back into case-file text. */
CRL_API int crl_network_write(crl_network_t net, char** text);

/* Counts of buses and of in-service branches, generators and loads. */
CRL_API int crl_network_counts(crl_network_t net, size_t* buses, size_t* branches, size_t* gens, size_t* loads);

/* Length of the observation vector the cascade engine builds for this network. */
CRL_API int crl_network_state_dim(crl_network_t net, size_t* dim);

/*
 * DCOPF on the slack island with branch limits scaled by alpha. The JSON
 * object carries feasible, objective, shed_total, p_gen and p_load_served
 * (per-unit, by record).
 */
CRL_API int crl_dcopf_json(crl_network_t net, double alpha, char** json);

/*
 * AC power flow under the alpha = 1 DCOPF dispatch. *converged is set to 0 or
 * 1; a non-converged solve still returns CRL_OK with the diagnostics.
 */
CRL_API int crl_pf_json(crl_network_t net, char** json, int* converged);

enum crl_attack_mode {
    CRL_ATTACK_UNIFORM = 0,
    CRL_ATTACK_IMPORTANT = 1,
};

/*
 * One episode where every stage plays alpha (which must be a member of the
 * action set). summary receives a JSON object; trace, when non-null, the
 * per-generation JSON lines.
 */
CRL_API int crl_episode_json(crl_network_t net, double alpha, uint64_t seed, int attack_mode, char** summary,
                             char** trace);

/* Value-network checkpoints */
typedef struct crl_valuenet_struct* crl_valuenet_t;

CRL_API int crl_valuenet_load(crl_valuenet_t* vn, const char* path);
CRL_API int crl_valuenet_destroy(crl_valuenet_t vn);
CRL_API int crl_valuenet_info(crl_valuenet_t vn, char** json);

/*
 * Training and evaluation from a JSON config file. Reports are written to the
 * config's output_dir; summary receives the summary.json contents (plus the
 * checkpoint path after training).
 */
CRL_API int crl_train(const char* config_path, char** summary);

/* checkpoint_path may be null for the random and fixed agents. */
CRL_API int crl_evaluate(const char* config_path, const char* checkpoint_path, char** summary);

#ifdef __cplusplus
}
#endif

#endif
