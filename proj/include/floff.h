/* floff — federated offloading toolkit: C API for the shared library.
 *
 * Every function returns a floff_status (FLOFF_OK on success); the
 * thread-local floff_last_error() carries the failure message. Handles are
 * opaque and freed by their matching *_free/_stop function.
 */
#ifndef FLOFF_H
#define FLOFF_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  FLOFF_OK = 0,
  FLOFF_EINVAL = 1,   /* bad argument or configuration */
  FLOFF_EIO = 2,      /* file or socket I/O failure */
  FLOFF_EPROTO = 3,   /* malformed frame, payload, or file format */
  FLOFF_ECRYPTO = 4,  /* token rejected (authentication/format) */
  FLOFF_EEXPIRED = 5, /* token past its time-to-live */
  FLOFF_ETIMEOUT = 6, /* deadline exceeded */
  FLOFF_EDIVERGED = 7,/* training loss became non-finite */
  FLOFF_ERUNTIME = 8  /* any other runtime failure */
} floff_status;

const char* floff_version(void);
/* message for the most recent failure on this thread; never NULL */
const char* floff_last_error(void);

/* ---------- configuration: flat key=value text files ---------- */
typedef struct floff_config floff_config;

floff_config* floff_config_new(void);
floff_status floff_config_load(const char* path, floff_config** out);
floff_status floff_config_set(floff_config* cfg, const char* key, const char* value);
/* NULL when the key is absent; pointer valid until the next mutation */
const char* floff_config_get(const floff_config* cfg, const char* key);
/* iterate keys in sorted order: pass NULL for the first key, then the
 * previous key for the next; returns NULL when exhausted */
const char* floff_config_next_key(const floff_config* cfg, const char* prev_key);
floff_status floff_config_write(const floff_config* cfg, const char* path);
void floff_config_free(floff_config* cfg);

/* ---------- synthetic datasets ---------- */
/* stage 1 or 2; label_noise in [0,1) applies to stage 1 only */
floff_status floff_generate_dataset(int stage, uint64_t n, uint64_t seed,
                                    double label_noise, const char* csv_path);

/* ---------- models ---------- */
typedef struct floff_model floff_model;

/* arch spec strings: "mlp:10,64,2" (layer widths) or
 * "lstm:5,32,10,2" (input,hidden,seq_len,classes) */
floff_status floff_model_init(const char* arch, uint64_t seed, floff_model** out);
floff_status floff_model_load(const char* path, floff_model** out);
floff_status floff_model_save(const floff_model* model, const char* path);
void floff_model_free(floff_model* model);

/* optimizer: "adam" or "sgd" */
floff_status floff_model_train(floff_model* model, const char* dataset_csv,
                               int epochs, int batch, double learning_rate,
                               const char* optimizer, uint64_t seed,
                               double* train_accuracy, double* train_loss);
floff_status floff_model_evaluate(const floff_model* model, const char* dataset_csv,
                                  double* accuracy, double* loss);
floff_status floff_model_digest(const floff_model* model, uint64_t* digest);

/* ---------- shard encryption ---------- */
/* key_out receives 44 characters + NUL */
floff_status floff_fernet_keygen(char key_out[45]);
/* token_out/data_out are heap buffers; release with floff_buffer_free.
 * ttl_s < 0 disables the time-to-live check. */
floff_status floff_fernet_encrypt(const char* key, const uint8_t* data, size_t len,
                                  char** token_out);
floff_status floff_fernet_decrypt(const char* key, const char* token, int64_t ttl_s,
                                  uint8_t** data_out, size_t* len_out);
void floff_buffer_free(void* p);

/* ---------- federated runs ---------- */
/* Each run reads its parameters from cfg (see README for the key tables),
 * writes report.json plus any configured model files under out_dir, and
 * blocks until the run completes. */
floff_status floff_fl_server_run(const floff_config* cfg, const char* out_dir);
floff_status floff_fl_client_run(const floff_config* cfg, const char* out_dir);
floff_status floff_fedoff_server_run(const floff_config* cfg, const char* out_dir);
floff_status floff_fedoff_client_run(const floff_config* cfg, const char* out_dir);

/* ---------- edge/cloud task services ---------- */
typedef struct floff_service floff_service;

/* site: "edge" or "cloud". Returns once the service is listening;
 * *port_out carries the bound port (useful with port 0). */
floff_status floff_service_start(const char* site, const floff_config* cfg,
                                 uint16_t* port_out, floff_service** out);
/* stops and frees the service */
floff_status floff_service_stop(floff_service* service);

/* ---------- task execution ---------- */
/* task specs: "calc_add:a,b"  "calc_sub:a,b"  "calc_mul:a,b"  "calc_div:a,b"
 *             "matmul:n[,seed_a,seed_b]"      "file_create:bytes[,seed]"
 *             "sort:count[,seed]"             "search:count[,seed,needle]"
 * mode: "local", "edge", "cloud", or "auto" (route via the decision models).
 * Writes an execution-record JSON to out_path when non-NULL. */
floff_status floff_task_exec(const floff_config* cfg, const char* task_spec,
                             const char* mode, const char* out_path);
/* runs the task locally and via the edge endpoint, writes a comparison row
 * JSON to out_path when non-NULL */
floff_status floff_task_compare(const floff_config* cfg, const char* task_spec,
                                const char* out_path);

/* ---------- offloading decision ---------- */
/* pref: "local" or "remote"; window_csv may be NULL when the task is not
 * compute-intensive (it is only read when stage 2 runs). verdict_out points
 * at a static string: "LocalExecute", "OffloadEdge", or "OffloadCloud". */
floff_status floff_decide(const floff_config* cfg, const char* task_spec,
                          const char* pref, const char* window_csv,
                          const char** verdict_out);

/* ---------- multi-user simulation ---------- */
/* cfg key "users" may be a comma list; writes one CSV row per user count
 * plus a JSON summary (either path may be NULL to skip) */
floff_status floff_simulate(const floff_config* cfg, const char* csv_path,
                            const char* json_path);

/* ---------- report rendering ---------- */
/* renders a run report JSON as human-readable text; release with
 * floff_buffer_free */
floff_status floff_report_render(const char* report_json_path, char** text_out);

#ifdef __cplusplus
}
#endif

#endif /* FLOFF_H */
