/* C ABI for the lockstep coordination-detection pipeline.
 *
 * Maintained by hand alongside crates/lockstep-ffi/src/lib.rs; keep the two
 * in sync when the surface changes.
 *
 * Conventions:
 *   - functions return LockstepStatus (LOCKSTEP_OK == 0) or a pointer that
 *     is NULL on failure;
 *   - the last error message for the calling thread is returned by
 *     lockstep_last_error() and freed with lockstep_string_free();
 *   - strings returned by this library must be freed with
 *     lockstep_string_free(), never free(3).
 */

#ifndef LOCKSTEP_H
#define LOCKSTEP_H

#include <stdbool.h>
#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum LockstepStatus {
  LOCKSTEP_OK = 0,
  LOCKSTEP_NULL_ARGUMENT = 1,
  LOCKSTEP_INVALID_UTF8 = 2,
  LOCKSTEP_IO = 3,
  LOCKSTEP_DATA = 4,
  LOCKSTEP_CONFIG = 5,
  LOCKSTEP_INTERNAL = 6,
} LockstepStatus;

/* Opaque handle over an ingested dataset. */
typedef struct LockstepDataset LockstepDataset;

/* Library version; static storage, do not free. */
const char *lockstep_version(void);

/* Message of the most recent error on this thread, or NULL. Free the
 * returned string with lockstep_string_free(). */
char *lockstep_last_error(void);

/* Free a string returned by this library. NULL is a no-op. */
void lockstep_string_free(char *s);

/* Ingest posts (JSON-lines), videos (JSON-lines), and channels (CSV).
 * `strict` aborts on dangling references instead of quarantining them.
 * Returns NULL on failure. */
LockstepDataset *lockstep_dataset_open(const char *posts_path,
                                       const char *videos_path,
                                       const char *channels_path,
                                       bool strict);

void lockstep_dataset_free(LockstepDataset *ds);

size_t lockstep_dataset_n_posts(const LockstepDataset *ds);
size_t lockstep_dataset_n_videos(const LockstepDataset *ds);
size_t lockstep_dataset_n_channels(const LockstepDataset *ds);

/* Population standard deviation of factuality scores over labeled posts.
 * Fails with LOCKSTEP_DATA when fewer than two posts are labeled. */
LockstepStatus lockstep_dataset_factuality_std(const LockstepDataset *ds,
                                               double *out);

/* Run the full pipeline from a config file (same flat key-value format the
 * CLI uses); artifacts land in the configured output directory. */
LockstepStatus lockstep_pipeline_run(const char *config_path);

/* Generate a synthetic dataset with planted campaigns into `out_dir`.
 * `spec_json` is a JSON object in the CampaignSpec schema, or NULL for the
 * defaults. `emit_vector_dim` > 0 also writes stand-in sentence vectors of
 * that width. */
LockstepStatus lockstep_synth_generate(const char *spec_json,
                                       const char *out_dir,
                                       size_t emit_vector_dim);

/* Pairwise precision/recall/F1 of an assignment CSV (post_id,label,stage)
 * against a ground-truth CSV (post_id,campaign_id). Out-pointers may be
 * NULL when a value is not wanted. */
LockstepStatus lockstep_score_detection(const char *assignment_csv,
                                        const char *ground_truth_csv,
                                        double *precision,
                                        double *recall,
                                        double *f1);

/* Default configuration rendered in the flat key-value format. Free with
 * lockstep_string_free(). */
char *lockstep_default_config(void);

#ifdef __cplusplus
}
#endif

#endif /* LOCKSTEP_H */
