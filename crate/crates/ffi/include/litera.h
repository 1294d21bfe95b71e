#ifndef LITERA_H
#define LITERA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes. Zero is success.
 */
typedef enum LiteraStatus {
  LITERA_STATUS_OK = 0,
  LITERA_STATUS_NULL_ARGUMENT = 1,
  LITERA_STATUS_INVALID_UTF8 = 2,
  LITERA_STATUS_INVALID_ARGUMENT = 3,
  LITERA_STATUS_IO = 4,
  LITERA_STATUS_CONFIG = 5,
  LITERA_STATUS_PROVIDER = 6,
  LITERA_STATUS_INPUT = 7,
  LITERA_STATUS_PANIC = 99,
} LiteraStatus;

/*
 Parallel corpus loaded from JSONL or TSV.
 */
typedef struct LiteraCorpus LiteraCorpus;

/*
 Translation pipeline with its own async runtime.
 */
typedef struct LiteraPipeline LiteraPipeline;

/*
 Corpus BLEU with its components. Precisions are fractions in [0, 1].
 */
typedef struct LiteraBleu {
  double score;
  double precisions[4];
  double brevity_penalty;
  size_t sys_len;
  size_t ref_len;
} LiteraBleu;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null. The pointer is
 valid until the next litera call on this thread; do not free it.
 */
const char *litera_last_error(void);

/*
 Library version as a static string; do not free it.
 */
const char *litera_version(void);

/*
 Releases a string returned by this library. Null is ignored.
 */
void litera_string_free(char *s);

/*
 13a tokenization. `*out` receives the tokens joined by single spaces.
 */
enum LiteraStatus litera_tokenize_13a(const char *text, char **out);

/*
 Corpus BLEU over `n` aligned hypothesis/reference strings.
 */
enum LiteraStatus litera_bleu(const char *const *hypotheses,
                              const char *const *references,
                              size_t n,
                              struct LiteraBleu *out);

/*
 Built-in prompt text by name (`fine_tuned_system`, `revision`,
 `final_filter`, `non_literal`, `baseline_translator`, `output_cleaner`).
 */
enum LiteraStatus litera_prompt_text(const char *name, char **out);

/*
 Loads a corpus; the format follows the extension (`.tsv` or JSONL).
 */
enum LiteraStatus litera_corpus_load(const char *path, struct LiteraCorpus **out);

/*
 Segment count, or 0 for a null handle.
 */
size_t litera_corpus_len(const struct LiteraCorpus *corpus);

/*
 Writes chat-format fine-tuning records using the built-in fine-tuned
 system prompt. `out_count` may be null.
 */
enum LiteraStatus litera_corpus_export_finetune(const struct LiteraCorpus *corpus,
                                                const char *out_path,
                                                size_t *out_count);

void litera_corpus_free(struct LiteraCorpus *corpus);

/*
 Pipeline from a TOML config file. A null path uses `LITERA_CONFIG` or
 defaults; environment overrides apply either way.
 */
enum LiteraStatus litera_pipeline_from_config(const char *config_path, struct LiteraPipeline **out);

/*
 Offline pipeline answering from a mock script (TOML, or JSON by
 extension). `variant` may be null for the full pipeline.
 */
enum LiteraStatus litera_pipeline_from_mock(const char *script_path,
                                            const char *variant,
                                            struct LiteraPipeline **out);

/*
 Changes the variant used by later translations.
 */
enum LiteraStatus litera_pipeline_set_variant(struct LiteraPipeline *pipeline, const char *variant);

/*
 Translates one segment. `out_final` receives the literal translation.
 When `non_literal` is nonzero the readability pass also runs and
 `out_non_literal` (if not null) receives it. `out_trace_json` (if not
 null) receives the JSON trace.
 */
enum LiteraStatus litera_pipeline_translate(const struct LiteraPipeline *pipeline,
                                            const char *latin,
                                            int non_literal,
                                            char **out_final,
                                            char **out_non_literal,
                                            char **out_trace_json);

void litera_pipeline_free(struct LiteraPipeline *pipeline);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LITERA_H */
