#ifndef MODELADAPT_H
#define MODELADAPT_H

/*
 * C interface to the modeladapt core.
 *
 * Every handle is opaque and owned by the caller; release it with the
 * matching *_free function. Functions return MA_OK or an error status and
 * leave a thread-local message readable through ma_last_error(). Strings
 * returned through char** out-parameters are heap allocated and must be
 * released with ma_string_free(). Output parameters are untouched on failure.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define MA_API __declspec(dllexport)
#else
#  define MA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ma_status {
  MA_OK = 0,
  MA_ERR_PARSE = 1,            /* malformed JSON, CSV or annotation value */
  MA_ERR_MODEL = 2,            /* catalog structure is inconsistent */
  MA_ERR_RESOLUTION = 3,       /* a source path does not resolve */
  MA_ERR_PLAN = 4,             /* request cannot be planned for this client */
  MA_ERR_CONSTRAINT = 5,       /* key, not-null or referential violation */
  MA_ERR_RIGHTS = 6,           /* client lacks the required right */
  MA_ERR_NOT_FOUND = 7,
  MA_ERR_IO = 8,
  MA_ERR_INVALID_ARGUMENT = 9,
  MA_ERR_UNAUTHORIZED = 10,
  MA_ERR_INTERNAL = 11
} ma_status;

typedef struct ma_catalog ma_catalog;
typedef struct ma_store ma_store;
typedef struct ma_engine ma_engine;
typedef struct ma_server ma_server;

MA_API const char* ma_version(void);
MA_API const char* ma_status_name(ma_status status);

/* Message and element location of the last failure on this thread. */
MA_API const char* ma_last_error(void);
MA_API const char* ma_last_error_location(void);

MA_API void ma_string_free(char* s);

/* ---- catalogs ---------------------------------------------------------- */

MA_API ma_status ma_catalog_parse(const char* json, ma_catalog** out);
MA_API ma_status ma_catalog_load(const char* path, ma_catalog** out);
MA_API void ma_catalog_free(ma_catalog* catalog);

MA_API ma_status ma_catalog_to_json(const ma_catalog* catalog, char** out);
MA_API int64_t ma_catalog_version(const ma_catalog* catalog);

/* Writes the catalog to path through a temporary file and a rename. */
MA_API ma_status ma_catalog_save(const ma_catalog* catalog, const char* path);

/*
 * Sets an annotation. target_json is {"schema","table","column"} (any prefix),
 * {"fkey": [schema, name]} or null for the catalog. A NULL value_json removes
 * the annotation. Bumps the catalog version.
 */
MA_API ma_status ma_catalog_set_annotation(ma_catalog* catalog, const char* target_json, const char* tag,
                                           const char* value_json);

/*
 * Prunes the catalog for a client and validates its annotations.
 * roles_csv lists roles separated by commas; NULL or "" means anonymous.
 * diagnostics_json (optional) receives a JSON array; error_count (optional)
 * the number of error-severity diagnostics.
 */
MA_API ma_status ma_catalog_validate(const ma_catalog* catalog, const char* client_id, const char* roles_csv,
                                     char** diagnostics_json, size_t* error_count);

/* The sequencing-study demo catalog as JSON text. Static storage. */
MA_API const char* ma_demo_catalog(void);

/* ---- stores ------------------------------------------------------------ */

/* data_dir NULL or "" keeps everything in memory. */
MA_API ma_status ma_store_open(const ma_catalog* catalog, const char* data_dir, ma_store** out);
MA_API void ma_store_free(ma_store* store);

/* Bulk load of a .csv or .jsonl file as the given identity. Atomic. */
MA_API ma_status ma_store_load_file(ma_store* store, const char* schema, const char* table, const char* path,
                                    const char* identity, size_t* rows_loaded);
MA_API ma_status ma_store_populate_demo(ma_store* store, uint32_t seed);
MA_API ma_status ma_store_row_count(const ma_store* store, const char* schema, const char* table, size_t* count);
MA_API ma_status ma_store_checkpoint(ma_store* store);

/* ---- request engine ---------------------------------------------------- */

/* Optional arguments may be NULL. The store must outlive the engine. */
MA_API ma_status ma_engine_new(ma_store* store, const char* catalog_path, const char* asset_dir,
                               const char* token_file, ma_engine** out);
MA_API void ma_engine_free(ma_engine* engine);

/*
 * Handles one request without a network round trip. query_json and
 * headers_json are JSON objects of strings (or NULL). HTTP-level failures
 * are reported through *http_status and the JSON body, not the return value.
 */
MA_API ma_status ma_engine_handle(ma_engine* engine, const char* method, const char* path, const char* query_json,
                                  const char* headers_json, const char* body, size_t body_len, int* http_status,
                                  char** response_body);

/* ---- HTTP server ------------------------------------------------------- */

MA_API ma_status ma_server_new(ma_engine* engine, ma_server** out);
/* port 0 picks a free port; *bound_port receives the port in use. */
MA_API ma_status ma_server_bind(ma_server* server, const char* host, int port, int* bound_port);
/* Blocks until ma_server_stop() is called from another thread. */
MA_API ma_status ma_server_run(ma_server* server);
MA_API void ma_server_stop(ma_server* server);
MA_API void ma_server_free(ma_server* server);

#ifdef __cplusplus
}
#endif

#endif /* MODELADAPT_H */
