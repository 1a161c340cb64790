/* texfuse C API.
 *
 * Maintained by hand to match crates/texfuse-ffi/src/lib.rs; keep the two in
 * sync when adding functions.
 *
 * Conventions:
 *  - Every fallible function returns a texfuse_status (TEXFUSE_OK == 0).
 *  - On failure, texfuse_last_error_message() describes the error for the
 *    calling thread.
 *  - Handles are created/destroyed with paired _open/_free functions;
 *    passing NULL to a _free is a no-op.
 */

#ifndef TEXFUSE_H
#define TEXFUSE_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum texfuse_status {
    TEXFUSE_OK = 0,
    TEXFUSE_NULL_POINTER = 1,
    TEXFUSE_INVALID_ARGUMENT = 2,
    TEXFUSE_IO_ERROR = 3,
    TEXFUSE_DATA_ERROR = 4,
    TEXFUSE_BUFFER_TOO_SMALL = 5,
} texfuse_status;

/* Opaque trained one-vs-rest linear SVM. */
typedef struct TexfuseSvm TexfuseSvm;

/* Static NUL-terminated library version string. */
const char *texfuse_version(void);

/* Copy the calling thread's last error message into buf (NUL-terminated,
 * truncated to len). Returns the full message length in bytes excluding the
 * terminator. buf may be NULL to query the length. */
size_t texfuse_last_error_message(char *buf, size_t len);

/* Dimension of the default ten-template PRICoLBP descriptor (5900). */
size_t texfuse_pricolbp_dim(void);

/* Compute the default PRICoLBP descriptor of a row-major grayscale image of
 * width*height doubles. out must hold at least texfuse_pricolbp_dim()
 * doubles. */
texfuse_status texfuse_pricolbp_compute(const double *pixels,
                                        size_t width,
                                        size_t height,
                                        double *out,
                                        size_t out_len);

/* Chi-squared kernel similarity of two equal-length non-negative vectors. */
texfuse_status texfuse_chi2_similarity(const double *x,
                                       const double *y,
                                       size_t len,
                                       double *out);

/* Load a trained SVM from a TFMD model file written by `texfuse train`. On
 * success *out owns the handle until texfuse_svm_free. */
texfuse_status texfuse_svm_open(const char *path, TexfuseSvm **out);

/* Destroy a handle from texfuse_svm_open. NULL is a no-op. */
void texfuse_svm_free(TexfuseSvm *svm);

/* Number of classes in the model (0 for NULL). */
size_t texfuse_svm_num_classes(const TexfuseSvm *svm);

/* Feature dimension expected by the model (0 for NULL). */
size_t texfuse_svm_dim(const TexfuseSvm *svm);

/* Copy the label of class `index` into buf (NUL-terminated, truncated to
 * len). Returns the full label length in bytes; 0 for NULL handle or
 * out-of-range index. buf may be NULL to query the length. */
size_t texfuse_svm_class_name(const TexfuseSvm *svm,
                              size_t index,
                              char *buf,
                              size_t len);

/* Predict the class of a feature vector of `len` doubles; writes the winning
 * class index (see texfuse_svm_class_name). */
texfuse_status texfuse_svm_predict(const TexfuseSvm *svm,
                                   const double *x,
                                   size_t len,
                                   size_t *out_class);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* TEXFUSE_H */
