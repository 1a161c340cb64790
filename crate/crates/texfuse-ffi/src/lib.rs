//! C ABI for texfuse: opaque handles, integer status codes, and a
//! thread-local last-error message. The matching header is
//! `include/texfuse.h`.
//!
//! Conventions:
//! - Every fallible function returns a `TexfuseStatus` (0 = OK).
//! - Pointers are never retained past the call unless documented.
//! - Handles are created/destroyed with paired `_open`/`_free` functions;
//!   passing NULL to a `_free` is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use texfuse::classify::{chi2_similarity, LinearSvmModel};
use texfuse::imgcore::GrayImage;
use texfuse::lbp::{LbpConfig, PatternIndexTable};
use texfuse::pricolbp::{pricolbp_descriptor, TemplateSet, BINS_PER_TEMPLATE};
use texfuse::tfmd::ModelFile;
use texfuse::TexError;

/// Status codes mirrored in the C header.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TexfuseStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    IoError = 3,
    DataError = 4,
    BufferTooSmall = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

fn status_of(err: &TexError) -> TexfuseStatus {
    match err {
        TexError::InvalidArgument(_) | TexError::DimensionMismatch { .. } => {
            TexfuseStatus::InvalidArgument
        }
        TexError::Io { .. } => TexfuseStatus::IoError,
        _ => TexfuseStatus::DataError,
    }
}

fn fail(err: TexError) -> TexfuseStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn null_ptr(what: &str) -> TexfuseStatus {
    set_error(&format!("{what} must not be NULL"));
    TexfuseStatus::NullPointer
}

/// Copy the last error message for the calling thread into `buf`
/// (NUL-terminated, truncated to `len`). Returns the full message length in
/// bytes, excluding the terminator.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be NULL (query mode).
#[no_mangle]
pub unsafe extern "C" fn texfuse_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn texfuse_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Dimension of the default ten-template PRICoLBP descriptor.
#[no_mangle]
pub extern "C" fn texfuse_pricolbp_dim() -> usize {
    TemplateSet::ten_templates().len() * BINS_PER_TEMPLATE
}

/// Compute the default PRICoLBP descriptor of a row-major grayscale image.
///
/// # Safety
/// `pixels` must point to `width * height` doubles; `out` must point to
/// `out_len >= texfuse_pricolbp_dim()` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn texfuse_pricolbp_compute(
    pixels: *const f64,
    width: usize,
    height: usize,
    out: *mut f64,
    out_len: usize,
) -> TexfuseStatus {
    if pixels.is_null() {
        return null_ptr("pixels");
    }
    if out.is_null() {
        return null_ptr("out");
    }
    let dim = texfuse_pricolbp_dim();
    if out_len < dim {
        set_error(&format!("out_len {out_len} < descriptor dimension {dim}"));
        return TexfuseStatus::BufferTooSmall;
    }
    let data = std::slice::from_raw_parts(pixels, width * height).to_vec();
    let result = GrayImage::new(width, height, data).and_then(|img| {
        let cfg = LbpConfig::new(8, 1.0)?;
        let table = PatternIndexTable::new(8);
        pricolbp_descriptor(&img, &cfg, &TemplateSet::ten_templates(), &table)
    });
    match result {
        Ok(desc) => {
            std::ptr::copy_nonoverlapping(desc.as_ptr(), out, dim);
            TexfuseStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Chi-squared kernel similarity of two equal-length non-negative vectors.
///
/// # Safety
/// `x` and `y` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn texfuse_chi2_similarity(
    x: *const f64,
    y: *const f64,
    len: usize,
    out: *mut f64,
) -> TexfuseStatus {
    if x.is_null() || y.is_null() {
        return null_ptr("x/y");
    }
    if out.is_null() {
        return null_ptr("out");
    }
    let xs = std::slice::from_raw_parts(x, len);
    let ys = std::slice::from_raw_parts(y, len);
    match chi2_similarity(xs, ys) {
        Ok(v) => {
            *out = v;
            TexfuseStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Opaque trained one-vs-rest linear SVM.
pub struct TexfuseSvm {
    model: LinearSvmModel,
}

fn svm_from_model_file(file: &ModelFile) -> Result<LinearSvmModel, TexError> {
    let mut classes = Vec::new();
    for name in file.names() {
        if let Some(class) = name.strip_prefix("svm.weights.") {
            classes.push(class.to_string());
        }
    }
    if classes.is_empty() {
        return Err(TexError::Model("no svm.weights.* tensors in file".into()));
    }
    classes.sort();
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for class in &classes {
        weights.push(file.get(&format!("svm.weights.{class}"))?.data.clone());
        biases.push(file.get(&format!("svm.bias.{class}"))?.data[0]);
    }
    let dim = weights[0].len();
    if weights.iter().any(|w| w.len() != dim) {
        return Err(TexError::Model("inconsistent weight dimensions".into()));
    }
    let c = file.get("svm.c")?.data[0];
    Ok(LinearSvmModel {
        classes,
        weights,
        biases,
        c,
    })
}

/// Load a trained SVM from a TFMD model file written by `texfuse train`.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` must be writable. On
/// success `*out` owns the handle until `texfuse_svm_free`.
#[no_mangle]
pub unsafe extern "C" fn texfuse_svm_open(
    path: *const c_char,
    out: *mut *mut TexfuseSvm,
) -> TexfuseStatus {
    if path.is_null() {
        return null_ptr("path");
    }
    if out.is_null() {
        return null_ptr("out");
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(s) => s,
        Err(_) => {
            set_error("path is not valid UTF-8");
            return TexfuseStatus::InvalidArgument;
        }
    };
    match ModelFile::load(Path::new(path)).and_then(|f| svm_from_model_file(&f)) {
        Ok(model) => {
            *out = Box::into_raw(Box::new(TexfuseSvm { model }));
            TexfuseStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Destroy a handle from `texfuse_svm_open`. NULL is a no-op.
///
/// # Safety
/// `svm` must be a live handle from `texfuse_svm_open` (or NULL) and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn texfuse_svm_free(svm: *mut TexfuseSvm) {
    if !svm.is_null() {
        drop(Box::from_raw(svm));
    }
}

/// Number of classes in the model.
///
/// # Safety
/// `svm` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn texfuse_svm_num_classes(svm: *const TexfuseSvm) -> usize {
    if svm.is_null() {
        return 0;
    }
    (*svm).model.classes.len()
}

/// Feature dimension expected by the model.
///
/// # Safety
/// `svm` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn texfuse_svm_dim(svm: *const TexfuseSvm) -> usize {
    if svm.is_null() {
        return 0;
    }
    (*svm).model.dim()
}

/// Copy the label of class `index` into `buf` (NUL-terminated, truncated).
/// Returns the full label length in bytes.
///
/// # Safety
/// `svm` must be a live handle; `buf` must point to `len` writable bytes or
/// be NULL (query mode).
#[no_mangle]
pub unsafe extern "C" fn texfuse_svm_class_name(
    svm: *const TexfuseSvm,
    index: usize,
    buf: *mut c_char,
    len: usize,
) -> usize {
    if svm.is_null() {
        return 0;
    }
    let classes = &(*svm).model.classes;
    if index >= classes.len() {
        return 0;
    }
    let bytes = classes[index].as_bytes();
    if !buf.is_null() && len > 0 {
        let n = bytes.len().min(len - 1);
        std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
        *buf.add(n) = 0;
    }
    bytes.len()
}

/// Predict the class of a feature vector; writes the winning class index.
///
/// # Safety
/// `svm` must be a live handle; `x` must point to `len` doubles;
/// `out_class` must be writable.
#[no_mangle]
pub unsafe extern "C" fn texfuse_svm_predict(
    svm: *const TexfuseSvm,
    x: *const f64,
    len: usize,
    out_class: *mut usize,
) -> TexfuseStatus {
    if svm.is_null() {
        return null_ptr("svm");
    }
    if x.is_null() {
        return null_ptr("x");
    }
    if out_class.is_null() {
        return null_ptr("out_class");
    }
    let model = &(*svm).model;
    let xs = std::slice::from_raw_parts(x, len);
    match model.scores(xs) {
        Ok(scores) => {
            let mut best = 0;
            for (i, s) in scores.iter().enumerate().skip(1) {
                if *s > scores[best] {
                    best = i;
                }
            }
            *out_class = best;
            TexfuseStatus::Ok
        }
        Err(e) => fail(e),
    }
}
