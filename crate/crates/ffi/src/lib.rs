//! C ABI over the scanqa core library.
//!
//! Conventions:
//! - Every fallible function returns a [`ScanqaStatus`]; `SCANQA_OK` is 0.
//! - On failure the message is kept per thread and read back with
//!   [`scanqa_last_error_message`].
//! - Objects are opaque handles created by `*_load`/`*_new` functions and
//!   released by the matching `*_free`. Freeing `NULL` is a no-op.
//! - Strings going in are NUL-terminated UTF-8. Strings coming out are
//!   copied into a caller buffer; the required size including the NUL is
//!   always written to `*needed`, and `SCANQA_ERR_BUFFER_TOO_SMALL` is
//!   returned when the buffer cannot hold it.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use scanqa::appearance::nearest_named_color;
use scanqa::dataset::{accuracy, parse_record, reject_easy_question, KnownClasses, RejectionReason};
use scanqa::fusion::{load_checkpoint, Ablation, Checkpoint, PreparedScene, SceneFeatures, SceneInput};
use scanqa::geometry::{positional_encode, propose_objects, PeCodebook, ProposalConfig, SpatialVector};
use scanqa::linguistic::tokenize;
use scanqa::scene::{export_ply, load_ply, Scene};
use scanqa::train::argmax;
use scanqa::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanqaStatus {
    Ok = 0,
    ErrNullArgument = 1,
    ErrInvalidUtf8 = 2,
    ErrBufferTooSmall = 3,
    ErrIo = 4,
    ErrParse = 5,
    ErrValidation = 6,
    ErrConfig = 7,
    ErrParameter = 8,
    ErrShape = 9,
    ErrTraining = 10,
    ErrGeneration = 11,
    ErrJson = 12,
    ErrPanic = 13,
}

/// Outcome of the easy-question check.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanqaRejection {
    Accepted = 0,
    Existence = 1,
    Count = 2,
    Color = 3,
    SceneType = 4,
}

/// A loaded point-cloud scene.
pub struct ScanqaScene {
    scene: Scene,
}

/// A trained model with its vocabularies.
pub struct ScanqaModel {
    ckpt: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_last_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> ScanqaStatus {
    match e {
        Error::Io { .. } => ScanqaStatus::ErrIo,
        Error::Parse { .. } => ScanqaStatus::ErrParse,
        Error::Validation(_) => ScanqaStatus::ErrValidation,
        Error::Config(_) => ScanqaStatus::ErrConfig,
        Error::Parameter(_) => ScanqaStatus::ErrParameter,
        Error::Shape { .. } => ScanqaStatus::ErrShape,
        Error::Training { .. } => ScanqaStatus::ErrTraining,
        Error::Generation(_) => ScanqaStatus::ErrGeneration,
        Error::Json(_) => ScanqaStatus::ErrJson,
    }
}

struct Failure(ScanqaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ScanqaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            ScanqaStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            ScanqaStatus::ErrPanic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(ScanqaStatus::ErrNullArgument, format!("`{name}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(ScanqaStatus::ErrInvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

/// Copies `s` plus a NUL into `buf` when it fits; always reports the size.
unsafe fn copy_out(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), Failure> {
    let size = s.len() + 1;
    if !needed.is_null() {
        *needed = size;
    }
    if buf.is_null() || len < size {
        return Err(Failure(ScanqaStatus::ErrBufferTooSmall, format!("buffer of {len} bytes, need {size}")));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

/// Copies the calling thread's last error message (empty after a
/// successful call).
///
/// # Safety
/// `buf` must be valid for `len` bytes or null; `needed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn scanqa_last_error_message(buf: *mut c_char, len: usize, needed: *mut usize) -> ScanqaStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    match copy_out(&msg, buf, len, needed) {
        Ok(()) => ScanqaStatus::Ok,
        Err(Failure(s, _)) => s,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn scanqa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads an ASCII or binary PLY scene.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scanqa_scene_load_ply(path: *const c_char, out: *mut *mut ScanqaScene) -> ScanqaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let scene = load_ply(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(ScanqaScene { scene }));
        Ok(())
    })
}

/// Writes the scene as binary little-endian PLY.
///
/// # Safety
/// `scene` must come from [`scanqa_scene_load_ply`]; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn scanqa_scene_export_ply(scene: *const ScanqaScene, path: *const c_char) -> ScanqaStatus {
    guard(|| {
        let s = ref_arg(scene, "scene")?;
        export_ply(&s.scene, Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// Number of points in the scene, or 0 for a null handle.
///
/// # Safety
/// `scene` must be null or come from [`scanqa_scene_load_ply`].
#[no_mangle]
pub unsafe extern "C" fn scanqa_scene_num_points(scene: *const ScanqaScene) -> usize {
    scene.as_ref().map_or(0, |s| s.scene.len())
}

/// Copies the scene id.
///
/// # Safety
/// `scene` must come from [`scanqa_scene_load_ply`]; `buf` valid for `len`
/// bytes or null; `needed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn scanqa_scene_id(
    scene: *const ScanqaScene,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> ScanqaStatus {
    guard(|| copy_out(ref_arg(scene, "scene")?.scene.scene_id(), buf, len, needed))
}

/// # Safety
/// `scene` must be null or come from [`scanqa_scene_load_ply`], and must not
/// be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn scanqa_scene_free(scene: *mut ScanqaScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Loads a checkpoint directory written by `scanqa train`.
///
/// # Safety
/// `dir` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scanqa_model_load(dir: *const c_char, out: *mut *mut ScanqaModel) -> ScanqaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let ckpt = load_checkpoint(Path::new(str_arg(dir, "dir")?))?;
        *out = Box::into_raw(Box::new(ScanqaModel { ckpt }));
        Ok(())
    })
}

/// Number of candidate answers of the model, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or come from [`scanqa_model_load`].
#[no_mangle]
pub unsafe extern "C" fn scanqa_model_num_answers(model: *const ScanqaModel) -> usize {
    model.as_ref().map_or(0, |m| m.ckpt.answers.len())
}

/// Answers `question` about `scene` (ground-truth proposals from the
/// scene's instance annotations). `scene` may be null only for a
/// question-only model. The answer text is copied into `buf`; its logit is
/// written to `*score` when `score` is not null.
///
/// # Safety
/// Handles must come from the matching loaders; `question` NUL-terminated;
/// `buf` valid for `len` bytes or null; `needed` and `score` null or writable.
#[no_mangle]
pub unsafe extern "C" fn scanqa_model_answer(
    model: *const ScanqaModel,
    scene: *const ScanqaScene,
    question: *const c_char,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
    score: *mut f64,
) -> ScanqaStatus {
    guard(|| {
        let ckpt = &ref_arg(model, "model")?.ckpt;
        let q = str_arg(question, "question")?;
        let tokens = tokenize(q, &ckpt.tokens);
        let cfg = ckpt.model.config();
        let logits = if ckpt.ablation == Ablation::Qonly {
            let empty = SceneFeatures::empty(cfg);
            ckpt.model.predict(&tokens, SceneInput::Features(&empty), ckpt.ablation)?
        } else {
            let s = ref_arg(scene, "scene")?;
            let proposals = propose_objects(&s.scene, &ProposalConfig::default())?;
            let prepared = PreparedScene::new(&s.scene, &proposals, &PeCodebook::new(cfg.d_model)?);
            let feats = ckpt.model.scene_features(&prepared);
            ckpt.model.predict(&tokens, SceneInput::Features(&feats), ckpt.ablation)?
        };
        let best = argmax(&logits);
        if !score.is_null() {
            *score = logits[best];
        }
        copy_out(ckpt.answers.answer(best), buf, len, needed)
    })
}

/// # Safety
/// `model` must be null or come from [`scanqa_model_load`], and must not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn scanqa_model_free(model: *mut ScanqaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Agreement score (0, 0.5 or 1) of `answer` against a record given as one
/// JSON object in the dataset format.
///
/// # Safety
/// Strings must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn scanqa_accuracy(
    answer: *const c_char,
    record_json: *const c_char,
    out: *mut f64,
) -> ScanqaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let record = parse_record(str_arg(record_json, "record_json")?, 1)?;
        *out = accuracy(str_arg(answer, "answer")?, &record);
        Ok(())
    })
}

/// Checks a question against the bundled easy-question patterns.
///
/// # Safety
/// `question` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn scanqa_check_question(question: *const c_char, out: *mut ScanqaRejection) -> ScanqaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = match reject_easy_question(str_arg(question, "question")?, &KnownClasses::default()) {
            None => ScanqaRejection::Accepted,
            Some(RejectionReason::Existence) => ScanqaRejection::Existence,
            Some(RejectionReason::Count) => ScanqaRejection::Count,
            Some(RejectionReason::Color) => ScanqaRejection::Color,
            Some(RejectionReason::SceneType) => ScanqaRejection::SceneType,
        };
        Ok(())
    })
}

/// Name of the nearest of the 17 named colors.
///
/// # Safety
/// `buf` valid for `len` bytes or null; `needed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn scanqa_nearest_color(
    r: u8,
    g: u8,
    b: u8,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> ScanqaStatus {
    guard(|| copy_out(nearest_named_color([r, g, b]).name, buf, len, needed))
}

/// Sinusoidal encoding of a 12-component box descriptor. Writes
/// `12 * d_model` values to `out`, which must hold `out_len` doubles.
///
/// # Safety
/// `v` must point to 12 doubles; `out` to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn scanqa_positional_encode(
    v: *const f64,
    d_model: usize,
    out: *mut f64,
    out_len: usize,
) -> ScanqaStatus {
    guard(|| {
        if v.is_null() {
            return Err(null("v"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let codebook = PeCodebook::new(d_model)?;
        let need = codebook.output_len();
        if out_len < need {
            return Err(Failure(ScanqaStatus::ErrBufferTooSmall, format!("output holds {out_len} values, need {need}")));
        }
        let mut comps = [0.0; 12];
        comps.copy_from_slice(std::slice::from_raw_parts(v, 12));
        let code = positional_encode(&SpatialVector(comps), &codebook);
        ptr::copy_nonoverlapping(code.as_ptr(), out, need);
        Ok(())
    })
}
