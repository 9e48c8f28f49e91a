//! C interface to `enmdap-core`.
//!
//! Every function returns an [`EnmdapStatus`]; results come back through out
//! pointers. Objects are opaque handles created by `*_load`, `*_generate` or
//! `enmdap_train` and released with the matching `*_free`. After a failure,
//! [`enmdap_last_error`] describes it on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use enmdap::analysis::{self, BoundInputs, EmpiricalDomain};
use enmdap::config::parse_config;
use enmdap::data::{gen_gaussian_domains, load_csv, DomainDataset, SyntheticSpec};
use enmdap::model::{load_checkpoint, save_checkpoint, EnsembleModel};
use enmdap::trainer::{self, run_variant, TrainConfig};
use enmdap::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnmdapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Label = 4,
    Format = 5,
    Config = 6,
    Io = 7,
    NonFiniteLoss = 8,
    Utf8 = 9,
    Panic = 10,
}

/// A single domain of feature rows, optionally labeled.
pub struct EnmdapDataset(DomainDataset);

/// An ordered list of domains; the last one is the target.
pub struct EnmdapDatasetList(Vec<DomainDataset>);

/// A trained or loaded ensemble model.
pub struct EnmdapModel(EnsembleModel);

/// Parameters of the Gaussian multi-domain generator.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct EnmdapSyntheticSpec {
    pub n_domains: usize,
    pub n_classes: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    pub class_separation: f64,
    pub domain_shift_scale: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EnmdapStatus {
    match e {
        Error::Shape { .. } | Error::EmptyClass { .. } => EnmdapStatus::Shape,
        Error::Label { .. } => EnmdapStatus::Label,
        Error::InvalidArgument(_) => EnmdapStatus::InvalidArgument,
        Error::Format { .. } => EnmdapStatus::Format,
        Error::Config { .. } => EnmdapStatus::Config,
        Error::NonFiniteLoss { .. } => EnmdapStatus::NonFiniteLoss,
        Error::Io { .. } => EnmdapStatus::Io,
    }
}

struct Failure(EnmdapStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(EnmdapStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> EnmdapStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => EnmdapStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            EnmdapStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Failure(EnmdapStatus::Utf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_handle<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    write_out(out, Box::into_raw(Box::new(value)), "out")
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn enmdap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn enmdap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a dataset CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn enmdap_dataset_load(
    path: *const c_char,
    out: *mut *mut EnmdapDataset,
) -> EnmdapStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        write_handle(out, EnmdapDataset(load_csv(path)?))
    })
}

/// # Safety
/// `ds` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn enmdap_dataset_free(ds: *mut EnmdapDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Row count, feature width, class count and whether labels are present.
///
/// # Safety
/// `ds` must be a live dataset handle; each out pointer may be null to skip it.
#[no_mangle]
pub unsafe extern "C" fn enmdap_dataset_shape(
    ds: *const EnmdapDataset,
    rows: *mut usize,
    dim: *mut usize,
    n_classes: *mut usize,
    labeled: *mut bool,
) -> EnmdapStatus {
    guard(|| {
        let ds = &handle(ds, "ds")?.0;
        if !rows.is_null() {
            rows.write(ds.len());
        }
        if !dim.is_null() {
            dim.write(ds.dim());
        }
        if !n_classes.is_null() {
            n_classes.write(ds.n_classes());
        }
        if !labeled.is_null() {
            labeled.write(ds.labels().is_some());
        }
        Ok(())
    })
}

/// Generates Gaussian domains; the last one is the target.
///
/// # Safety
/// `spec` must point to a valid spec and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn enmdap_dataset_list_generate(
    spec: *const EnmdapSyntheticSpec,
    out: *mut *mut EnmdapDatasetList,
) -> EnmdapStatus {
    guard(|| {
        let s = *handle(spec, "spec")?;
        let spec = SyntheticSpec {
            n_domains: s.n_domains,
            n_classes: s.n_classes,
            dim: s.dim,
            samples_per_class: s.samples_per_class,
            class_separation: s.class_separation,
            domain_shift_scale: s.domain_shift_scale,
            noise_sigma: s.noise_sigma,
            seed: s.seed,
        };
        write_handle(out, EnmdapDatasetList(gen_gaussian_domains(&spec)?))
    })
}

/// Loads or generates the domains named by a config file.
///
/// # Safety
/// `config_path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn enmdap_dataset_list_from_config(
    config_path: *const c_char,
    out: *mut *mut EnmdapDatasetList,
) -> EnmdapStatus {
    guard(|| {
        let cfg = parse_config(path_arg(config_path, "config_path")?)?;
        write_handle(out, EnmdapDatasetList(cfg.datasets()?))
    })
}

/// # Safety
/// `list` must be a live list handle.
#[no_mangle]
pub unsafe extern "C" fn enmdap_dataset_list_len(
    list: *const EnmdapDatasetList,
    out: *mut usize,
) -> EnmdapStatus {
    guard(|| {
        let n = handle(list, "list")?.0.len();
        write_out(out, n, "out")
    })
}

/// Copies domain `index` into a new dataset handle.
///
/// # Safety
/// `list` must be a live list handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn enmdap_dataset_list_get(
    list: *const EnmdapDatasetList,
    index: usize,
    out: *mut *mut EnmdapDataset,
) -> EnmdapStatus {
    guard(|| {
        let list = &handle(list, "list")?.0;
        let ds = list.get(index).ok_or_else(|| {
            Failure(
                EnmdapStatus::InvalidArgument,
                format!("index {index} out of range for {} domains", list.len()),
            )
        })?;
        write_handle(out, EnmdapDataset(ds.clone()))
    })
}

/// # Safety
/// `list` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn enmdap_dataset_list_free(list: *mut EnmdapDatasetList) {
    if !list.is_null() {
        drop(Box::from_raw(list));
    }
}

/// Trains the variant described by a config file on `datasets` (the target,
/// last, must carry evaluation labels) and returns the model and target
/// accuracy.
///
/// # Safety
/// `config_path` must be a NUL-terminated string, `datasets` a live list
/// handle, `out_model` writable; `out_accuracy` may be null.
#[no_mangle]
pub unsafe extern "C" fn enmdap_train(
    config_path: *const c_char,
    datasets: *const EnmdapDatasetList,
    seed: u64,
    out_model: *mut *mut EnmdapModel,
    out_accuracy: *mut f64,
) -> EnmdapStatus {
    guard(|| {
        let cfg = parse_config(path_arg(config_path, "config_path")?)?;
        let data = &handle(datasets, "datasets")?.0;
        if out_model.is_null() {
            return Err(null("out_model"));
        }
        let train = TrainConfig { seed, ..cfg.train.clone() };
        let run = run_variant(data, &cfg.arch, &train)?;
        if !out_accuracy.is_null() {
            out_accuracy.write(run.target_accuracy);
        }
        write_handle(out_model, EnmdapModel(run.model))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn enmdap_model_load(path: *const c_char, out: *mut *mut EnmdapModel) -> EnmdapStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        write_handle(out, EnmdapModel(load_checkpoint(path)?))
    })
}

/// # Safety
/// `model` must be a live model handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn enmdap_model_save(model: *const EnmdapModel, path: *const c_char) -> EnmdapStatus {
    guard(|| {
        let model = &handle(model, "model")?.0;
        save_checkpoint(model, path_arg(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn enmdap_model_free(model: *mut EnmdapModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Writes one predicted class per row of `ds` into `out_labels`, which must
/// hold at least `capacity` entries; fails when `capacity` is below the row
/// count.
///
/// # Safety
/// `model` and `ds` must be live handles; `out_labels` must be writable for
/// `capacity` elements.
#[no_mangle]
pub unsafe extern "C" fn enmdap_model_predict(
    model: *const EnmdapModel,
    ds: *const EnmdapDataset,
    out_labels: *mut usize,
    capacity: usize,
) -> EnmdapStatus {
    guard(|| {
        let model = &handle(model, "model")?.0;
        let ds = &handle(ds, "ds")?.0;
        if out_labels.is_null() {
            return Err(null("out_labels"));
        }
        if capacity < ds.len() {
            return Err(Failure(
                EnmdapStatus::InvalidArgument,
                format!("buffer holds {capacity} labels but the dataset has {} rows", ds.len()),
            ));
        }
        let pred = model.predict(ds.features())?;
        ptr::copy_nonoverlapping(pred.as_ptr(), out_labels, pred.len());
        Ok(())
    })
}

/// Accuracy of the model's final classifier on a labeled dataset.
///
/// # Safety
/// `model` and `ds` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn enmdap_model_evaluate(
    model: *const EnmdapModel,
    ds: *const EnmdapDataset,
    out: *mut f64,
) -> EnmdapStatus {
    guard(|| {
        let acc = trainer::evaluate(&handle(model, "model")?.0, &handle(ds, "ds")?.0)?;
        write_out(out, acc, "out")
    })
}

/// Label-wise moment divergence of order `k` between two labeled datasets.
///
/// # Safety
/// `a` and `b` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn enmdap_lm_divergence(
    a: *const EnmdapDataset,
    b: *const EnmdapDataset,
    k: u32,
    out: *mut f64,
) -> EnmdapStatus {
    guard(|| {
        let a = EmpiricalDomain::from_dataset(&handle(a, "a")?.0)?;
        let b = EmpiricalDomain::from_dataset(&handle(b, "b")?.0)?;
        write_out(out, analysis::lm_divergence(&a, &b, k)?, "out")
    })
}

/// Finite-sample term of the target error bound for `n_sources` sources.
///
/// # Safety
/// `alpha` and `n_samples` must each point to `n_sources` readable elements
/// and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn enmdap_eta_term(
    alpha: *const f64,
    n_samples: *const usize,
    n_sources: usize,
    vc_dim: usize,
    delta: f64,
    out: *mut f64,
) -> EnmdapStatus {
    guard(|| {
        if alpha.is_null() {
            return Err(null("alpha"));
        }
        if n_samples.is_null() {
            return Err(null("n_samples"));
        }
        let b = BoundInputs {
            alpha: std::slice::from_raw_parts(alpha, n_sources).to_vec(),
            n_samples: std::slice::from_raw_parts(n_samples, n_sources).to_vec(),
            vc_dim,
            delta,
        };
        write_out(out, analysis::eta_term(&b)?, "out")
    })
}
