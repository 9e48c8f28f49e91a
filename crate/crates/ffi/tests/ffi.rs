use std::ffi::{CStr, CString};
use std::ptr;

use enmdap_ffi::*;

fn last_error() -> String {
    let p = enmdap_last_error();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn spec() -> EnmdapSyntheticSpec {
    EnmdapSyntheticSpec {
        n_domains: 3,
        n_classes: 2,
        dim: 3,
        samples_per_class: 20,
        class_separation: 3.0,
        domain_shift_scale: 0.5,
        noise_sigma: 0.5,
        seed: 1,
    }
}

fn generate() -> *mut EnmdapDatasetList {
    let mut list = ptr::null_mut();
    assert_eq!(unsafe { enmdap_dataset_list_generate(&spec(), &mut list) }, EnmdapStatus::Ok);
    list
}

fn domain(list: *const EnmdapDatasetList, i: usize) -> *mut EnmdapDataset {
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { enmdap_dataset_list_get(list, i, &mut ds) }, EnmdapStatus::Ok);
    ds
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(enmdap_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn generate_inspect_and_free() {
    let list = generate();
    let mut n = 0;
    assert_eq!(unsafe { enmdap_dataset_list_len(list, &mut n) }, EnmdapStatus::Ok);
    assert_eq!(n, 3);
    let ds = domain(list, 2);
    let (mut rows, mut dim, mut classes, mut labeled) = (0, 0, 0, false);
    assert_eq!(
        unsafe { enmdap_dataset_shape(ds, &mut rows, &mut dim, &mut classes, &mut labeled) },
        EnmdapStatus::Ok
    );
    assert_eq!((rows, dim, classes, labeled), (40, 3, 2, true));
    assert!(enmdap_last_error().is_null());

    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { enmdap_dataset_list_get(list, 3, &mut bad) }, EnmdapStatus::InvalidArgument);
    assert!(last_error().contains("out of range"));
    assert!(bad.is_null());
    unsafe {
        enmdap_dataset_free(ds);
        enmdap_dataset_list_free(list);
        enmdap_dataset_free(ptr::null_mut());
        enmdap_dataset_list_free(ptr::null_mut());
        enmdap_model_free(ptr::null_mut());
    }
}

#[test]
fn invalid_spec_reports_error_code() {
    let mut s = spec();
    s.n_domains = 1;
    let mut list = ptr::null_mut();
    assert_eq!(unsafe { enmdap_dataset_list_generate(&s, &mut list) }, EnmdapStatus::InvalidArgument);
    assert!(last_error().contains("n_domains"));
    assert!(list.is_null());
}

#[test]
fn null_pointers_are_rejected() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(enmdap_dataset_load(ptr::null(), ptr::null_mut()), EnmdapStatus::NullPointer);
        assert_eq!(enmdap_lm_divergence(ptr::null(), ptr::null(), 1, &mut out), EnmdapStatus::NullPointer);
        assert_eq!(enmdap_dataset_list_generate(ptr::null(), ptr::null_mut()), EnmdapStatus::NullPointer);
        assert_eq!(
            enmdap_eta_term(ptr::null(), ptr::null(), 1, 10, 0.1, &mut out),
            EnmdapStatus::NullPointer
        );
    }
    assert!(last_error().contains("alpha"));
}

#[test]
fn missing_file_is_io_error() {
    let path = CString::new("/nonexistent/data.csv").unwrap();
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { enmdap_dataset_load(path.as_ptr(), &mut ds) }, EnmdapStatus::Io);
    assert!(ds.is_null());
}

#[test]
fn divergence_and_eta() {
    let list = generate();
    let (a, b) = (domain(list, 0), domain(list, 2));
    let mut d = -1.0;
    unsafe {
        assert_eq!(enmdap_lm_divergence(a, a, 2, &mut d), EnmdapStatus::Ok);
        assert_eq!(d, 0.0);
        assert_eq!(enmdap_lm_divergence(a, b, 1, &mut d), EnmdapStatus::Ok);
        assert!(d > 0.0);
        assert_eq!(enmdap_lm_divergence(a, b, 0, &mut d), EnmdapStatus::InvalidArgument);
    }

    let alpha = [1.0];
    let n = [1000usize];
    let mut eta = 0.0;
    assert_eq!(
        unsafe { enmdap_eta_term(alpha.as_ptr(), n.as_ptr(), 1, 10, 0.1, &mut eta) },
        EnmdapStatus::Ok
    );
    assert!((eta - 1.4606).abs() < 1e-3);
    assert_eq!(
        unsafe { enmdap_eta_term(alpha.as_ptr(), n.as_ptr(), 1, 10, 1.5, &mut eta) },
        EnmdapStatus::InvalidArgument
    );
    unsafe {
        enmdap_dataset_free(a);
        enmdap_dataset_free(b);
        enmdap_dataset_list_free(list);
    }
}

#[test]
fn train_save_load_predict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(
        &cfg_path,
        "hidden_dims = 6\nfeature_dim = 3\nepochs_stage1 = 2\nepochs_stage2 = 2\nbatch_size = 16\n",
    )
    .unwrap();
    let cfg = CString::new(cfg_path.to_str().unwrap()).unwrap();
    let list = generate();
    let mut model = ptr::null_mut();
    let mut acc = -1.0;
    assert_eq!(unsafe { enmdap_train(cfg.as_ptr(), list, 4, &mut model, &mut acc) }, EnmdapStatus::Ok);
    assert!((0.0..=1.0).contains(&acc));

    let target = domain(list, 2);
    let mut eval = -1.0;
    assert_eq!(unsafe { enmdap_model_evaluate(model, target, &mut eval) }, EnmdapStatus::Ok);
    assert_eq!(eval, acc);

    let ckpt = CString::new(dir.path().join("m.ckpt").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { enmdap_model_save(model, ckpt.as_ptr()) }, EnmdapStatus::Ok);
    let mut reloaded = ptr::null_mut();
    assert_eq!(unsafe { enmdap_model_load(ckpt.as_ptr(), &mut reloaded) }, EnmdapStatus::Ok);

    let mut p1 = vec![usize::MAX; 40];
    let mut p2 = vec![usize::MAX; 40];
    unsafe {
        assert_eq!(enmdap_model_predict(model, target, p1.as_mut_ptr(), p1.len()), EnmdapStatus::Ok);
        assert_eq!(enmdap_model_predict(reloaded, target, p2.as_mut_ptr(), p2.len()), EnmdapStatus::Ok);
        assert_eq!(enmdap_model_predict(model, target, p1.as_mut_ptr(), 10), EnmdapStatus::InvalidArgument);
    }
    assert_eq!(p1, p2);
    assert!(p1.iter().all(|&c| c < 2));

    // a config naming a single-pair variant with two extractors
    std::fs::write(&cfg_path, "variant = MDAP\nn_extractors = 2\n").unwrap();
    let mut none = ptr::null_mut();
    assert_eq!(
        unsafe { enmdap_train(cfg.as_ptr(), list, 0, &mut none, ptr::null_mut()) },
        EnmdapStatus::Config
    );
    assert!(last_error().contains("n_extractors"));
    assert!(none.is_null());

    unsafe {
        enmdap_model_free(model);
        enmdap_model_free(reloaded);
        enmdap_dataset_free(target);
        enmdap_dataset_list_free(list);
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/enmdap.h")).unwrap();
    for name in [
        "enmdap_last_error",
        "enmdap_version",
        "enmdap_dataset_load",
        "enmdap_dataset_free",
        "enmdap_dataset_shape",
        "enmdap_dataset_list_generate",
        "enmdap_dataset_list_from_config",
        "enmdap_dataset_list_len",
        "enmdap_dataset_list_get",
        "enmdap_dataset_list_free",
        "enmdap_train",
        "enmdap_model_load",
        "enmdap_model_save",
        "enmdap_model_free",
        "enmdap_model_predict",
        "enmdap_model_evaluate",
        "enmdap_lm_divergence",
        "enmdap_eta_term",
        "typedef struct EnmdapModel EnmdapModel",
        "ENMDAP_STATUS_NULL_POINTER = 1",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
