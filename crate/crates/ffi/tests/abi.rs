use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use cnnlstm::harness;
use cnnlstm::pipeline::{cache, prepare, PipelineConfig, SplitKind};
use cnnlstm::synth::{noisy_sine, SynthConfig};
use cnnlstm::{Checkpoint, Model, ModelConfig};
use cnnlstm_ffi::*;

struct Fixture {
    _dir: tempfile::TempDir,
    checkpoint: PathBuf,
    data: PathBuf,
    ck: Checkpoint,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let series = noisy_sine(&SynthConfig { rows: 160, ..SynthConfig::default() }).unwrap();
    let cfg = PipelineConfig {
        lookback: 16,
        sma_windows: vec![5, 10],
        ..PipelineConfig::default()
    };
    let (data, _) = prepare(&series, &cfg).unwrap();
    let model = Model::build(ModelConfig {
        lookback: 16,
        features: data.features(),
        conv_filters: [3, 3, 3],
        kernel_width: 2,
        lstm_units: [3, 3, 3],
        ..ModelConfig::default()
    })
    .unwrap();
    let ck = Checkpoint::new(model, data.state.clone()).unwrap();
    let checkpoint = dir.path().join("model.ckpt");
    let data_path = dir.path().join("data.txt");
    ck.save(&checkpoint).unwrap();
    cache::save(&data, &data_path).unwrap();
    Fixture {
        _dir: dir,
        checkpoint,
        data: data_path,
        ck,
    }
}

fn c_path(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = cnnlstm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn predict_matches_library() {
    let fx = fixture();
    unsafe {
        let mut ck = ptr::null_mut();
        assert_eq!(cnnlstm_checkpoint_load(c_path(&fx.checkpoint).as_ptr(), &mut ck), CnnlstmStatus::Ok);
        let mut ds = ptr::null_mut();
        assert_eq!(cnnlstm_dataset_load(c_path(&fx.data).as_ptr(), &mut ds), CnnlstmStatus::Ok);

        let (t, f) = (cnnlstm_checkpoint_lookback(ck), cnnlstm_checkpoint_features(ck));
        assert_eq!(t, 16);
        assert!(cnnlstm_dataset_samples(ds) > 0);
        let windows = cache::load(&fx.data).unwrap().windows().unwrap();
        for i in [0, 5, cnnlstm_dataset_samples(ds) - 1] {
            let mut buf = vec![0.0; t * f];
            assert_eq!(cnnlstm_dataset_window(ds, i, buf.as_mut_ptr(), buf.len()), CnnlstmStatus::Ok);
            let (x, _) = windows.batch(&[i]).unwrap();
            assert_eq!(buf, x.data());

            let mut scaled = 0.0;
            let mut price = 0.0;
            assert_eq!(cnnlstm_predict_scaled(ck, buf.as_ptr(), buf.len(), &mut scaled), CnnlstmStatus::Ok);
            assert_eq!(cnnlstm_predict_price(ck, buf.as_ptr(), buf.len(), &mut price), CnnlstmStatus::Ok);
            let expected = fx.ck.model.predict(&x).unwrap().data()[0];
            assert_eq!(scaled.to_bits(), expected.to_bits());
            assert_eq!(price.to_bits(), fx.ck.state.unscale_target(expected).to_bits());
        }

        let mut m = CnnlstmMetrics::default();
        assert_eq!(cnnlstm_evaluate(ck, ds, CNNLSTM_SPLIT_TEST, &mut m), CnnlstmStatus::Ok);
        let (lib, _) = harness::evaluate(&fx.ck.model, &windows, SplitKind::Test, &fx.ck.state).unwrap();
        assert_eq!(m.r2.to_bits(), lib.r2.to_bits());
        assert_eq!(m.max_error.to_bits(), lib.max_error.to_bits());
        assert_eq!(m.samples, lib.samples);
        assert_eq!(cnnlstm_evaluate(ck, ds, 7, &mut m), CnnlstmStatus::InvalidArgument);

        let short = vec![0.0; t * f - 1];
        let mut out = 0.0;
        assert_eq!(
            cnnlstm_predict_scaled(ck, short.as_ptr(), short.len(), &mut out),
            CnnlstmStatus::Incompatible
        );
        assert!(last_error().contains("expects"));

        cnnlstm_dataset_free(ds);
        cnnlstm_checkpoint_free(ck);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let fx = fixture();
    unsafe {
        let mut ck = ptr::null_mut();
        assert_eq!(cnnlstm_checkpoint_load(ptr::null(), &mut ck), CnnlstmStatus::NullPointer);
        assert!(ck.is_null());
        let missing = c_path(&fx.checkpoint.with_extension("missing"));
        assert_eq!(cnnlstm_checkpoint_load(missing.as_ptr(), &mut ck), CnnlstmStatus::InputError);
        assert!(!last_error().is_empty());

        let text = std::fs::read_to_string(&fx.checkpoint).unwrap();
        let bumped = fx.checkpoint.with_extension("v2");
        std::fs::write(&bumped, text.replacen("CNNLSTM-CKPT v1", "CNNLSTM-CKPT v2", 1)).unwrap();
        assert_eq!(cnnlstm_checkpoint_load(c_path(&bumped).as_ptr(), &mut ck), CnnlstmStatus::Incompatible);

        let mut out = 0.0;
        assert_eq!(cnnlstm_predict_scaled(ptr::null(), ptr::null(), 0, &mut out), CnnlstmStatus::NullPointer);
        assert_eq!(cnnlstm_checkpoint_lookback(ptr::null()), 0);
        cnnlstm_checkpoint_free(ptr::null_mut());
        cnnlstm_dataset_free(ptr::null_mut());
    }
}

#[test]
fn gradcheck_passes() {
    let mut worst = f64::NAN;
    assert_eq!(unsafe { cnnlstm_gradcheck(42, &mut worst) }, CnnlstmStatus::Ok);
    assert!(worst < 1e-5);
    assert!(cnnlstm_last_error().is_null());
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(cnnlstm_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_abi() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/cnnlstm.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "cnnlstm_checkpoint_load",
        "cnnlstm_checkpoint_free",
        "cnnlstm_predict_price",
        "cnnlstm_dataset_window",
        "cnnlstm_evaluate",
        "cnnlstm_gradcheck",
        "cnnlstm_last_error",
        "typedef struct CnnlstmCheckpoint CnnlstmCheckpoint;",
        "CNNLSTM_STATUS_INCOMPATIBLE = 4",
        "CNNLSTM_STATUS_VERIFICATION_FAILED = 5",
        "#define CNNLSTM_SPLIT_TEST 2",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    // The header must also be valid C when a compiler is available.
    if let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", "-std=c99", "-Wall", "-Werror"])
        .arg(&header)
        .status()
    {
        assert!(status.success(), "header does not compile");
    }
}
