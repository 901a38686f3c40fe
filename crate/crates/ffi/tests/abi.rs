use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use dipe::{SynthModel, SynthSpec, Threshold};
use dipe_ffi::*;

fn zoo() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let model = |noise_rate, correlation_group| SynthModel {
        noise_rate,
        correlation_group,
        model_id: None,
        name: None,
        noise_stream: None,
    };
    let spec = SynthSpec {
        seed: 8,
        slices: 4,
        dims: dipe::Dims::new(2, 16, 16).unwrap(),
        models: vec![model(0.05, 0), model(0.1, 0), model(0.2, 1), model(0.3, 2)],
        class_names: None,
        empty_rate: 0.2,
        group_blobs: 2,
        group_radius: 0.1,
        noise_band: 2,
    };
    dipe::generate(&spec, dir.path()).unwrap();
    let manifest = dir.path().join("manifest.json");
    (dir, manifest)
}

fn open(path: &Path) -> *mut DipeDataset {
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(
        unsafe { dipe_dataset_open(c.as_ptr(), &mut handle) },
        DipeStatus::Ok
    );
    assert!(!handle.is_null());
    handle
}

fn last_error() -> String {
    let p = dipe_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn dataset_calls_match_the_library() {
    let (_dir, manifest) = zoo();
    let ds = dipe::Dataset::load(&dipe::load_manifest(&manifest).unwrap()).unwrap();
    let t = Threshold::DEFAULT;
    let scores = dipe::score_models(&ds, t).unwrap();
    let c = dipe::correlation_matrix(&ds, t).unwrap();

    let h = open(&manifest);
    unsafe {
        assert_eq!(dipe_dataset_model_count(h), 4);
        assert_eq!(dipe_dataset_slice_count(h), 4);
        assert_eq!(
            CStr::from_ptr(dipe_dataset_model_id(h, 2))
                .to_str()
                .unwrap(),
            "m2"
        );
        assert!(dipe_dataset_model_id(h, 4).is_null());

        let mut dice = [0.0; 4];
        let mut iou = [0.0; 4];
        assert_eq!(
            dipe_dataset_scores(h, 0.5, dice.as_mut_ptr(), iou.as_mut_ptr(), 4),
            DipeStatus::Ok
        );
        assert_eq!(dice.to_vec(), scores.dice);
        assert_eq!(iou.to_vec(), scores.iou);

        let mut corr = [0.0; 16];
        assert_eq!(
            dipe_dataset_correlation(h, 0.5, corr.as_mut_ptr(), 16),
            DipeStatus::Ok
        );
        assert_eq!(corr.to_vec(), c.rows().concat());

        let mut members = [usize::MAX; 4];
        assert_eq!(
            dipe_select(
                DipeStrategy::Dipe,
                corr.as_ptr(),
                dice.as_ptr(),
                4,
                3,
                members.as_mut_ptr(),
                4
            ),
            DipeStatus::Ok
        );
        let expected = dipe::select_dipe(&c, &scores.dice, 3).unwrap().members;
        assert_eq!(&members[..3], &expected[..]);
        assert_eq!(members[3], usize::MAX);

        let mut exhaustive = [0usize; 2];
        assert_eq!(
            dipe_dataset_select(
                h,
                DipeStrategy::Exhaustive,
                0.5,
                2,
                exhaustive.as_mut_ptr(),
                2
            ),
            DipeStatus::Ok
        );
        assert_eq!(
            exhaustive.to_vec(),
            dipe::select_exhaustive(&ds, 2, t).unwrap().members
        );

        let (mut d, mut i) = (0.0, 0.0);
        assert_eq!(
            dipe_dataset_evaluate(h, members.as_ptr(), 3, 0.5, &mut d, &mut i),
            DipeStatus::Ok
        );
        let score = dipe::evaluate_members(&ds, &expected, t).unwrap();
        assert_eq!((d, i), (score.dice, score.iou));
        assert!(dipe_last_error().is_null());

        dipe_dataset_free(h);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut h = ptr::null_mut();
        let missing = CString::new("/nonexistent/manifest.json").unwrap();
        assert_eq!(dipe_dataset_open(missing.as_ptr(), &mut h), DipeStatus::Io);
        assert!(h.is_null());
        assert!(last_error().contains("/nonexistent/manifest.json"));

        assert_eq!(
            dipe_dataset_open(ptr::null(), &mut h),
            DipeStatus::NullPointer
        );
        assert_eq!(
            dipe_dataset_scores(ptr::null(), 0.5, ptr::null_mut(), ptr::null_mut(), 0),
            DipeStatus::NullPointer
        );
        assert_eq!(dipe_dataset_model_count(ptr::null()), 0);
        dipe_dataset_free(ptr::null_mut());

        let c = [1.0, 0.5, 0.5, 1.0];
        let d = [0.9, 0.8];
        let mut out = [0usize; 2];
        let mut sel = |strategy, k, len| {
            dipe_select(
                strategy,
                c.as_ptr(),
                d.as_ptr(),
                2,
                k,
                out.as_mut_ptr(),
                len,
            )
        };
        assert_eq!(sel(DipeStrategy::TopK, 3, 2), DipeStatus::OutOfRange);
        assert!(last_error().contains("k out of range"));
        assert_eq!(sel(DipeStrategy::All, 1, 1), DipeStatus::BufferTooSmall);
        assert_eq!(
            sel(DipeStrategy::Exhaustive, 1, 2),
            DipeStatus::InvalidArgument
        );
        assert_eq!(sel(DipeStrategy::TopK, 2, 2), DipeStatus::Ok);
        assert_eq!(out, [0, 1]);

        let asymmetric = [1.0, 0.5, 0.4, 1.0];
        assert_eq!(
            dipe_select(
                DipeStrategy::Dipe,
                asymmetric.as_ptr(),
                d.as_ptr(),
                2,
                2,
                out.as_mut_ptr(),
                2
            ),
            DipeStatus::InvalidArgument
        );

        let (_dir, manifest) = zoo();
        let h = open(&manifest);
        let mut dice = [0.0; 4];
        assert_eq!(
            dipe_dataset_scores(h, 1.5, dice.as_mut_ptr(), ptr::null_mut(), 4),
            DipeStatus::InvalidArgument
        );
        assert_eq!(
            dipe_dataset_scores(h, 0.5, dice.as_mut_ptr(), ptr::null_mut(), 3),
            DipeStatus::BufferTooSmall
        );
        let bad = [7usize];
        assert_eq!(
            dipe_dataset_evaluate(h, bad.as_ptr(), 1, 0.5, ptr::null_mut(), ptr::null_mut()),
            DipeStatus::InvalidArgument
        );
        dipe_dataset_free(h);
    }
    let version = unsafe { CStr::from_ptr(dipe_version()) };
    assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Compiles the C smoke program against the generated header and the
/// static library, then runs it on a generated zoo.
#[test]
fn c_program_links_and_runs() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .and_then(Path::parent)
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libdipe_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());

    let build = tempfile::tempdir().unwrap();
    let exe = build.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".to_string());
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");

    let (_dir, manifest) = zoo();
    let out = Command::new(&exe).arg(&manifest).output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        out.status.success(),
        "{stdout}{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let ds = dipe::Dataset::load(&dipe::load_manifest(&manifest).unwrap()).unwrap();
    let t = Threshold::DEFAULT;
    let d = dipe::score_models(&ds, t).unwrap().dice;
    let c = dipe::correlation_matrix(&ds, t).unwrap();
    let members = dipe::select_dipe(&c, &d, 2).unwrap().members;
    let dice = dipe::evaluate_members(&ds, &members, t).unwrap().dice;
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], format!("version {}", env!("CARGO_PKG_VERSION")));
    assert_eq!(lines[1], "models 4 slices 4");
    assert_eq!(lines[2], format!("members m{} m{}", members[0], members[1]));
    let printed: f64 = lines[3].strip_prefix("dice ").unwrap().parse().unwrap();
    assert_eq!(printed.to_bits(), dice.to_bits());
    assert!(stdout.contains("error k out of range"));
}
