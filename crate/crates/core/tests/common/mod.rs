#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use dipe::io::{load_manifest, Dataset};
use dipe::synth::{generate, SynthModel, SynthSpec};

pub fn fixture_spec_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/zoo9.json")
}

pub fn golden_report_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/zoo9_report.csv")
}

/// The shipped 9-model zoo, generated once per test binary.
pub fn fixture_dir() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec::read(fixture_spec_path()).unwrap();
        generate(&spec, dir.path()).unwrap();
        dir
    })
    .path()
}

pub fn fixture_dataset() -> &'static Dataset {
    static DS: OnceLock<Dataset> = OnceLock::new();
    DS.get_or_init(|| {
        let manifest = load_manifest(fixture_dir().join("manifest.json")).unwrap();
        Dataset::load(&manifest).unwrap()
    })
}

pub fn model(noise_rate: f64, group: u32) -> SynthModel {
    SynthModel {
        noise_rate,
        correlation_group: group,
        model_id: None,
        name: None,
        noise_stream: None,
    }
}

pub fn small_spec(seed: u64, models: Vec<SynthModel>) -> SynthSpec {
    SynthSpec {
        seed,
        slices: 6,
        dims: dipe::Dims::new(2, 24, 24).unwrap(),
        models,
        class_names: None,
        empty_rate: 0.2,
        group_blobs: 2,
        group_radius: 0.1,
        noise_band: 2,
    }
}

pub fn generate_dataset(spec: &SynthSpec) -> Dataset {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate(spec, dir.path()).unwrap();
    Dataset::load(&manifest).unwrap()
}
