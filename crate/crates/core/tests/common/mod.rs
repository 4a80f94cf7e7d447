#![allow(dead_code)]

pub mod parsing;

use std::path::{Path, PathBuf};

use modalscreen::corpus::{generate_synthetic_fixture, FixtureProfile};
use modalscreen::harness::ExperimentConfig;
use modalscreen::providers::{AccuracyByModality, MockBehavior, ProviderConfig};
use modalscreen::task::Task;

pub fn fixture(dir: &Path, profile: &str, seed: u64) -> PathBuf {
    let profile: FixtureProfile = profile.parse().unwrap();
    generate_synthetic_fixture(seed, &profile, &dir.join("corpus")).unwrap().manifest_path
}

pub fn behavior(accuracy: f64, invalid_rate: f64, seed: u64) -> MockBehavior {
    MockBehavior {
        accuracy_by_modality: AccuracyByModality::uniform(accuracy),
        invalid_rate,
        seed,
        ..MockBehavior::default()
    }
}

pub fn mock(name: &str, b: MockBehavior) -> ProviderConfig {
    ProviderConfig::mock(name, b)
}

pub fn config(manifest: &Path, out: &Path, tasks: Vec<Task>, provider: ProviderConfig) -> ExperimentConfig {
    ExperimentConfig::new(manifest, out, tasks, provider)
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}
