#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_cusplit");

pub fn cusplit(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs and insists on success.
pub fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cusplit(dir, args);
    assert!(
        out.status.success(),
        "cusplit {args:?} failed with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn write_spec(
    dir: &Path,
    name: &str,
    archetype: &str,
    w: usize,
    h: usize,
    frames: usize,
    seed: u64,
) -> PathBuf {
    let path = dir.join(format!("{name}.toml"));
    let text = format!(
        "name = \"{name}\"\narchetype = \"{archetype}\"\nwidth = {w}\nheight = {h}\nframes = {frames}\nseed = {seed}\n"
    );
    std::fs::write(&path, text).unwrap();
    path
}

pub struct Pipeline {
    pub train: Vec<String>,
    pub held_out: Vec<String>,
}

impl Pipeline {
    /// Four training and three held-out mixed-content sequences.
    pub fn mixed() -> Self {
        Pipeline {
            train: (0..4).map(|i| format!("train{i}")).collect(),
            held_out: (0..3).map(|i| format!("held{i}")).collect(),
        }
    }

    /// generate → extract → train → prune → bench, all through the binary.
    pub fn run(&self, dir: &Path) {
        let mut specs = Vec::new();
        for (i, n) in self.train.iter().enumerate() {
            specs.push(write_spec(dir, n, "mixed", 256, 192, 5, 100 + i as u64));
        }
        let spec_args: Vec<&str> = specs
            .iter()
            .map(|p| p.file_name().unwrap().to_str().unwrap())
            .collect();
        let mut args = vec!["generate", "--out-dir", "train", "--spec"];
        args.extend(spec_args);
        ok(dir, &args);

        let mut specs = Vec::new();
        for (i, n) in self.held_out.iter().enumerate() {
            specs.push(write_spec(dir, n, "mixed", 256, 192, 5, 900 + i as u64));
        }
        let spec_args: Vec<&str> = specs
            .iter()
            .map(|p| p.file_name().unwrap().to_str().unwrap())
            .collect();
        let mut args = vec!["generate", "--out-dir", "held", "--spec"];
        args.extend(spec_args);
        ok(dir, &args);

        let train_hdrs: Vec<String> = self
            .train
            .iter()
            .map(|n| format!("train/{n}.hdr"))
            .collect();
        let mut args = vec!["extract", "--out", "dataset.csv", "--sequence"];
        args.extend(train_hdrs.iter().map(String::as_str));
        ok(dir, &args);

        ok(
            dir,
            &["train", "--dataset", "dataset.csv", "--out-dir", "models"],
        );
        ok(
            dir,
            &[
                "prune",
                "--out-dir",
                "criteria",
                "--model",
                "models/depth0.json",
                "models/depth1.json",
                "models/depth2.json",
            ],
        );

        let held_hdrs: Vec<String> = self
            .held_out
            .iter()
            .map(|n| format!("held/{n}.hdr"))
            .collect();
        let mut args = vec![
            "bench",
            "--out-dir",
            "bench",
            "--criteria",
            "criteria/criteria.txt",
            "--sequence",
        ];
        args.extend(held_hdrs.iter().map(String::as_str));
        ok(dir, &args);
    }

    pub fn manifests(dir: &Path) -> Vec<PathBuf> {
        [
            "train/generate.manifest.json",
            "held/generate.manifest.json",
            "dataset.csv.manifest.json",
            "models/train.manifest.json",
            "criteria/prune.manifest.json",
            "bench/bench.manifest.json",
        ]
        .iter()
        .map(|m| dir.join(m))
        .collect()
    }
}

/// Output paths recorded in a manifest, minus the volatile ones.
pub fn manifest_outputs(manifest: &Path) -> Vec<PathBuf> {
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(manifest).unwrap()).unwrap();
    v["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| PathBuf::from(p.as_str().unwrap()))
        .collect()
}
