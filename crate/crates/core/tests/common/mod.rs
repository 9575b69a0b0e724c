#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use bayesmf::io::mtx::write_coordinate;
use bayesmf::io::{write_matrix_market, Preset, TrainOptions};
use bayesmf::synth::{low_rank, LowRankData, LowRankSpec};
use bayesmf::NoiseSpec;

/// The reference recovery problem: 200×150, K=4, 20% observed, noise 0.1,
/// 2000 held-out cells.
pub fn reference_data(seed: u64) -> LowRankData {
    let mut spec = LowRankSpec::new(200, 150, 4);
    spec.n_test = 2000;
    spec.seed = seed;
    low_rank(&spec).unwrap()
}

pub struct Files {
    pub train: PathBuf,
    pub test: PathBuf,
}

pub fn write_files(dir: &Path, data: &LowRankData) -> Files {
    fs::create_dir_all(dir).unwrap();
    let train = dir.join("train.mtx");
    let test = dir.join("test.mtx");
    write_matrix_market(&train, &data.train).unwrap();
    write_coordinate(&test, data.train.n_rows(), data.train.n_cols(), data.test.entries()).unwrap();
    Files { train, test }
}

/// bmf preset, K=4, 100 + 200 iterations, α fixed at 100.
pub fn reference_options(files: &Files, seed: u64) -> TrainOptions {
    TrainOptions {
        train: Some(files.train.clone()),
        test: Some(files.test.clone()),
        preset: Some(Preset::Bmf),
        noise: Some(NoiseSpec::Fixed { alpha: 100.0 }),
        num_latent: Some(4),
        burnin: Some(100),
        nsamples: Some(200),
        seed: Some(seed),
        threads: Some(1),
        ..TrainOptions::default()
    }
}

/// Every file under `dir`, relative path and contents, sorted by path.
pub fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
