mod common;

use std::fs;

use bayesmf::cli::{plan_training, run_training};
use bayesmf::io::{read_snapshot, restore_session, write_snapshot, TrainOptions};
use bayesmf::{NoiseSpec, Session, SessionConfig, ViewSet};
use common::{reference_data, reference_options, tree, write_files};

#[test]
fn writing_twice_gives_identical_bytes() {
    let data = reference_data(1);
    let mut cfg = SessionConfig::single(4, NoiseSpec::Adaptive { a0: 1.0, b0: 1.0 });
    cfg.burnin = 3;
    cfg.nsamples = 4;
    let mut s = Session::new(cfg, ViewSet::single(data.train), Some(data.test)).unwrap();
    s.run().unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_snapshot(&s, dir.path().join("a")).unwrap();
    write_snapshot(&s, dir.path().join("b")).unwrap();
    assert_eq!(tree(&dir.path().join("a")), tree(&dir.path().join("b")));

    let snap = read_snapshot(dir.path().join("a")).unwrap();
    assert_eq!(snap.iteration, 7);
    assert_eq!(snap.samples_collected, 4);
}

#[test]
fn snapshot_of_another_configuration_is_refused() {
    let data = reference_data(1);
    let mut cfg = SessionConfig::single(4, NoiseSpec::Fixed { alpha: 100.0 });
    cfg.burnin = 2;
    cfg.nsamples = 2;
    let mut s = Session::new(cfg.clone(), ViewSet::single(data.train.clone()), Some(data.test.clone())).unwrap();
    s.run().unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_snapshot(&s, dir.path()).unwrap();
    let snap = read_snapshot(dir.path()).unwrap();

    cfg.seed = 99;
    let mut other = Session::new(cfg.clone(), ViewSet::single(data.train.clone()), Some(data.test.clone())).unwrap();
    assert!(restore_session(&mut other, &snap).is_err());

    // more samples or more threads are compatible
    cfg.seed = 0;
    cfg.nsamples = 10;
    cfg.threads = 2;
    let mut longer = Session::new(cfg, ViewSet::single(data.train), Some(data.test)).unwrap();
    restore_session(&mut longer, &snap).unwrap();
    assert_eq!(longer.iteration(), 4);
}

#[test]
fn missing_component_is_reported() {
    let data = reference_data(2);
    let mut cfg = SessionConfig::single(2, NoiseSpec::Fixed { alpha: 10.0 });
    cfg.burnin = 1;
    cfg.nsamples = 1;
    let mut s = Session::new(cfg, ViewSet::single(data.train), None).unwrap();
    s.run().unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_snapshot(&s, dir.path()).unwrap();
    fs::remove_file(dir.path().join("factors-1.mtx")).unwrap();
    let msg = read_snapshot(dir.path()).unwrap_err().to_string();
    assert!(msg.contains("factors-1.mtx"), "{msg}");
}

#[test]
fn resumed_training_writes_the_same_trace() {
    let dir = tempfile::tempdir().unwrap();
    let files = write_files(dir.path(), &reference_data(4));
    let base = TrainOptions {
        burnin: Some(20),
        nsamples: Some(30),
        noise: Some(NoiseSpec::Adaptive { a0: 1.0, b0: 1.0 }),
        ..reference_options(&files, 8)
    };

    let full = TrainOptions {
        csv_trace: Some(dir.path().join("full.csv")),
        save_prefix: Some(dir.path().join("full")),
        ..base.clone()
    };
    let mut plan = plan_training(&full).unwrap();
    run_training(&mut plan, &mut Vec::new()).unwrap();

    let mut first = plan_training(&base).unwrap();
    for _ in 0..27 {
        first.session.step().unwrap();
    }
    write_snapshot(&first.session, dir.path().join("half")).unwrap();

    let resumed = TrainOptions {
        resume: Some(dir.path().join("half")),
        csv_trace: Some(dir.path().join("resumed.csv")),
        save_prefix: Some(dir.path().join("resumed")),
        threads: Some(2),
        ..base
    };
    let mut plan = plan_training(&resumed).unwrap();
    run_training(&mut plan, &mut Vec::new()).unwrap();

    assert_eq!(fs::read(dir.path().join("full.csv")).unwrap(), fs::read(dir.path().join("resumed.csv")).unwrap());
    assert_eq!(tree(&dir.path().join("full")), tree(&dir.path().join("resumed")));
}
