//! File-based workflow: write Matrix Market inputs, train through the
//! command-line entry point, then predict cells from the saved model.
//!
//! ```text
//! cargo run --release --example matrix_market_io
//! ```

use std::fs;

use bayesmf::io::mtx::write_coordinate;
use bayesmf::io::write_matrix_market;
use bayesmf::synth::{low_rank, LowRankSpec};

fn main() -> bayesmf::Result<()> {
    let dir = std::env::temp_dir().join(format!("bayesmf-mm-{}", std::process::id()));
    fs::create_dir_all(&dir).map_err(|e| bayesmf::Error::Data(e.to_string()))?;

    let mut spec = LowRankSpec::new(100, 80, 3);
    spec.n_test = 200;
    let data = low_rank(&spec)?;
    write_matrix_market(dir.join("train.mtx"), &data.train)?;
    write_coordinate(dir.join("test.mtx"), 100, 80, data.test.entries())?;
    fs::write(dir.join("run.conf"), "# small demo run\npreset = bmf\nnum_latent = 3\nburnin = 50\nnsamples = 100\ntrain = train.mtx\ntest = test.mtx\n")
        .map_err(|e| bayesmf::Error::Data(e.to_string()))?;
    let queries: String = data.test.entries()[..5].iter().map(|&(i, j, _)| format!("{i},{j}\n")).collect();
    fs::write(dir.join("queries.csv"), format!("i,j\n{queries}")).map_err(|e| bayesmf::Error::Data(e.to_string()))?;

    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let code = bayesmf::cli::main_with_args([
        "bayesmf".to_string(),
        "train".into(),
        "--config".into(),
        p("run.conf"),
        "--noise".into(),
        "fixed:100".into(),
        "--save-prefix".into(),
        p("model"),
        "--csv-trace".into(),
        p("trace.csv"),
    ]);
    assert_eq!(code, 0, "train failed");

    let code = bayesmf::cli::main_with_args(["bayesmf".to_string(), "predict".into(), "--model".into(), p("model"), "--queries".into(), p("queries.csv")]);
    assert_eq!(code, 0, "predict failed");
    for &(i, j, v) in &data.test.entries()[..5] {
        println!("truth {i},{j} = {v:.4}");
    }
    fs::remove_dir_all(&dir).ok();
    Ok(())
}
