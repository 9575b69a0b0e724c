//! Time the accumulation and Cholesky kernels and a few full iterations
//! across thread counts. Checksums match across rows because results do
//! not depend on scheduling.
//!
//! ```text
//! cargo run --release --example bench_kernels
//! ```

use bayesmf::bench::{run_bench, BenchParams, BenchRow, Kernel};

fn main() -> bayesmf::Result<()> {
    println!("{}", BenchRow::CSV_HEADER);

    let mut acc = BenchParams::new(Kernel::Accumulate);
    acc.entries = 20_000;
    acc.thresholds = vec![1, 4096, 1_000_000];
    let mut chol = BenchParams::new(Kernel::Cholesky);
    chol.reps = 1000;
    let mut full = BenchParams::new(Kernel::FullIteration);
    full.num_latent = 16;
    full.reps = 3;
    full.threads = vec![1, 2, 4];

    for p in [acc, chol, full] {
        for row in run_bench(&p)? {
            println!("{}", row.csv());
        }
    }
    Ok(())
}
