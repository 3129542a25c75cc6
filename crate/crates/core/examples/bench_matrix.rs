//! The scheme x module benchmark behind `fima bench`, driven from code.
//!
//! `cargo run --release --example bench_matrix`

use fima::cli::{cmd_bench, ExperimentConfig};

fn main() -> fima::Result<()> {
    let dir = tempfile::tempdir()?;
    let mut cfg = ExperimentConfig::default();
    for (k, v) in [("schemes", "pg,apg,efima,ifima"), ("modules", "identity,tv,rf"), ("instances", "2"), ("timing", "true")] {
        cfg.set(k, v)?;
    }
    cfg.out = dir.path().to_path_buf();
    cmd_bench(&cfg)?;
    print!("{}", std::fs::read_to_string(dir.path().join("bench.csv"))?);
    Ok(())
}
