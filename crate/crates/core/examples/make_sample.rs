//! Regenerates the bundled demo dataset under `data/sample/`.
//!
//! cargo run --example make_sample [-- <dir>]

use std::path::PathBuf;

fn main() -> anyhow::Result<()> {
    let dir = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/sample"));
    anomaly_forecast::sample::write_sample(&dir)?;
    println!("wrote sample dataset to {}", dir.display());
    Ok(())
}
