//! Records the offline demo world into a fixture directory and writes the
//! matching five-claim dataset.
//!
//!     cargo run -p emulate-cli --example record_demo -- fixtures/demo

use std::path::PathBuf;

use emulate_core::testkit::web::{demo_dataset_jsonl, record_demo_fixtures};

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures/demo".into()));
    let reports = record_demo_fixtures(&dir)?;
    std::fs::write(dir.join("claims.jsonl"), demo_dataset_jsonl())?;
    println!("recorded {} runs into {}", reports.len(), dir.display());
    Ok(())
}
