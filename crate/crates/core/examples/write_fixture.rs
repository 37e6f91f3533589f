//! Regenerates the bundled Shoaib-layout fixture:
//! `cargo run -p har-core --example write_fixture -- fixtures/shoaib_small`

use std::path::PathBuf;

use har_core::ingest::ChannelSet;
use har_core::synthetic::{generate_records, write_shoaib_layout, ActivityProfile, SyntheticSpec};
use har_core::DatasetId;

fn main() -> std::io::Result<()> {
    let root: PathBuf = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("fixtures/shoaib_small"));
    let spec = SyntheticSpec {
        dataset_id: DatasetId::Shoaib,
        subjects: 2,
        activities: vec![
            ActivityProfile::walking(),
            ActivityProfile::running(),
            ActivityProfile::sitting(),
            ActivityProfile::standing(),
        ],
        samples_per_session: 125,
        fs: 50.0,
        channel_set: ChannelSet::ALL,
        subject_spread: 0.1,
        seed: 2024,
    };
    let records = generate_records(&spec);
    write_shoaib_layout(&records, &root)?;
    eprintln!("{} rows -> {}", records.len(), root.display());
    Ok(())
}
