//! Raw observation files to per-estuary weekly datasets.
//!
//! Each sample is one (production area, ISO week) pair. Station variables
//! are aggregated over the week, the production area's state on Friday is
//! an input, and its state on the following Monday is the label. Samples
//! with any missing feature are dropped.

pub mod aggregate;
pub mod calendar;
pub mod records;
pub mod samples;

use std::path::Path;

pub use aggregate::{aggregate_all, aggregate_week, stratification_index, StationWeekRecord};
pub use calendar::{week_of_year, IsoWeek};
pub use records::{
    EstuaryConfig, ProfileRecord, RawData, RawPaths, SurfaceRecord, UpwellingRecord, ZoneState,
    ZoneStatusRecord,
};
pub use samples::{build_samples, drop_nulls, one_hot, write_drop_log, CandidateSample, DropEntry};

use crate::dataset::EstuaryDataset;
use crate::error::Result;

/// Per-station feature names, in canonical order.
pub const STATION_FEATURES: [&str; 16] = [
    "chl_a_max",
    "chl_b_max",
    "chl_c_max",
    "d_acuminata",
    "d_acuta",
    "d_caudata",
    "d_spp",
    "ammonium",
    "phosphate",
    "nitrate",
    "nitrite",
    "temp_mean",
    "salinity_mean",
    "oxygen_mean",
    "thermocline_index",
    "halocline_index",
];

/// Column names of the canonical feature vector.
pub fn feature_names(config: &EstuaryConfig) -> Vec<String> {
    let mut names = vec!["week_of_year".to_string(), "upwelling".to_string()];
    for st in &config.stations {
        names.extend(STATION_FEATURES.iter().map(|f| format!("{st}_{f}")));
    }
    names.extend(config.zones.iter().map(|z| format!("zone_{z}")));
    names.push("friday_state".into());
    names
}

/// Result of a full ingest run.
#[derive(Debug, Clone)]
pub struct IngestOutput {
    pub dataset: EstuaryDataset,
    pub drops: Vec<DropEntry>,
    pub n_candidates: usize,
}

/// Aggregate, assemble and null-filter already-parsed raw data.
pub fn build_dataset(config: &EstuaryConfig, raw: &RawData) -> Result<IngestOutput> {
    let station_weeks = aggregate_all(&raw.profiles, &raw.surfaces);
    let (dataset, drops, n_candidates) =
        samples::assemble(config, &station_weeks, &raw.statuses, &raw.upwelling)?;
    Ok(IngestOutput {
        dataset,
        drops,
        n_candidates,
    })
}

/// Parse the raw files and build the dataset.
pub fn ingest(config: &EstuaryConfig, paths: &RawPaths) -> Result<IngestOutput> {
    let raw = RawData::load(paths, config)?;
    build_dataset(config, &raw)
}

/// Write `<estuary name>.csv` and `drops.csv` into `dir`; returns the
/// dataset path. The file stem carries the estuary name when read back.
pub fn write_output(out: &IngestOutput, dir: &Path) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    let path = dir.join(format!("{}.csv", out.dataset.name));
    out.dataset.write_csv(&path)?;
    write_drop_log(&dir.join("drops.csv"), &out.drops)?;
    Ok(path)
}
