//! Weekly per-station aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::calendar::IsoWeek;
use super::records::{ProfileRecord, SurfaceRecord};

/// Upper bound (inclusive) of the surface layer, in metres.
pub const SURFACE_LAYER_M: f64 = 6.0;
/// Upper bound (inclusive) of the layer below it.
pub const SUBSURFACE_LAYER_M: f64 = 12.0;

/// Weekly aggregates of one station. `None` means no observation that week.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StationWeekRecord {
    pub station_id: String,
    pub week: Option<IsoWeek>,
    pub chl_a_max: Option<f64>,
    pub chl_b_max: Option<f64>,
    pub chl_c_max: Option<f64>,
    pub d_acuminata: Option<f64>,
    pub d_acuta: Option<f64>,
    pub d_caudata: Option<f64>,
    pub d_spp: Option<f64>,
    pub ammonium: Option<f64>,
    pub phosphate: Option<f64>,
    pub nitrate: Option<f64>,
    pub nitrite: Option<f64>,
    pub temp_mean: Option<f64>,
    pub salinity_mean: Option<f64>,
    pub oxygen_mean: Option<f64>,
    pub thermocline_index: Option<f64>,
    pub halocline_index: Option<f64>,
}

impl StationWeekRecord {
    /// Values in canonical feature order (see [`super::STATION_FEATURES`]).
    pub fn values(&self) -> [Option<f64>; 16] {
        [
            self.chl_a_max,
            self.chl_b_max,
            self.chl_c_max,
            self.d_acuminata,
            self.d_acuta,
            self.d_caudata,
            self.d_spp,
            self.ammonium,
            self.phosphate,
            self.nitrate,
            self.nitrite,
            self.temp_mean,
            self.salinity_mean,
            self.oxygen_mean,
            self.thermocline_index,
            self.halocline_index,
        ]
    }
}

/// Mean over a value set, independent of input order.
fn mean(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

fn max(values: impl Iterator<Item = f64>) -> Option<f64> {
    values.fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

/// |mean over (0, 6] m − mean over (6, 12] m|; `None` if either layer has
/// no observation. Observations deeper than 12 m are ignored.
pub fn stratification_index(values_by_depth: &[(f64, f64)]) -> Option<f64> {
    let mut upper: Vec<f64> = Vec::new();
    let mut lower: Vec<f64> = Vec::new();
    for &(depth, v) in values_by_depth {
        if depth > 0.0 && depth <= SURFACE_LAYER_M {
            upper.push(v);
        } else if depth > SURFACE_LAYER_M && depth <= SUBSURFACE_LAYER_M {
            lower.push(v);
        }
    }
    Some((mean(&mut upper)? - mean(&mut lower)?).abs())
}

/// Aggregate one station-week. Records are assumed already filtered to the
/// station and week.
pub fn aggregate_week(
    profiles: &[&ProfileRecord],
    surfaces: &[&SurfaceRecord],
    station: &str,
    week: IsoWeek,
) -> StationWeekRecord {
    let field = |f: fn(&SurfaceRecord) -> Option<f64>| surfaces.iter().filter_map(move |s| f(s));
    let mean_of = |f: fn(&SurfaceRecord) -> Option<f64>| mean(&mut field(f).collect::<Vec<_>>());
    let profile_mean =
        |f: fn(&ProfileRecord) -> Option<f64>| mean(&mut profiles.iter().filter_map(|p| f(p)).collect::<Vec<_>>());
    let by_depth = |f: fn(&ProfileRecord) -> Option<f64>| {
        profiles
            .iter()
            .filter_map(|p| f(p).map(|v| (p.depth_m, v)))
            .collect::<Vec<_>>()
    };

    StationWeekRecord {
        station_id: station.to_string(),
        week: Some(week),
        chl_a_max: max(field(|s| s.chl_a)),
        chl_b_max: max(field(|s| s.chl_b)),
        chl_c_max: max(field(|s| s.chl_c)),
        d_acuminata: max(field(|s| s.d_acuminata)),
        d_acuta: max(field(|s| s.d_acuta)),
        d_caudata: max(field(|s| s.d_caudata)),
        d_spp: max(field(|s| s.d_spp)),
        ammonium: mean_of(|s| s.ammonium),
        phosphate: mean_of(|s| s.phosphate),
        nitrate: mean_of(|s| s.nitrate),
        nitrite: mean_of(|s| s.nitrite),
        temp_mean: profile_mean(|p| p.temperature),
        salinity_mean: profile_mean(|p| p.salinity),
        oxygen_mean: profile_mean(|p| p.oxygen),
        thermocline_index: stratification_index(&by_depth(|p| p.temperature)),
        halocline_index: stratification_index(&by_depth(|p| p.salinity)),
    }
}

/// Group all records by (station, ISO week) and aggregate each group.
pub fn aggregate_all(
    profiles: &[ProfileRecord],
    surfaces: &[SurfaceRecord],
) -> BTreeMap<(String, IsoWeek), StationWeekRecord> {
    let mut groups: BTreeMap<(String, IsoWeek), (Vec<&ProfileRecord>, Vec<&SurfaceRecord>)> =
        BTreeMap::new();
    for p in profiles {
        groups
            .entry((p.station_id.clone(), IsoWeek::of(p.date)))
            .or_default()
            .0
            .push(p);
    }
    for s in surfaces {
        groups
            .entry((s.station_id.clone(), IsoWeek::of(s.date)))
            .or_default()
            .1
            .push(s);
    }
    groups
        .into_iter()
        .map(|((station, week), (p, s))| {
            let rec = aggregate_week(&p, &s, &station, week);
            ((station, week), rec)
        })
        .collect()
}
