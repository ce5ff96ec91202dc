//! Sample assembly: canonical feature layout, Friday input state, Monday
//! label, and the null filter.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use chrono::Days;
use serde::{Deserialize, Serialize};

use super::calendar::IsoWeek;
use super::records::{EstuaryConfig, UpwellingRecord, ZoneState, ZoneStatusRecord};
use super::{feature_names, StationWeekRecord};
use crate::dataset::{EstuaryDataset, Matrix, SampleKey};
use crate::error::{Error, Result};

/// How far back (in days, inclusive of Friday) a status record may be to
/// count as the Friday state.
pub const FRIDAY_LOOKBACK_DAYS: u64 = 6;

/// A (zone, week) sample before the null filter.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSample {
    pub key: SampleKey,
    pub features: Vec<Option<f64>>,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropEntry {
    pub zone_id: String,
    pub iso_year: i32,
    pub iso_week: u32,
    pub reason: String,
}

impl DropEntry {
    fn new(zone: &str, week: IsoWeek, reason: impl Into<String>) -> Self {
        Self {
            zone_id: zone.to_string(),
            iso_year: week.year,
            iso_week: week.week,
            reason: reason.into(),
        }
    }
}

pub fn write_drop_log(path: &Path, drops: &[DropEntry]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    let mut body = String::from("zone_id,iso_year,iso_week,reason\n");
    for d in drops {
        body.push_str(&format!("{},{},{},\"{}\"\n", d.zone_id, d.iso_year, d.iso_week, d.reason));
    }
    w.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// One-hot vector of `zone_id` over `zones`.
pub fn one_hot(zone_id: &str, zones: &[String]) -> Result<Vec<f64>> {
    let idx = zones
        .iter()
        .position(|z| z == zone_id)
        .ok_or_else(|| Error::Config(format!("unknown zone '{zone_id}'")))?;
    let mut v = vec![0.0; zones.len()];
    v[idx] = 1.0;
    Ok(v)
}

/// Per-zone status timeline with step-function lookups.
struct StatusTimeline {
    by_zone: HashMap<String, BTreeMap<chrono::NaiveDate, ZoneState>>,
}

impl StatusTimeline {
    fn new(statuses: &[ZoneStatusRecord]) -> Self {
        let mut by_zone: HashMap<String, BTreeMap<chrono::NaiveDate, ZoneState>> = HashMap::new();
        for s in statuses {
            // Conflicting same-day records resolve to closed.
            let slot = by_zone
                .entry(s.zone_id.clone())
                .or_default()
                .entry(s.date)
                .or_insert(s.state);
            *slot = (*slot).max(s.state);
        }
        Self { by_zone }
    }

    fn friday_state(&self, zone: &str, week: IsoWeek) -> Option<ZoneState> {
        let friday = week.friday();
        let from = friday - Days::new(FRIDAY_LOOKBACK_DAYS);
        self.by_zone
            .get(zone)?
            .range(from..=friday)
            .next_back()
            .map(|(_, &s)| s)
    }

    fn label(&self, zone: &str, week: IsoWeek) -> Option<ZoneState> {
        self.by_zone.get(zone)?.get(&week.next_monday()).copied()
    }
}

fn weekly_upwelling(records: &[UpwellingRecord]) -> BTreeMap<IsoWeek, f64> {
    let mut groups: BTreeMap<IsoWeek, Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry(IsoWeek::of(r.date)).or_default().push(r.index);
    }
    groups
        .into_iter()
        .map(|(w, mut v)| {
            v.sort_by(f64::total_cmp);
            (w, v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect()
}

/// Build one candidate per (zone, week) over the contiguous week range
/// spanned by the station and upwelling data. Samples without a Friday
/// state or a next-Monday status are dropped and logged.
pub fn build_samples(
    config: &EstuaryConfig,
    station_weeks: &BTreeMap<(String, IsoWeek), StationWeekRecord>,
    statuses: &[ZoneStatusRecord],
    upwelling: &[UpwellingRecord],
) -> (Vec<CandidateSample>, Vec<DropEntry>) {
    let upw = weekly_upwelling(upwelling);
    let weeks: BTreeSet<IsoWeek> = station_weeks
        .keys()
        .map(|(_, w)| *w)
        .chain(upw.keys().copied())
        .collect();
    let (Some(&first), Some(&last)) = (weeks.first(), weeks.last()) else {
        return (Vec::new(), Vec::new());
    };
    let timeline = StatusTimeline::new(statuses);
    let width = config.feature_width();

    let mut samples = Vec::new();
    let mut drops = Vec::new();
    let mut week = first;
    loop {
        let mut shared: Vec<Option<f64>> = Vec::with_capacity(width);
        shared.push(Some(week.week as f64));
        shared.push(upw.get(&week).copied());
        for st in &config.stations {
            match station_weeks.get(&(st.clone(), week)) {
                Some(rec) => shared.extend(rec.values()),
                None => shared.extend([None; 16]),
            }
        }
        for (zi, zone) in config.zones.iter().enumerate() {
            let Some(friday) = timeline.friday_state(zone, week) else {
                drops.push(DropEntry::new(zone, week, "no friday state"));
                continue;
            };
            let Some(label) = timeline.label(zone, week) else {
                drops.push(DropEntry::new(zone, week, "no label"));
                continue;
            };
            let mut features = shared.clone();
            features.extend((0..config.zones.len()).map(|j| Some(if j == zi { 1.0 } else { 0.0 })));
            features.push(Some(friday.as_label() as f64));
            debug_assert_eq!(features.len(), width);
            samples.push(CandidateSample {
                key: SampleKey {
                    zone_id: zone.clone(),
                    iso_year: week.year,
                    iso_week: week.week,
                },
                features,
                label: label.as_label(),
            });
        }
        if week == last {
            break;
        }
        week = week.next();
    }
    (samples, drops)
}

/// Remove every candidate with a missing feature.
pub fn drop_nulls(
    name: &str,
    feature_names: Vec<String>,
    samples: Vec<CandidateSample>,
) -> Result<(EstuaryDataset, Vec<DropEntry>)> {
    let width = feature_names.len();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut keys = Vec::new();
    let mut drops = Vec::new();
    for s in samples {
        if s.features.len() != width {
            return Err(Error::Data(format!(
                "sample {:?} has {} features, expected {width}",
                s.key,
                s.features.len()
            )));
        }
        let missing: Vec<&str> = s
            .features
            .iter()
            .zip(&feature_names)
            .filter(|(v, _)| v.is_none())
            .map(|(_, n)| n.as_str())
            .collect();
        if missing.is_empty() {
            data.extend(s.features.iter().map(|v| v.unwrap_or(f64::NAN)));
            labels.push(s.label);
            keys.push(s.key);
        } else {
            drops.push(DropEntry {
                zone_id: s.key.zone_id,
                iso_year: s.key.iso_year,
                iso_week: s.key.iso_week,
                reason: format!("missing: {}", missing.join(";")),
            });
        }
    }
    if labels.is_empty() {
        return Err(Error::Data("no complete samples".into()));
    }
    let features = Matrix::new(labels.len(), width, data)?;
    let ds = EstuaryDataset::new(name, feature_names, features, labels, keys)?;
    Ok((ds, drops))
}

/// Null-filtered dataset plus the combined drop log for `config`.
pub fn assemble(
    config: &EstuaryConfig,
    station_weeks: &BTreeMap<(String, IsoWeek), StationWeekRecord>,
    statuses: &[ZoneStatusRecord],
    upwelling: &[UpwellingRecord],
) -> Result<(EstuaryDataset, Vec<DropEntry>, usize)> {
    let (samples, mut drops) = build_samples(config, station_weeks, statuses, upwelling);
    let n_candidates = samples.len() + drops.len();
    let (ds, null_drops) = drop_nulls(&config.name, feature_names(config), samples)?;
    drops.extend(null_drops);
    Ok((ds, drops, n_candidates))
}
