//! Synthetic estuaries: raw observation files whose weekly aggregates
//! follow per-feature target statistics, labelled by a planted hysteresis
//! rule on the Dinophysis load of each production area's station.
//!
//! Every marginal is a truncated normal or lognormal, discretised into
//! equal-probability strata whose conditional means become the weekly
//! values, so each series has the target mean by construction. Weeks are
//! matched to strata by ranking a latent score that mixes a shared
//! seasonal/bloom signal with series-specific noise.

pub mod dist;
pub mod rule;

use std::fmt::Write as _;
use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use dist::{Family, FeatureDistributionSpec, TruncatedLaw};
pub use rule::{
    calibrate_thresholds, closure_fraction, oracle_labels, simulate, SpeciesWeights, Thresholds,
    TruthRule, ZoneStation,
};

use crate::error::{Error, Result};
use crate::ingest::records::{PROFILE_HEADER, STATUS_HEADER, SURFACE_HEADER, UPWELLING_HEADER};
use crate::ingest::{EstuaryConfig, IsoWeek, RawData, ZoneState, STATION_FEATURES};
use crate::ingest::{ProfileRecord, SurfaceRecord, UpwellingRecord, ZoneStatusRecord};
use crate::seed;

/// Sampling depths of the synthetic casts: two in each stratification layer.
pub const PROFILE_DEPTHS: [f64; 4] = [2.0, 5.0, 8.0, 11.0];

/// Target statistics of the 16 per-station features, keyed like
/// [`STATION_FEATURES`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationDistributions {
    pub chl_a_max: FeatureDistributionSpec,
    pub chl_b_max: FeatureDistributionSpec,
    pub chl_c_max: FeatureDistributionSpec,
    pub d_acuminata: FeatureDistributionSpec,
    pub d_acuta: FeatureDistributionSpec,
    pub d_caudata: FeatureDistributionSpec,
    pub d_spp: FeatureDistributionSpec,
    pub ammonium: FeatureDistributionSpec,
    pub phosphate: FeatureDistributionSpec,
    pub nitrate: FeatureDistributionSpec,
    pub nitrite: FeatureDistributionSpec,
    pub temp_mean: FeatureDistributionSpec,
    pub salinity_mean: FeatureDistributionSpec,
    pub oxygen_mean: FeatureDistributionSpec,
    pub thermocline_index: FeatureDistributionSpec,
    pub halocline_index: FeatureDistributionSpec,
}

impl StationDistributions {
    pub fn as_array(&self) -> [&FeatureDistributionSpec; 16] {
        [
            &self.chl_a_max,
            &self.chl_b_max,
            &self.chl_c_max,
            &self.d_acuminata,
            &self.d_acuta,
            &self.d_caudata,
            &self.d_spp,
            &self.ammonium,
            &self.phosphate,
            &self.nitrate,
            &self.nitrite,
            &self.temp_mean,
            &self.salinity_mean,
            &self.oxygen_mean,
            &self.thermocline_index,
            &self.halocline_index,
        ]
    }
}

fn default_missing_rate() -> f64 {
    0.1
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2005, 1, 3).unwrap()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticEstuarySpec {
    pub estuary: EstuaryConfig,
    /// Monday of the first generated week.
    #[serde(default = "default_start")]
    pub start: NaiveDate,
    pub weeks: usize,
    pub closure_target: f64,
    #[serde(default)]
    pub label_noise: f64,
    /// Probability that a station-week loses one variable.
    #[serde(default = "default_missing_rate")]
    pub missing_rate: f64,
    #[serde(default)]
    pub species_weights: SpeciesWeights,
    /// Fixed thresholds; calibrated against `closure_target` when absent.
    #[serde(default)]
    pub thresholds: Option<Thresholds>,
    pub features: StationDistributions,
    pub upwelling: FeatureDistributionSpec,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticEstuarySpec {
    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: Self =
            serde_json::from_str(&s).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.estuary.validate()?;
        if self.weeks < 2 {
            return Err(Error::Config("need at least 2 weeks".into()));
        }
        if !(self.closure_target > 0.0 && self.closure_target < 1.0) {
            return Err(Error::Config(format!(
                "closure target must lie in (0, 1), got {}",
                self.closure_target
            )));
        }
        if !(0.0..=0.1).contains(&self.label_noise) {
            return Err(Error::Config(format!("label noise must lie in [0, 0.1], got {}", self.label_noise)));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::Config(format!("missing rate must lie in [0, 1), got {}", self.missing_rate)));
        }
        if let Some(th) = &self.thresholds {
            th.validate()?;
        }
        for (name, f) in STATION_FEATURES.iter().zip(self.features.as_array()) {
            f.validate(name)?;
        }
        self.upwelling.validate("upwelling")
    }

    /// Station driving zone `j`: stations are assigned round-robin.
    pub fn zone_station(&self) -> Vec<ZoneStation> {
        let st = &self.estuary.stations;
        self.estuary
            .zones
            .iter()
            .enumerate()
            .map(|(j, z)| ZoneStation {
                zone: z.clone(),
                station: st[j % st.len()].clone(),
            })
            .collect()
    }
}

/// Which shared signal a series follows, and how strongly.
#[derive(Clone, Copy)]
enum Driver {
    Season(f64),
    Bloom(f64),
}

/// Drivers in [`STATION_FEATURES`] order.
const DRIVERS: [Driver; 16] = [
    Driver::Bloom(0.6),
    Driver::Bloom(0.3),
    Driver::Bloom(0.5),
    Driver::Bloom(0.99),
    Driver::Bloom(0.99),
    Driver::Bloom(0.99),
    Driver::Bloom(0.99),
    Driver::Bloom(-0.5),
    Driver::Bloom(-0.5),
    Driver::Bloom(-0.5),
    Driver::Bloom(-0.3),
    Driver::Season(0.85),
    Driver::Season(-0.3),
    Driver::Season(0.3),
    Driver::Season(0.6),
    Driver::Season(0.3),
];
const UPWELLING_DRIVER: Driver = Driver::Season(0.4);
const BLOOM_AR: f64 = 0.98;

/// Index of each station feature in [`STATION_FEATURES`].
mod col {
    pub const ACUMINATA: usize = 3;
    pub const SPP: usize = 6;
    pub const TEMP: usize = 11;
    pub const SALINITY: usize = 12;
    pub const OXYGEN: usize = 13;
    pub const THERMOCLINE: usize = 14;
    pub const HALOCLINE: usize = 15;
}

/// Generated estuary: raw records plus the weekly truth behind them.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub config: EstuaryConfig,
    pub raw: RawData,
    pub rule: TruthRule,
    /// `weekly[station][week]`, canonical feature order, before any
    /// missing-value injection.
    pub weekly: Vec<Vec<[f64; 16]>>,
    pub upwelling: Vec<f64>,
    /// `states[zone][w]` is the state on the Monday of week `w`, for
    /// `w = 0 … weeks`.
    pub states: Vec<Vec<bool>>,
    /// Station-weeks that lost a variable: `(station, week, feature index)`.
    pub missing: Vec<(usize, usize, usize)>,
}

fn latent_signals(spec: &SyntheticEstuarySpec, master: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = seed::rng(seed::derive(master, &[0]));
    let mut season = Vec::with_capacity(spec.weeks);
    let mut bloom = Vec::with_capacity(spec.weeks);
    let mut ar: f64 = rng.sample(StandardNormal);
    let innov = (1.0 - BLOOM_AR * BLOOM_AR).sqrt();
    for w in 0..spec.weeks {
        let monday = spec.start + Days::new(7 * w as u64);
        let woy = IsoWeek::of(monday).week as f64;
        let s = (2.0 * std::f64::consts::PI * (woy - 14.0) / 52.0).sin() * std::f64::consts::SQRT_2;
        if w > 0 {
            let e: f64 = rng.sample(StandardNormal);
            ar = BLOOM_AR * ar + innov * e;
        }
        season.push(s);
        bloom.push(0.6 * s + 0.8 * ar);
    }
    (season, bloom)
}

/// One weekly series: stratum means assigned to weeks by latent rank.
fn series(law: &TruncatedLaw, driver: Driver, season: &[f64], bloom: &[f64], stream: u64) -> Vec<f64> {
    let n = season.len();
    let (signal, rho) = match driver {
        Driver::Season(r) => (season, r),
        Driver::Bloom(r) => (bloom, r),
    };
    let mut rng = seed::rng(stream);
    let idio = (1.0 - rho * rho).sqrt();
    let score: Vec<f64> = signal
        .iter()
        .map(|&s| {
            let e: f64 = rng.sample(StandardNormal);
            rho * s + idio * e
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| score[a].total_cmp(&score[b]).then(a.cmp(&b)));
    let strata = law.strata_means(n);
    let mut out = vec![0.0; n];
    for (rank, &w) in order.iter().enumerate() {
        out[w] = strata[rank];
    }
    out
}

pub fn generate(spec: &SyntheticEstuarySpec) -> Result<SynthOutput> {
    spec.validate()?;
    let master = spec.seed;
    let (season, bloom) = latent_signals(spec, master);
    let n_st = spec.estuary.stations.len();
    let laws = spec
        .features
        .as_array()
        .map(TruncatedLaw::fit)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut weekly = vec![vec![[0.0; 16]; spec.weeks]; n_st];
    for (s, station) in weekly.iter_mut().enumerate() {
        for (f, law) in laws.iter().enumerate() {
            let v = series(law, DRIVERS[f], &season, &bloom, seed::derive(master, &[1, s as u64, f as u64]));
            for (w, x) in v.into_iter().enumerate() {
                station[w][f] = x;
            }
        }
    }
    let up_law = TruncatedLaw::fit(&spec.upwelling)?;
    let upwelling = series(&up_law, UPWELLING_DRIVER, &season, &bloom, seed::derive(master, &[4]));

    // Planted rule.
    let zone_station = spec.zone_station();
    let station_idx = |name: &str| spec.estuary.stations.iter().position(|s| s == name).unwrap();
    let loads: Vec<Vec<f64>> = zone_station
        .iter()
        .map(|zs| {
            let s = station_idx(&zs.station);
            weekly[s]
                .iter()
                .map(|v| {
                    spec.species_weights
                        .load([v[col::ACUMINATA], v[col::ACUMINATA + 1], v[col::ACUMINATA + 2], v[col::SPP]])
                })
                .collect()
        })
        .collect();
    let draws: Vec<Vec<f64>> = (0..loads.len())
        .map(|z| {
            let mut rng = seed::rng(seed::derive(master, &[2, z as u64]));
            (0..spec.weeks).map(|_| rng.gen::<f64>()).collect()
        })
        .collect();
    let (thresholds, calibration) = match spec.thresholds {
        Some(th) => (th, Vec::new()),
        None => calibrate_thresholds(&loads, &draws, spec.label_noise, spec.closure_target)?,
    };
    let states: Vec<Vec<bool>> = loads
        .iter()
        .zip(&draws)
        .map(|(l, d)| simulate(l, &thresholds, false, d, spec.label_noise))
        .collect();
    let fraction = closure_fraction(&loads, &thresholds, &draws, spec.label_noise);
    let rule = TruthRule {
        thresholds,
        weights: spec.species_weights,
        label_noise: spec.label_noise,
        zone_station,
        closure_target: spec.closure_target,
        closure_fraction: fraction,
        calibration,
        seed: master,
    };

    // Missing-value injection.
    let mut missing = Vec::new();
    let mut rng = seed::rng(seed::derive(master, &[3]));
    for w in 0..spec.weeks {
        for s in 0..n_st {
            let hit = rng.gen::<f64>() < spec.missing_rate;
            let f = rng.gen_range(0..16);
            if hit {
                missing.push((s, w, f));
            }
        }
    }

    let raw = emit_records(spec, &weekly, &upwelling, &states, &missing);
    Ok(SynthOutput {
        config: spec.estuary.clone(),
        raw,
        rule,
        weekly,
        upwelling,
        states,
        missing,
    })
}

fn emit_records(
    spec: &SyntheticEstuarySpec,
    weekly: &[Vec<[f64; 16]>],
    upwelling: &[f64],
    states: &[Vec<bool>],
    missing: &[(usize, usize, usize)],
) -> RawData {
    let mut raw = RawData::default();
    let mut lost = std::collections::HashSet::new();
    for &m in missing {
        lost.insert(m);
    }
    for w in 0..spec.weeks {
        let monday = spec.start + Days::new(7 * w as u64);
        let wednesday = monday + Days::new(2);
        for d in 0..7 {
            raw.upwelling.push(UpwellingRecord {
                date: monday + Days::new(d),
                index: upwelling[w],
            });
        }
        for (s, station) in spec.estuary.stations.iter().enumerate() {
            let v = &weekly[s][w];
            let keep = |f: usize| (!lost.contains(&(s, w, f))).then_some(v[f]);
            raw.surfaces.push(SurfaceRecord {
                station_id: station.clone(),
                date: wednesday,
                chl_a: keep(0),
                chl_b: keep(1),
                chl_c: keep(2),
                d_acuminata: keep(3),
                d_acuta: keep(4),
                d_caudata: keep(5),
                d_spp: keep(6),
                ammonium: keep(7),
                phosphate: keep(8),
                nitrate: keep(9),
                nitrite: keep(10),
            });
            let (t, sal, o) = (v[col::TEMP], v[col::SALINITY], v[col::OXYGEN]);
            let (dt, ds) = (v[col::THERMOCLINE], v[col::HALOCLINE]);
            for depth in PROFILE_DEPTHS {
                let upper = depth <= crate::ingest::aggregate::SURFACE_LAYER_M;
                let sign = if upper { 0.5 } else { -0.5 };
                let temp_ok = keep(col::TEMP).is_some() && (upper || keep(col::THERMOCLINE).is_some());
                let sal_ok = keep(col::SALINITY).is_some() && (upper || keep(col::HALOCLINE).is_some());
                raw.profiles.push(ProfileRecord {
                    station_id: station.clone(),
                    date: wednesday,
                    depth_m: depth,
                    temperature: temp_ok.then_some(t + sign * dt),
                    salinity: sal_ok.then_some(sal + sign * ds),
                    oxygen: keep(col::OXYGEN).map(|_| o),
                });
            }
        }
    }
    for (z, zone) in spec.estuary.zones.iter().enumerate() {
        for (w, &closed) in states[z].iter().enumerate() {
            raw.statuses.push(ZoneStatusRecord {
                zone_id: zone.clone(),
                date: spec.start + Days::new(7 * w as u64),
                state: if closed { ZoneState::Closed } else { ZoneState::Open },
            });
        }
    }
    raw
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

impl SynthOutput {
    /// Write the four raw CSVs, `estuary.json` and `truth_rule.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let date = |d: NaiveDate| d.format("%Y-%m-%d").to_string();

        let mut s = PROFILE_HEADER.join(",") + "\n";
        for p in &self.raw.profiles {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                p.station_id,
                date(p.date),
                p.depth_m,
                cell(p.temperature),
                cell(p.salinity),
                cell(p.oxygen)
            );
        }
        write_file(&dir.join("profiles.csv"), &s)?;

        let mut s = SURFACE_HEADER.join(",") + "\n";
        for r in &self.raw.surfaces {
            let vals = [
                r.chl_a,
                r.chl_b,
                r.chl_c,
                r.d_acuminata,
                r.d_acuta,
                r.d_caudata,
                r.d_spp,
                r.ammonium,
                r.phosphate,
                r.nitrate,
                r.nitrite,
            ]
            .map(cell);
            let _ = writeln!(s, "{},{},{}", r.station_id, date(r.date), vals.join(","));
        }
        write_file(&dir.join("surface.csv"), &s)?;

        let mut s = STATUS_HEADER.join(",") + "\n";
        for r in &self.raw.statuses {
            let _ = writeln!(s, "{},{},{}", r.zone_id, date(r.date), r.state.as_str());
        }
        write_file(&dir.join("zone_status.csv"), &s)?;

        let mut s = UPWELLING_HEADER.join(",") + "\n";
        for r in &self.raw.upwelling {
            let _ = writeln!(s, "{},{}", date(r.date), r.index);
        }
        write_file(&dir.join("upwelling.csv"), &s)?;

        let json = |v: String| v + "\n";
        write_file(
            &dir.join("estuary.json"),
            &json(serde_json::to_string_pretty(&self.config)?),
        )?;
        write_file(
            &dir.join("truth_rule.json"),
            &json(serde_json::to_string_pretty(&self.rule)?),
        )
    }

    /// Mean of each weekly station feature over all stations and weeks.
    pub fn feature_means(&self) -> [f64; 16] {
        let mut sum = [0.0; 16];
        let mut n = 0.0;
        for st in &self.weekly {
            for v in st {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                n += 1.0;
            }
        }
        sum.map(|s| s / n)
    }
}

impl TruthRule {
    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }
}

/// Relative mean tolerance of generated features, with an absolute floor
/// of 1% of the range for targets near zero.
pub fn mean_within_tolerance(spec: &FeatureDistributionSpec, observed: f64) -> bool {
    let tol = (0.1 * spec.mean.abs()).max(0.01 * (spec.max - spec.min));
    (observed - spec.mean).abs() <= tol
}
