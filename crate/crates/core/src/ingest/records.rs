//! Raw observation rows and their CSV schemas.

use std::collections::HashSet;
use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PROFILE_HEADER: [&str; 6] = [
    "station_id",
    "date",
    "depth_m",
    "temperature_c",
    "salinity",
    "oxygen_ml_l",
];

pub const SURFACE_HEADER: [&str; 13] = [
    "station_id",
    "date",
    "chl_a",
    "chl_b",
    "chl_c",
    "d_acuminata",
    "d_acuta",
    "d_caudata",
    "d_spp",
    "ammonium",
    "phosphate",
    "nitrate",
    "nitrite",
];

pub const STATUS_HEADER: [&str; 3] = ["zone_id", "date", "state"];

pub const UPWELLING_HEADER: [&str; 2] = ["date", "index"];

/// One depth of one CTD cast.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRecord {
    pub station_id: String,
    pub date: NaiveDate,
    pub depth_m: f64,
    pub temperature: Option<f64>,
    pub salinity: Option<f64>,
    pub oxygen: Option<f64>,
}

/// Surface sample: pigments, Dinophysis counts and nutrients.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceRecord {
    pub station_id: String,
    pub date: NaiveDate,
    pub chl_a: Option<f64>,
    pub chl_b: Option<f64>,
    pub chl_c: Option<f64>,
    pub d_acuminata: Option<f64>,
    pub d_acuta: Option<f64>,
    pub d_caudata: Option<f64>,
    pub d_spp: Option<f64>,
    pub ammonium: Option<f64>,
    pub phosphate: Option<f64>,
    pub nitrate: Option<f64>,
    pub nitrite: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZoneState {
    Open = 0,
    Closed = 1,
}

impl ZoneState {
    pub fn as_label(self) -> u8 {
        self as u8
    }

    pub fn from_label(y: u8) -> Self {
        if y == 1 {
            ZoneState::Closed
        } else {
            ZoneState::Open
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ZoneState::Open => "open",
            ZoneState::Closed => "closed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneStatusRecord {
    pub zone_id: String,
    pub date: NaiveDate,
    pub state: ZoneState,
}

/// Daily upwelling index (m³·s⁻¹·km⁻¹); negative means downwelling.
#[derive(Debug, Clone, PartialEq)]
pub struct UpwellingRecord {
    pub date: NaiveDate,
    pub index: f64,
}

/// Stations and production areas of one estuary. List order is the
/// canonical feature order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstuaryConfig {
    pub name: String,
    pub stations: Vec<String>,
    pub zones: Vec<String>,
    /// Optional study window; records dated outside it are rejected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<NaiveDate>,
}

impl EstuaryConfig {
    pub fn new(name: impl Into<String>, stations: Vec<String>, zones: Vec<String>) -> Result<Self> {
        let cfg = Self {
            name: name.into(),
            stations,
            zones,
            start: None,
            end: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_reader(file)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (what, list) in [("stations", &self.stations), ("zones", &self.zones)] {
            if list.is_empty() {
                return Err(Error::Config(format!("estuary '{}': no {what}", self.name)));
            }
            let mut seen = HashSet::new();
            for id in list {
                if !seen.insert(id) {
                    return Err(Error::Config(format!(
                        "estuary '{}': duplicate id '{id}' in {what}",
                        self.name
                    )));
                }
            }
        }
        if let (Some(s), Some(e)) = (self.start, self.end) {
            if s > e {
                return Err(Error::Config(format!(
                    "estuary '{}': study window starts after it ends",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn in_window(&self, d: NaiveDate) -> bool {
        self.start.map_or(true, |s| d >= s) && self.end.map_or(true, |e| d <= e)
    }

    /// Length of the canonical feature vector.
    pub fn feature_width(&self) -> usize {
        2 + super::STATION_FEATURES.len() * self.stations.len() + self.zones.len() + 1
    }
}

/// Paths of the four raw input files.
#[derive(Debug, Clone)]
pub struct RawPaths {
    pub profiles: PathBuf,
    pub surface: PathBuf,
    pub status: PathBuf,
    pub upwelling: PathBuf,
}

impl RawPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            profiles: dir.join("profiles.csv"),
            surface: dir.join("surface.csv"),
            status: dir.join("zone_status.csv"),
            upwelling: dir.join("upwelling.csv"),
        }
    }
}

/// All raw records of one estuary.
#[derive(Debug, Clone, Default)]
pub struct RawData {
    pub profiles: Vec<ProfileRecord>,
    pub surfaces: Vec<SurfaceRecord>,
    pub statuses: Vec<ZoneStatusRecord>,
    pub upwelling: Vec<UpwellingRecord>,
}

struct Row<'a> {
    file: &'a Path,
    line: u64,
    rec: csv::StringRecord,
}

impl Row<'_> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            file: self.file.into(),
            line: self.line,
            msg: msg.into(),
        }
    }

    fn text(&self, i: usize) -> &str {
        self.rec[i].trim()
    }

    fn date(&self, i: usize) -> Result<NaiveDate> {
        NaiveDate::parse_from_str(self.text(i), "%Y-%m-%d")
            .map_err(|_| self.err(format!("bad date '{}'", self.text(i))))
    }

    fn opt(&self, i: usize, name: &str) -> Result<Option<f64>> {
        let s = self.text(i);
        if s.is_empty() {
            return Ok(None);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| self.err(format!("{name}: '{s}' is not a number")))?;
        if !v.is_finite() {
            return Err(self.err(format!("{name}: non-finite value")));
        }
        Ok(Some(v))
    }

    fn non_negative(&self, i: usize, name: &str) -> Result<Option<f64>> {
        let v = self.opt(i, name)?;
        if matches!(v, Some(x) if x < 0.0) {
            return Err(self.err(format!("{name}: count must be non-negative")));
        }
        Ok(v)
    }
}

fn read_rows<'a>(path: &'a Path, header: &[&str]) -> Result<Vec<Row<'a>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_rows_from(path, file, header)
}

fn read_rows_from<'a, R: std::io::Read>(
    path: &'a Path,
    reader: R,
    header: &[&str],
) -> Result<Vec<Row<'a>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let got: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if got != header {
        return Err(Error::Parse {
            file: path.into(),
            line: 1,
            msg: format!("expected header '{}', found '{}'", header.join(","), got.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| Error::Parse {
            file: path.into(),
            line,
            msg: e.to_string(),
        })?;
        let row = Row {
            file: path,
            line,
            rec,
        };
        if row.rec.len() != header.len() {
            return Err(row.err(format!(
                "expected {} fields, found {}",
                header.len(),
                row.rec.len()
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

fn parse_profile(row: &Row) -> Result<ProfileRecord> {
    let depth = row
        .opt(2, "depth_m")?
        .ok_or_else(|| row.err("depth_m is required"))?;
    if depth <= 0.0 {
        return Err(row.err(format!("depth_m must be > 0, got {depth}")));
    }
    Ok(ProfileRecord {
        station_id: row.text(0).to_string(),
        date: row.date(1)?,
        depth_m: depth,
        temperature: row.opt(3, "temperature_c")?,
        salinity: row.opt(4, "salinity")?,
        oxygen: row.opt(5, "oxygen_ml_l")?,
    })
}

fn parse_surface(row: &Row) -> Result<SurfaceRecord> {
    Ok(SurfaceRecord {
        station_id: row.text(0).to_string(),
        date: row.date(1)?,
        chl_a: row.opt(2, "chl_a")?,
        chl_b: row.opt(3, "chl_b")?,
        chl_c: row.opt(4, "chl_c")?,
        d_acuminata: row.non_negative(5, "d_acuminata")?,
        d_acuta: row.non_negative(6, "d_acuta")?,
        d_caudata: row.non_negative(7, "d_caudata")?,
        d_spp: row.non_negative(8, "d_spp")?,
        ammonium: row.opt(9, "ammonium")?,
        phosphate: row.opt(10, "phosphate")?,
        nitrate: row.opt(11, "nitrate")?,
        nitrite: row.opt(12, "nitrite")?,
    })
}

fn parse_status(row: &Row) -> Result<ZoneStatusRecord> {
    let state = match row.text(2) {
        "open" => ZoneState::Open,
        "closed" => ZoneState::Closed,
        other => return Err(row.err(format!("state must be 'open' or 'closed', got '{other}'"))),
    };
    Ok(ZoneStatusRecord {
        zone_id: row.text(0).to_string(),
        date: row.date(1)?,
        state,
    })
}

fn parse_upwelling(row: &Row) -> Result<UpwellingRecord> {
    Ok(UpwellingRecord {
        date: row.date(0)?,
        index: row.opt(1, "index")?.ok_or_else(|| row.err("index is required"))?,
    })
}

pub fn parse_profile_line(line: &str) -> Result<ProfileRecord> {
    parse_single(line, &PROFILE_HEADER, parse_profile)
}

pub fn parse_surface_line(line: &str) -> Result<SurfaceRecord> {
    parse_single(line, &SURFACE_HEADER, parse_surface)
}

fn parse_single<T>(line: &str, header: &[&str], f: impl Fn(&Row) -> Result<T>) -> Result<T> {
    let text = format!("{}\n{line}\n", header.join(","));
    let path = Path::new("<inline>");
    let rows = read_rows_from(path, text.as_bytes(), header)?;
    rows.first()
        .map(f)
        .unwrap_or_else(|| Err(Error::Data("empty row".into())))
}

fn check_window(cfg: &EstuaryConfig, file: &Path, line: u64, d: NaiveDate) -> Result<()> {
    if cfg.in_window(d) {
        Ok(())
    } else {
        Err(Error::Parse {
            file: file.into(),
            line,
            msg: format!("date {d} outside the study window"),
        })
    }
}

fn check_station(cfg: &EstuaryConfig, file: &Path, line: u64, id: &str) -> Result<()> {
    if cfg.stations.iter().any(|s| s == id) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{}:{line}: station '{id}' is not configured for estuary '{}'",
            file.display(),
            cfg.name
        )))
    }
}

impl RawData {
    /// Parse the four raw CSVs, validating ids against `config`.
    pub fn load(paths: &RawPaths, config: &EstuaryConfig) -> Result<Self> {
        let mut out = RawData::default();
        for row in read_rows(&paths.profiles, &PROFILE_HEADER)? {
            let r = parse_profile(&row)?;
            check_station(config, row.file, row.line, &r.station_id)?;
            check_window(config, row.file, row.line, r.date)?;
            out.profiles.push(r);
        }
        for row in read_rows(&paths.surface, &SURFACE_HEADER)? {
            let r = parse_surface(&row)?;
            check_station(config, row.file, row.line, &r.station_id)?;
            check_window(config, row.file, row.line, r.date)?;
            out.surfaces.push(r);
        }
        for row in read_rows(&paths.status, &STATUS_HEADER)? {
            let r = parse_status(&row)?;
            if !config.zones.contains(&r.zone_id) {
                return Err(Error::Config(format!(
                    "{}:{}: zone '{}' is not configured for estuary '{}'",
                    row.file.display(),
                    row.line,
                    r.zone_id,
                    config.name
                )));
            }
            check_window(config, row.file, row.line, r.date)?;
            out.statuses.push(r);
        }
        for row in read_rows(&paths.upwelling, &UPWELLING_HEADER)? {
            let r = parse_upwelling(&row)?;
            check_window(config, row.file, row.line, r.date)?;
            out.upwelling.push(r);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn profile_row_maps_fields() {
        let r = parse_profile_line("ST1,2010-03-02,4,13.2,35.1,5.0").unwrap();
        assert_eq!(
            r,
            ProfileRecord {
                station_id: "ST1".into(),
                date: d("2010-03-02"),
                depth_m: 4.0,
                temperature: Some(13.2),
                salinity: Some(35.1),
                oxygen: Some(5.0),
            }
        );
    }

    #[test]
    fn empty_cell_is_missing() {
        let r = parse_profile_line("ST1,2010-03-02,4,,35.1,5.0").unwrap();
        assert_eq!(r.temperature, None);
        assert_eq!(r.salinity, Some(35.1));
    }

    #[test]
    fn non_positive_depth_is_rejected() {
        let e = parse_profile_line("ST1,2010-03-02,-1,13.2,35.1,5.0").unwrap_err();
        assert!(matches!(e, Error::Parse { .. }), "{e}");
        assert!(parse_profile_line("ST1,2010-03-02,0,13.2,35.1,5.0").is_err());
    }

    #[test]
    fn surface_allows_negative_chlorophyll_not_counts() {
        let ok = parse_surface_line("S,2010-01-01,1,-1.24,0,0,0,0,0,1,1,1,1").unwrap();
        assert_eq!(ok.chl_b, Some(-1.24));
        assert!(parse_surface_line("S,2010-01-01,1,0,0,-5,0,0,0,1,1,1,1").is_err());
    }

    #[test]
    fn load_rejects_unknown_ids_and_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let paths = RawPaths::in_dir(dir.path());
        std::fs::write(&paths.profiles, format!("{}\nST1,2010-03-02,4,13,35,5\n", PROFILE_HEADER.join(","))).unwrap();
        std::fs::write(&paths.surface, format!("{}\n", SURFACE_HEADER.join(","))).unwrap();
        std::fs::write(&paths.status, format!("{}\nZ1,2010-03-01,closed\n", STATUS_HEADER.join(","))).unwrap();
        std::fs::write(&paths.upwelling, "date,index\n2010-03-01,-12.5\n").unwrap();
        let cfg = EstuaryConfig::new("e", vec!["ST1".into()], vec!["Z1".into()]).unwrap();
        let raw = RawData::load(&paths, &cfg).unwrap();
        assert_eq!(raw.statuses[0].state, ZoneState::Closed);
        assert_eq!(raw.upwelling[0].index, -12.5);

        let other = EstuaryConfig::new("e", vec!["ST9".into()], vec!["Z1".into()]).unwrap();
        assert!(matches!(RawData::load(&paths, &other), Err(Error::Config(_))));

        std::fs::write(&paths.upwelling, "date,index\n2010-03-01,abc\n").unwrap();
        match RawData::load(&paths, &cfg) {
            Err(Error::Parse { file, line, .. }) => {
                assert_eq!(line, 2);
                assert!(file.ends_with("upwelling.csv"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(EstuaryConfig::new("e", vec![], vec!["Z".into()]).is_err());
        assert!(EstuaryConfig::new("e", vec!["A".into(), "A".into()], vec!["Z".into()]).is_err());
        let cfg = EstuaryConfig::new("e", vec!["A".into(); 1], vec!["Z1".into(), "Z2".into()]).unwrap();
        assert_eq!(cfg.feature_width(), 2 + 16 + 2 + 1);
    }
}
