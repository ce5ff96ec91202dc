use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::cv::{default_grid, grid_search, parse_grid, CvResult, GridResult};
use super::folds::{stratified_kfold, DEFAULT_FOLDS};
use crate::dataset::EstuaryDataset;
use crate::error::{Error, Result};
use crate::metrics::{FoldSummary, Metric, MetricSummary};
use crate::model::{ModelKind, ModelParams};
use crate::{par, seed, FORMAT_VERSION};

pub const AGGREGATION_NOTE: &str = "summary rows pool the fold values of every estuary: \
mean and sample standard deviation are taken over all pooled folds";
pub const SELECTION_NOTE: &str = "hyperparameters are selected by mean F1 (ties: higher mean recall, \
then first listed) on the same folds that are reported; there is no nested cross-validation, \
so the reported figures are optimistic";
pub const SVM_NOTE: &str = "the svm baseline uses a linear kernel";

const FOLD_STREAM: u64 = 0xF01D;

/// Experiment description as read from JSON. Dataset paths are relative to
/// the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    pub datasets: Vec<PathBuf>,
    pub models: Vec<RosterEntry>,
}

fn default_folds() -> usize {
    DEFAULT_FOLDS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosterEntry {
    pub model: ModelKind,
    /// Grid as accepted by [`parse_grid`]; the model's default grid if absent.
    #[serde(default)]
    pub grid: Option<Value>,
}

/// A model kind with the cells to search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelGrid {
    pub model: ModelKind,
    pub cells: Vec<ModelParams>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self =
            serde_json::from_str(&s).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut cfg.datasets {
            if d.is_relative() {
                *d = base.join(&*d);
            }
        }
        Ok(cfg)
    }

    pub fn roster(&self) -> Result<Vec<ModelGrid>> {
        self.models
            .iter()
            .map(|e| {
                let cells = match &e.grid {
                    Some(g) => parse_grid(g)?,
                    None => default_grid(e.model),
                };
                Ok(ModelGrid {
                    model: e.model,
                    cells,
                })
            })
            .collect()
    }

    pub fn load_datasets(&self) -> Result<Vec<EstuaryDataset>> {
        self.datasets.iter().map(|p| EstuaryDataset::read_csv(p)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub params: ModelParams,
    pub f1: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub model: ModelKind,
    pub best_params: ModelParams,
    pub grid: Vec<CellScore>,
    pub cv: CvResult,
}

impl ModelResult {
    pub fn from_grid(g: GridResult) -> Self {
        let grid = g
            .cells
            .iter()
            .map(|c| CellScore {
                params: c.params.clone(),
                f1: c.mean(Metric::F1),
                recall: c.mean(Metric::Recall),
            })
            .collect();
        let cv = g.cells.into_iter().nth(g.best).expect("best cell exists");
        Self {
            model: cv.model,
            best_params: cv.params.clone(),
            grid,
            cv,
        }
    }

    pub fn from_cv(cv: CvResult) -> Self {
        Self {
            model: cv.model,
            best_params: cv.params.clone(),
            grid: vec![CellScore {
                params: cv.params.clone(),
                f1: cv.mean(Metric::F1),
                recall: cv.mean(Metric::Recall),
            }],
            cv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstuarySection {
    pub name: String,
    pub samples: usize,
    pub closures: usize,
    pub models: Vec<ModelResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: ModelKind,
    pub metrics: FoldSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format_version: u32,
    pub seed: u64,
    pub folds: usize,
    pub aggregation: String,
    pub notes: Vec<String>,
    pub grids: Vec<ModelGrid>,
    pub estuaries: Vec<EstuarySection>,
    pub summary: Vec<ModelSummary>,
}

fn pooled(sections: &[EstuarySection], model: ModelKind) -> FoldSummary {
    let col = |m: Metric| {
        let vals: Vec<Option<f64>> = sections
            .iter()
            .flat_map(|s| s.models.iter().filter(|r| r.model == model))
            .flat_map(|r| r.cv.folds.iter().map(move |f| f.get(m)))
            .collect();
        MetricSummary::from_values(&vals)
    };
    FoldSummary {
        accuracy: col(Metric::Accuracy),
        recall: col(Metric::Recall),
        precision: col(Metric::Precision),
        f1: col(Metric::F1),
        kappa: col(Metric::Kappa),
    }
}

impl ExperimentReport {
    /// Build the report from finished per-estuary sections. Models appear
    /// in canonical kind order.
    pub fn assemble(seed: u64, folds: usize, grids: Vec<ModelGrid>, mut estuaries: Vec<EstuarySection>) -> Self {
        for s in &mut estuaries {
            s.models.sort_by_key(|m| m.model);
        }
        let mut kinds: Vec<ModelKind> = estuaries
            .iter()
            .flat_map(|s| s.models.iter().map(|m| m.model))
            .collect();
        kinds.sort();
        kinds.dedup();
        let summary = kinds
            .into_iter()
            .map(|model| ModelSummary {
                model,
                metrics: pooled(&estuaries, model),
            })
            .collect();
        let mut notes = vec![SELECTION_NOTE.to_string()];
        if estuaries.iter().any(|s| s.models.iter().any(|m| m.model == ModelKind::Svm)) {
            notes.push(SVM_NOTE.to_string());
        }
        Self {
            format_version: FORMAT_VERSION,
            seed,
            folds,
            aggregation: AGGREGATION_NOTE.to_string(),
            notes,
            grids,
            estuaries,
            summary,
        }
    }

    /// Build a report from saved `cv` / `gridsearch` outputs, grouped by
    /// estuary name.
    pub fn from_results(seed: u64, results: Vec<ModelResult>) -> Result<Self> {
        if results.is_empty() {
            return Err(Error::Data("no results to report".into()));
        }
        let folds = results[0].cv.folds.len();
        if results.iter().any(|r| r.cv.folds.len() != folds) {
            return Err(Error::Data("results use different fold counts".into()));
        }
        let mut sections: Vec<EstuarySection> = Vec::new();
        let mut grids: Vec<ModelGrid> = Vec::new();
        for r in results {
            if !grids.iter().any(|g| g.model == r.model) {
                grids.push(ModelGrid {
                    model: r.model,
                    cells: r.grid.iter().map(|c| c.params.clone()).collect(),
                });
            }
            let total: u64 = r.cv.confusion.iter().map(|c| c.total()).sum();
            let closures: u64 = r.cv.confusion.iter().map(|c| c.tp + c.fn_).sum();
            match sections.iter_mut().find(|s| s.name == r.cv.estuary) {
                Some(s) => {
                    if s.models.iter().any(|m| m.model == r.model) {
                        return Err(Error::Data(format!(
                            "two results for {} on {}",
                            r.model, s.name
                        )));
                    }
                    s.models.push(r);
                }
                None => sections.push(EstuarySection {
                    name: r.cv.estuary.clone(),
                    samples: total as usize,
                    closures: closures as usize,
                    models: vec![r],
                }),
            }
        }
        sections.sort_by(|a, b| a.name.cmp(&b.name));
        grids.sort_by_key(|g| g.model);
        Ok(Self::assemble(seed, folds, grids, sections))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per estuary × model × metric, plus `all` rows for the
    /// pooled summary.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("estuary,model,metric,mean,std\n");
        let mut row = |estuary: &str, model: ModelKind, s: &FoldSummary| {
            for m in Metric::ALL {
                let ms = s.get(m);
                let _ = writeln!(out, "{estuary},{model},{},{},{}", m.name(), fmt(ms.mean), fmt(ms.std));
            }
        };
        for e in &self.estuaries {
            for r in &e.models {
                row(&e.name, r.model, &r.cv.summary);
            }
        }
        for s in &self.summary {
            row("all", s.model, &s.metrics);
        }
        out
    }

    /// Bar-chart data for one metric: one row per estuary, one column per model.
    pub fn chart_csv(&self, metric: Metric) -> String {
        let models: Vec<ModelKind> = self.summary.iter().map(|s| s.model).collect();
        let mut out = String::from("estuary");
        for m in &models {
            let _ = write!(out, ",{m}");
        }
        out.push('\n');
        for e in &self.estuaries {
            out.push_str(&e.name);
            for m in &models {
                let v = e
                    .models
                    .iter()
                    .find(|r| r.model == *m)
                    .and_then(|r| r.cv.mean(metric));
                let _ = write!(out, ",{}", v.map(|x| x.to_string()).unwrap_or_default());
            }
            out.push('\n');
        }
        out
    }

    /// Human-readable tables, percentages as mean ± std.
    pub fn render(&self) -> String {
        let cell = |s: &MetricSummary| match (s.mean, s.std) {
            (Some(m), Some(sd)) => format!("{:.2} ± {:.2}", 100.0 * m, 100.0 * sd),
            (Some(m), None) => format!("{:.2}", 100.0 * m),
            _ => "n/a".into(),
        };
        let mut out = String::new();
        let header = |out: &mut String, first: &str| {
            let _ = write!(out, "{first:<16}{:<8}", "model");
            for m in Metric::ALL {
                let _ = write!(out, "{:>18}", m.name());
            }
            out.push('\n');
        };
        let _ = writeln!(out, "seed {}  folds {}", self.seed, self.folds);
        header(&mut out, "estuary");
        let line = |out: &mut String, first: &str, model: ModelKind, s: &FoldSummary| {
            let _ = write!(out, "{first:<16}{:<8}", model.name());
            for m in Metric::ALL {
                let _ = write!(out, "{:>18}", cell(s.get(m)));
            }
            out.push('\n');
        };
        for e in &self.estuaries {
            for r in &e.models {
                line(&mut out, &e.name, r.model, &r.cv.summary);
            }
        }
        for s in &self.summary {
            line(&mut out, "all (pooled)", s.model, &s.metrics);
        }
        let _ = writeln!(out, "note: {}", self.aggregation);
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }

    /// Write `report.json`, `report.csv` and `chart_<metric>.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: String, body: String| {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
        };
        put("report.json".into(), self.to_json())?;
        put("report.csv".into(), self.to_csv())?;
        for m in Metric::ALL {
            put(format!("chart_{}.csv", m.name()), self.chart_csv(m))?;
        }
        Ok(())
    }
}

/// Seed of one estuary's fold assignment.
pub fn folds_seed(master: u64, estuary: usize) -> u64 {
    seed::derive(master, &[estuary as u64, FOLD_STREAM])
}

/// Seed of one model's grid on one estuary. Keyed by kind, so adding a
/// model to the roster leaves the others alone.
pub fn grid_seed(master: u64, estuary: usize, model: ModelKind) -> u64 {
    let kind_idx = ModelKind::ALL.iter().position(|&k| k == model).unwrap() as u64;
    seed::derive(master, &[estuary as u64, kind_idx])
}

/// Grid search every roster model on every estuary and report the best
/// cell of each.
pub fn run_experiment(
    datasets: &[EstuaryDataset],
    roster: &[ModelGrid],
    master_seed: u64,
    k: usize,
) -> Result<ExperimentReport> {
    if datasets.is_empty() || roster.is_empty() {
        return Err(Error::Config("experiment needs datasets and models".into()));
    }
    let folds = datasets
        .iter()
        .enumerate()
        .map(|(e, d)| stratified_kfold(&d.labels, k, folds_seed(master_seed, e)))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..datasets.len())
        .flat_map(|e| (0..roster.len()).map(move |m| (e, m)))
        .collect();
    let results = par::try_map_range(jobs.len(), |j| {
        let (e, m) = jobs[j];
        let g = &roster[m];
        let seed_ = grid_seed(master_seed, e, g.model);
        grid_search(&datasets[e], g.model, &g.cells, &folds[e], seed_).map(ModelResult::from_grid)
    })?;
    let mut results = results.into_iter();
    let sections = datasets
        .iter()
        .map(|d| EstuarySection {
            name: d.name.clone(),
            samples: d.len(),
            closures: d.positives(),
            models: results.by_ref().take(roster.len()).collect(),
        })
        .collect();
    Ok(ExperimentReport::assemble(master_seed, k, roster.to_vec(), sections))
}
