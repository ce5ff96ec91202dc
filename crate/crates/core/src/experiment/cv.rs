use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::folds::FoldAssignment;
use crate::bagnet::HIDDEN_GRID;
use crate::dataset::EstuaryDataset;
use crate::error::{Error, Result};
use crate::metrics::{summarize_folds, ConfusionMatrix, FoldSummary, Metric, MetricsReport};
use crate::model::{Classifier, FittedModel, ModelKind, ModelParams, ModelSpec};
use crate::svmknn::{C_GRID, K_GRID};
use crate::{par, seed};

/// Cross-validated performance of one model configuration on one estuary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub estuary: String,
    pub model: ModelKind,
    pub params: ModelParams,
    pub seed: u64,
    pub confusion: Vec<ConfusionMatrix>,
    pub folds: Vec<MetricsReport>,
    pub summary: FoldSummary,
}

impl CvResult {
    pub fn mean(&self, m: Metric) -> Option<f64> {
        self.summary.get(m).mean
    }
}

/// Seed for fold `f` of a cross-validation run seeded with `cv_seed`.
pub fn fold_seed(cv_seed: u64, f: usize) -> u64 {
    seed::derive(cv_seed, &[f as u64])
}

/// Fit `spec` on every row outside fold `f`.
pub fn fit_fold(
    data: &EstuaryDataset,
    spec: &ModelSpec,
    folds: &FoldAssignment,
    f: usize,
    cv_seed: u64,
) -> Result<FittedModel> {
    let (train, _) = folds.split(f);
    let x = data.features.select_rows(&train);
    let y: Vec<u8> = train.iter().map(|&i| data.labels[i]).collect();
    spec.fit(&x, &y, fold_seed(cv_seed, f))
}

pub fn cross_validate(
    data: &EstuaryDataset,
    spec: &ModelSpec,
    folds: &FoldAssignment,
    cv_seed: u64,
) -> Result<CvResult> {
    if folds.fold_of.len() != data.len() {
        return Err(Error::Config(format!(
            "fold assignment covers {} rows, dataset has {}",
            folds.fold_of.len(),
            data.len()
        )));
    }
    let per_fold = par::try_map_range(folds.k, |f| {
        let model = fit_fold(data, spec, folds, f, cv_seed)?;
        let (_, test) = folds.split(f);
        let x = data.features.select_rows(&test);
        let truth: Vec<u8> = test.iter().map(|&i| data.labels[i]).collect();
        let pred = model.predict(&x)?;
        crate::metrics::confusion(&pred, &truth)
    })?;
    let folds_m: Vec<MetricsReport> = per_fold.iter().map(MetricsReport::from_confusion).collect();
    Ok(CvResult {
        estuary: data.name.clone(),
        model: spec.kind,
        params: spec.params.clone(),
        seed: cv_seed,
        summary: summarize_folds(&folds_m)?,
        confusion: per_fold,
        folds: folds_m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: usize,
    pub cells: Vec<CvResult>,
}

impl GridResult {
    pub fn best_cv(&self) -> &CvResult {
        &self.cells[self.best]
    }
}

/// Index of the cell with the highest mean F1; ties go to higher mean
/// recall, then to the earlier cell. Undefined means rank lowest.
pub fn select_best(cells: &[CvResult]) -> usize {
    let key = |c: &CvResult| {
        (
            c.mean(Metric::F1).unwrap_or(f64::NEG_INFINITY),
            c.mean(Metric::Recall).unwrap_or(f64::NEG_INFINITY),
        )
    };
    let mut best = 0;
    for (i, c) in cells.iter().enumerate().skip(1) {
        if key(c) > key(&cells[best]) {
            best = i;
        }
    }
    best
}

/// Cross-validate every cell on the same folds. Cell `i` is seeded with
/// `seed::derive(grid_seed, [i])`.
pub fn grid_search(
    data: &EstuaryDataset,
    kind: ModelKind,
    grid: &[ModelParams],
    folds: &FoldAssignment,
    grid_seed: u64,
) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::Config(format!("empty grid for {kind}")));
    }
    let specs = grid
        .iter()
        .map(|p| ModelSpec::new(kind, p.clone()))
        .collect::<Result<Vec<_>>>()?;
    let cells = par::try_map_range(specs.len(), |i| {
        cross_validate(data, &specs[i], folds, seed::derive(grid_seed, &[i as u64]))
    })?;
    Ok(GridResult {
        best: select_best(&cells),
        cells,
    })
}

/// The grid searched when none is configured.
pub fn default_grid(kind: ModelKind) -> Vec<ModelParams> {
    match kind {
        ModelKind::Bagnet => HIDDEN_GRID
            .iter()
            .map(|h| ModelParams {
                hidden: Some(h.to_vec()),
                ..ModelParams::default()
            })
            .collect(),
        ModelKind::SvmKnn => K_GRID
            .iter()
            .flat_map(|&k| {
                C_GRID.iter().map(move |&c| ModelParams {
                    k: Some(k),
                    c: Some(c),
                    ..ModelParams::default()
                })
            })
            .collect(),
        _ => vec![ModelParams::default()],
    }
}

/// Parse a grid given either as a list of parameter objects or as an
/// object mapping each parameter to its candidate values. The latter
/// expands to the full cartesian product, keys in alphabetical order with
/// the first key varying slowest.
pub fn parse_grid(v: &Value) -> Result<Vec<ModelParams>> {
    let bad = |e: serde_json::Error| Error::Config(format!("bad grid: {e}"));
    match v {
        Value::Array(cells) => cells
            .iter()
            .map(|c| serde_json::from_value(c.clone()).map_err(bad))
            .collect(),
        Value::Object(axes) => {
            let mut cells = vec![serde_json::Map::new()];
            for (key, values) in axes {
                let values = values.as_array().ok_or_else(|| {
                    Error::Config(format!("grid axis '{key}' must be a list of values"))
                })?;
                if values.is_empty() {
                    return Err(Error::Config(format!("grid axis '{key}' is empty")));
                }
                cells = cells
                    .into_iter()
                    .flat_map(|cell| {
                        values.iter().map(move |val| {
                            let mut c = cell.clone();
                            c.insert(key.clone(), val.clone());
                            c
                        })
                    })
                    .collect();
            }
            cells
                .into_iter()
                .map(|c| serde_json::from_value(Value::Object(c)).map_err(bad))
                .collect()
        }
        _ => Err(Error::Config("grid must be a list or an object".into())),
    }
}
