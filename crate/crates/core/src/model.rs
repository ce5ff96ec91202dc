//! One contract over every classifier: fit on a feature matrix with 0/1
//! labels, then score and label new rows. The experiment harness and the
//! CLI only talk to [`ModelSpec`] and [`FittedModel`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bagnet::{BagnetConfig, BagnetModel, DEFAULT_MEMBERS};
use crate::baselines::{score_rows, GaussianNb, GlobalSvm, KnnClassifier};
use crate::dataset::Matrix;
use crate::error::{Error, Result};
use crate::neural::{fit_network, sigmoid, TrainConfig, TrainedNetwork};
use crate::svmknn::{SvmKnnConfig, SvmKnnModel};
use crate::FORMAT_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Bagnet,
    SvmKnn,
    Ann,
    Knn,
    #[serde(rename = "nb")]
    NaiveBayes,
    Svm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Bagnet,
        ModelKind::SvmKnn,
        ModelKind::Ann,
        ModelKind::Knn,
        ModelKind::NaiveBayes,
        ModelKind::Svm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Bagnet => "bagnet",
            ModelKind::SvmKnn => "svmknn",
            ModelKind::Ann => "ann",
            ModelKind::Knn => "knn",
            ModelKind::NaiveBayes => "nb",
            ModelKind::Svm => "svm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown model '{s}' (expected one of bagnet, svmknn, ann, knn, nb, svm)"
                ))
            })
    }
}

/// Hyperparameters as given by the user. Unset fields take per-kind
/// defaults; fields a kind does not use are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub members: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

impl ModelParams {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("bad model parameters: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("params serialize")
    }

    fn used_by(kind: ModelKind) -> &'static [&'static str] {
        match kind {
            ModelKind::Bagnet => &["hidden", "members", "epochs", "batch_size", "learning_rate"],
            ModelKind::Ann => &["hidden", "epochs", "batch_size", "learning_rate"],
            ModelKind::SvmKnn => &["k", "c"],
            ModelKind::Knn => &["k"],
            ModelKind::Svm => &["c"],
            ModelKind::NaiveBayes => &[],
        }
    }

    fn set_fields(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let flags = [
            ("hidden", self.hidden.is_some()),
            ("members", self.members.is_some()),
            ("epochs", self.epochs.is_some()),
            ("batch_size", self.batch_size.is_some()),
            ("learning_rate", self.learning_rate.is_some()),
            ("k", self.k.is_some()),
            ("c", self.c.is_some()),
        ];
        for (name, set) in flags {
            if set {
                out.push(name);
            }
        }
        out
    }

    fn train_config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            ..d
        }
    }
}

pub const DEFAULT_HIDDEN: [usize; 2] = [192, 128];
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_C: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub params: ModelParams,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, params: ModelParams) -> Result<Self> {
        let allowed = ModelParams::used_by(kind);
        if let Some(bad) = params.set_fields().into_iter().find(|f| !allowed.contains(f)) {
            return Err(Error::Config(format!("parameter '{bad}' does not apply to {kind}")));
        }
        if let Some(h) = &params.hidden {
            if h.is_empty() || h.len() > 2 || h.contains(&0) {
                return Err(Error::Config(format!("hidden must list 1 or 2 positive widths, got {h:?}")));
            }
        }
        Ok(Self { kind, params })
    }

    pub fn defaults(kind: ModelKind) -> Self {
        Self {
            kind,
            params: ModelParams::default(),
        }
    }

    pub fn hidden(&self) -> Vec<usize> {
        self.params.hidden.clone().unwrap_or(DEFAULT_HIDDEN.to_vec())
    }

    pub fn bagnet_config(&self) -> BagnetConfig {
        BagnetConfig {
            members: self.params.members.unwrap_or(DEFAULT_MEMBERS),
            hidden: self.hidden(),
            train: self.params.train_config(),
        }
    }

    pub fn fit(&self, x: &Matrix, y: &[u8], seed: u64) -> Result<FittedModel> {
        let p = &self.params;
        let k = p.k.unwrap_or(DEFAULT_K);
        let c = p.c.unwrap_or(DEFAULT_C);
        Ok(match self.kind {
            ModelKind::Bagnet => FittedModel::Bagnet(BagnetModel::fit(x, y, &self.bagnet_config(), seed)?),
            ModelKind::SvmKnn => FittedModel::SvmKnn(SvmKnnModel::fit(x, y, SvmKnnConfig { k, c })?),
            ModelKind::Ann => {
                let cfg = TrainConfig {
                    seed,
                    ..p.train_config()
                };
                FittedModel::Ann(fit_network(x, y, &self.hidden(), &cfg)?)
            }
            ModelKind::Knn => FittedModel::Knn(KnnClassifier::fit(x, y, k)?),
            ModelKind::NaiveBayes => FittedModel::NaiveBayes(GaussianNb::fit(x, y)?),
            ModelKind::Svm => FittedModel::Svm(GlobalSvm::fit(x, y, c)?),
        })
    }
}

/// A score in [0, 1] and the 0/1 label derived from it. Only BAGNET, ANN
/// and naive Bayes scores are probabilities; the others are monotone
/// confidence scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probability: f64,
    pub label: u8,
}

/// Shared prediction interface.
pub trait Classifier {
    fn n_features(&self) -> usize;

    fn predict_scored(&self, x: &Matrix) -> Result<Vec<Prediction>>;

    fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        Ok(self.predict_scored(x)?.into_iter().map(|p| p.label).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "lowercase")]
pub enum FittedModel {
    Bagnet(BagnetModel),
    SvmKnn(SvmKnnModel),
    Ann(TrainedNetwork),
    Knn(KnnClassifier),
    #[serde(rename = "nb")]
    NaiveBayes(GaussianNb),
    Svm(GlobalSvm),
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format_version: u32,
    #[serde(flatten)]
    model: FittedModel,
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Bagnet(_) => ModelKind::Bagnet,
            FittedModel::SvmKnn(_) => ModelKind::SvmKnn,
            FittedModel::Ann(_) => ModelKind::Ann,
            FittedModel::Knn(_) => ModelKind::Knn,
            FittedModel::NaiveBayes(_) => ModelKind::NaiveBayes,
            FittedModel::Svm(_) => ModelKind::Svm,
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            format_version: u32,
            #[serde(flatten)]
            model: &'a FittedModel,
        }
        serde_json::to_string(&Out {
            format_version: FORMAT_VERSION,
            model: self,
        })
        .expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let env: Envelope = serde_json::from_str(s)?;
        if env.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "model format version {} is not supported (expected {FORMAT_VERSION})",
                env.format_version
            )));
        }
        Ok(env.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

impl Classifier for FittedModel {
    fn n_features(&self) -> usize {
        match self {
            FittedModel::Bagnet(m) => m.members[0].network.scaler.dim(),
            FittedModel::SvmKnn(m) => m.scaler.dim(),
            FittedModel::Ann(m) => m.scaler.dim(),
            FittedModel::Knn(m) => m.scaler.dim(),
            FittedModel::NaiveBayes(m) => m.mean[0].len(),
            FittedModel::Svm(m) => m.scaler.dim(),
        }
    }

    fn predict_scored(&self, x: &Matrix) -> Result<Vec<Prediction>> {
        if x.cols() != self.n_features() {
            return Err(Error::Data(format!(
                "model expects {} features, input has {}",
                self.n_features(),
                x.cols()
            )));
        }
        let thresholded = |ps: Vec<f64>| {
            ps.into_iter()
                .map(|p| Prediction {
                    probability: p,
                    label: u8::from(p > 0.5),
                })
                .collect()
        };
        Ok(match self {
            FittedModel::Bagnet(m) => thresholded(m.predict_proba_matrix(x)),
            FittedModel::Ann(m) => thresholded(m.predict_proba_matrix(x)),
            FittedModel::SvmKnn(m) => m
                .decide_all(x)?
                .into_iter()
                .map(|d| Prediction {
                    probability: d.score(),
                    label: d.label,
                })
                .collect(),
            FittedModel::Knn(m) => score_rows(x, |r| m.score(r))?
                .into_iter()
                .map(|s| Prediction {
                    probability: s,
                    label: u8::from(s >= 0.5),
                })
                .collect(),
            FittedModel::NaiveBayes(m) => (0..x.rows())
                .map(|i| Prediction {
                    probability: m.score(x.row(i)),
                    label: m.predict(x.row(i)),
                })
                .collect(),
            FittedModel::Svm(m) => (0..x.rows())
                .map(|i| {
                    let v = m.decision(x.row(i));
                    Prediction {
                        probability: sigmoid(v),
                        label: u8::from(v > 0.0),
                    }
                })
                .collect(),
        })
    }
}
