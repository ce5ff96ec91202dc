//! The planted closure rule: hysteresis on a weighted Dinophysis load.

use serde::{Deserialize, Serialize};

use crate::dataset::EstuaryDataset;
use crate::error::{Error, Result};

/// Stopping distance of the threshold search; anything within
/// [`CALIBRATION_TOL`] is accepted if the search runs out of steps.
const CALIBRATION_STOP: f64 = 0.005;
pub const CALIBRATION_TOL: f64 = 0.03;
pub const MAX_BISECTION_STEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesWeights {
    pub acuminata: f64,
    pub acuta: f64,
    pub caudata: f64,
    pub spp: f64,
}

impl Default for SpeciesWeights {
    fn default() -> Self {
        Self {
            acuminata: 1.0,
            acuta: 1.0,
            caudata: 0.5,
            spp: 0.5,
        }
    }
}

impl SpeciesWeights {
    /// Load from counts ordered acuminata, acuta, caudata, spp.
    pub fn load(&self, counts: [f64; 4]) -> f64 {
        self.acuminata * counts[0] + self.acuta * counts[1] + self.caudata * counts[2] + self.spp * counts[3]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub tau_hi: f64,
    pub tau_lo: f64,
}

impl Thresholds {
    pub fn from_hi(tau_hi: f64) -> Self {
        Self {
            tau_hi,
            tau_lo: tau_hi / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.tau_lo && self.tau_lo < self.tau_hi) {
            return Err(Error::Config(format!(
                "thresholds need 0 < tau_lo < tau_hi, got {} / {}",
                self.tau_lo, self.tau_hi
            )));
        }
        Ok(())
    }

    /// Next state from this week's load and the current state. Both
    /// comparisons are strict.
    pub fn next_state(&self, load: f64, closed: bool) -> bool {
        load > self.tau_hi || (closed && load > self.tau_lo)
    }
}

/// States `s_0 … s_W` of one zone starting from `initial`; `s_{w+1}` is the
/// rule applied to week `w`, flipped when `draws[w] < noise`.
pub fn simulate(loads: &[f64], th: &Thresholds, initial: bool, draws: &[f64], noise: f64) -> Vec<bool> {
    let mut s = Vec::with_capacity(loads.len() + 1);
    s.push(initial);
    for (w, &l) in loads.iter().enumerate() {
        let mut next = th.next_state(l, s[w]);
        if noise > 0.0 && draws[w] < noise {
            next = !next;
        }
        s.push(next);
    }
    s
}

/// Fraction of closed labels over every zone-week.
pub fn closure_fraction(loads: &[Vec<f64>], th: &Thresholds, draws: &[Vec<f64>], noise: f64) -> f64 {
    let mut closed = 0usize;
    let mut total = 0usize;
    for (l, d) in loads.iter().zip(draws) {
        let s = simulate(l, th, false, d, noise);
        closed += s[1..].iter().filter(|&&c| c).count();
        total += l.len();
    }
    closed as f64 / total as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStep {
    pub tau_hi: f64,
    pub fraction: f64,
}

/// Bisection on `tau_hi` (with `tau_lo = tau_hi / 2`) until the closure
/// fraction of the given load streams is near `target`.
pub fn calibrate_thresholds(
    loads: &[Vec<f64>],
    draws: &[Vec<f64>],
    noise: f64,
    target: f64,
) -> Result<(Thresholds, Vec<CalibrationStep>)> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Calibration(format!(
            "closure target must lie in (0, 1), got {target}"
        )));
    }
    let max_load = loads.iter().flatten().copied().fold(0.0, f64::max);
    let (mut lo, mut hi) = (0.0, max_load * 1.001 + 1.0);
    let mut trace: Vec<CalibrationStep> = Vec::new();
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let fraction = closure_fraction(loads, &Thresholds::from_hi(mid), draws, noise);
        trace.push(CalibrationStep { tau_hi: mid, fraction });
        if (fraction - target).abs() <= CALIBRATION_STOP {
            break;
        }
        if fraction > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let best = trace
        .iter()
        .min_by(|a, b| (a.fraction - target).abs().total_cmp(&(b.fraction - target).abs()))
        .expect("at least one step");
    if (best.fraction - target).abs() > CALIBRATION_TOL || best.tau_hi <= 0.0 {
        let tail: Vec<String> = trace
            .iter()
            .rev()
            .take(5)
            .map(|s| format!("tau_hi {:.4} -> {:.4}", s.tau_hi, s.fraction))
            .collect();
        return Err(Error::Calibration(format!(
            "closure fraction {target} not reached within ±{CALIBRATION_TOL} after {} steps (last: {})",
            trace.len(),
            tail.join("; ")
        )));
    }
    Ok((Thresholds::from_hi(best.tau_hi), trace))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneStation {
    pub zone: String,
    pub station: String,
}

/// Everything needed to recompute labels from features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRule {
    pub thresholds: Thresholds,
    pub weights: SpeciesWeights,
    pub label_noise: f64,
    pub zone_station: Vec<ZoneStation>,
    pub closure_target: f64,
    /// Closure fraction over all generated zone-weeks.
    pub closure_fraction: f64,
    pub calibration: Vec<CalibrationStep>,
    pub seed: u64,
}

fn column(data: &EstuaryDataset, name: &str) -> Result<usize> {
    data.feature_names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| Error::Data(format!("dataset has no column '{name}'")))
}

/// Labels the planted rule assigns to each row of an ingested dataset,
/// computed from the row's own features.
pub fn oracle_labels(rule: &TruthRule, data: &EstuaryDataset) -> Result<Vec<u8>> {
    if rule.label_noise > 0.0 {
        return Err(Error::Config("oracle labels need a noise-free rule".into()));
    }
    let state = column(data, "friday_state")?;
    let zones = rule
        .zone_station
        .iter()
        .map(|zs| {
            let species = ["d_acuminata", "d_acuta", "d_caudata", "d_spp"]
                .map(|sp| column(data, &format!("{}_{sp}", zs.station)));
            let [a, b, c, d] = species;
            Ok((column(data, &format!("zone_{}", zs.zone))?, [a?, b?, c?, d?]))
        })
        .collect::<Result<Vec<_>>>()?;
    data.features
        .iter_rows()
        .enumerate()
        .map(|(i, row)| {
            let (_, cols) = zones
                .iter()
                .find(|(z, _)| row[*z] == 1.0)
                .ok_or_else(|| Error::Data(format!("row {i} has no zone flag set")))?;
            let load = rule.weights.load(cols.map(|c| row[c]));
            Ok(u8::from(rule.thresholds.next_state(load, row[state] == 1.0)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn boundary_and_hysteresis() {
        let th = Thresholds { tau_hi: 10.0, tau_lo: 5.0 };
        assert!(!th.next_state(10.0, false));
        assert!(th.next_state(10.5, false));
        assert!(th.next_state(7.0, true));
        assert!(!th.next_state(7.0, false));
        assert!(!th.next_state(5.0, true));
    }

    #[test]
    fn quiet_zone_stays_open() {
        let th = Thresholds { tau_hi: 10.0, tau_lo: 5.0 };
        let s = simulate(&[1.0; 30], &th, false, &[0.5; 30], 0.0);
        assert!(s.iter().all(|&c| !c));
    }

    #[test]
    fn calibration_rejects_degenerate_targets() {
        let loads = vec![(0..100).map(|i| i as f64).collect::<Vec<_>>()];
        let draws = vec![vec![1.0; 100]];
        assert!(calibrate_thresholds(&loads, &draws, 0.0, 0.0).is_err());
        assert!(calibrate_thresholds(&loads, &draws, 0.0, 1.0).is_err());
        let (th, trace) = calibrate_thresholds(&loads, &draws, 0.0, 0.3).unwrap();
        assert!(trace.len() <= MAX_BISECTION_STEPS);
        assert!((closure_fraction(&loads, &th, &draws, 0.0) - 0.3).abs() <= CALIBRATION_TOL);
    }

    proptest! {
        #[test]
        fn closed_start_never_reopens_earlier(
            loads in prop::collection::vec(0.0f64..20.0, 1..80),
            hi in 1.0f64..15.0,
        ) {
            let th = Thresholds::from_hi(hi);
            let open = simulate(&loads, &th, false, &[], 0.0);
            let closed = simulate(&loads, &th, true, &[], 0.0);
            for (o, c) in open.iter().zip(&closed) {
                prop_assert!(*c || !*o);
            }
        }
    }
}
