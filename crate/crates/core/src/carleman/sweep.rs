use rayon::prelude::*;
use serde::Serialize;

use super::Sides;
use crate::error::{LabError, Result};
use crate::weights::WeightCertificate;

/// Growth allowed between consecutive ratios past the threshold.
pub const S_HAT_TOLERANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LemmaId {
    Lemma1,
    Lemma2,
    Lemma3,
}

impl LemmaId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lemma1" | "1" => Ok(LemmaId::Lemma1),
            "lemma2" | "2" => Ok(LemmaId::Lemma2),
            "lemma3" | "3" => Ok(LemmaId::Lemma3),
            _ => Err(LabError::contract(format!("unknown estimate '{s}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LemmaId::Lemma1 => "lemma1",
            LemmaId::Lemma2 => "lemma2",
            LemmaId::Lemma3 => "lemma3",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub s: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: Option<f64>,
    pub log_scale: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CarlemanReport {
    pub lemma: LemmaId,
    pub m: Option<u32>,
    pub rows: Vec<SweepRow>,
    /// Largest ratio for `s ≥ s_hat`; `None` when every side vanishes.
    pub c_hat: Option<f64>,
    pub s_hat: Option<f64>,
    pub inputs: Vec<String>,
    pub certificates: Vec<WeightCertificate>,
}

impl CarlemanReport {
    /// Ratios at `s ≥ s_min`.
    pub fn ratios_from(&self, s_min: f64) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().filter(move |r| r.s >= s_min).filter_map(|r| r.ratio)
    }

    pub fn max_ratio_from(&self, s_min: f64) -> Option<f64> {
        self.ratios_from(s_min).fold(None, |m, r| Some(m.map_or(r, |m: f64| m.max(r))))
    }
}

/// Smallest index beyond which no ratio exceeds its predecessor by more than
/// the tolerance.
fn threshold(ratios: &[f64]) -> usize {
    let mut j = ratios.len().saturating_sub(1);
    while j > 0 && ratios[j] <= ratios[j - 1] * (1.0 + S_HAT_TOLERANCE) {
        j -= 1;
    }
    j
}

/// Evaluates `eval` at every `s` in parallel and fits `(s_hat, c_hat)`.
pub fn s_sweep(
    lemma: LemmaId,
    m: Option<u32>,
    s_list: &[f64],
    eval: impl Fn(f64) -> Result<Sides> + Sync,
) -> Result<CarlemanReport> {
    if s_list.len() < 4 {
        return Err(LabError::contract("an s-sweep needs at least 4 values"));
    }
    if s_list.iter().any(|s| !(*s > 0.0 && s.is_finite())) || s_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::contract("s values must be positive and strictly ascending"));
    }
    let sides: Vec<Sides> = s_list.par_iter().map(|&s| eval(s)).collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(sides.len());
    for (s, sd) in s_list.iter().zip(&sides) {
        if !(sd.lhs >= 0.0 && sd.rhs >= 0.0) || !sd.lhs.is_finite() || !sd.rhs.is_finite() {
            return Err(LabError::NonFinite(format!("sides at s = {s}: ({}, {})", sd.lhs, sd.rhs)));
        }
        rows.push(SweepRow { s: *s, lhs: sd.lhs, rhs: sd.rhs, ratio: sd.ratio(), log_scale: sd.log_scale });
    }
    let (s_hat, c_hat) = if rows.iter().all(|r| r.rhs == 0.0) {
        if rows.iter().any(|r| r.lhs > 0.0) {
            return Err(LabError::contract("right-hand side vanishes for every s while the left-hand side does not"));
        }
        (None, None)
    } else {
        if rows.iter().any(|r| r.rhs == 0.0 && r.lhs > 0.0) {
            return Err(LabError::contract("right-hand side underflows at some s; lower the s range"));
        }
        let ratios: Vec<f64> = rows.iter().map(|r| r.ratio.unwrap_or(0.0)).collect();
        let j = threshold(&ratios);
        let c = ratios[j..].iter().copied().fold(0.0, f64::max);
        (Some(rows[j].s), Some(c))
    };
    Ok(CarlemanReport { lemma, m, rows, c_hat, s_hat, inputs: Vec::new(), certificates: Vec::new() })
}

/// Constant fitted on a calibration family and checked on held-out inputs.
#[derive(Clone, Debug, Serialize)]
pub struct Calibration {
    pub c_hat: f64,
    pub s_hat: f64,
    pub factor: f64,
    /// Largest held-out ratio at `s ≥ s_hat`.
    pub held_max: f64,
    pub passed: bool,
}

/// `c_hat` and `s_hat` are the maxima over the calibration reports.
pub fn calibrate(calibration: &[CarlemanReport], held: &[CarlemanReport], factor: f64) -> Result<Calibration> {
    let mut c_hat = None::<f64>;
    let mut s_hat = None::<f64>;
    for r in calibration {
        if let (Some(c), Some(s)) = (r.c_hat, r.s_hat) {
            c_hat = Some(c_hat.map_or(c, |x| x.max(c)));
            s_hat = Some(s_hat.map_or(s, |x| x.max(s)));
        }
    }
    let (Some(c_hat), Some(s_hat)) = (c_hat, s_hat) else {
        return Err(LabError::contract("calibration family has no finite ratios"));
    };
    let held_max = held.iter().filter_map(|r| r.max_ratio_from(s_hat)).fold(0.0, f64::max);
    Ok(Calibration { c_hat, s_hat, factor, held_max, passed: held_max <= factor * c_hat })
}
