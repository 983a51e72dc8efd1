//! Prediction metrics and variant comparison.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angle_diff, spherical_distance, SphericalCoord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no samples to evaluate")]
    Empty,
    #[error("{pred} predictions but {truth} ground-truth values")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("window {window}: {pred} predicted steps but {truth} true steps")]
    Misaligned { window: usize, pred: usize, truth: usize },
    #[error("inconsistent prediction horizons: {0}")]
    InconsistentHorizon(String),
    #[error("comparison needs at least two reports, got {0}")]
    TooFewReports(usize),
}

/// How per-axis RMSE is aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmseMode {
    /// `sqrt(mean(d²))` over wrapped angular differences.
    #[default]
    Standard,
    /// Literal published form, which halves the squared error inside the root:
    /// `sqrt(mean(d²) / 2)`.
    PaperCompat,
}

/// Per-axis RMSE `(phi, theta)` in degrees. Azimuth differences are wrapped to
/// at most 180°.
pub fn rmse_angles(pred: &[SphericalCoord], truth: &[SphericalCoord], mode: RmseMode) -> Result<(f64, f64), EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    let (mut sp, mut st) = (0.0, 0.0);
    for (p, t) in pred.iter().zip(truth) {
        let dp = angle_diff(p.phi(), t.phi());
        let dt = p.theta() - t.theta();
        sp += dp * dp;
        st += dt * dt;
    }
    let div = match mode {
        RmseMode::Standard => 1.0,
        RmseMode::PaperCompat => 2.0,
    } * pred.len() as f64;
    Ok(((sp / div).sqrt().to_degrees(), (st / div).sqrt().to_degrees()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrthodromicStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// Mean distance at each prediction step.
    pub per_step: Vec<f64>,
    pub count: usize,
}

fn check_windows(pred: &[Vec<SphericalCoord>], truth: &[Vec<SphericalCoord>]) -> Result<usize, EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    let horizon = truth.first().map(Vec::len).ok_or(EvalError::Empty)?;
    if horizon == 0 {
        return Err(EvalError::Empty);
    }
    for (w, (p, t)) in pred.iter().zip(truth).enumerate() {
        if p.len() != t.len() || t.len() != horizon {
            return Err(EvalError::Misaligned {
                window: w,
                pred: p.len(),
                truth: t.len(),
            });
        }
    }
    Ok(horizon)
}

/// Orthodromic error over `(window, step)`-aligned predictions.
pub fn orthodromic_stats(pred: &[Vec<SphericalCoord>], truth: &[Vec<SphericalCoord>]) -> Result<OrthodromicStats, EvalError> {
    let horizon = check_windows(pred, truth)?;
    let mut per_step = vec![0.0; horizon];
    let dists: Vec<f64> = pred
        .iter()
        .zip(truth)
        .flat_map(|(p, t)| p.iter().zip(t).map(|(a, b)| spherical_distance(a, b)))
        .collect();
    for (i, d) in dists.iter().enumerate() {
        per_step[i % horizon] += d;
    }
    let windows = pred.len() as f64;
    per_step.iter_mut().for_each(|s| *s /= windows);
    let n = dists.len() as f64;
    let mean = dists.iter().sum::<f64>() / n;
    let var = dists.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    Ok(OrthodromicStats {
        mean,
        std: var.sqrt(),
        per_step,
        count: dists.len(),
    })
}

/// Summary of one model variant on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub name: String,
    pub rmse_phi: f64,
    pub rmse_theta: f64,
    pub mean_orthodromic: f64,
    pub std_orthodromic: f64,
    pub per_step_orthodromic: Vec<f64>,
    pub samples: usize,
    /// Seconds between prediction steps.
    pub dt: f64,
    #[serde(default)]
    pub rmse_mode: RmseMode,
}

impl EvalReport {
    pub fn from_predictions(
        name: impl Into<String>,
        pred: &[Vec<SphericalCoord>],
        truth: &[Vec<SphericalCoord>],
        dt: f64,
        mode: RmseMode,
    ) -> Result<Self, EvalError> {
        let stats = orthodromic_stats(pred, truth)?;
        let flat_p: Vec<SphericalCoord> = pred.iter().flatten().copied().collect();
        let flat_t: Vec<SphericalCoord> = truth.iter().flatten().copied().collect();
        let (rmse_phi, rmse_theta) = rmse_angles(&flat_p, &flat_t, mode)?;
        Ok(Self {
            name: name.into(),
            rmse_phi,
            rmse_theta,
            mean_orthodromic: stats.mean,
            std_orthodromic: stats.std,
            per_step_orthodromic: stats.per_step,
            samples: stats.count,
            dt,
            rmse_mode: mode,
        })
    }

    pub fn horizon(&self) -> usize {
        self.per_step_orthodromic.len()
    }

    /// `step,seconds_ahead,mean_orthodromic`, steps numbered from 1.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("step,seconds_ahead,mean_orthodromic\n");
        for (i, v) in self.per_step_orthodromic.iter().enumerate() {
            let step = i + 1;
            let _ = writeln!(out, "{step},{},{v}", step as f64 * self.dt);
        }
        out
    }
}

/// Reports ranked by ascending mean orthodromic error, then RMSE_θ, then name.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub ranked: Vec<EvalReport>,
}

pub fn compare(reports: &[EvalReport]) -> Result<Comparison, EvalError> {
    if reports.len() < 2 {
        return Err(EvalError::TooFewReports(reports.len()));
    }
    let h = reports[0].horizon();
    if let Some(r) = reports.iter().find(|r| r.horizon() != h) {
        return Err(EvalError::InconsistentHorizon(format!(
            "{} has {} steps, {} has {}",
            reports[0].name,
            h,
            r.name,
            r.horizon()
        )));
    }
    let mut ranked = reports.to_vec();
    ranked.sort_by(|a, b| {
        a.mean_orthodromic
            .total_cmp(&b.mean_orthodromic)
            .then(a.rmse_theta.total_cmp(&b.rmse_theta))
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(Comparison { ranked })
}

impl Comparison {
    pub fn table(&self) -> String {
        let width = self.ranked.iter().map(|r| r.name.len()).max().unwrap_or(4).max(7);
        let mut out = format!(
            "{:<4} {:<width$} {:>12} {:>12} {:>22}\n",
            "rank", "variant", "RMSE_phi(°)", "RMSE_theta(°)", "orthodromic (rad)"
        );
        for (i, r) in self.ranked.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<4} {:<width$} {:>12.4} {:>12.4} {:>12.4} ± {:<7.4}",
                i + 1,
                r.name,
                r.rmse_phi,
                r.rmse_theta,
                r.mean_orthodromic,
                r.std_orthodromic
            );
        }
        out
    }

    /// Long-form per-step curves of all variants:
    /// `variant,step,seconds_ahead,mean_orthodromic`.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("variant,step,seconds_ahead,mean_orthodromic\n");
        for r in &self.ranked {
            for (i, v) in r.per_step_orthodromic.iter().enumerate() {
                let step = i + 1;
                let _ = writeln!(out, "{},{step},{},{v}", r.name, step as f64 * r.dt);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(phi_deg: f64, theta_deg: f64) -> SphericalCoord {
        SphericalCoord::new(phi_deg.to_radians(), theta_deg.to_radians()).unwrap()
    }

    fn report(name: &str, mean: f64, rmse_theta: f64) -> EvalReport {
        EvalReport {
            name: name.into(),
            rmse_phi: 1.0,
            rmse_theta,
            mean_orthodromic: mean,
            std_orthodromic: 0.0,
            per_step_orthodromic: vec![mean; 5],
            samples: 5,
            dt: 0.5,
            rmse_mode: RmseMode::Standard,
        }
    }

    #[test]
    fn rmse_identity_single_and_wrap() {
        let a = vec![c(10.0, 80.0), c(200.0, 95.0)];
        assert_eq!(rmse_angles(&a, &a, RmseMode::Standard).unwrap(), (0.0, 0.0));
        let (p, t) = rmse_angles(&[c(20.0, 90.0)], &[c(10.0, 90.0)], RmseMode::Standard).unwrap();
        assert!((p - 10.0).abs() < 1e-12 && t == 0.0);
        let (p, _) = rmse_angles(&[c(359.0, 90.0)], &[c(1.0, 90.0)], RmseMode::Standard).unwrap();
        assert!((p - 2.0).abs() < 1e-12);
        let (p, _) = rmse_angles(&[c(20.0, 90.0)], &[c(10.0, 90.0)], RmseMode::PaperCompat).unwrap();
        assert!((p - 10.0 / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(rmse_angles(&[], &[], RmseMode::Standard), Err(EvalError::Empty));
        assert!(rmse_angles(&a, &a[..1], RmseMode::Standard).is_err());
    }

    #[test]
    fn orthodromic_identity_and_antipodes() {
        let t = vec![vec![c(0.0, 90.0), c(45.0, 60.0)]; 3];
        let s = orthodromic_stats(&t, &t).unwrap();
        assert_eq!((s.mean, s.std), (0.0, 0.0));
        let truth = vec![vec![SphericalCoord::new(0.0, FRAC_PI_2).unwrap(); 2]; 2];
        let anti = vec![vec![SphericalCoord::new(PI, FRAC_PI_2).unwrap(); 2]; 2];
        let s = orthodromic_stats(&anti, &truth).unwrap();
        assert!((s.mean - PI).abs() < 1e-12 && s.std < 1e-12);
        assert_eq!(s.per_step.len(), 2);
        assert!(orthodromic_stats(&anti[..1], &truth).is_err());
        let ragged = vec![vec![c(0.0, 90.0)], vec![c(0.0, 90.0); 2]];
        assert!(matches!(
            orthodromic_stats(&ragged, &ragged),
            Err(EvalError::Misaligned { window: 1, .. })
        ));
    }

    #[test]
    fn ranking_and_ties() {
        let cmp = compare(&[report("B", 0.6, 1.0), report("A", 0.3, 1.0)]).unwrap();
        assert_eq!(cmp.ranked[0].name, "A");
        let cmp = compare(&[report("z", 0.3, 2.0), report("y", 0.3, 1.0), report("x", 0.3, 1.0)]).unwrap();
        let names: Vec<&str> = cmp.ranked.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["x", "y", "z"]);
        assert!(compare(&[report("a", 0.1, 0.0)]).is_err());
        let mut short = report("s", 0.1, 0.0);
        short.per_step_orthodromic.pop();
        assert!(matches!(
            compare(&[report("a", 0.1, 0.0), short]),
            Err(EvalError::InconsistentHorizon(_))
        ));
    }

    #[test]
    fn adding_a_worse_report_keeps_order() {
        let base = [report("a", 0.2, 1.0), report("b", 0.4, 1.0), report("c", 0.3, 1.0)];
        let before: Vec<String> = compare(&base).unwrap().ranked.into_iter().map(|r| r.name).collect();
        let mut more = base.to_vec();
        more.push(report("worst", 0.9, 1.0));
        let after: Vec<String> = compare(&more).unwrap().ranked.into_iter().map(|r| r.name).collect();
        assert_eq!(&after[..3], before.as_slice());
    }

    #[test]
    fn report_json_and_curve() {
        let r = report("full", 0.25, 1.0);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"mean_orthodromic\":0.25"));
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        let csv = r.curve_csv();
        assert!(csv.starts_with("step,seconds_ahead,mean_orthodromic\n1,0.5,0.25\n"));
        assert_eq!(csv.lines().count(), 6);
    }
}
