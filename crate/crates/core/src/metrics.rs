//! Trajectory quality metrics: jerk statistics, timing summaries and paired comparisons.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::{finite_difference, DiffError};
use crate::se3::Vec3;
use crate::trajectory::{Trajectory, TrajectoryError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("jerk needs at least 4 samples, got {0}")]
    TooFewSamples(usize),
    #[error("timing statistics need at least one duration")]
    NoDurations,
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// Relative tolerance for treating a time grid as uniform.
const UNIFORM_TOL: f64 = 1e-6;

/// Statistics of a per-sample norm series, in the series' units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JerkReport {
    pub mean: f64,
    pub std: f64,
    pub max: f64,
}

/// Mean and sample standard deviation; std is 0 for a single value.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn uniform(traj: &Trajectory) -> Result<Trajectory, MetricsError> {
    if traj.len() < 4 {
        return Err(MetricsError::TooFewSamples(traj.len()));
    }
    match traj.uniform_step(UNIFORM_TOL) {
        Some(_) => Ok(traj.clone()),
        None => Ok(traj.resample(traj.duration() / (traj.len() - 1) as f64)?),
    }
}

fn norm_stats(series: &[(f64, Vec3)]) -> Result<JerkReport, MetricsError> {
    let d3 = finite_difference(series, 3)?;
    let n = d3.len();
    // indices 3..n-3 are free of the one-sided end stencils
    let interior = if n > 6 { &d3[3..n - 3] } else { &d3[..] };
    let norms: Vec<f64> = interior.iter().map(|(_, j)| j.norm()).collect();
    let (mean, std) = mean_std(&norms);
    let max = norms.iter().copied().fold(0.0, f64::max);
    Ok(JerkReport { mean, std, max })
}

/// Translational jerk norm statistics in m/s³ over interior samples.
pub fn jerk_metrics(traj: &Trajectory) -> Result<JerkReport, MetricsError> {
    let traj = uniform(traj)?;
    norm_stats(&traj.positions())
}

/// Rotational jerk in rad/s³, from rotation vectors relative to the first sample.
/// Reported separately from the translational figure.
pub fn orientation_jerk_metrics(traj: &Trajectory) -> Result<JerkReport, MetricsError> {
    let traj = uniform(traj)?;
    let q0 = traj.first().pose.orientation;
    let series: Vec<(f64, Vec3)> = traj
        .samples()
        .iter()
        .map(|s| (s.t, s.pose.orientation.error_to(&q0)))
        .collect();
    norm_stats(&series)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub durations: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl TimingReport {
    /// `mean ± std` with the given number of decimals.
    pub fn summary(&self, decimals: usize) -> String {
        format!("{:.*} ± {:.*}", decimals, self.mean, decimals, self.std)
    }
}

pub fn timing_stats(durations: &[f64]) -> Result<TimingReport, MetricsError> {
    if durations.is_empty() {
        return Err(MetricsError::NoDurations);
    }
    let (mean, std) = mean_std(durations);
    Ok(TimingReport {
        durations: durations.to_vec(),
        mean,
        std,
    })
}

/// Full quality report for one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub duration_s: f64,
    pub samples: usize,
    /// m/s³
    pub jerk: JerkReport,
    /// rad/s³
    pub orientation_jerk: JerkReport,
    pub max_force_n: Option<f64>,
}

pub fn trajectory_report(traj: &Trajectory) -> Result<TrajectoryReport, MetricsError> {
    let max_force_n = traj.has_wrench().then(|| {
        traj.samples()
            .iter()
            .filter_map(|s| s.wrench.map(|w| w.force.norm()))
            .fold(0.0, f64::max)
    });
    Ok(TrajectoryReport {
        duration_s: traj.duration(),
        samples: traj.len(),
        jerk: jerk_metrics(traj)?,
        orientation_jerk: orientation_jerk_metrics(traj)?,
        max_force_n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    A,
    B,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub a: f64,
    pub b: f64,
    /// `a / b`; 1.0 when both are zero.
    pub ratio: f64,
    /// Lower is better for every metric.
    pub winner: Winner,
}

fn compare(metric: &str, a: f64, b: f64) -> MetricComparison {
    let ratio = if a == b { 1.0 } else { a / b };
    let winner = if a < b {
        Winner::A
    } else if b < a {
        Winner::B
    } else {
        Winner::Tie
    };
    MetricComparison {
        metric: metric.to_string(),
        a,
        b,
        ratio,
        winner,
    }
}

pub fn compare_demonstrations(a: &Trajectory, b: &Trajectory) -> Result<Vec<MetricComparison>, MetricsError> {
    let (ja, jb) = (jerk_metrics(a)?, jerk_metrics(b)?);
    Ok(vec![
        compare("duration_s", a.duration(), b.duration()),
        compare("mean_jerk", ja.mean, jb.mean),
        compare("max_jerk", ja.max, jb.max),
    ])
}

/// Published hardware figures, reproduced verbatim as reference rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub table: String,
    pub metric: String,
    pub native: String,
    pub proposed: String,
}

pub fn reference_rows() -> Vec<ReferenceRow> {
    let row = |table: &str, metric: &str, native: &str, proposed: &str| ReferenceRow {
        table: table.into(),
        metric: metric.into(),
        native: native.into(),
        proposed: proposed.into(),
    };
    vec![
        row("timing", "avg time over 5 demonstrations (s)", "24.66 ± 3.25", "17.17 ± 0.756"),
        row("quality", "jerk norm", "10.55 ± 1.11", "6.71 ± 0.157"),
        row("quality", "max jerk", "10.84 ± 0.73", "6.99 ± 0.00"),
    ]
}
