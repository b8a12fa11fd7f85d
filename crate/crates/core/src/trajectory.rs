//! Timestamped pose sequences and their CSV representation.
//!
//! CSV layout: header `t,px,py,pz,qw,qx,qy,qz` optionally followed by the
//! wrench block `fx,fy,fz,tx,ty,tz`. Numbers are written with nine
//! significant digits.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::se3::{Pose, UnitQuaternion, Vec3, Wrench};

pub const POSE_HEADER: [&str; 8] = ["t", "px", "py", "pz", "qw", "qx", "qy", "qz"];
pub const WRENCH_HEADER: [&str; 6] = ["fx", "fy", "fz", "tx", "ty", "tz"];

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("trajectory has no samples")]
    Empty,
    #[error("timestamps not strictly increasing at sample {0}")]
    NonIncreasing(usize),
    #[error("wrench present on some samples but not others (sample {0})")]
    MixedWrench(usize),
    #[error("non-finite value in sample {0}")]
    NonFinite(usize),
    #[error("resampling step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("file={file} line={line} field={field}: {message}")]
    Parse {
        file: String,
        line: usize,
        field: String,
        message: String,
    },
    #[error("file={file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub pose: Pose,
    pub wrench: Option<Wrench>,
}

impl Sample {
    pub fn new(t: f64, pose: Pose) -> Self {
        Self {
            t,
            pose,
            wrench: None,
        }
    }

    pub fn with_wrench(t: f64, pose: Pose, wrench: Wrench) -> Self {
        Self {
            t,
            pose,
            wrench: Some(wrench),
        }
    }
}

/// Validated trajectory: nonempty, strictly increasing timestamps, wrench
/// columns present on all samples or none.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<Sample>,
}

impl Trajectory {
    pub fn new(samples: Vec<Sample>) -> Result<Self, TrajectoryError> {
        if samples.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        let with_wrench = samples[0].wrench.is_some();
        for (i, s) in samples.iter().enumerate() {
            if !s.t.is_finite() || !s.pose.is_finite() {
                return Err(TrajectoryError::NonFinite(i));
            }
            if s.wrench.is_some() != with_wrench {
                return Err(TrajectoryError::MixedWrench(i));
            }
            if i > 0 && !(s.t > samples[i - 1].t) {
                return Err(TrajectoryError::NonIncreasing(i));
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        &self.samples[self.samples.len() - 1]
    }

    pub fn duration(&self) -> f64 {
        self.last().t - self.first().t
    }

    pub fn has_wrench(&self) -> bool {
        self.samples[0].wrench.is_some()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn positions(&self) -> Vec<(f64, Vec3)> {
        self.samples.iter().map(|s| (s.t, s.pose.position)).collect()
    }

    /// Returns the common step if every interval matches it within `rel_tol`.
    pub fn uniform_step(&self, rel_tol: f64) -> Option<f64> {
        if self.samples.len() < 2 {
            return None;
        }
        let dt = self.duration() / (self.samples.len() - 1) as f64;
        self.samples
            .windows(2)
            .all(|w| ((w[1].t - w[0].t) - dt).abs() <= rel_tol * dt)
            .then_some(dt)
    }

    /// Returns a copy with every pose mapped through `f`.
    pub fn map_poses(&self, mut f: impl FnMut(&Pose) -> Pose) -> Trajectory {
        Trajectory {
            samples: self
                .samples
                .iter()
                .map(|s| Sample {
                    pose: f(&s.pose),
                    ..*s
                })
                .collect(),
        }
    }

    /// Pose at time `t`, clamped to the trajectory's span.
    pub fn pose_at(&self, t: f64) -> Pose {
        let i = self.samples.partition_point(|s| s.t <= t);
        if i == 0 {
            return self.samples[0].pose;
        }
        if i == self.samples.len() {
            return self.last().pose;
        }
        let (a, b) = (&self.samples[i - 1], &self.samples[i]);
        a.pose.interpolate(&b.pose, (t - a.t) / (b.t - a.t))
    }

    /// Resamples onto a uniform grid spanning exactly `[t_first, t_last]`.
    ///
    /// The grid has `ceil(span / dt)` intervals, so the effective step is the
    /// largest value `<= dt` that divides the span. Grid times that coincide
    /// with an input sample reuse that sample unchanged.
    pub fn resample(&self, dt: f64) -> Result<Trajectory, TrajectoryError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(TrajectoryError::BadStep(dt));
        }
        if self.samples.len() == 1 {
            return Ok(self.clone());
        }
        let t0 = self.first().t;
        let span = self.duration();
        let n = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
        let mut out = Vec::with_capacity(n + 1);
        let mut j = 0;
        for k in 0..=n {
            let t = if k == n {
                self.last().t
            } else {
                t0 + span * (k as f64 / n as f64)
            };
            while j + 1 < self.samples.len() - 1 && self.samples[j + 1].t <= t {
                j += 1;
            }
            let a = &self.samples[j];
            let b = &self.samples[j + 1];
            let snap = 1e-12 * t.abs().max(1.0);
            let sample = if (t - a.t).abs() <= snap {
                *a
            } else if (t - b.t).abs() <= snap {
                *b
            } else {
                let u = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
                let wrench = match (a.wrench, b.wrench) {
                    (Some(wa), Some(wb)) => Some(Wrench {
                        force: wa.force + (wb.force - wa.force) * u,
                        torque: wa.torque + (wb.torque - wa.torque) * u,
                    }),
                    _ => None,
                };
                Sample {
                    t,
                    pose: a.pose.interpolate(&b.pose, u),
                    wrench,
                }
            };
            out.push(sample);
        }
        Trajectory::new(out)
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::new();
        s.push_str(&POSE_HEADER.join(","));
        if self.has_wrench() {
            s.push(',');
            s.push_str(&WRENCH_HEADER.join(","));
        }
        s.push('\n');
        for sample in &self.samples {
            let p = sample.pose.position;
            let q = sample.pose.orientation.to_array();
            let mut fields = vec![sample.t, p.x, p.y, p.z, q[0], q[1], q[2], q[3]];
            if let Some(w) = sample.wrench {
                fields.extend_from_slice(&w.to_array());
            }
            let row: Vec<String> = fields.into_iter().map(fmt_sig9).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    /// Parses the CSV layout; `source` names the file in error messages.
    pub fn from_csv_str(text: &str, source: &str) -> Result<Trajectory, TrajectoryError> {
        let parse_err = |line: usize, field: &str, message: String| TrajectoryError::Parse {
            file: source.to_string(),
            line,
            field: field.to_string(),
            message,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "header", "empty file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let with_wrench = match cols.len() {
            8 => false,
            14 => true,
            _ => {
                return Err(parse_err(
                    1,
                    "header",
                    format!("expected 8 or 14 columns, got {}", cols.len()),
                ))
            }
        };
        let expected: Vec<&str> = POSE_HEADER
            .iter()
            .chain(WRENCH_HEADER.iter().take(if with_wrench { 6 } else { 0 }))
            .copied()
            .collect();
        if let Some((got, want)) = cols.iter().zip(&expected).find(|(a, b)| a != b) {
            return Err(parse_err(1, want, format!("unexpected column name '{got}'")));
        }
        let mut samples = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let raw: Vec<&str> = line.split(',').map(str::trim).collect();
            if raw.len() != expected.len() {
                return Err(parse_err(
                    lineno,
                    "row",
                    format!("expected {} fields, got {}", expected.len(), raw.len()),
                ));
            }
            let mut v = [0.0f64; 14];
            for (k, (text, name)) in raw.iter().zip(&expected).enumerate() {
                v[k] = text
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_err(lineno, name, format!("not a finite number: '{text}'")))?;
            }
            let q = UnitQuaternion::new(v[4], v[5], v[6], v[7])
                .map_err(|e| parse_err(lineno, "qw", e.to_string()))?;
            let pose = Pose::new(Vec3::new(v[1], v[2], v[3]), q);
            let wrench = with_wrench.then(|| Wrench {
                force: Vec3::new(v[8], v[9], v[10]),
                torque: Vec3::new(v[11], v[12], v[13]),
            });
            if let Some(prev) = samples.last().map(|s: &Sample| s.t) {
                if !(v[0] > prev) {
                    return Err(parse_err(lineno, "t", "timestamps must be strictly increasing".into()));
                }
            }
            samples.push(Sample {
                t: v[0],
                pose,
                wrench,
            });
        }
        if samples.is_empty() {
            return Err(parse_err(1, "row", "no samples".into()));
        }
        Trajectory::new(samples)
    }

    pub fn read_csv(path: &Path) -> Result<Trajectory, TrajectoryError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| TrajectoryError::Io {
            file: name.clone(),
            source,
        })?;
        Self::from_csv_str(&text, &name)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), TrajectoryError> {
        std::fs::write(path, self.to_csv_string()).map_err(|source| TrajectoryError::Io {
            file: path.display().to_string(),
            source,
        })
    }
}

/// Formats with nine significant digits, `%g` style, trailing zeros trimmed.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let exp: i32 = sci
        .rsplit('e')
        .next()
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    } else {
        let (mant, e) = sci.split_once('e').unwrap_or((&sci, "0"));
        let mant = if mant.contains('.') {
            mant.trim_end_matches('0').trim_end_matches('.')
        } else {
            mant
        };
        format!("{mant}e{e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line(n: usize, dt: f64) -> Trajectory {
        Trajectory::new(
            (0..n)
                .map(|i| {
                    let t = i as f64 * dt;
                    Sample::new(t, Pose::from_position(Vec3::new(t, 2.0 * t, 0.5)))
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_timestamps() {
        let p = Pose::default();
        assert!(matches!(Trajectory::new(vec![]), Err(TrajectoryError::Empty)));
        assert!(matches!(
            Trajectory::new(vec![Sample::new(0.0, p), Sample::new(0.0, p)]),
            Err(TrajectoryError::NonIncreasing(1))
        ));
        assert!(matches!(
            Trajectory::new(vec![
                Sample::new(0.0, p),
                Sample::with_wrench(1.0, p, Wrench::ZERO)
            ]),
            Err(TrajectoryError::MixedWrench(1))
        ));
    }

    #[test]
    fn resample_uniform_is_identity() {
        let tr = line(11, 0.1);
        assert_eq!(tr.resample(0.1).unwrap(), tr);
    }

    #[test]
    fn resample_two_samples_into_quarters() {
        let a = Pose::from_position(Vec3::new(0.0, 0.0, 0.0));
        let b = Pose::from_position(Vec3::new(1.0, -2.0, 0.4));
        let tr = Trajectory::new(vec![Sample::new(0.0, a), Sample::new(2.0, b)]).unwrap();
        let r = tr.resample(0.5).unwrap();
        assert_eq!(r.len(), 5);
        assert_eq!(r.first().pose, a);
        assert_eq!(r.last().pose, b);
        for (k, s) in r.samples().iter().enumerate() {
            let expected = b.position * (k as f64 / 4.0);
            assert_abs_diff_eq!((s.pose.position - expected).norm(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(s.t, 0.5 * k as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn resample_preserves_endpoints_on_uneven_span() {
        let tr = line(8, 0.13);
        let r = tr.resample(0.1).unwrap();
        assert_eq!(r.first(), tr.first());
        assert_eq!(r.last(), tr.last());
        assert!(r.uniform_step(1e-9).unwrap() <= 0.1);
    }

    #[test]
    fn resample_rejects_bad_step() {
        assert!(matches!(line(3, 1.0).resample(0.0), Err(TrajectoryError::BadStep(_))));
    }

    #[test]
    fn resample_error_is_second_order() {
        // smooth curve sampled coarsely, compared with the dense analytic curve
        let f = |t: f64| Vec3::new(t.sin(), (2.0 * t).cos(), 0.3 * t * t);
        let build = |dt: f64| {
            let n = (3.0 / dt).round() as usize;
            Trajectory::new(
                (0..=n)
                    .map(|i| {
                        let t = i as f64 * dt;
                        Sample::new(t, Pose::from_position(f(t)))
                    })
                    .collect(),
            )
            .unwrap()
        };
        let max_err = |dt: f64| {
            let r = build(dt).resample(dt / 3.0).unwrap();
            r.samples()
                .iter()
                .map(|s| (s.pose.position - f(s.t)).norm())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (max_err(0.1), max_err(0.05));
        // halving the step cuts the interpolation error by about four
        assert!(e2 < e1 / 3.0, "{e1} {e2}");
        assert!(e1 < 0.1 * 0.1 * 4.0 / 8.0 * 1.01);
    }

    #[test]
    fn csv_round_trip_with_wrench() {
        let q = UnitQuaternion::from_axis_angle(&Vec3::new(0.0, 1.0, 1.0), 0.4);
        let w = Wrench::new(Vec3::new(1.0, -2.5, 0.0), Vec3::new(0.0, 0.1, 0.0)).unwrap();
        let tr = Trajectory::new(vec![
            Sample::with_wrench(0.0, Pose::new(Vec3::new(0.1, 0.2, 0.3), q), w),
            Sample::with_wrench(0.01, Pose::new(Vec3::new(0.11, 0.2, 0.3), q), w),
        ])
        .unwrap();
        let text = tr.to_csv_string();
        assert!(text.starts_with("t,px,py,pz,qw,qx,qy,qz,fx,fy,fz,tx,ty,tz\n"));
        let back = Trajectory::from_csv_str(&text, "mem").unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.to_csv_string(), text);
        assert_abs_diff_eq!(back.last().pose.position.x, 0.11, epsilon = 1e-12);
    }

    #[test]
    fn csv_errors_name_line_and_field() {
        let text = "t,px,py,pz,qw,qx,qy,qz\n0,0,0,0,1,0,0,0\n0.1,0,abc,0,1,0,0,0\n";
        match Trajectory::from_csv_str(text, "demo.csv") {
            Err(TrajectoryError::Parse { file, line, field, .. }) => {
                assert_eq!((file.as_str(), line, field.as_str()), ("demo.csv", 3, "py"));
            }
            other => panic!("{other:?}"),
        }
        let text = "t,px,py,pz,qw,qx,qy\n";
        assert!(matches!(
            Trajectory::from_csv_str(text, "x"),
            Err(TrajectoryError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(1.0), "1");
        assert_eq!(fmt_sig9(0.1), "0.1");
        assert_eq!(fmt_sig9(-2.5), "-2.5");
        assert_eq!(fmt_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig9(123456789.4), "123456789");
        assert_eq!(fmt_sig9(1.5e-7), "1.5e-7");
        assert_eq!(fmt_sig9(9.9999999999), "10");
        assert_eq!(fmt_sig9(2.0e12), "2e12");
    }
}
