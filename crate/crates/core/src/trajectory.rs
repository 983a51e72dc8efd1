//! Head trajectories: CSV ingestion, great-circle resampling and sliding
//! windows.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::geometry::{self, EulerAngles, SphericalCoord};

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("invalid trajectory: {0}")]
    Validation(String),
    #[error("invalid window parameters: {0}")]
    Window(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub coord: SphericalCoord,
}

/// Time-ordered viewport centers of one user watching one video.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub user_id: String,
    pub video_id: String,
    samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn new(
        user_id: impl Into<String>,
        video_id: impl Into<String>,
        samples: Vec<TrajectorySample>,
    ) -> Result<Self, TrajectoryError> {
        let user_id = user_id.into();
        let video_id = video_id.into();
        if samples.is_empty() {
            return Err(TrajectoryError::Validation(format!(
                "{user_id}/{video_id}: no samples"
            )));
        }
        if let Some(s) = samples.iter().find(|s| !(s.t >= 0.0 && s.t.is_finite())) {
            return Err(TrajectoryError::Validation(format!(
                "{user_id}/{video_id}: invalid timestamp {}",
                s.t
            )));
        }
        if let Some(w) = samples.windows(2).find(|w| w[1].t <= w[0].t) {
            return Err(TrajectoryError::Validation(format!(
                "{user_id}/{video_id}: timestamps not strictly increasing ({} then {})",
                w[0].t, w[1].t
            )));
        }
        Ok(Self {
            user_id,
            video_id,
            samples,
        })
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn coords(&self) -> Vec<SphericalCoord> {
        self.samples.iter().map(|s| s.coord).collect()
    }
}

enum Schema {
    Spherical,
    Euler,
}

/// Reads trajectories from CSV. The header selects the coordinate columns:
/// `user_id,video_id,t,phi,theta` or `user_id,video_id,t,yaw,pitch,roll`.
/// Rows are grouped by `(user_id, video_id)` in order of first appearance.
pub fn read_trajectories<R: Read>(reader: R, source: &str) -> Result<Vec<Trajectory>, TrajectoryError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let schema = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["user_id", "video_id", "t", "phi", "theta"] => Schema::Spherical,
        ["user_id", "video_id", "t", "yaw", "pitch", "roll"] => Schema::Euler,
        other => {
            return Err(TrajectoryError::Parse {
                path: source.into(),
                line: 1,
                message: format!("unrecognized header {other:?}"),
            })
        }
    };
    let mut groups: Vec<(String, String, Vec<TrajectorySample>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let err = |message: String| TrajectoryError::Parse {
            path: source.into(),
            line,
            message,
        };
        let num = |i: usize| -> Result<f64, TrajectoryError> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| err(format!("column {}: {e}", header[i])))
        };
        let t = num(2)?;
        let coord = match schema {
            Schema::Spherical => SphericalCoord::new(num(3)?, num(4)?),
            Schema::Euler => EulerAngles::new(num(3)?, num(4)?, num(5)?)
                .and_then(|e| geometry::euler_to_spherical(&e)),
        }
        .map_err(|e| err(e.to_string()))?;
        let (user, video) = (&rec[0], &rec[1]);
        let sample = TrajectorySample { t, coord };
        match groups.iter_mut().find(|g| g.0 == user && g.1 == video) {
            Some(g) => {
                if let Some(prev) = g.2.last() {
                    if t <= prev.t {
                        return Err(TrajectoryError::Validation(format!(
                            "{source}: line {line}: {user}/{video} timestamp {t} not after {}",
                            prev.t
                        )));
                    }
                }
                g.2.push(sample);
            }
            None => groups.push((user.to_owned(), video.to_owned(), vec![sample])),
        }
    }
    groups
        .into_iter()
        .map(|(u, v, s)| Trajectory::new(u, v, s))
        .collect()
}

pub fn load_trajectories(path: &Path) -> Result<Vec<Trajectory>, TrajectoryError> {
    let file = std::fs::File::open(path)?;
    read_trajectories(std::io::BufReader::new(file), &path.display().to_string())
}

/// Writes trajectories in the spherical CSV schema. Floats use the shortest
/// representation that round-trips exactly.
pub fn write_trajectories<W: Write>(writer: W, trajs: &[Trajectory]) -> Result<(), TrajectoryError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_id", "video_id", "t", "phi", "theta"])?;
    for tr in trajs {
        for s in &tr.samples {
            w.write_record([
                tr.user_id.as_str(),
                tr.video_id.as_str(),
                &s.t.to_string(),
                &s.coord.phi().to_string(),
                &s.coord.theta().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Resamples onto the grid `t0 + k * dt` (with `t0` the first timestamp) up to
/// the last original sample, interpolating along great circles.
///
/// Grid points that coincide with an original sample (within 1e-9 s) copy it,
/// which makes resampling idempotent. When the bracketing samples are antipodal
/// the earlier one is held and a warning is logged.
pub fn resample(traj: &Trajectory, dt: f64) -> Result<Trajectory, TrajectoryError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(TrajectoryError::Validation(format!("dt must be positive, got {dt}")));
    }
    let s = &traj.samples;
    if s.len() < 2 {
        return Err(TrajectoryError::Validation(format!(
            "{}/{}: need at least 2 samples to resample",
            traj.user_id, traj.video_id
        )));
    }
    const EPS: f64 = 1e-9;
    let t0 = s[0].t;
    let t_last = s[s.len() - 1].t;
    let mut out = Vec::new();
    let mut j = 0;
    let mut k = 0usize;
    loop {
        let tau = t0 + k as f64 * dt;
        if tau > t_last + EPS {
            break;
        }
        while j + 1 < s.len() && s[j + 1].t <= tau + EPS {
            j += 1;
        }
        let coord = if (s[j].t - tau).abs() <= EPS || j + 1 == s.len() {
            s[j].coord
        } else {
            let (a, b) = (&s[j], &s[j + 1]);
            let frac = (tau - a.t) / (b.t - a.t);
            geometry::slerp(&a.coord, &b.coord, frac).unwrap_or_else(|| {
                log::warn!(
                    "{}/{}: antipodal samples at t={} and t={}; holding previous value",
                    traj.user_id,
                    traj.video_id,
                    a.t,
                    b.t
                );
                a.coord
            })
        };
        out.push(TrajectorySample { t: tau, coord });
        k += 1;
    }
    Trajectory::new(traj.user_id.clone(), traj.video_id.clone(), out)
}

/// `m` consecutive inputs followed by the `n` coordinates to predict.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample<F> {
    /// Offset of the first input step in the source series.
    pub offset: usize,
    pub input: Vec<F>,
    pub target: Vec<SphericalCoord>,
}

/// Sliding windows at offsets `0, stride, 2*stride, ...`; the input covers
/// `[i, i+m)` and the target `[i+m, i+m+n)`. Series shorter than `m + n` give
/// no windows.
pub fn build_windows<F: Clone>(
    features: &[F],
    coords: &[SphericalCoord],
    m: usize,
    n: usize,
    stride: usize,
) -> Result<Vec<WindowedSample<F>>, TrajectoryError> {
    if m == 0 || n == 0 || stride == 0 {
        return Err(TrajectoryError::Window(format!(
            "m, n and stride must be >= 1 (got {m}, {n}, {stride})"
        )));
    }
    if features.len() != coords.len() {
        return Err(TrajectoryError::Window(format!(
            "{} feature steps but {} coordinates",
            features.len(),
            coords.len()
        )));
    }
    let total = features.len();
    if total < m + n {
        return Ok(Vec::new());
    }
    Ok((0..=total - m - n)
        .step_by(stride)
        .map(|i| WindowedSample {
            offset: i,
            input: features[i..i + m].to_vec(),
            target: coords[i + m..i + m + n].to_vec(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn sample(t: f64, phi: f64, theta: f64) -> TrajectorySample {
        TrajectorySample {
            t,
            coord: SphericalCoord::new(phi, theta).unwrap(),
        }
    }

    #[test]
    fn loads_and_groups() {
        let csv = "user_id,video_id,t,phi,theta\nu1,v1,0,0.1,1.5\nu2,v1,0,0.2,1.4\nu1,v1,0.5,0.15,1.5\n";
        let trajs = read_trajectories(csv.as_bytes(), "mem").unwrap();
        assert_eq!(trajs.len(), 2);
        assert_eq!(trajs[0].samples().len(), 2);
        assert_eq!(trajs[1].user_id, "u2");
    }

    #[test]
    fn loads_euler_rows() {
        let csv = "user_id,video_id,t,yaw,pitch,roll\nu,v,0,0,0,0.3\nu,v,1,0.5,0,0\n";
        let trajs = read_trajectories(csv.as_bytes(), "mem").unwrap();
        let c = trajs[0].samples()[1].coord;
        assert!((c.phi() - 0.5).abs() < 1e-12);
        assert!((c.theta() - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_schema_and_order() {
        let bad = "user,video,t,phi,theta\n";
        assert!(matches!(
            read_trajectories(bad.as_bytes(), "mem"),
            Err(TrajectoryError::Parse { line: 1, .. })
        ));
        let garbage = "user_id,video_id,t,phi,theta\nu,v,zero,0,1\n";
        assert!(matches!(
            read_trajectories(garbage.as_bytes(), "mem"),
            Err(TrajectoryError::Parse { line: 2, .. })
        ));
        let backwards = "user_id,video_id,t,phi,theta\nu,v,1,0,1\nu,v,0.5,0,1\n";
        assert!(matches!(
            read_trajectories(backwards.as_bytes(), "mem"),
            Err(TrajectoryError::Validation(_))
        ));
    }

    #[test]
    fn export_load_round_trip() {
        let tr = Trajectory::new(
            "a",
            "v",
            vec![sample(0.0, 0.123456789, 1.1), sample(0.5, 6.2, 0.3), sample(1.0, 3.0, 2.9)],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trajectories(&mut buf, std::slice::from_ref(&tr)).unwrap();
        let back = read_trajectories(buf.as_slice(), "mem").unwrap();
        for (a, b) in tr.samples().iter().zip(back[0].samples()) {
            assert!((a.coord.phi() - b.coord.phi()).abs() < 1e-9);
            assert!((a.coord.theta() - b.coord.theta()).abs() < 1e-9);
        }
    }

    #[test]
    fn resample_on_grid_is_identity() {
        let tr = Trajectory::new(
            "a",
            "v",
            vec![sample(0.0, 0.1, 1.0), sample(0.5, 0.2, 1.1), sample(1.0, 0.4, 1.2)],
        )
        .unwrap();
        assert_eq!(resample(&tr, 0.5).unwrap(), tr);
    }

    #[test]
    fn resample_midpoint_on_great_circle() {
        let tr = Trajectory::new("a", "v", vec![sample(0.0, 0.0, 1.0), sample(1.0, 1.2, 1.9)]).unwrap();
        let r = resample(&tr, 0.5).unwrap();
        assert_eq!(r.samples().len(), 3);
        let (a, m, b) = (r.samples()[0].coord, r.samples()[1].coord, r.samples()[2].coord);
        let d = geometry::spherical_distance(&a, &b);
        assert!((geometry::spherical_distance(&a, &m) - d / 2.0).abs() < 1e-12);
        assert!((geometry::spherical_distance(&m, &b) - d / 2.0).abs() < 1e-12);
    }

    #[test]
    fn resample_holds_on_antipodes() {
        let tr = Trajectory::new("a", "v", vec![sample(0.0, 0.0, FRAC_PI_2), sample(1.0, PI, FRAC_PI_2)]).unwrap();
        let r = resample(&tr, 0.5).unwrap();
        assert_eq!(r.samples()[1].coord, tr.samples()[0].coord);
    }

    #[test]
    fn single_sample_cannot_resample() {
        let tr = Trajectory::new("a", "v", vec![sample(0.0, 0.0, 1.0)]).unwrap();
        assert!(resample(&tr, 0.5).is_err());
    }

    #[test]
    fn window_counts() {
        let coords = vec![SphericalCoord::new(0.0, 1.0).unwrap(); 12];
        let idx: Vec<usize> = (0..12).collect();
        let w = build_windows(&idx, &coords, 5, 5, 1).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w[2].input, vec![2, 3, 4, 5, 6]);
        assert_eq!(build_windows(&idx[..10], &coords[..10], 5, 5, 1).unwrap().len(), 1);
        assert!(build_windows(&idx[..9], &coords[..9], 5, 5, 1).unwrap().is_empty());
        assert_eq!(build_windows(&idx, &coords, 2, 3, 3).unwrap().len(), 3);
        assert!(build_windows(&idx, &coords, 0, 5, 1).is_err());
    }
}
