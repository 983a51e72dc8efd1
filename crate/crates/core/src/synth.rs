//! Synthetic viewer cohorts.
//!
//! Guided viewers see subtitles and, after a short reading delay, are pulled
//! toward the direction each cue names. Unguided viewers get the same noise
//! and slow drift but no pull. Both groups start from random headings.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{slerp_vectors, unit_vector_distance, SphericalCoord};
use crate::subtitle::{NavigationLexicon, SubtitleCue, SubtitleError, SubtitleTrack};
use crate::trajectory::{Trajectory, TrajectoryError, TrajectorySample};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("scenario file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Subtitle(#[from] SubtitleError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// A subtitle line. Guided viewers turn toward `target` (if any) while it is shown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioCue {
    pub start: f64,
    pub end: f64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

impl ScenarioCue {
    pub fn target(&self) -> Option<SphericalCoord> {
        match (self.phi, self.theta) {
            (Some(p), Some(t)) => Some(SphericalCoord::wrapped(p, t)),
            _ => None,
        }
    }

    pub fn is_active(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }
}

/// Simulation parameters and the cue plan of one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioScript {
    /// Seconds.
    pub duration: f64,
    /// Sampling interval, seconds.
    pub dt: f64,
    /// Attractor strength `κ`, 1/s.
    pub kappa: f64,
    /// Angular noise `η`, rad/√s.
    pub eta: f64,
    /// Per-viewer reading delay before turning, drawn uniformly from this range.
    pub reaction_delay: [f64; 2],
    /// Drift speed as a multiple of `η` (rad/s per rad/√s).
    pub drift_gain: f64,
    /// Fill `cue` with a generated plan when it is empty.
    pub auto_cues: bool,
    #[serde(rename = "cue")]
    pub cues: Vec<ScenarioCue>,
    pub seed: u64,
}

impl Default for ScenarioScript {
    fn default() -> Self {
        Self {
            duration: 120.0,
            dt: 0.5,
            kappa: 1.5,
            eta: 0.15,
            reaction_delay: [0.5, 1.5],
            drift_gain: 0.5,
            auto_cues: true,
            cues: Vec::new(),
            seed: 0,
        }
    }
}

impl ScenarioScript {
    /// Default parameters with a generated cue plan.
    pub fn default_for_seed(seed: u64) -> Self {
        let mut s = Self {
            seed,
            ..Self::default()
        };
        s.cues = plan_cues(s.duration, seed);
        s
    }

    /// Parses the TOML schema and fills the cue plan if requested.
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        let mut s: Self = toml::from_str(text)?;
        if s.cues.is_empty() && s.auto_cues {
            s.cues = plan_cues(s.duration, s.seed);
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Scenario(m));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.dt > 0.0 && self.dt <= self.duration) {
            return bad(format!("dt must be in (0, duration], got {}", self.dt));
        }
        if !(self.kappa >= 0.0 && self.eta >= 0.0 && self.drift_gain >= 0.0) {
            return bad("kappa, eta and drift_gain must be non-negative".into());
        }
        let [lo, hi] = self.reaction_delay;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return bad(format!("reaction_delay must satisfy 0 <= lo <= hi, got [{lo}, {hi}]"));
        }
        for (i, c) in self.cues.iter().enumerate() {
            if !(c.start >= 0.0 && c.start < c.end && c.end <= self.duration) {
                return bad(format!("cue {}: [{}, {}) outside [0, {})", i + 1, c.start, c.end, self.duration));
            }
            if c.phi.is_some() != c.theta.is_some() {
                return bad(format!("cue {}: give both phi and theta or neither", i + 1));
            }
            if let Some(t) = c.theta {
                if !(0.0..=PI).contains(&t) {
                    return bad(format!("cue {}: theta {t} outside [0, pi]", i + 1));
                }
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Steps at which some cue is shown.
    pub fn cue_mask(&self) -> Vec<bool> {
        (0..self.steps())
            .map(|i| self.cues.iter().any(|c| c.is_active(self.time(i))))
            .collect()
    }

    /// Fraction of the timeline covered by cues.
    pub fn coverage(&self) -> f64 {
        let mask = self.cue_mask();
        mask.iter().filter(|&&b| b).count() as f64 / mask.len().max(1) as f64
    }

    pub fn subtitle_track(&self) -> Result<SubtitleTrack, SynthError> {
        let cues = self
            .cues
            .iter()
            .enumerate()
            .map(|(i, c)| SubtitleCue::new(i as u32 + 1, c.start, c.end, c.text.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SubtitleTrack::new(cues))
    }

    fn active_target(&self, t: f64) -> Option<(f64, SphericalCoord)> {
        self.cues
            .iter()
            .filter(|c| c.is_active(t))
            .find_map(|c| c.target().map(|g| (c.start, g)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Front,
    Left,
    Right,
    Behind,
    Up,
    Down,
}

const DIRECTIONS: [Direction; 6] = [
    Direction::Front,
    Direction::Left,
    Direction::Right,
    Direction::Behind,
    Direction::Up,
    Direction::Down,
];

const NOUNS: [&str; 8] = [
    "fountain", "statue", "old tower", "market stall", "street musician", "bell", "painted wall", "small boat",
];

const NARRATION: [&str; 5] = [
    "This square was built more than two hundred years ago.",
    "Local people gather here every evening.",
    "Listen to the sound of the crowd.",
    "The festival lasts for three days.",
    "Many travellers stop here to rest.",
];

fn sentence(dir: Direction, noun: &str, variant: usize) -> String {
    let options: &[String] = &match dir {
        Direction::Front => [
            format!("The {noun} is straight ahead."),
            format!("There is a {noun} right in front of you."),
        ],
        Direction::Left => [
            format!("Look at the {noun} on your left."),
            format!("A {noun} stands to the left."),
        ],
        Direction::Right => [
            format!("Look at the {noun} on your right."),
            format!("A {noun} stands to the right."),
        ],
        Direction::Behind => [
            format!("Turn around to see the {noun}."),
            format!("The {noun} is behind you."),
        ],
        Direction::Up => [
            format!("Look up at the {noun}."),
            format!("High above, you can see the {noun}."),
        ],
        Direction::Down => [
            format!("Look down at the {noun}."),
            format!("The {noun} lies below."),
        ],
    };
    options[variant % options.len()].clone()
}

fn target_for(dir: Direction, prev_phi: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let mut jitter = || rng.random_range(-0.15..0.15);
    let (phi, theta) = match dir {
        Direction::Front => (0.0, FRAC_PI_2),
        Direction::Left => (FRAC_PI_2, FRAC_PI_2),
        Direction::Behind => (PI, FRAC_PI_2),
        Direction::Right => (3.0 * FRAC_PI_2, FRAC_PI_2),
        Direction::Up => (prev_phi, FRAC_PI_2 - 0.7),
        Direction::Down => (prev_phi, FRAC_PI_2 + 0.5),
    };
    let p = (phi + jitter()).rem_euclid(TAU);
    let t = (theta + jitter()).clamp(0.0, PI);
    (p, t)
}

/// Generated cue plan: 5 s cues separated by 2.5 s gaps, each naming a
/// direction different from the previous one; about one cue in ten is plain
/// narration without a target.
pub fn plan_cues(duration: f64, seed: u64) -> Vec<ScenarioCue> {
    const CUE: f64 = 5.0;
    const GAP: f64 = 2.5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let mut cues = Vec::new();
    let mut start = GAP;
    let mut prev: Option<Direction> = None;
    let mut prev_phi = 0.0;
    while start + CUE <= duration {
        let end = start + CUE;
        if rng.random::<f64>() < 0.1 {
            cues.push(ScenarioCue {
                start,
                end,
                text: NARRATION[rng.random_range(0..NARRATION.len())].to_string(),
                phi: None,
                theta: None,
            });
        } else {
            let dir = loop {
                let d = DIRECTIONS[rng.random_range(0..DIRECTIONS.len())];
                if Some(d) != prev {
                    break d;
                }
            };
            let (phi, theta) = target_for(dir, prev_phi, &mut rng);
            let noun = NOUNS[rng.random_range(0..NOUNS.len())];
            cues.push(ScenarioCue {
                start,
                end,
                text: sentence(dir, noun, rng.random_range(0..2)),
                phi: Some(phi),
                theta: Some(theta),
            });
            prev = Some(dir);
            prev_phi = phi;
        }
        start = end + GAP;
    }
    cues
}

/// Orthonormal tangent basis at unit vector `p`.
fn tangent_basis(p: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let cross = |a: &[f64; 3], b: &[f64; 3]| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let axis = if p[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let e1 = cross(&axis, p);
    let n = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    let e1 = [e1[0] / n, e1[1] / n, e1[2] / n];
    (e1, cross(p, &e1))
}

/// Moves `p` along the geodesic with initial tangent `a e1 + b e2`.
fn step_tangent(p: &[f64; 3], e1: &[f64; 3], e2: &[f64; 3], a: f64, b: f64) -> [f64; 3] {
    let len = a.hypot(b);
    if len == 0.0 {
        return *p;
    }
    let (s, c) = len.sin_cos();
    let mut q = [0.0; 3];
    for k in 0..3 {
        q[k] = c * p[k] + s * (a * e1[k] + b * e2[k]) / len;
    }
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
    [q[0] / n, q[1] / n, q[2] / n]
}

/// Random starting heading: uniform azimuth, inclination within 0.5 rad of the horizon.
fn initial_heading(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let phi = rng.random_range(0.0..TAU);
    let theta = FRAC_PI_2 + rng.random_range(-0.5..0.5);
    SphericalCoord::wrapped(phi, theta).to_unit_vector()
}

/// Simulates one viewer. Deterministic in `seed`.
pub fn generate_user(
    script: &ScenarioScript,
    guided: bool,
    seed: u64,
    user_id: &str,
    video_id: &str,
) -> Result<Trajectory, SynthError> {
    script.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [lo, hi] = script.reaction_delay;
    let delay = if hi > lo { rng.random_range(lo..hi) } else { lo };
    let dt = script.dt;
    let pull = 1.0 - (-script.kappa * dt).exp();
    let noise = script.eta * dt.sqrt();
    let drift = script.drift_gain * script.eta * dt;
    let mut heading = rng.random_range(0.0..TAU);
    let mut p = initial_heading(&mut rng);
    let mut samples = Vec::with_capacity(script.steps());
    for i in 0..script.steps() {
        let t = script.time(i);
        samples.push(TrajectorySample {
            t,
            coord: SphericalCoord::from_vector(p),
        });
        if guided {
            if let Some((start, target)) = script.active_target(t) {
                if t >= start + delay {
                    let g = target.to_unit_vector();
                    if let Some(q) = slerp_vectors(&p, &g, pull) {
                        p = q;
                    }
                }
            }
        }
        let (e1, e2) = tangent_basis(&p);
        heading += 0.5 * dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
        let n1: f64 = StandardNormal.sample(&mut rng);
        let n2: f64 = StandardNormal.sample(&mut rng);
        p = step_tangent(
            &p,
            &e1,
            &e2,
            drift * heading.cos() + noise * n1,
            drift * heading.sin() + noise * n2,
        );
    }
    Ok(Trajectory::new(user_id, video_id, samples)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortSpec {
    pub guided: usize,
    pub unguided: usize,
    pub script: ScenarioScript,
}

impl CohortSpec {
    /// Nine viewers per group under `script`.
    pub fn nine_by_nine(script: ScenarioScript) -> Self {
        Self {
            guided: 9,
            unguided: 9,
            script,
        }
    }
}

/// One simulated video: every viewer's trajectory plus the subtitle track the
/// guided group saw.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub video_id: String,
    /// Guided viewers first (`A01`, `A02`, ...), then unguided (`B01`, ...).
    pub trajectories: Vec<Trajectory>,
    pub guided: Vec<bool>,
    pub track: SubtitleTrack,
    pub lexicon: NavigationLexicon,
    pub script: ScenarioScript,
}

impl Cohort {
    pub fn group(&self, guided: bool) -> Vec<&Trajectory> {
        self.trajectories
            .iter()
            .zip(&self.guided)
            .filter(|(_, &g)| g == guided)
            .map(|(t, _)| t)
            .collect()
    }
}

/// Per-viewer seeds are independent ChaCha streams of the master seed.
pub fn generate_cohort(spec: &CohortSpec, video_id: &str) -> Result<Cohort, SynthError> {
    if spec.guided + spec.unguided == 0 {
        return Err(SynthError::Scenario("cohort needs at least one viewer".into()));
    }
    spec.script.validate()?;
    let mut trajectories = Vec::with_capacity(spec.guided + spec.unguided);
    let mut guided = Vec::with_capacity(trajectories.capacity());
    let mut seeder = ChaCha8Rng::seed_from_u64(spec.script.seed);
    for (group, count, prefix) in [(true, spec.guided, 'A'), (false, spec.unguided, 'B')] {
        for i in 0..count {
            let seed = seeder.random::<u64>();
            let id = format!("{prefix}{:02}", i + 1);
            trajectories.push(generate_user(&spec.script, group, seed, &id, video_id)?);
            guided.push(group);
        }
    }
    Ok(Cohort {
        video_id: video_id.to_string(),
        trajectories,
        guided,
        track: spec.script.subtitle_track()?,
        lexicon: NavigationLexicon::default(),
        script: spec.script.clone(),
    })
}

/// Seed of video `index` under a master seed.
pub fn video_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64 + 1);
    rng.random()
}

/// `count` videos `v01`, `v02`, ... sharing the parameters of `template`.
/// A template without cues but with `auto_cues` gives each video its own plan.
pub fn generate_videos(
    guided: usize,
    unguided: usize,
    template: &ScenarioScript,
    count: usize,
) -> Result<Vec<Cohort>, SynthError> {
    (0..count)
        .map(|v| {
            let seed = video_seed(template.seed, v);
            let mut script = ScenarioScript {
                seed,
                ..template.clone()
            };
            if template.auto_cues && template.cues.is_empty() {
                script.cues = plan_cues(script.duration, seed);
            }
            generate_cohort(
                &CohortSpec {
                    guided,
                    unguided,
                    script,
                },
                &format!("v{:02}", v + 1),
            )
        })
        .collect()
}

/// Mean pairwise orthodromic distance between viewers, averaged over the
/// steps where `mask` is set (all steps if none is).
pub fn dispersion(trajectories: &[&Trajectory], mask: &[bool]) -> f64 {
    if trajectories.len() < 2 {
        return 0.0;
    }
    let vecs: Vec<Vec<[f64; 3]>> = trajectories
        .iter()
        .map(|t| t.samples().iter().map(|s| s.coord.to_unit_vector()).collect())
        .collect();
    let len = vecs.iter().map(Vec::len).min().unwrap_or(0);
    let use_all = !mask.iter().take(len).any(|&b| b);
    let mut total = 0.0;
    let mut steps = 0usize;
    for i in 0..len {
        if !use_all && !mask.get(i).copied().unwrap_or(false) {
            continue;
        }
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for a in 0..vecs.len() {
            for b in a + 1..vecs.len() {
                sum += unit_vector_distance(&vecs[a][i], &vecs[b][i]);
                pairs += 1;
            }
        }
        total += sum / pairs as f64;
        steps += 1;
    }
    if steps == 0 {
        0.0
    } else {
        total / steps as f64
    }
}

/// `(guided, unguided)` dispersion during the cohort's cue windows.
pub fn group_dispersion(cohort: &Cohort) -> (f64, f64) {
    let mask = cohort.script.cue_mask();
    (dispersion(&cohort.group(true), &mask), dispersion(&cohort.group(false), &mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::spherical_distance;

    fn still() -> ScenarioScript {
        ScenarioScript {
            kappa: 0.0,
            eta: 0.0,
            reaction_delay: [0.0, 0.0],
            duration: 10.0,
            ..ScenarioScript::default()
        }
    }

    #[test]
    fn no_forces_keeps_heading() {
        let t = generate_user(&still(), true, 4, "a", "v").unwrap();
        let c0 = t.samples()[0].coord;
        assert!(t.samples().iter().all(|s| spherical_distance(&s.coord, &c0) < 1e-12));
        assert_eq!(t.samples().len(), 20);
        assert!(t.samples().iter().enumerate().all(|(i, s)| s.t == i as f64 * 0.5));
    }

    #[test]
    fn exponential_approach() {
        let target = SphericalCoord::new(2.0, 1.0).unwrap();
        let script = ScenarioScript {
            kappa: 2.0,
            cues: vec![ScenarioCue {
                start: 0.0,
                end: 10.0,
                text: "look up".into(),
                phi: Some(target.phi()),
                theta: Some(target.theta()),
            }],
            ..still()
        };
        let t = generate_user(&script, true, 9, "a", "v").unwrap();
        let d: Vec<f64> = t.samples().iter().map(|s| spherical_distance(&s.coord, &target)).collect();
        assert!(d.windows(2).all(|w| w[1] < w[0] || w[0] < 1e-12));
        // closed form: d_k = d_0 exp(-kappa k dt)
        for (k, v) in d.iter().enumerate().take(8) {
            assert!((v - d[0] * (-2.0 * 0.5 * k as f64).exp()).abs() < 1e-9);
        }
        assert!(d[6] < 0.05);
        let unguided = generate_user(&script, false, 9, "b", "v").unwrap();
        assert_eq!(unguided.samples()[10].coord, unguided.samples()[0].coord);
    }

    #[test]
    fn deterministic_and_seeded() {
        let s = ScenarioScript::default_for_seed(3);
        let a = generate_user(&s, true, 1, "a", "v").unwrap();
        assert_eq!(a, generate_user(&s, true, 1, "a", "v").unwrap());
        assert_ne!(a, generate_user(&s, true, 2, "a", "v").unwrap());
    }

    #[test]
    fn default_plan_covers_half_and_is_extractable() {
        let s = ScenarioScript::default_for_seed(11);
        assert!(s.coverage() >= 0.5, "{}", s.coverage());
        let lex = NavigationLexicon::default();
        for c in &s.cues {
            assert_eq!(c.target().is_some(), !lex.extract(&c.text).is_empty(), "{}", c.text);
        }
        s.validate().unwrap();
    }

    #[test]
    fn cohort_shape() {
        let cohort = generate_cohort(&CohortSpec::nine_by_nine(ScenarioScript::default_for_seed(1)), "v01").unwrap();
        assert_eq!(cohort.trajectories.len(), 18);
        assert_eq!(cohort.trajectories[9].user_id, "B01");
        assert_eq!(cohort.group(true).len(), 9);
        assert_eq!(cohort.track.len(), cohort.script.cues.len());
    }

    #[test]
    fn toml_schema() {
        let s = ScenarioScript::from_toml(
            "duration = 20.0\nkappa = 2.0\nseed = 4\n[[cue]]\nstart = 1.0\nend = 3.0\ntext = \"look up\"\nphi = 0.5\ntheta = 1.0\n",
        )
        .unwrap();
        assert_eq!(s.cues.len(), 1);
        assert_eq!(s.eta, 0.15);
        let auto = ScenarioScript::from_toml("duration = 60.0").unwrap();
        assert!(!auto.cues.is_empty());
        let none = ScenarioScript::from_toml("auto_cues = false").unwrap();
        assert!(none.cues.is_empty());
        assert!(ScenarioScript::from_toml("bogus = 1").is_err());
        assert!(ScenarioScript::from_toml("[[cue]]\nstart = 5.0\nend = 2.0\ntext = \"x\"").is_err());
    }
}
