use std::collections::{BTreeMap, HashMap};

use crate::geometry::SphericalCoord;
use crate::saliency::{SaliencyConfig, SaliencyGenerator, SaliencyMap};
use crate::subtitle::{timeline, NavigationLexicon, SubtitleFeatureFrame, SubtitleTrack};
use crate::trajectory::{build_windows, resample, Trajectory};

use super::features::Frame;
use super::PredictorError;

/// One viewer's trajectory on the common time grid of a video.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSeries {
    pub user_id: String,
    /// Whether this viewer was shown the subtitle track.
    pub subtitles_visible: bool,
    pub coords: Vec<SphericalCoord>,
}

/// All viewers of one video on a shared grid `t = (first_step + i) * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSeries {
    pub video_id: String,
    pub first_step: usize,
    /// Aggregate saliency of all viewers, one map per grid step.
    pub maps: Vec<SaliencyMap>,
    pub subtitles: Vec<SubtitleFeatureFrame>,
    pub users: Vec<UserSeries>,
}

impl VideoSeries {
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// Model input for `user` at grid index `i`. Viewers without subtitles
    /// see no indicator and no tokens.
    pub fn frame(&self, user: usize, i: usize) -> Frame<'_> {
        let u = &self.users[user];
        let (indicator, tokens): (bool, &[_]) = if u.subtitles_visible {
            let f = &self.subtitles[i];
            (f.indicator, &f.nav_tokens)
        } else {
            (false, &[])
        };
        Frame {
            map: &self.maps[i],
            indicator,
            tokens,
            coord: u.coords[i],
        }
    }
}

/// Position of one window: inputs `[start, start + m)` and targets
/// `[start + m, start + m + n)` of one user in one video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WindowRef {
    pub video: usize,
    pub start: usize,
    pub user: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub dt: f64,
    pub videos: Vec<VideoSeries>,
}

impl Corpus {
    pub fn video_ids(&self) -> Vec<&str> {
        self.videos.iter().map(|v| v.video_id.as_str()).collect()
    }

    /// Splits off the named videos, keeping their order. Unknown ids are an error.
    pub fn split(&self, test_ids: &[String]) -> Result<(Corpus, Corpus), PredictorError> {
        for id in test_ids {
            if !self.videos.iter().any(|v| &v.video_id == id) {
                return Err(PredictorError::Data(format!("unknown video {id:?}")));
            }
        }
        let (test, train): (Vec<_>, Vec<_>) = self.videos.iter().cloned().partition(|v| test_ids.contains(&v.video_id));
        Ok((
            Corpus { dt: self.dt, videos: train },
            Corpus { dt: self.dt, videos: test },
        ))
    }

    /// All windows ordered by video, start and user.
    pub fn windows(&self, m: usize, n: usize, stride: usize) -> Result<Vec<WindowRef>, PredictorError> {
        let mut out = Vec::new();
        for (vi, v) in self.videos.iter().enumerate() {
            let idx: Vec<usize> = (0..v.len()).collect();
            let coords = v.users.first().map(|u| u.coords.clone()).unwrap_or_default();
            let starts = build_windows(&idx, &coords, m, n, stride)?;
            for w in starts {
                for ui in 0..v.users.len() {
                    out.push(WindowRef {
                        video: vi,
                        start: w.offset,
                        user: ui,
                    });
                }
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn frames(&self, w: &WindowRef, m: usize) -> Vec<Frame<'_>> {
        let v = &self.videos[w.video];
        (w.start..w.start + m).map(|i| v.frame(w.user, i)).collect()
    }

    pub fn targets(&self, w: &WindowRef, m: usize, n: usize) -> &[SphericalCoord] {
        &self.videos[w.video].users[w.user].coords[w.start + m..w.start + m + n]
    }
}

/// Assembles a [`Corpus`] from raw trajectories and subtitle tracks.
#[derive(Debug, Clone)]
pub struct CorpusBuilder {
    dt: f64,
    saliency: SaliencyConfig,
    lexicon: NavigationLexicon,
    tracks: HashMap<String, SubtitleTrack>,
    visibility: HashMap<(String, String), bool>,
}

impl CorpusBuilder {
    pub fn new(dt: f64, saliency: SaliencyConfig, lexicon: NavigationLexicon) -> Self {
        Self {
            dt,
            saliency,
            lexicon,
            tracks: HashMap::new(),
            visibility: HashMap::new(),
        }
    }

    pub fn subtitles(mut self, video_id: impl Into<String>, track: SubtitleTrack) -> Self {
        self.tracks.insert(video_id.into(), track);
        self
    }

    /// Whether `user_id` saw subtitles on `video_id`; viewers not listed see
    /// them whenever the video has a track.
    pub fn visibility(mut self, user_id: impl Into<String>, video_id: impl Into<String>, visible: bool) -> Self {
        self.visibility.insert((user_id.into(), video_id.into()), visible);
        self
    }

    pub fn build(&self, trajectories: &[Trajectory]) -> Result<Corpus, PredictorError> {
        let dt = self.dt;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(PredictorError::Config(format!("dt must be positive, got {dt}")));
        }
        if trajectories.is_empty() {
            return Err(PredictorError::EmptyDataset("no trajectories".into()));
        }
        let mut by_video: BTreeMap<&str, Vec<&Trajectory>> = BTreeMap::new();
        for t in trajectories {
            by_video.entry(t.video_id.as_str()).or_default().push(t);
        }
        let generator = SaliencyGenerator::new(self.saliency);
        let mut videos = Vec::with_capacity(by_video.len());
        for (video_id, mut trajs) in by_video {
            trajs.sort_by(|a, b| a.user_id.cmp(&b.user_id));
            let mut series = Vec::with_capacity(trajs.len());
            for t in &trajs {
                let r = resample(t, dt)?;
                let k0 = (r.samples()[0].t / dt).round().max(0.0) as usize;
                series.push((t.user_id.clone(), k0, r.coords()));
            }
            let lo = series.iter().map(|s| s.1).max().expect("non-empty");
            let hi = series.iter().map(|s| s.1 + s.2.len()).min().expect("non-empty");
            if hi <= lo {
                return Err(PredictorError::Data(format!("{video_id}: viewer trajectories do not overlap in time")));
            }
            let users: Vec<UserSeries> = series
                .into_iter()
                .map(|(user_id, k0, coords)| {
                    let visible = self
                        .visibility
                        .get(&(user_id.clone(), video_id.to_string()))
                        .copied()
                        .unwrap_or(true);
                    UserSeries {
                        user_id,
                        subtitles_visible: visible,
                        coords: coords[lo - k0..hi - k0].to_vec(),
                    }
                })
                .collect();
            let mut maps = Vec::with_capacity(hi - lo);
            for i in 0..hi - lo {
                let centers: Vec<SphericalCoord> = users.iter().map(|u| u.coords[i]).collect();
                maps.push(generator.aggregate_map(&centers)?.with_t((lo + i) as u32));
            }
            let subtitles = match self.tracks.get(video_id) {
                Some(track) => {
                    let all = timeline(track, &self.lexicon, dt, hi as f64 * dt)?;
                    (lo..hi)
                        .map(|k| all.get(k).cloned().unwrap_or_else(|| SubtitleFeatureFrame::absent(k)))
                        .collect()
                }
                None => (lo..hi).map(SubtitleFeatureFrame::absent).collect(),
            };
            let has_track = self.tracks.contains_key(video_id);
            let users = users
                .into_iter()
                .map(|u| UserSeries {
                    subtitles_visible: u.subtitles_visible && has_track,
                    ..u
                })
                .collect();
            videos.push(VideoSeries {
                video_id: video_id.to_string(),
                first_step: lo,
                maps,
                subtitles,
                users,
            });
        }
        Ok(Corpus { dt, videos })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subtitle::SubtitleCue;
    use crate::trajectory::TrajectorySample;

    fn traj(user: &str, video: &str, t0: f64, len: usize) -> Trajectory {
        let samples = (0..len)
            .map(|i| TrajectorySample {
                t: t0 + i as f64 * 0.5,
                coord: SphericalCoord::new(0.1 * i as f64, 1.5).unwrap(),
            })
            .collect();
        Trajectory::new(user, video, samples).unwrap()
    }

    #[test]
    fn aligns_users_and_hides_subtitles_per_group() {
        let track = SubtitleTrack::new(vec![SubtitleCue::new(1, 1.0, 2.0, "look up").unwrap()]);
        let corpus = CorpusBuilder::new(0.5, SaliencyConfig::new(0.3, 8, 4).unwrap(), NavigationLexicon::default())
            .subtitles("v", track)
            .visibility("b", "v", false)
            .build(&[traj("b", "v", 0.5, 10), traj("a", "v", 0.0, 8)])
            .unwrap();
        let v = &corpus.videos[0];
        assert_eq!(v.first_step, 1);
        assert_eq!(v.len(), 7);
        assert_eq!(v.users[0].user_id, "a");
        assert_eq!(v.users[0].coords[0], SphericalCoord::new(0.1, 1.5).unwrap());
        assert_eq!(v.maps[0].t(), 1);
        // t = 1.0 is grid step 2, local index 1
        assert!(v.frame(0, 1).indicator && !v.frame(0, 0).indicator);
        assert!(!v.frame(1, 1).indicator && v.frame(1, 1).tokens.is_empty());
        let w = corpus.windows(2, 2, 1).unwrap();
        assert_eq!(w.len(), 2 * 4);
        assert_eq!((w[0].start, w[0].user, w[1].start, w[1].user), (0, 0, 0, 1));
        assert_eq!(corpus.targets(&w[1], 2, 2).len(), 2);
    }

    #[test]
    fn split_by_video() {
        let builder = CorpusBuilder::new(0.5, SaliencyConfig::new(0.3, 8, 4).unwrap(), NavigationLexicon::default());
        let corpus = builder.build(&[traj("a", "v2", 0.0, 6), traj("a", "v1", 0.0, 6)]).unwrap();
        assert_eq!(corpus.video_ids(), vec!["v1", "v2"]);
        let (train, test) = corpus.split(&["v2".to_string()]).unwrap();
        assert_eq!((train.video_ids(), test.video_ids()), (vec!["v1"], vec!["v2"]));
        assert!(corpus.split(&["x".to_string()]).is_err());
    }
}
