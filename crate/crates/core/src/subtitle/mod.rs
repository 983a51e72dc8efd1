//! Subtitle containers, navigation phrases and the per-timestep subtitle
//! features (`f_SI` indicator and navigation tokens).

mod lexicon;
mod parse;

use thiserror::Error;

pub use lexicon::{NavigationLexicon, TokenId};
pub use parse::{parse_srt, parse_srt_bytes, parse_vtt, parse_vtt_bytes, to_srt, to_vtt};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubtitleError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid cue: {0}")]
    InvalidCue(String),
    #[error("lexicon: {0}")]
    Lexicon(String),
    #[error("invalid timeline: {0}")]
    Timeline(String),
}

impl SubtitleError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Self::Parse {
            line,
            message: message.into(),
        }
    }
}

/// One timed subtitle. Times are seconds with millisecond resolution; the cue
/// covers the half-open interval `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubtitleCue {
    index: u32,
    start: f64,
    end: f64,
    text: String,
}

impl SubtitleCue {
    pub fn new(index: u32, start: f64, end: f64, text: impl Into<String>) -> Result<Self, SubtitleError> {
        let text = text.into();
        if !(start.is_finite() && end.is_finite() && 0.0 <= start && start < end) {
            return Err(SubtitleError::InvalidCue(format!(
                "need 0 <= start < end, got [{start}, {end})"
            )));
        }
        if text.trim().is_empty() {
            return Err(SubtitleError::InvalidCue("empty text".into()));
        }
        if text.split('\n').any(|l| l.trim().is_empty()) {
            return Err(SubtitleError::InvalidCue("text contains a blank line".into()));
        }
        Ok(Self {
            index,
            start,
            end,
            text,
        })
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn is_active(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }
}

/// Cues ordered by start time. Overlapping cues are allowed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubtitleTrack {
    cues: Vec<SubtitleCue>,
}

impl SubtitleTrack {
    pub fn new(mut cues: Vec<SubtitleCue>) -> Self {
        cues.sort_by(|a, b| a.start.total_cmp(&b.start));
        let track = Self { cues };
        let overlaps = track.overlaps();
        if !overlaps.is_empty() {
            log::warn!("subtitle track has {} overlapping cue pair(s)", overlaps.len());
        }
        track
    }

    pub fn cues(&self) -> &[SubtitleCue] {
        &self.cues
    }

    pub fn len(&self) -> usize {
        self.cues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cues.is_empty()
    }

    /// Index pairs `(i, j)`, `i < j`, of cues whose intervals intersect.
    pub fn overlaps(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.cues.len() {
            for j in i + 1..self.cues.len() {
                if self.cues[j].start >= self.cues[i].end {
                    break;
                }
                out.push((i, j));
            }
        }
        out
    }

    /// Space-joined text of all cues active at `t`, or `None` when no cue is.
    pub fn active_text(&self, t: f64) -> Option<String> {
        let active: Vec<&str> = self
            .cues
            .iter()
            .take_while(|c| c.start <= t)
            .filter(|c| c.is_active(t))
            .map(|c| c.text.as_str())
            .collect();
        (!active.is_empty()).then(|| active.join(" "))
    }
}

/// Subtitle state at one timestep.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SubtitleFeatureFrame {
    pub t: usize,
    pub indicator: bool,
    pub nav_tokens: Vec<TokenId>,
}

impl SubtitleFeatureFrame {
    /// Frame for a viewer who is not shown subtitles.
    pub fn absent(t: usize) -> Self {
        Self {
            t,
            indicator: false,
            nav_tokens: Vec::new(),
        }
    }
}

/// Number of grid points `k * dt` inside `[0, duration)`, tolerating float
/// noise when `duration` is an exact multiple of `dt`.
pub(crate) fn step_count(duration: f64, dt: f64) -> usize {
    let q = duration / dt;
    let r = q.round();
    if (q - r).abs() < 1e-9 {
        r as usize
    } else {
        q.ceil() as usize
    }
}

/// Samples the track on the grid `t * dt`, `t in [0, ceil(duration / dt))`.
pub fn timeline(
    track: &SubtitleTrack,
    lexicon: &NavigationLexicon,
    dt: f64,
    duration: f64,
) -> Result<Vec<SubtitleFeatureFrame>, SubtitleError> {
    if !(dt > 0.0 && dt.is_finite()) || !(duration > 0.0 && duration.is_finite()) {
        return Err(SubtitleError::Timeline(format!(
            "need dt > 0 and duration > 0, got dt={dt}, duration={duration}"
        )));
    }
    let frames = (0..step_count(duration, dt))
        .map(|t| match track.active_text(t as f64 * dt) {
            Some(text) => SubtitleFeatureFrame {
                t,
                indicator: true,
                nav_tokens: lexicon.extract(&text),
            },
            None => SubtitleFeatureFrame::absent(t),
        })
        .collect();
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cue(i: u32, s: f64, e: f64, text: &str) -> SubtitleCue {
        SubtitleCue::new(i, s, e, text).unwrap()
    }

    #[test]
    fn indicator_follows_half_open_cues() {
        let track = SubtitleTrack::new(vec![cue(1, 1.0, 3.5, "look up at the dome")]);
        let lex = NavigationLexicon::default();
        let frames = timeline(&track, &lex, 0.5, 5.0).unwrap();
        let ind: Vec<u8> = frames.iter().map(|f| f.indicator as u8).collect();
        assert_eq!(ind, vec![0, 0, 1, 1, 1, 1, 1, 0, 0, 0]);
        assert_eq!(frames[2].nav_tokens, vec![lex.id("look up").unwrap()]);
    }

    #[test]
    fn empty_track_has_no_features() {
        let frames = timeline(&SubtitleTrack::default(), &NavigationLexicon::default(), 0.5, 3.2).unwrap();
        assert_eq!(frames.len(), 7);
        assert!(frames.iter().all(|f| !f.indicator && f.nav_tokens.is_empty()));
    }

    #[test]
    fn overlapping_cues_concatenate() {
        let track = SubtitleTrack::new(vec![
            cue(2, 1.0, 4.0, "turn around"),
            cue(1, 0.0, 2.0, "the tower is on your left"),
        ]);
        assert_eq!(track.cues()[0].index(), 1);
        assert_eq!(track.overlaps(), vec![(0, 1)]);
        let lex = NavigationLexicon::default();
        let frames = timeline(&track, &lex, 1.0, 4.0).unwrap();
        assert_eq!(
            frames[1].nav_tokens,
            vec![lex.id("on your left").unwrap(), lex.id("turn around").unwrap()]
        );
    }

    #[test]
    fn rejects_bad_grid_and_cues() {
        let lex = NavigationLexicon::default();
        assert!(timeline(&SubtitleTrack::default(), &lex, 0.0, 1.0).is_err());
        assert!(SubtitleCue::new(1, 2.0, 2.0, "x").is_err());
        assert!(SubtitleCue::new(1, 0.0, 1.0, "  ").is_err());
        assert!(SubtitleCue::new(1, 0.0, 1.0, "a\n\nb").is_err());
    }
}
