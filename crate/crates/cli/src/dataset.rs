use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use viewport_core::predictor::{Corpus, CorpusBuilder};
use viewport_core::saliency::SaliencyConfig;
use viewport_core::subtitle::{parse_srt_bytes, parse_vtt_bytes, NavigationLexicon, SubtitleError, SubtitleTrack};
use viewport_core::trajectory::{load_trajectories, Trajectory};

use crate::commands::CliError;
use crate::config::DataConfig;

pub const TRAJECTORIES: &str = "trajectories.csv";
pub const GROUPS: &str = "groups.csv";
pub const LEXICON: &str = "lexicon.txt";

/// A dataset directory as written by `synth` or assembled by hand.
#[derive(Debug)]
pub struct Dataset {
    pub trajectories: Vec<Trajectory>,
    /// `(user_id, video_id) -> saw subtitles`.
    pub visibility: BTreeMap<(String, String), bool>,
    pub tracks: BTreeMap<String, SubtitleTrack>,
    pub lexicon: NavigationLexicon,
    /// Every file that was read, for the manifest.
    pub files: Vec<PathBuf>,
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let traj_path = dir.join(TRAJECTORIES);
        let trajectories = load_trajectories(&traj_path).map_err(|e| CliError::Input(e.to_string()))?;
        let mut files = vec![traj_path];

        let mut visibility = BTreeMap::new();
        let groups = dir.join(GROUPS);
        if groups.exists() {
            let mut rdr = csv::Reader::from_path(&groups).map_err(|e| CliError::Input(format!("{}: {e}", groups.display())))?;
            for rec in rdr.records() {
                let rec = rec.map_err(|e| CliError::Input(format!("{}: {e}", groups.display())))?;
                let guided = match rec.get(2) {
                    Some("guided") => true,
                    Some("unguided") => false,
                    other => {
                        return Err(CliError::Input(format!(
                            "{}: group must be guided or unguided, got {other:?}",
                            groups.display()
                        )))
                    }
                };
                visibility.insert((rec[0].to_string(), rec[1].to_string()), guided);
            }
            files.push(groups);
        }

        let lexicon_path = dir.join(LEXICON);
        let lexicon = if lexicon_path.exists() {
            let text = std::fs::read_to_string(&lexicon_path).map_err(|e| CliError::Input(e.to_string()))?;
            files.push(lexicon_path);
            NavigationLexicon::parse(&text).map_err(|e| CliError::Input(e.to_string()))?
        } else {
            NavigationLexicon::default()
        };

        let videos: BTreeSet<&str> = trajectories.iter().map(|t| t.video_id.as_str()).collect();
        let mut tracks = BTreeMap::new();
        for v in videos {
            type Parser = fn(&[u8]) -> Result<SubtitleTrack, SubtitleError>;
            for (ext, parse) in [("srt", parse_srt_bytes as Parser), ("vtt", parse_vtt_bytes as Parser)] {
                let path = dir.join(format!("{v}.{ext}"));
                if path.exists() {
                    let bytes = std::fs::read(&path).map_err(|e| CliError::Input(e.to_string()))?;
                    let track = parse(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                    tracks.insert(v.to_string(), track);
                    files.push(path);
                    break;
                }
            }
        }
        Ok(Self {
            trajectories,
            visibility,
            tracks,
            lexicon,
            files,
        })
    }

    pub fn corpus(&self, data: &DataConfig, width: usize, height: usize) -> Result<Corpus, CliError> {
        let saliency = SaliencyConfig::new(data.sigma, width, height).map_err(|e| CliError::Usage(e.to_string()))?;
        let mut builder = CorpusBuilder::new(data.dt, saliency, self.lexicon.clone());
        for (v, t) in &self.tracks {
            builder = builder.subtitles(v.clone(), t.clone());
        }
        for ((u, v), &visible) in &self.visibility {
            builder = builder.visibility(u.clone(), v.clone(), visible);
        }
        builder.build(&self.trajectories).map_err(|e| CliError::Input(e.to_string()))
    }
}

/// Resolves `(train, test)` video ids. The test set defaults to the last
/// video and the training set to everything else.
pub fn split(all: &[&str], train: &[String], test: &[String]) -> Result<(Vec<String>, Vec<String>), CliError> {
    for id in train.iter().chain(test) {
        if !all.contains(&id.as_str()) {
            return Err(CliError::Usage(format!("unknown video {id:?}; dataset has {}", all.join(", "))));
        }
    }
    let test: Vec<String> = if test.is_empty() {
        all.last().map(|s| vec![s.to_string()]).unwrap_or_default()
    } else {
        test.to_vec()
    };
    if let Some(dup) = train.iter().find(|v| test.contains(v)) {
        return Err(CliError::Usage(format!("video {dup:?} is in both the training and the test split")));
    }
    let train: Vec<String> = if train.is_empty() {
        all.iter().filter(|v| !test.iter().any(|t| t == *v)).map(|s| s.to_string()).collect()
    } else {
        train.to_vec()
    };
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn leave_last_video_out_by_default() {
        let all = ["v01", "v02", "v03"];
        assert_eq!(split(&all, &[], &[]).unwrap(), (s(&["v01", "v02"]), s(&["v03"])));
        assert_eq!(split(&all, &s(&["v02"]), &s(&["v01"])).unwrap(), (s(&["v02"]), s(&["v01"])));
        assert!(matches!(split(&all, &s(&["v01"]), &s(&["v01"])), Err(CliError::Usage(_))));
        assert!(matches!(split(&all, &[], &s(&["v09"])), Err(CliError::Usage(_))));
    }
}
