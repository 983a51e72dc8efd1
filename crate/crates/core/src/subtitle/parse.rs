//! SRT and WebVTT readers/writers.

use std::fmt::Write as _;

use super::{SubtitleCue, SubtitleError, SubtitleTrack};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dialect {
    Srt,
    Vtt,
}

/// Strips a UTF-8 BOM and normalizes CRLF / lone CR line endings to LF.
fn normalize(text: &str) -> String {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    text.replace("\r\n", "\n").replace('\r', "\n")
}

fn decode(bytes: &[u8]) -> Result<&str, SubtitleError> {
    std::str::from_utf8(bytes).map_err(|e| {
        let valid = &bytes[..e.valid_up_to()];
        let line = 1 + valid.iter().filter(|&&b| b == b'\n').count();
        SubtitleError::parse(line, "invalid UTF-8")
    })
}

fn digits(s: &str, len: Option<usize>) -> Option<u64> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if len.is_some_and(|l| s.len() != l) {
        return None;
    }
    s.parse().ok()
}

/// Parses `HH:MM:SS,mmm` (SRT) or `[HH:]MM:SS.mmm` (VTT) into milliseconds.
fn parse_timestamp(s: &str, dialect: Dialect) -> Option<u64> {
    let sep = match dialect {
        Dialect::Srt => ',',
        Dialect::Vtt => '.',
    };
    let (clock, millis) = s.rsplit_once(sep)?;
    let millis = digits(millis, Some(3))?;
    let parts: Vec<&str> = clock.split(':').collect();
    let (h, m, sec) = match (dialect, parts.as_slice()) {
        (_, [h, m, s]) => (digits(h, None)?, digits(m, Some(2))?, digits(s, Some(2))?),
        (Dialect::Vtt, [m, s]) => (0, digits(m, Some(2))?, digits(s, Some(2))?),
        _ => return None,
    };
    if m >= 60 || sec >= 60 || h > 10_000 {
        return None;
    }
    Some(((h * 60 + m) * 60 + sec) * 1000 + millis)
}

fn parse_timing(line: &str, lineno: usize, dialect: Dialect) -> Result<(u64, u64), SubtitleError> {
    let (start, rest) = line
        .split_once("-->")
        .ok_or_else(|| SubtitleError::parse(lineno, "expected `start --> end` timing line"))?;
    let start = start.trim();
    // VTT cue settings (and stray SRT coordinates) follow the end stamp.
    let end = rest.split_whitespace().next().unwrap_or("");
    let bad = |which: &str, v: &str| SubtitleError::parse(lineno, format!("malformed {which} timestamp {v:?}"));
    let s = parse_timestamp(start, dialect).ok_or_else(|| bad("start", start))?;
    let e = parse_timestamp(end, dialect).ok_or_else(|| bad("end", end))?;
    if e <= s {
        return Err(SubtitleError::parse(lineno, "cue ends before it starts"));
    }
    Ok((s, e))
}

/// Collects the text lines following a timing line. Returns the cue text and
/// the index of the first line after the block.
fn take_text(lines: &[&str], mut i: usize, timing_line: usize) -> Result<(String, usize), SubtitleError> {
    let begin = i;
    while i < lines.len() && !lines[i].trim().is_empty() {
        i += 1;
    }
    if i == begin {
        return Err(SubtitleError::parse(timing_line, "cue has no text"));
    }
    Ok((lines[begin..i].join("\n"), i))
}

fn make_cue(index: u32, start_ms: u64, end_ms: u64, text: String, lineno: usize) -> Result<SubtitleCue, SubtitleError> {
    SubtitleCue::new(index, start_ms as f64 / 1000.0, end_ms as f64 / 1000.0, text)
        .map_err(|e| SubtitleError::parse(lineno, e.to_string()))
}

pub fn parse_srt(text: &str) -> Result<SubtitleTrack, SubtitleError> {
    let text = normalize(text);
    let lines: Vec<&str> = text.split('\n').collect();
    let mut cues = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let head = lines[i].trim();
        let (index, timing_at) = if head.contains("-->") {
            (cues.len() as u32 + 1, i)
        } else {
            let idx = digits(head, None)
                .and_then(|v| u32::try_from(v).ok())
                .ok_or_else(|| SubtitleError::parse(i + 1, format!("expected cue index, found {head:?}")))?;
            (idx, i + 1)
        };
        let timing = lines
            .get(timing_at)
            .ok_or_else(|| SubtitleError::parse(timing_at + 1, "missing timing line"))?;
        let (s, e) = parse_timing(timing, timing_at + 1, Dialect::Srt)?;
        let (body, next) = take_text(&lines, timing_at + 1, timing_at + 1)?;
        cues.push(make_cue(index, s, e, body, timing_at + 1)?);
        i = next;
    }
    Ok(SubtitleTrack::new(cues))
}

pub fn parse_srt_bytes(bytes: &[u8]) -> Result<SubtitleTrack, SubtitleError> {
    parse_srt(decode(bytes)?)
}

pub fn parse_vtt(text: &str) -> Result<SubtitleTrack, SubtitleError> {
    let text = normalize(text);
    let lines: Vec<&str> = text.split('\n').collect();
    let header = lines.first().copied().unwrap_or("");
    let ok_header = header
        .strip_prefix("WEBVTT")
        .is_some_and(|rest| rest.is_empty() || rest.starts_with([' ', '\t']));
    if !ok_header {
        return Err(SubtitleError::parse(1, "missing WEBVTT header"));
    }
    // Header block runs until the first blank line.
    let mut i = 1;
    while i < lines.len() && !lines[i].trim().is_empty() {
        i += 1;
    }
    let mut cues = Vec::new();
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let head = lines[i];
        let word = head.split_whitespace().next().unwrap_or("");
        if matches!(word, "NOTE" | "STYLE" | "REGION") && !head.contains("-->") {
            while i < lines.len() && !lines[i].trim().is_empty() {
                i += 1;
            }
            continue;
        }
        let timing_at = if head.contains("-->") { i } else { i + 1 };
        let timing = lines
            .get(timing_at)
            .ok_or_else(|| SubtitleError::parse(timing_at + 1, "missing timing line"))?;
        let (s, e) = parse_timing(timing, timing_at + 1, Dialect::Vtt)?;
        let (body, next) = take_text(&lines, timing_at + 1, timing_at + 1)?;
        cues.push(make_cue(cues.len() as u32 + 1, s, e, body, timing_at + 1)?);
        i = next;
    }
    Ok(SubtitleTrack::new(cues))
}

pub fn parse_vtt_bytes(bytes: &[u8]) -> Result<SubtitleTrack, SubtitleError> {
    parse_vtt(decode(bytes)?)
}

fn format_timestamp(seconds: f64, dialect: Dialect) -> String {
    let ms = (seconds * 1000.0).round() as u64;
    let (h, rem) = (ms / 3_600_000, ms % 3_600_000);
    let (m, rem) = (rem / 60_000, rem % 60_000);
    let (s, ms) = (rem / 1000, rem % 1000);
    let sep = if dialect == Dialect::Srt { ',' } else { '.' };
    format!("{h:02}:{m:02}:{s:02}{sep}{ms:03}")
}

pub fn to_srt(track: &SubtitleTrack) -> String {
    let mut out = String::new();
    for cue in track.cues() {
        let _ = write!(
            out,
            "{}\n{} --> {}\n{}\n\n",
            cue.index(),
            format_timestamp(cue.start(), Dialect::Srt),
            format_timestamp(cue.end(), Dialect::Srt),
            cue.text()
        );
    }
    out
}

pub fn to_vtt(track: &SubtitleTrack) -> String {
    let mut out = String::from("WEBVTT\n\n");
    for cue in track.cues() {
        let _ = write!(
            out,
            "{} --> {}\n{}\n\n",
            format_timestamp(cue.start(), Dialect::Vtt),
            format_timestamp(cue.end(), Dialect::Vtt),
            cue.text()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_srt_cue() {
        let t = parse_srt("1\n00:00:01,000 --> 00:00:03,500\nOn your left, the cathedral\n\n").unwrap();
        assert_eq!(t.len(), 1);
        let c = &t.cues()[0];
        assert_eq!((c.index(), c.start(), c.end()), (1, 1.0, 3.5));
        assert_eq!(c.text(), "On your left, the cathedral");
    }

    #[test]
    fn crlf_and_bom_are_normalized() {
        let lf = "1\n00:00:01,000 --> 00:00:03,500\nline one\nline two\n\n2\n00:00:04,000 --> 00:00:05,000\nnext\n";
        let crlf = format!("\u{feff}{}", lf.replace('\n', "\r\n"));
        assert_eq!(parse_srt(lf).unwrap(), parse_srt(&crlf).unwrap());
    }

    #[test]
    fn empty_inputs() {
        assert!(parse_srt("").unwrap().is_empty());
        assert!(parse_srt("\n\n").unwrap().is_empty());
        assert!(parse_vtt("WEBVTT\n").unwrap().is_empty());
        assert!(parse_vtt("WEBVTT - my title\n\n").unwrap().is_empty());
    }

    #[test]
    fn malformed_timestamp_reports_line() {
        let err = parse_srt("1\n00:00:01,000 --> 00:00:03,500\nok\n\n2\n00:00:0x,000 --> 00:00:05,000\nbad\n").unwrap_err();
        match err {
            SubtitleError::Parse { line, .. } => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vtt_basic_and_settings() {
        let t = parse_vtt("WEBVTT\n\n00:01.000 --> 00:03.500\nhello\n").unwrap();
        assert_eq!((t.cues()[0].start(), t.cues()[0].end()), (1.0, 3.5));
        let t = parse_vtt(
            "WEBVTT\nKind: captions\n\nNOTE a comment\nspanning lines\n\nintro\n01:00:01.250 --> 01:00:02.000 align:start line:90%\nhi\n",
        )
        .unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.cues()[0].start(), 3601.25);
    }

    #[test]
    fn vtt_requires_header() {
        assert!(matches!(
            parse_vtt("00:01.000 --> 00:03.500\nhello\n"),
            Err(SubtitleError::Parse { line: 1, .. })
        ));
        assert!(parse_vtt("WEBVTTX\n").is_err());
    }

    #[test]
    fn invalid_utf8_is_positioned() {
        let err = parse_srt_bytes(b"1\n00:00:01,000 --> 00:00:02,000\n\xff\n").unwrap_err();
        assert!(matches!(err, SubtitleError::Parse { line: 3, .. }));
    }

    #[test]
    fn reversed_cue_rejected() {
        assert!(parse_srt("1\n00:00:03,000 --> 00:00:01,000\nx\n").is_err());
    }

    #[test]
    fn timestamps_format_exactly() {
        assert_eq!(format_timestamp(3723.004, Dialect::Srt), "01:02:03,004");
        assert_eq!(format_timestamp(0.5, Dialect::Vtt), "00:00:00.500");
    }
}
