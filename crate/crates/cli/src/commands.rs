use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde_json::json;
use thiserror::Error;
use viewport_core::eval::{compare, EvalReport};
use viewport_core::geometry::SphericalCoord;
use viewport_core::predictor::{predict_windows, train, Corpus, Seq2SeqModel, WindowRef};
use viewport_core::saliency::{map_argmax, write_map};
use viewport_core::synth::{generate_videos, group_dispersion};
use viewport_core::trajectory::write_trajectories;
use viewport_core::subtitle::to_srt;

use crate::config::RunConfig;
use crate::dataset::{split, Dataset, GROUPS, LEXICON, TRAJECTORIES};
use crate::manifest::Recorder;
use crate::{Command, CompareArgs, DataArgs, EvalArgs, GlobalArgs, PredictArgs, SplitArgs, SynthArgs, TrainArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(String),
    #[error("metric computation failed: {0}")]
    Metric(String),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub fn run(global: &GlobalArgs, command: &Command, argv: Vec<String>) -> Result<(), CliError> {
    let cfg = RunConfig::load(global.config.as_deref(), global.seed)?;
    match command {
        Command::Synth(a) => synth(global, &cfg, a, argv),
        Command::Featurize(a) => featurize(global, &cfg, a, argv),
        Command::Train(a) => train_cmd(global, &cfg, a, argv),
        Command::Predict(a) => predict(global, &cfg, a, argv),
        Command::Eval(a) => eval(global, &cfg, a, argv),
        Command::Compare(a) => compare_cmd(global, &cfg, a, argv),
    }
}

fn synth(g: &GlobalArgs, cfg: &RunConfig, a: &SynthArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mut script = cfg.scenario.clone();
    if let Some(d) = a.duration {
        script.duration = d;
    }
    if a.videos == 0 {
        return Err(CliError::Usage("--videos must be at least 1".into()));
    }
    let cohorts = generate_videos(a.guided, a.unguided, &script, a.videos).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut rec = Recorder::new(&g.out, "synth", argv, script.seed, &json!({ "scenario": script, "synth": {
        "videos": a.videos, "guided": a.guided, "unguided": a.unguided } }))?;

    let trajectories: Vec<_> = cohorts.iter().flat_map(|c| c.trajectories.iter().cloned()).collect();
    let mut csv = Vec::new();
    write_trajectories(&mut csv, &trajectories).map_err(|e| CliError::Io(e.to_string()))?;
    rec.output(TRAJECTORIES, &csv)?;

    let mut groups = String::from("user_id,video_id,group\n");
    let mut details = Vec::new();
    for c in &cohorts {
        for (t, &guided) in c.trajectories.iter().zip(&c.guided) {
            let _ = writeln!(groups, "{},{},{}", t.user_id, c.video_id, if guided { "guided" } else { "unguided" });
        }
        rec.output(&format!("{}.srt", c.video_id), to_srt(&c.track).as_bytes())?;
        let (dg, du) = group_dispersion(c);
        details.push(json!({
            "video_id": c.video_id,
            "seed": c.script.seed,
            "cues": c.script.cues.len(),
            "coverage": c.script.coverage(),
            "dispersion_guided": dg,
            "dispersion_unguided": du,
        }));
        log::info!(
            "{}: {} viewers, {} cues covering {:.0}%, dispersion guided {dg:.3} / unguided {du:.3}",
            c.video_id,
            c.trajectories.len(),
            c.script.cues.len(),
            100.0 * c.script.coverage()
        );
    }
    rec.output(GROUPS, groups.as_bytes())?;
    rec.output(LEXICON, cohorts[0].lexicon.to_string().as_bytes())?;
    rec.details(json!({ "videos": details }));
    rec.finish()?;
    Ok(())
}

fn record_inputs(rec: &mut Recorder, ds: &Dataset) -> Result<(), CliError> {
    ds.files.iter().try_for_each(|f| rec.input(f))
}

fn featurize(g: &GlobalArgs, cfg: &RunConfig, a: &DataArgs, argv: Vec<String>) -> Result<(), CliError> {
    let ds = Dataset::load(&a.data)?;
    let m = &cfg.model;
    let corpus = ds.corpus(&cfg.data, m.grid_width, m.grid_height)?;
    let mut rec = Recorder::new(&g.out, "featurize", argv, m.seed, &json!({ "data": cfg.data,
        "grid_width": m.grid_width, "grid_height": m.grid_height }))?;
    record_inputs(&mut rec, &ds)?;
    let mut csv = String::from("video_id,step,t,subtitle,tokens,peak_x,peak_y\n");
    for v in &corpus.videos {
        let mut maps = Vec::new();
        for (i, (map, sub)) in v.maps.iter().zip(&v.subtitles).enumerate() {
            let step = v.first_step + i;
            let (px, py) = map_argmax(map);
            let tokens: Vec<String> = sub.nav_tokens.iter().map(|t| t.to_string()).collect();
            let _ = writeln!(
                csv,
                "{},{step},{},{},{},{px},{py}",
                v.video_id,
                step as f64 * corpus.dt,
                u8::from(sub.indicator),
                tokens.join(" ")
            );
            write_map(&mut maps, map).map_err(|e| CliError::Io(e.to_string()))?;
        }
        rec.output(&format!("saliency/{}.maps", v.video_id), &maps)?;
        log::info!("{}: {} steps, {} viewers", v.video_id, v.len(), v.users.len());
    }
    rec.output("features.csv", csv.as_bytes())?;
    rec.finish()?;
    Ok(())
}

fn select(corpus: &Corpus, ids: &[String]) -> Corpus {
    Corpus {
        dt: corpus.dt,
        videos: corpus.videos.iter().filter(|v| ids.contains(&v.video_id)).cloned().collect(),
    }
}

fn resolve_split(corpus: &Corpus, s: &SplitArgs) -> Result<(Vec<String>, Vec<String>), CliError> {
    split(&corpus.video_ids(), &s.train_videos, &s.test_videos)
}

fn train_cmd(g: &GlobalArgs, cfg: &RunConfig, a: &TrainArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mut mcfg = cfg.model.with_variant(a.variant);
    if let Some(e) = a.epochs {
        mcfg.epochs = e;
    }
    mcfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let ds = Dataset::load(&a.data.data)?;
    let corpus = ds.corpus(&cfg.data, mcfg.grid_width, mcfg.grid_height)?;
    let (train_ids, test_ids) = resolve_split(&corpus, &a.split)?;
    if train_ids.is_empty() {
        return Err(CliError::Usage(format!(
            "no training videos left after holding out {}; generate more videos or pass --train-videos",
            test_ids.join(", ")
        )));
    }
    let train_set = select(&corpus, &train_ids);
    let mut rec = Recorder::new(&g.out, "train", argv, mcfg.seed, &json!({ "data": cfg.data, "model": mcfg }))?;
    record_inputs(&mut rec, &ds)?;
    log::info!("training {} on {} for {} epochs", mcfg.variant, train_ids.join(", "), mcfg.epochs);
    let start = Instant::now();
    let outcome = train(&train_set, &mcfg).map_err(|e| CliError::Run(e.to_string()))?;
    let seconds = start.elapsed().as_secs_f64();
    let mut ckpt = Vec::new();
    outcome.model.save(&mut ckpt).map_err(|e| CliError::Io(e.to_string()))?;
    rec.output("model.vspm", &ckpt)?;
    let mut loss = String::from("epoch,loss\n");
    for (i, l) in outcome.loss_history.iter().enumerate() {
        let _ = writeln!(loss, "{},{l}", i + 1);
    }
    rec.output("loss.csv", loss.as_bytes())?;
    rec.details(json!({
        "variant": mcfg.variant.name(),
        "train_videos": train_ids,
        "test_videos": test_ids,
        "final_loss": outcome.loss_history.last(),
        "train_seconds": seconds,
    }));
    rec.finish()?;
    log::info!(
        "done in {seconds:.1}s, final loss {:.6}",
        outcome.loss_history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<Seq2SeqModel<f32>, CliError> {
    let f = std::fs::File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Seq2SeqModel::load(std::io::BufReader::new(f)).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

struct Predictions {
    windows: Vec<WindowRef>,
    pred: Vec<Vec<SphericalCoord>>,
    truth: Vec<Vec<SphericalCoord>>,
    corpus: Corpus,
}

fn run_model(
    cfg: &RunConfig,
    model: &Seq2SeqModel<f32>,
    data: &Path,
    s: &SplitArgs,
    rec: &mut Recorder,
) -> Result<Predictions, CliError> {
    let mc = model.config();
    let ds = Dataset::load(data)?;
    record_inputs(rec, &ds)?;
    let corpus = ds.corpus(&cfg.data, mc.grid_width, mc.grid_height)?;
    let (_, test_ids) = resolve_split(&corpus, s)?;
    let corpus = select(&corpus, &test_ids);
    let windows = corpus
        .windows(mc.input_steps, mc.output_steps, 1)
        .map_err(|e| CliError::Input(e.to_string()))?;
    if windows.is_empty() {
        return Err(CliError::Input(format!("test videos {} are too short for one window", test_ids.join(", "))));
    }
    let (pred, truth) = predict_windows(model, &corpus, &windows).map_err(|e| CliError::Run(e.to_string()))?;
    Ok(Predictions {
        windows,
        pred,
        truth,
        corpus,
    })
}

const TRACE_HEADER: &str = "video_id,user_id,start,step,t,pred_phi,pred_theta,true_phi,true_theta";

fn trace_csv(p: &Predictions, m: usize) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    for (w, (pred, truth)) in p.windows.iter().zip(p.pred.iter().zip(&p.truth)) {
        let v = &p.corpus.videos[w.video];
        for (s, (a, b)) in pred.iter().zip(truth).enumerate() {
            let t = (v.first_step + w.start + m + s) as f64 * p.corpus.dt;
            let _ = writeln!(
                out,
                "{},{},{},{},{t},{},{},{},{}",
                v.video_id,
                v.users[w.user].user_id,
                w.start,
                s + 1,
                a.phi(),
                a.theta(),
                b.phi(),
                b.theta()
            );
        }
    }
    out
}

fn predict(g: &GlobalArgs, cfg: &RunConfig, a: &PredictArgs, argv: Vec<String>) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let mut rec = Recorder::new(&g.out, "predict", argv, model.config().seed, &json!({ "data": cfg.data, "model": model.config() }))?;
    rec.input(&a.model)?;
    let p = run_model(cfg, &model, &a.data.data, &a.split, &mut rec)?;
    rec.output("predictions.csv", trace_csv(&p, model.config().input_steps).as_bytes())?;
    log::info!("{} windows predicted", p.windows.len());
    rec.finish()?;
    Ok(())
}

/// Reads a prediction trace back into aligned `(pred, truth)` windows.
/// The step interval is recovered from the timestamps when a window has two steps.
fn read_trace(path: &Path) -> Result<(Vec<Vec<SphericalCoord>>, Vec<Vec<SphericalCoord>>, Option<f64>), CliError> {
    let bad = |e: String| CliError::Input(format!("{}: {e}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = rdr.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_owned).collect();
    if header.join(",") != TRACE_HEADER {
        return Err(bad(format!("expected header {TRACE_HEADER}")));
    }
    type Step = (f64, f64, SphericalCoord, SphericalCoord);
    let mut windows: Vec<((String, String, String), Vec<Step>)> = Vec::new();
    let mut index: BTreeMap<(String, String, String), usize> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(format!("column {}: {e}", header[i])));
        let coord = |i: usize| -> Result<SphericalCoord, CliError> {
            SphericalCoord::new(num(i)?, num(i + 1)?).map_err(|e| bad(e.to_string()))
        };
        let key = (rec[0].to_string(), rec[1].to_string(), rec[2].to_string());
        let at = *index.entry(key.clone()).or_insert_with(|| {
            windows.push((key, Vec::new()));
            windows.len() - 1
        });
        windows[at].1.push((num(3)?, num(4)?, coord(5)?, coord(7)?));
    }
    let mut dt = None;
    let mut pred = Vec::with_capacity(windows.len());
    let mut truth = Vec::with_capacity(windows.len());
    for (_, mut steps) in windows {
        steps.sort_by(|a, b| a.0.total_cmp(&b.0));
        if dt.is_none() && steps.len() > 1 {
            dt = Some((steps[1].1 - steps[0].1) / (steps[1].0 - steps[0].0));
        }
        pred.push(steps.iter().map(|s| s.2).collect());
        truth.push(steps.iter().map(|s| s.3).collect());
    }
    Ok((pred, truth, dt))
}

fn eval(g: &GlobalArgs, cfg: &RunConfig, a: &EvalArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mode = a.rmse_mode.into();
    let (report, mut rec) = match (&a.predictions, &a.model, &a.data) {
        (Some(trace), _, _) => {
            let mut rec = Recorder::new(&g.out, "eval", argv, 0, &json!({ "rmse_mode": mode }))?;
            rec.input(trace)?;
            let (pred, truth, dt) = read_trace(trace)?;
            let name = a.name.clone().unwrap_or_else(|| "predictions".into());
            let report = EvalReport::from_predictions(name, &pred, &truth, dt.unwrap_or(cfg.data.dt), mode)
                .map_err(|e| CliError::Metric(e.to_string()))?;
            (report, rec)
        }
        (None, Some(ckpt), Some(data)) => {
            let model = load_model(ckpt)?;
            let mut rec = Recorder::new(&g.out, "eval", argv, model.config().seed, &json!({
                "data": cfg.data, "model": model.config(), "rmse_mode": mode }))?;
            rec.input(ckpt)?;
            let p = run_model(cfg, &model, data, &a.split, &mut rec)?;
            let name = a.name.clone().unwrap_or_else(|| model.variant().name().to_string());
            let report = EvalReport::from_predictions(name, &p.pred, &p.truth, p.corpus.dt, mode)
                .map_err(|e| CliError::Metric(e.to_string()))?;
            (report, rec)
        }
        _ => return Err(CliError::Usage("eval needs --predictions, or --model with --data".into())),
    };
    let json = serde_json::to_vec_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    rec.output("report.json", &json)?;
    rec.output("curve.csv", report.curve_csv().as_bytes())?;
    rec.finish()?;
    println!(
        "{}: mean orthodromic {:.4} ± {:.4} rad, RMSE phi {:.3}°, theta {:.3}° over {} samples",
        report.name, report.mean_orthodromic, report.std_orthodromic, report.rmse_phi, report.rmse_theta, report.samples
    );
    Ok(())
}

fn compare_cmd(g: &GlobalArgs, _cfg: &RunConfig, a: &CompareArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mut rec = Recorder::new(&g.out, "compare", argv, 0, &json!({}))?;
    let mut reports = Vec::with_capacity(a.reports.len());
    for p in &a.reports {
        let bytes = std::fs::read(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
        let r: EvalReport =
            serde_json::from_slice(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
        rec.input(p)?;
        reports.push(r);
    }
    let cmp = compare(&reports).map_err(|e| CliError::Metric(e.to_string()))?;
    let table = cmp.table();
    rec.output("comparison.txt", table.as_bytes())?;
    rec.output("curves.csv", cmp.curve_csv().as_bytes())?;
    rec.finish()?;
    print!("{table}");
    Ok(())
}
