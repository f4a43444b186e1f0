//! Command-line front end. Exit codes: 0 success, 1 data error, 2 usage error.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::formats::{self, write_metrics};
use crate::gallery::Strategy;
use crate::metrics::{self, LabeledFeature, LabeledFeatureSet, DEFAULT_IOU_THRESHOLD};
use crate::pose::s2t_ratio;
use crate::synth::{self, SynthConfig};
use crate::tracker::{run_sequence, SequenceData, TrackerConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "oritrack", version, about = "Orientation-aware tracking and re-identification tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Track detections and write MOT-style track rows.
    Track(TrackArgs),
    /// Rank-1 re-identification accuracy for one gallery strategy.
    EvalReid(EvalReidArgs),
    /// IDF1 and identity switches of a prediction against ground truth.
    EvalMot(EvalMotArgs),
    /// Generate a labelled synthetic sequence.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(long)]
    pub det: PathBuf,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub keypoints: Option<PathBuf>,
    /// TOML tracker configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Gallery strategy as written on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSpec {
    Full,
    Avg,
    Random(usize),
    Orient(usize),
}

impl ModeSpec {
    fn with_bins(self, bins: usize) -> Self {
        match self {
            ModeSpec::Random(_) => ModeSpec::Random(bins),
            ModeSpec::Orient(_) => ModeSpec::Orient(bins),
            other => other,
        }
    }

    fn is_binned(self) -> bool {
        matches!(self, ModeSpec::Random(_) | ModeSpec::Orient(_))
    }

    pub fn strategy(self, seed: u64) -> Strategy {
        match self {
            ModeSpec::Full => Strategy::Full,
            ModeSpec::Avg => Strategy::Averaged,
            ModeSpec::Random(bins) => Strategy::RandomBins { bins, seed },
            ModeSpec::Orient(bins) => Strategy::OrientationBins { bins },
        }
    }

    pub fn metric_name(self) -> String {
        match self {
            ModeSpec::Full => "rank1_full".into(),
            ModeSpec::Avg => "rank1_avg".into(),
            ModeSpec::Random(b) => format!("rank1_random_{b}"),
            ModeSpec::Orient(b) => format!("rank1_orient_{b}"),
        }
    }
}

impl FromStr for ModeSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bins = |b: &str| match b.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(format!("bin count must be a positive integer, got {b:?}")),
        };
        match s.split_once(':') {
            None if s == "full" => Ok(ModeSpec::Full),
            None if s == "avg" => Ok(ModeSpec::Avg),
            Some(("random", b)) => Ok(ModeSpec::Random(bins(b)?)),
            Some(("orient", b)) => Ok(ModeSpec::Orient(bins(b)?)),
            _ => Err(format!("unknown mode {s:?}; expected full, avg, random:B or orient:B")),
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalReidArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// MOT file whose ids label the features by (frame, row order within frame).
    #[arg(long)]
    pub ids_from_mot: PathBuf,
    /// Torso keypoints used for orientation bins.
    #[arg(long)]
    pub keypoints: Option<PathBuf>,
    #[arg(long)]
    pub mode: ModeSpec,
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Bin counts to evaluate for binned modes, overriding the one in --mode.
    #[arg(long, value_delimiter = ',')]
    pub sweep_bins: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub smax: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalMotArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    pub iou: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// TOML generator configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

fn data_err(path: &Path, e: impl Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| data_err(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| data_err(path, e))
}

fn track(args: &TrackArgs) -> Result<(), CliError> {
    let config = match &args.config {
        Some(p) => TrackerConfig::from_toml(&read(p)?).map_err(|e| data_err(p, e))?,
        None => TrackerConfig::default(),
    };
    let det = read(&args.det)?;
    let features = args.features.as_deref().map(read).transpose()?;
    let keypoints = args.keypoints.as_deref().map(read).transpose()?;

    let detections = formats::parse_mot(&det).map_err(|e| data_err(&args.det, e))?;
    let features = match (&args.features, features) {
        (Some(p), Some(t)) => Some(formats::parse_features(&t).map_err(|e| data_err(p, e))?),
        _ => None,
    };
    let keypoints = match (&args.keypoints, keypoints) {
        (Some(p), Some(t)) => Some(formats::parse_keypoints(&t).map_err(|e| data_err(p, e))?),
        _ => None,
    };
    let data = SequenceData::new(&detections, features, keypoints).map_err(|e| CliError::Data(e.to_string()))?;
    let tracks = run_sequence(&config, &data).map_err(|e| CliError::Data(e.to_string()))?;
    let text = formats::write_tracks(&tracks).map_err(|e| CliError::Data(e.to_string()))?;
    write(&args.out, &text)
}

/// Labels every feature row with the id of the MOT row at the same
/// `(frame, position within frame)`.
fn labeled_set(args: &EvalReidArgs, needs_keypoints: bool) -> Result<LabeledFeatureSet, CliError> {
    let table = formats::parse_features(&read(&args.features)?).map_err(|e| data_err(&args.features, e))?;
    let mot = formats::parse_mot(&read(&args.ids_from_mot)?).map_err(|e| data_err(&args.ids_from_mot, e))?;
    let mut ids = HashMap::new();
    for (frame, rows) in formats::group_by_frame(&mot) {
        for (i, r) in rows.iter().enumerate() {
            ids.insert((frame, i), r.id);
        }
    }
    let mut ratios = HashMap::new();
    if let Some(p) = &args.keypoints {
        for k in formats::parse_keypoints(&read(p)?).map_err(|e| data_err(p, e))? {
            ratios.insert((k.frame, k.det_index), s2t_ratio(&k.torso()).ok());
        }
    } else if needs_keypoints {
        return Err(CliError::Usage("orient modes need --keypoints".into()));
    }

    let mut items = Vec::with_capacity(table.len());
    for (&(frame, det_index), feature) in table.iter() {
        let id = *ids.get(&(frame, det_index)).ok_or_else(|| {
            data_err(&args.ids_from_mot, format!("no row for frame {frame}, detection {det_index}"))
        })?;
        if id < 1 {
            return Err(data_err(
                &args.ids_from_mot,
                format!("frame {frame}, detection {det_index} has id {id}; ids must be >= 1"),
            ));
        }
        let s2t = match ratios.get(&(frame, det_index)) {
            Some(r) => *r,
            None if needs_keypoints => {
                return Err(CliError::Data(format!(
                    "no keypoints for frame {frame}, detection {det_index}"
                )))
            }
            None => None,
        };
        items.push(LabeledFeature { person: id as u64, feature: feature.clone(), s2t });
    }
    Ok(LabeledFeatureSet::new(items))
}

fn eval_reid(args: &EvalReidArgs) -> Result<(), CliError> {
    if !(args.split > 0.0 && args.split < 1.0) {
        return Err(CliError::Usage(format!("--split must lie in (0,1), got {}", args.split)));
    }
    if !(args.smax > 0.0) {
        return Err(CliError::Usage(format!("--smax must be positive, got {}", args.smax)));
    }
    if args.sweep_bins.contains(&0) {
        return Err(CliError::Usage("--sweep-bins values must be >= 1".into()));
    }
    let modes: Vec<ModeSpec> = if args.mode.is_binned() && !args.sweep_bins.is_empty() {
        args.sweep_bins.iter().map(|&b| args.mode.with_bins(b)).collect()
    } else {
        vec![args.mode]
    };
    let set = labeled_set(args, matches!(args.mode, ModeSpec::Orient(_)))?;
    let (gallery_set, queries) =
        metrics::split_gallery_query(&set, args.split, args.seed).map_err(|e| CliError::Data(e.to_string()))?;

    let mut rows = Vec::new();
    for mode in modes {
        let gallery = metrics::build_gallery(mode.strategy(args.seed), &gallery_set, args.smax)
            .map_err(|e| CliError::Data(e.to_string()))?;
        let r = metrics::rank1(&gallery, &queries).map_err(|e| CliError::Data(e.to_string()))?;
        rows.push((mode.metric_name(), format!("{r:.6}")));
    }
    rows.push(("queries".to_string(), queries.len().to_string()));
    let text = write_metrics(rows.iter().map(|(k, v)| (k.as_str(), v.clone())));
    write(&args.out, &text)
}

fn eval_mot(args: &EvalMotArgs) -> Result<(), CliError> {
    if !(args.iou > 0.0 && args.iou < 1.0) {
        return Err(CliError::Usage(format!("--iou must lie in (0,1), got {}", args.iou)));
    }
    let gt = formats::parse_mot(&read(&args.gt)?).map_err(|e| data_err(&args.gt, e))?;
    let pred = formats::parse_mot(&read(&args.pred)?).map_err(|e| data_err(&args.pred, e))?;
    for (path, recs) in [(&args.gt, &gt), (&args.pred, &pred)] {
        if let Some(r) = recs.iter().find(|r| r.id < 1) {
            return Err(data_err(path, format!("frame {} has id {}; ids must be >= 1", r.frame, r.id)));
        }
    }
    let scores = metrics::idf1(&gt, &pred, args.iou);
    write(&args.out, &write_metrics(scores.rows()))
}

fn run_synth(args: &SynthArgs) -> Result<(), CliError> {
    let config = match &args.config {
        Some(p) => SynthConfig::from_toml(&read(p)?).map_err(|e| data_err(p, e))?,
        None => SynthConfig::default(),
    };
    let out = synth::generate(&config).map_err(|e| CliError::Data(e.to_string()))?;
    out.write_to_dir(&args.out_dir).map_err(|e| data_err(&args.out_dir, e))
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Track(a) => track(a),
        Command::EvalReid(a) => eval_reid(a),
        Command::EvalMot(a) => eval_mot(a),
        Command::Synth(a) => run_synth(a),
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
