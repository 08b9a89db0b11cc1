//! Command-line frontend: evaluation, post-processing and pyramid /
//! assignment analysis over ground-truth CSV and prediction JSONL files.
//!
//! Pages are processed independently and emitted in sorted page-id order;
//! identical inputs and flags always produce byte-identical output.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use mfdkit::assignment::{atss_assign, random_assign, GtSample, ImbalanceStats};
use mfdkit::detection::{Detection, GroundTruth, PredictionRecord};
use mfdkit::eval::{evaluate, EvalReport};
use mfdkit::gfl::{decode_box, SideDistribution};
use mfdkit::io as formats;
use mfdkit::postprocess::{merge_flip, nms, score_filter, wbf};
use mfdkit::pyramid::{coverage_report, GridPoint, PyramidSpec};
use mfdkit::{BBox, FormulaClass, RunConfig};

#[derive(Parser)]
#[command(
    name = "mfdkit",
    version,
    about = "Detection post-processing, evaluation and pyramid analysis for \
             embedded/isolated formula detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score predictions against ground truth (per-class and total P/R/F1).
    Eval(EvalArgs),
    /// Per-page greedy non-maximum suppression over a prediction file.
    Nms(NmsArgs),
    /// Weighted box fusion of one prediction file per model.
    Fuse(FuseArgs),
    /// Merge a straight pass with a horizontally flipped pass.
    FlipMerge(FlipMergeArgs),
    /// Compare adaptive and containment sample assignment on a ground-truth set.
    AtssSim(AtssSimArgs),
    /// Report which pyramid levels can represent each ground-truth instance.
    FpnCoverage(FpnCoverageArgs),
    /// Decode side-offset distributions into boxes.
    Decode(DecodeArgs),
}

#[derive(Args)]
struct OutputArg {
    /// Write results here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth CSV (header `page_id,class,x1,y1,x2,y2`).
    #[arg(long, value_name = "CSV")]
    gt: PathBuf,
    /// Prediction JSONL.
    #[arg(long, value_name = "JSONL")]
    pred: PathBuf,
    /// IoU required for a prediction to match a ground truth [default: 0.5].
    #[arg(long, value_name = "IOU")]
    iou_thresh: Option<f64>,
    /// Also write the full report (including per-page counts) as JSON.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArg,
}

#[derive(Args)]
struct NmsArgs {
    /// Prediction JSONL.
    #[arg(value_name = "JSONL")]
    pred: PathBuf,
    /// Suppress same-class boxes overlapping a kept box beyond this IoU
    /// [default: 0.6].
    #[arg(long, value_name = "IOU")]
    iou_thresh: Option<f64>,
    /// Drop detections scoring below this before processing.
    #[arg(long, value_name = "SCORE", default_value_t = 0.0)]
    min_score: f64,
    #[command(flatten)]
    output: OutputArg,
}

#[derive(Args)]
struct FuseArgs {
    /// One prediction JSONL per model, in model order.
    #[arg(value_name = "JSONL", required = true)]
    preds: Vec<PathBuf>,
    /// Boxes join a cluster when IoU with its fused box exceeds this
    /// [default: 0.4].
    #[arg(long, value_name = "IOU")]
    iou_thresh: Option<f64>,
    /// Drop detections scoring below this before fusing.
    #[arg(long, value_name = "SCORE", default_value_t = 0.0)]
    min_score: f64,
    /// Comma-separated per-model weights (default: all 1).
    #[arg(long, value_name = "W1,W2,...", value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[command(flatten)]
    output: OutputArg,
}

#[derive(Args)]
struct FlipMergeArgs {
    /// Predictions from the straight pass.
    #[arg(value_name = "JSONL")]
    orig: PathBuf,
    /// Predictions from the flipped pass, still in flipped coordinates.
    #[arg(value_name = "JSONL")]
    flipped: PathBuf,
    /// Width of the test image the flip was performed on [default: 1583].
    #[arg(long, value_name = "PX")]
    image_width: Option<f64>,
    /// IoU threshold for the deduplicating NMS [default: 0.6].
    #[arg(long, value_name = "IOU")]
    iou_thresh: Option<f64>,
    /// Drop detections scoring below this before merging.
    #[arg(long, value_name = "SCORE", default_value_t = 0.0)]
    min_score: f64,
    #[command(flatten)]
    output: OutputArg,
}

#[derive(Args)]
struct PyramidArgs {
    /// Pyramid levels as FIRST-LAST [default: 2-6].
    #[arg(long, value_name = "LO-HI", value_parser = parse_level_range)]
    levels: Option<(u8, u8)>,
    /// Offset bins per box side [default: 24].
    #[arg(long, value_name = "BINS")]
    regmax: Option<u32>,
}

#[derive(Args)]
struct AtssSimArgs {
    /// Ground-truth CSV.
    #[arg(long, value_name = "CSV")]
    gt: PathBuf,
    #[command(flatten)]
    pyramid: PyramidArgs,
    /// Candidates per level for adaptive selection [default: 9].
    #[arg(long, value_name = "K")]
    k: Option<usize>,
    /// Page width in pixels [default: 1583].
    #[arg(long, value_name = "PX")]
    image_width: Option<f64>,
    /// Page height in pixels [default: 2048].
    #[arg(long, value_name = "PX")]
    image_height: Option<f64>,
    #[command(flatten)]
    output: OutputArg,
}

#[derive(Args)]
struct FpnCoverageArgs {
    /// Ground-truth CSV.
    #[arg(long, value_name = "CSV")]
    gt: PathBuf,
    #[command(flatten)]
    pyramid: PyramidArgs,
    #[command(flatten)]
    output: OutputArg,
}

#[derive(Args)]
struct DecodeArgs {
    /// Decode-request JSONL
    /// (`{"page_id","level","x","y","dists":[4][regmax+1]}`).
    #[arg(value_name = "JSONL")]
    input: PathBuf,
    #[command(flatten)]
    pyramid: PyramidArgs,
    /// Clip decoded boxes to this image width (requires --image-height).
    #[arg(long, value_name = "PX", requires = "image_height")]
    image_width: Option<f64>,
    /// Clip decoded boxes to this image height (requires --image-width).
    #[arg(long, value_name = "PX", requires = "image_width")]
    image_height: Option<f64>,
    #[command(flatten)]
    output: OutputArg,
}

fn parse_level_range(s: &str) -> Result<(u8, u8), String> {
    let (first, last) = s
        .split_once('-')
        .ok_or_else(|| format!("expected FIRST-LAST, e.g. 2-6, got `{s}`"))?;
    let first: u8 = first.trim().parse().map_err(|_| format!("bad level `{first}`"))?;
    let last: u8 = last.trim().parse().map_err(|_| format!("bad level `{last}`"))?;
    Ok((first, last))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Eval(args) => run_eval(args),
        Command::Nms(args) => run_nms(args),
        Command::Fuse(args) => run_fuse(args),
        Command::FlipMerge(args) => run_flip_merge(args),
        Command::AtssSim(args) => run_atss_sim(args),
        Command::FpnCoverage(args) => run_fpn_coverage(args),
        Command::Decode(args) => run_decode(args),
    }
}

fn open_output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_gt(path: &Path) -> Result<Vec<GroundTruth>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    formats::parse_gt(file).with_context(|| format!("failed to parse {}", path.display()))
}

fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    formats::parse_predictions(file)
        .with_context(|| format!("failed to parse {}", path.display()))
}

fn pyramid_spec(args: &PyramidArgs, config: &RunConfig) -> Result<PyramidSpec> {
    let (first, last) = args
        .levels
        .unwrap_or((config.levels[0], *config.levels.last().expect("default levels")));
    let regmax = args.regmax.unwrap_or(config.regmax);
    Ok(PyramidSpec::from_range(first, last, regmax)?)
}

/// Predictions grouped by page, preserving within-page input order.
fn group_by_page(preds: Vec<PredictionRecord>) -> BTreeMap<String, Vec<Detection>> {
    let mut pages: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    for p in preds {
        pages.entry(p.page_id).or_default().push(p.detection);
    }
    pages
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let config = RunConfig::default();
    let iou = args.iou_thresh.unwrap_or(config.eval_iou);
    let gts = load_gt(&args.gt)?;
    let preds = load_predictions(&args.pred)?;
    let report = evaluate(&preds, &gts, iou)?;

    let mut out = open_output(args.output.out.as_deref())?;
    write_eval_table(&mut out, &report)?;
    out.flush()?;

    if let Some(json_path) = &args.json {
        let mut json_out = BufWriter::new(
            File::create(json_path)
                .with_context(|| format!("cannot create {}", json_path.display()))?,
        );
        write_eval_json(&mut json_out, &report, iou)?;
        json_out.flush()?;
    }
    Ok(())
}

fn write_eval_table<W: Write>(out: &mut W, report: &EvalReport) -> io::Result<()> {
    writeln!(
        out,
        "{:<10}{:>8}{:>8}{:>8}{:>9}{:>9}{:>9}",
        "class", "F1", "p", "r", "TP", "FP", "FN"
    )?;
    let rows = [
        ("embedded", &report.embedded),
        ("isolated", &report.isolated),
        ("total", &report.total),
    ];
    for (name, class) in rows {
        writeln!(
            out,
            "{:<10}{:>8.2}{:>8.2}{:>8.2}{:>9}{:>9}{:>9}",
            name,
            class.f1 * 100.0,
            class.precision * 100.0,
            class.recall * 100.0,
            class.counts.true_positives,
            class.counts.false_positives,
            class.counts.false_negatives
        )?;
    }
    Ok(())
}

fn write_eval_json<W: Write>(out: &mut W, report: &EvalReport, iou: f64) -> io::Result<()> {
    let class_json = |c: &mfdkit::eval::ClassReport| {
        format!(
            "{{\"f1\":{:.6},\"precision\":{:.6},\"recall\":{:.6},\"tp\":{},\"fp\":{},\"fn\":{}}}",
            c.f1,
            c.precision,
            c.recall,
            c.counts.true_positives,
            c.counts.false_positives,
            c.counts.false_negatives
        )
    };
    write!(
        out,
        "{{\"iou_thresh\":{:.6},\"embedded\":{},\"isolated\":{},\"total\":{},\"pages\":[",
        iou,
        class_json(&report.embedded),
        class_json(&report.isolated),
        class_json(&report.total)
    )?;
    for (i, page) in report.pages.iter().enumerate() {
        let counts_json = |c: mfdkit::eval::MatchCounts| {
            format!(
                "{{\"tp\":{},\"fp\":{},\"fn\":{}}}",
                c.true_positives, c.false_positives, c.false_negatives
            )
        };
        write!(
            out,
            "{}{{\"page_id\":{},\"embedded\":{},\"isolated\":{}}}",
            if i == 0 { "" } else { "," },
            serde_page_id(&page.page_id),
            counts_json(page.counts.embedded),
            counts_json(page.counts.isolated)
        )?;
    }
    writeln!(out, "]}}")
}

fn serde_page_id(s: &str) -> String {
    // minimal JSON string escaping, same as the library writers
    let mut escaped = String::with_capacity(s.len() + 2);
    escaped.push('"');
    for ch in s.chars() {
        match ch {
            '"' => escaped.push_str("\\\""),
            '\\' => escaped.push_str("\\\\"),
            c if (c as u32) < 0x20 => {
                escaped.push_str(&format!("\\u{:04x}", c as u32));
            }
            c => escaped.push(c),
        }
    }
    escaped.push('"');
    escaped
}

fn run_nms(args: NmsArgs) -> Result<()> {
    let config = RunConfig::default();
    let iou = args.iou_thresh.unwrap_or(config.nms_iou);
    let pages = group_by_page(load_predictions(&args.pred)?);

    let mut out = open_output(args.output.out.as_deref())?;
    for (page_id, dets) in &pages {
        let kept = nms(&score_filter(dets, args.min_score), iou);
        for det in &kept {
            writeln!(out, "{}", formats::format_prediction(page_id, det))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn run_fuse(args: FuseArgs) -> Result<()> {
    let config = RunConfig::default();
    let iou = args.iou_thresh.unwrap_or(config.wbf_iou);

    // page -> one detection list per model
    let model_count = args.preds.len();
    let mut pages: BTreeMap<String, Vec<Vec<Detection>>> = BTreeMap::new();
    for (model_idx, path) in args.preds.iter().enumerate() {
        let preds = load_predictions(path)?;
        for record in score_filter_records(preds, args.min_score) {
            pages
                .entry(record.page_id)
                .or_insert_with(|| vec![Vec::new(); model_count])
                [model_idx]
                .push(record.detection);
        }
    }

    let mut out = open_output(args.output.out.as_deref())?;
    for (page_id, det_sets) in &pages {
        let fused = wbf(det_sets, iou, args.weights.as_deref())?;
        for f in &fused {
            writeln!(out, "{}", formats::format_fused(page_id, f))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn score_filter_records(preds: Vec<PredictionRecord>, min_score: f64) -> Vec<PredictionRecord> {
    preds.into_iter().filter(|p| p.detection.score() >= min_score).collect()
}

fn run_flip_merge(args: FlipMergeArgs) -> Result<()> {
    let config = RunConfig::default();
    let iou = args.iou_thresh.unwrap_or(config.nms_iou);
    let image_width = args.image_width.unwrap_or(config.image_width);

    let orig = group_by_page(score_filter_records(load_predictions(&args.orig)?, args.min_score));
    let flipped =
        group_by_page(score_filter_records(load_predictions(&args.flipped)?, args.min_score));

    let empty = Vec::new();
    let mut page_ids: Vec<&String> = orig.keys().chain(flipped.keys()).collect();
    page_ids.sort();
    page_ids.dedup();

    let mut out = open_output(args.output.out.as_deref())?;
    for page_id in page_ids {
        let straight = orig.get(page_id).unwrap_or(&empty);
        let mirrored = flipped.get(page_id).unwrap_or(&empty);
        let merged = merge_flip(straight, mirrored, image_width, iou)
            .with_context(|| format!("page {page_id}"))?;
        for det in &merged {
            writeln!(out, "{}", formats::format_prediction(page_id, det))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn run_atss_sim(args: AtssSimArgs) -> Result<()> {
    let config = RunConfig::default();
    let spec = pyramid_spec(&args.pyramid, &config)?;
    let k = args.k.unwrap_or(config.atss_k);
    let width = args.image_width.unwrap_or(config.image_width);
    let height = args.image_height.unwrap_or(config.image_height);
    let gts = load_gt(&args.gt)?;

    // group per page, keeping within-page input order
    let mut pages: BTreeMap<&str, Vec<&GroundTruth>> = BTreeMap::new();
    for gt in &gts {
        pages.entry(&gt.page_id).or_default().push(gt);
    }

    let mut out = open_output(args.output.out.as_deref())?;
    writeln!(out, "page_id,class,area,positives_random,positives_atss")?;
    let mut random_samples = Vec::with_capacity(gts.len());
    let mut atss_samples = Vec::with_capacity(gts.len());
    for (page_id, page_gts) in &pages {
        let boxes: Vec<BBox> = page_gts.iter().map(|g| g.bbox).collect();
        let random = random_assign(&boxes, &spec, width, height);
        let adaptive = atss_assign(&boxes, &spec, width, height, k)?;
        for (i, gt) in page_gts.iter().enumerate() {
            let n_random = random.per_gt[i].positives.len();
            let n_atss = adaptive.per_gt[i].positives.len();
            writeln!(
                out,
                "{},{},{:.6},{},{}",
                page_id,
                gt.class,
                gt.bbox.area(),
                n_random,
                n_atss
            )?;
            random_samples.push(GtSample { area: gt.bbox.area(), positives: n_random });
            atss_samples.push(GtSample { area: gt.bbox.area(), positives: n_atss });
        }
    }
    let random_stats = ImbalanceStats::from_samples(random_samples);
    let atss_stats = ImbalanceStats::from_samples(atss_samples);
    writeln!(
        out,
        "# pearson log10(area) vs positives: random={:.6}, atss={:.6}",
        random_stats.log_area_correlation, atss_stats.log_area_correlation
    )?;
    out.flush()?;
    Ok(())
}

fn run_fpn_coverage(args: FpnCoverageArgs) -> Result<()> {
    let config = RunConfig::default();
    let spec = pyramid_spec(&args.pyramid, &config)?;
    let gts = load_gt(&args.gt)?;
    let report = coverage_report(&gts, &spec);

    let mut out = open_output(args.output.out.as_deref())?;
    writeln!(out, "page_id,class,short_side,levels,detectable")?;
    for row in &report.rows {
        let levels = row
            .levels
            .iter()
            .map(u8::to_string)
            .collect::<Vec<_>>()
            .join("|");
        writeln!(
            out,
            "{},{},{:.6},{},{}",
            row.page_id,
            row.class,
            row.short_side,
            levels,
            row.detectable()
        )?;
    }
    for class in FormulaClass::ALL {
        let summary = report.summary(class);
        writeln!(out, "# undetectable {}: {}/{}", class, summary.undetectable, summary.total)?;
    }
    out.flush()?;
    Ok(())
}

fn run_decode(args: DecodeArgs) -> Result<()> {
    let config = RunConfig::default();
    let spec = pyramid_spec(&args.pyramid, &config)?;
    let bounds = match (args.image_width, args.image_height) {
        (Some(w), Some(h)) => Some((w, h)),
        _ => None,
    };

    let file = File::open(&args.input)
        .with_context(|| format!("cannot open {}", args.input.display()))?;
    let requests = formats::parse_decode_requests(file)
        .with_context(|| format!("failed to parse {}", args.input.display()))?;

    let mut out = open_output(args.output.out.as_deref())?;
    for (idx, request) in requests.iter().enumerate() {
        let record = || format!("record {}", idx + 1);
        let [left, top, right, bottom] = &request.dists;
        let sides: Vec<SideDistribution> = [left, top, right, bottom]
            .into_iter()
            .map(|probs| SideDistribution::new(probs.clone()))
            .collect::<Result<_, _>>()
            .with_context(record)?;
        let point = GridPoint { x: request.x, y: request.y, level: request.level };
        let bbox = decode_box(&point, &sides[0], &sides[1], &sides[2], &sides[3], &spec, bounds)
            .with_context(record)?;
        writeln!(out, "{}", formats::format_decoded_box(&request.page_id, &bbox))?;
    }
    out.flush()?;
    Ok(())
}
