use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thoraxseg::dataset::{load_masks, preprocess_to, read_radiograph, resample_nearest, Corpus, SplitPolicy};
use thoraxseg::evalbench::{
    aggregate, emit_report, evaluate_cases, save_overlay, AggregateReport, EvalCase, EvalOptions, Layout, Provenance,
    ReportRow,
};
use thoraxseg::metrics::records_to_csv;
use thoraxseg::trainer::{parse_override, train_two_fold, ExperimentConfig};
use thoraxseg::{postproc, Checkpoint, Error, PostprocParams, Result, Segmenter};

use crate::{Cli, Command, DataArgs, EvaluateArgs, ExperimentArgs, IngestArgs, PredictArgs, ReportArgs};

/// What `evaluate` leaves behind for `report`.
#[derive(Debug, Serialize, Deserialize)]
struct RunSummary {
    name: String,
    arch: String,
    loss: String,
    fine_tuned: bool,
    report: AggregateReport,
}

/// The cached fold assignment written by `ingest`.
#[derive(Debug, Serialize)]
struct SplitCache<'a> {
    data_root: &'a Path,
    fold1: &'a [String],
    fold2: &'a [String],
}

const SUMMARY_FILE: &str = "summary.json";
const METRICS_FILE: &str = "metrics.csv";
const SPLIT_FILE: &str = "split.json";

/// Run the parsed command; `Ok` carries the exit code.
pub fn run(cli: &Cli) -> Result<u8> {
    if cli.device != "cpu" {
        return Err(Error::Config(format!(
            "device `{}` is not supported; only `cpu` is available",
            cli.device
        )));
    }
    match &cli.command {
        Command::Ingest(a) => ingest(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Predict(a) => predict(a),
        Command::Report(a) => report(cli, a),
        Command::Verify => verify(cli),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn open_corpus(root: &Path, data: &DataArgs) -> Result<Corpus> {
    let mut corpus = Corpus::open(root)?;
    if data.any_size {
        corpus.policy = SplitPolicy::AnySize;
    }
    Ok(corpus)
}

fn no_data_root() -> Error {
    Error::Config("no data root: pass --data, set THORAXSEG_DATA_ROOT, or set [data] root in the config".into())
}

fn toml_string(p: &Path) -> String {
    serde_json::to_string(&p.to_string_lossy()).expect("string serializes")
}

fn load_experiment(cli: &Cli, args: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut overrides = Vec::new();
    if let Some(d) = &args.data.data {
        overrides.push(("data.root".to_string(), toml_string(d)));
    }
    if let Some(w) = &args.weights {
        overrides.push(("weights.path".to_string(), toml_string(w)));
    }
    for o in &args.overrides {
        overrides.push(parse_override(o)?);
    }
    if let Some(seed) = cli.seed {
        overrides.push(("trainer.seed".to_string(), seed.to_string()));
    }
    ExperimentConfig::load(&args.config, &overrides)
}

fn experiment_corpus(cfg: &ExperimentConfig, data: &DataArgs) -> Result<Corpus> {
    let root = cfg.data_root.as_deref().ok_or_else(no_data_root)?;
    open_corpus(root, data)
}

fn ingest(cli: &Cli, args: &IngestArgs) -> Result<u8> {
    let root = args.data.data.as_deref().ok_or_else(no_data_root)?;
    let corpus = open_corpus(root, &args.data)?;
    let split = corpus.split()?;
    for id in split.all_ids() {
        corpus.radiograph(id)?;
        load_masks(id, &corpus.masks_dir(), (args.size, args.size))?;
    }
    let cache = SplitCache {
        data_root: corpus.root(),
        fold1: &split.fold1,
        fold2: &split.fold2,
    };
    let path = cli.runs_dir.join(SPLIT_FILE);
    write(&path, serde_json::to_string_pretty(&cache)?)?;
    println!(
        "{} cases ok: fold 1 = {}, fold 2 = {}; split written to {}",
        split.len(),
        split.fold1.len(),
        split.fold2.len(),
        path.display()
    );
    Ok(0)
}

fn train(cli: &Cli, args: &ExperimentArgs) -> Result<u8> {
    let cfg = load_experiment(cli, args)?;
    let corpus = experiment_corpus(&cfg, &args.data)?;
    let split = corpus.split()?;
    let ids: Vec<String> = split.all_ids().cloned().collect();
    let samples = corpus.samples(&ids, cfg.train.arch.input_size)?;
    let (a, b) = train_two_fold(&cfg.train, &split, &samples)?;
    let run_root = cli.runs_dir.join(&cfg.train.name);
    write(&run_root.join("config.toml"), cfg.to_toml_string())?;
    for ckpt in [a, b] {
        let dir = Checkpoint::run_dir(&cli.runs_dir, &cfg.train.name, ckpt.meta.train_fold());
        ckpt.save(&dir)?;
        let last = ckpt.meta.loss_history.last().copied().unwrap_or(f64::NAN);
        println!("fold {}: final loss {last:.6}, saved to {}", ckpt.meta.train_fold(), dir.display());
    }
    Ok(0)
}

fn evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<u8> {
    let cfg = load_experiment(cli, &args.experiment)?;
    let corpus = experiment_corpus(&cfg, &args.experiment.data)?;
    let split = corpus.split()?;
    let name = &cfg.train.name;
    let out_dir = cli.report_dir.join(name);
    let opts = EvalOptions {
        post: cfg.postproc.clone(),
        ..EvalOptions::default()
    };
    let mut records = Vec::new();
    let mut meta = None;
    for train_fold in 1..=2u8 {
        let ckpt = Checkpoint::load(&Checkpoint::run_dir(&cli.runs_dir, name, train_fold))?;
        let test_fold = 3 - train_fold;
        let samples = corpus.samples(split.fold(test_fold)?, ckpt.meta.arch().input_size)?;
        let cases: Vec<EvalCase> = samples.into_iter().map(EvalCase::from).collect();
        let results = evaluate_cases(&ckpt.model, &Provenance::of(&ckpt), Some(test_fold), &cases, &opts)?;
        if !args.no_overlays {
            for result in &results {
                let case = cases.iter().find(|c| c.case_id == result.case_id).expect("result of a given case");
                let truth = case.truth.as_ref().expect("evaluated cases have ground truth");
                let image = corpus.radiograph(&case.case_id)?;
                for s in result.prediction.structures() {
                    let path = out_dir.join("overlays").join(format!("{}_{}.png", case.case_id, s.name()));
                    save_overlay(&path, &image, truth, &result.prediction, s)?;
                }
            }
        }
        records.extend(results.into_iter().flat_map(|r| r.records));
        meta = Some(ckpt.meta);
    }
    let meta = meta.expect("two folds evaluated");
    let report = aggregate(&records)?;
    for (s, st) in &report.structures {
        let macd = st.macd_mm.map_or("-".to_string(), |m| format!("{:.3}", m.mean));
        println!(
            "{s}: dice {:.3} jaccard {:.3} macd {macd} mm (n = {})",
            st.dice.mean, st.jaccard.mean, st.n_cases
        );
    }
    let summary = RunSummary {
        name: name.clone(),
        arch: meta.arch().name.key().to_string(),
        loss: meta.config.loss.kind.name().to_string(),
        fine_tuned: meta.arch().pretrained_encoder,
        report,
    };
    write(&out_dir.join(METRICS_FILE), records_to_csv(&records))?;
    write(&out_dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    println!("results written to {}", out_dir.display());
    Ok(0)
}

fn predict(args: &PredictArgs) -> Result<u8> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let base = if args.raw {
        PostprocParams::threshold_only()
    } else {
        PostprocParams::default()
    };
    let post = PostprocParams {
        threshold: args.threshold,
        ..base
    };
    post.validate()?;
    for path in &args.inputs {
        let image = read_radiograph(path, true, args.spacing_mm)?;
        let input = preprocess_to(&image, ckpt.meta.arch().input_size)?;
        let mut masks = postproc::apply(&ckpt.model.predict(&input)?, &post)?;
        if args.native_size {
            let (h, w) = image.pixels.shape();
            masks = masks.map_masks(|_, m| resample_nearest(m, h, w))?;
        }
        for written in postproc::write_masks(&masks, &args.out)? {
            println!("{}", written.display());
        }
    }
    Ok(0)
}

fn report(cli: &Cli, args: &ReportArgs) -> Result<u8> {
    let layout: Layout = args.layout.parse()?;
    let mut rows = Vec::with_capacity(args.runs.len());
    for run in &args.runs {
        let path = cli.report_dir.join(run).join(SUMMARY_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let summary: RunSummary = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        rows.push(ReportRow {
            key: match layout {
                Layout::LossTable => summary.loss,
                _ => summary.arch,
            },
            label: summary.name,
            fine_tuned: Some(summary.fine_tuned),
            report: summary.report,
        });
    }
    let r = emit_report(&rows, layout);
    let stem: PathBuf = cli.report_dir.join(layout.key());
    write(&stem.with_extension("md"), &r.markdown)?;
    write(&stem.with_extension("csv"), &r.csv)?;
    print!("{}", r.markdown);
    Ok(0)
}

fn verify(cli: &Cli) -> Result<u8> {
    let results = thoraxseg::verify::run_all(cli.seed.unwrap_or(0));
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} checks, {failed} failed", results.len());
    Ok(if failed == 0 { 0 } else { 2 })
}
