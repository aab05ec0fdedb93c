use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use drivelab::harness::{
    aggregate, emit_report, eval_frame_skip, evaluate_scenario, load_checkpoint, record_phase, relative,
    train_baseline, train_coupled, trial_seeds, write_config, AdversaryPolicy, EvalPolicy, EvaluationReport,
    PhaseRecord, ReportFormat, RunConfig,
};
use drivelab::qnet::read_meta;
use drivelab::sim::ScenarioKind;
use drivelab::{Error, Result};

#[derive(Parser)]
#[command(name = "drivelab", version, about = "Adversarial self-play driving lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run config (JSON). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "runs/default")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train the protagonist alone on the empty course.
    TrainBaseline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<u64>,
        /// Continue from the latest checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Co-train protagonist and adversary, both cloned from the baseline.
    TrainCoupled {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<u64>,
        /// Baseline checkpoint [default: OUT/baseline/protagonist.ckpt].
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate a protagonist checkpoint with greedy actions.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        /// none, traffic, static, adversary (or 1-4), or all.
        #[arg(long, default_value = "all")]
        scenario: String,
        /// [default: OUT/coupled/protagonist.ckpt]
        #[arg(long)]
        protagonist: Option<PathBuf>,
        /// Adversary checkpoint, or `random`.
        #[arg(long, default_value = "random")]
        adversary: String,
        /// Model name used in reports [default: checkpoint tag].
        #[arg(long)]
        model: Option<String>,
    },
    /// Combine evaluation reports under OUT/eval into comparison tables.
    Report {
        #[arg(long, default_value = "runs/default")]
        out: PathBuf,
        /// Model the change columns compare against.
        #[arg(long, default_value = "baseline")]
        baseline: String,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Print a checkpoint's header.
    InspectCkpt { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn phase(out: &Path, seeds: Vec<u64>, files: &[&Path]) -> PhaseRecord {
    PhaseRecord { seeds, files: files.iter().map(|f| relative(out, f)).collect() }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::TrainBaseline { common, episodes, resume } => {
            let mut cfg = load_config(&common)?;
            if let Some(n) = episodes {
                cfg.training.baseline_episodes = n;
            }
            write_config(&common.out, &cfg)?;
            let s = train_baseline(&cfg, &common.out, resume)?;
            let csv = s.dir.join("episodes.csv");
            record_phase(&common.out, &cfg, "baseline", phase(&common.out, s.seeds, &[&s.protagonist, &csv]))?;
            println!("baseline checkpoint: {}", s.protagonist.display());
        }
        Command::TrainCoupled { common, episodes, baseline, resume } => {
            let mut cfg = load_config(&common)?;
            if let Some(n) = episodes {
                cfg.training.coupled_episodes = n;
            }
            write_config(&common.out, &cfg)?;
            let base = baseline.unwrap_or_else(|| common.out.join("baseline/protagonist.ckpt"));
            let s = train_coupled(&cfg, &common.out, &base, resume)?;
            let adv = s.adversary.clone().expect("coupled run saves an adversary");
            let csv = s.dir.join("episodes.csv");
            record_phase(&common.out, &cfg, "coupled", phase(&common.out, s.seeds, &[&s.protagonist, &adv, &csv]))?;
            println!("protagonist checkpoint: {}", s.protagonist.display());
            println!("adversary checkpoint: {}", adv.display());
        }
        Command::Eval { common, trials, scenario, protagonist, adversary, model } => {
            let cfg = load_config(&common)?;
            let kinds = if scenario == "all" {
                cfg.scenario.all().to_vec()
            } else {
                vec![cfg.scenario.resolve(&scenario).ok_or_else(|| Error::Config(format!("unknown scenario `{scenario}`")))?]
            };
            let track = cfg.track()?;
            let p_path = protagonist.unwrap_or_else(|| common.out.join("coupled/protagonist.ckpt"));
            let (p_meta, p_net) = load_checkpoint(&p_path, &cfg)?;
            let adv = if adversary == "random" {
                None
            } else {
                Some(load_checkpoint(Path::new(&adversary), &cfg)?)
            };
            let adv_policy = match &adv {
                Some((m, n)) => AdversaryPolicy::Greedy { net: n, frame_skip: eval_frame_skip(&cfg, m) },
                None => AdversaryPolicy::Random { frame_skip: cfg.schedules.frame_skip.long },
            };
            let policy = EvalPolicy { protagonist: &p_net, frame_skip: eval_frame_skip(&cfg, &p_meta), adversary: adv_policy };
            let model = model.unwrap_or_else(|| p_meta.tag.clone());
            let dir = common.out.join("eval").join(&model);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let n = trials.unwrap_or(cfg.training.eval_trials);
            let mut all_seeds = Vec::new();
            let mut files = Vec::new();
            for kind in &kinds {
                let seeds = trial_seeds(cfg.seed, kind, n);
                let rows = evaluate_scenario(&cfg, &track, &policy, kind, &seeds)?;
                let report = aggregate(&model, kind.name(), &rows);
                let rows_path = dir.join(format!("{}.csv", kind.name()));
                let mut w = csv::Writer::from_path(&rows_path)?;
                for r in &rows {
                    w.serialize(r)?;
                }
                w.flush().map_err(|e| Error::io(&rows_path, e))?;
                let report_path = dir.join(format!("{}.json", kind.name()));
                std::fs::write(&report_path, serde_json::to_string_pretty(&report)?).map_err(|e| Error::io(&report_path, e))?;
                println!(
                    "{model} {:<9} success@95 {:.2}  mttf {:.1} s  distance {:.3}  ci {:.2}{}",
                    kind.name(),
                    report.success_95,
                    report.mttf,
                    report.mean_distance,
                    report.mean_ci,
                    report.hit_rate.map(|h| format!("  hit rate {h:.2}")).unwrap_or_default()
                );
                all_seeds.extend(seeds);
                files.push(rows_path);
                files.push(report_path);
            }
            let file_refs: Vec<&Path> = files.iter().map(|p| p.as_path()).collect();
            record_phase(&common.out, &cfg, &format!("eval/{model}"), phase(&common.out, all_seeds, &file_refs))?;
        }
        Command::Report { out, baseline, format } => {
            let eval_dir = out.join("eval");
            let mut reports: Vec<EvaluationReport> = Vec::new();
            let mut models: Vec<PathBuf> = std::fs::read_dir(&eval_dir)
                .map_err(|e| Error::io(&eval_dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_dir())
                .collect();
            models.sort();
            for dir in models {
                let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
                    .map_err(|e| Error::io(&dir, e))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x == "json"))
                    .collect();
                files.sort();
                for f in files {
                    let text = std::fs::read_to_string(&f).map_err(|e| Error::io(&f, e))?;
                    reports.push(serde_json::from_str(&text)?);
                }
            }
            let (fmt, name) = match format {
                Format::Csv => (ReportFormat::Csv, "report.csv"),
                Format::Json => (ReportFormat::Json, "report.json"),
            };
            let path = out.join(name);
            emit_report(&reports, &baseline, fmt, &path)?;
            println!("{} rows written to {}", reports.len(), path.display());
        }
        Command::InspectCkpt { path } => {
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let meta = read_meta(&bytes)?;
            println!("format version: {}", drivelab::qnet::FORMAT_VERSION);
            println!("role: {}", meta.role);
            println!("tag: {}", meta.tag);
            println!("config hash: {}", meta.config_hash);
            println!("observation: {} beams x {} frames", meta.layout.beams, meta.layout.frames);
            println!("shapes: {:?}", meta.shapes);
            println!("steps: {}  learn steps: {}  episodes: {}", meta.steps, meta.learn_steps, meta.episodes);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Command::Eval { scenario, .. } = &cli.command {
        if scenario != "all" && ScenarioKind::from_name(scenario).is_none() {
            eprintln!("error: unknown scenario `{scenario}` (expected none, traffic, static, adversary, 1-4 or all)");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
