use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use seal_core::graph::{load_dataset, write_dataset, HierarchicalGraph};
use seal_core::mi::{verify_theorems, SizeSpec};
use seal_core::par::Exec;
use seal_core::plot;
use seal_core::synthgen::{instance_stats, synthesize_dataset, write_stats_csv, GeneratorKind};
use seal_core::trainer::{
    evaluate, false_prediction_curve, load_checkpoint, train, write_checkpoint, Evaluation, Mode,
};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Split};
use crate::error::{UsageError, EXIT_INTERNAL};
use crate::output::write_atomic;
use crate::Command;

pub const METRICS_HEADER: &str = "mode,accuracy,macro_f1";

pub fn run(cmd: Command, mut cfg: ExperimentConfig, exec: Exec) -> anyhow::Result<u8> {
    match cmd {
        Command::Gen { out, stats, seed } => {
            if let Some(s) = seed {
                cfg.synth.seed = s;
            }
            gen(
                &cfg,
                out.as_deref().unwrap_or(&cfg.paths.dataset),
                stats.as_deref().unwrap_or(&cfg.paths.stats),
                exec,
            )
        }
        Command::Train {
            dataset,
            out_dir,
            mode,
            seed,
            lambda,
            epochs,
        } => {
            if let Some(m) = mode {
                cfg.train.mode = m.parse()?;
            }
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            if let Some(l) = lambda {
                cfg.train.lambda = l;
            }
            if let Some(e) = epochs {
                cfg.train.epochs_per_iteration = e;
            }
            if let Some(d) = dataset {
                cfg.paths.dataset = d;
            }
            if let Some(o) = out_dir {
                cfg.paths.out_dir = o;
            }
            train_cmd(&cfg, exec)
        }
        Command::Eval {
            checkpoints,
            dataset,
            split,
            out,
            curve,
            lambda_grid,
        } => {
            let dataset = dataset.unwrap_or(cfg.paths.dataset);
            let split = split.unwrap_or(cfg.eval.split);
            let grid = lambda_grid.unwrap_or(cfg.eval.lambda_grid);
            eval(
                &checkpoints,
                &dataset,
                split,
                out.as_deref(),
                curve.as_deref(),
                &grid,
                exec,
            )
        }
        Command::VerifyMi {
            trials,
            sizes,
            seed,
            out,
        } => {
            let v = cfg.verify;
            verify(
                trials.unwrap_or(v.trials),
                &sizes.unwrap_or(v.sizes),
                seed.unwrap_or(v.seed),
                out.as_deref(),
                exec,
            )
        }
        Command::Plot { kind, input, out } => {
            let points = plot::read_series(kind, &input)?;
            let doc = plot::render(kind, &points);
            write_atomic(&out, |w| Ok(w.write_all(doc.as_bytes())?))?;
            println!("wrote {} ({} points)", out.display(), points.len());
            Ok(0)
        }
        Command::Report { metrics, out } => report(&metrics, out.as_deref()),
    }
}

fn load(path: &Path) -> anyhow::Result<HierarchicalGraph> {
    load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn gen(cfg: &ExperimentConfig, out: &Path, stats_path: &Path, exec: Exec) -> anyhow::Result<u8> {
    let h = synthesize_dataset(&cfg.synth, exec)?;
    write_atomic(out, |w| Ok(write_dataset(&h, w)?))?;
    let stats = instance_stats(&h);
    write_atomic(stats_path, |w| Ok(write_stats_csv(&stats, w)?))?;

    println!(
        "{} instances, {} hierarchy edges, {} labeled / {} unlabeled / {} test",
        h.len(),
        h.hier_edges.len(),
        h.splits.labeled.len(),
        h.splits.unlabeled.len(),
        h.splits.test.len()
    );
    println!(
        "{:<6} {:<16} {:>6} {:>10} {:>10} {:>9}",
        "class", "generator", "count", "nodes", "edges", "density"
    );
    for s in &stats {
        let name = GeneratorKind::ALL.get(s.class).map_or("?", |g| g.name());
        println!(
            "{:<6} {:<16} {:>6} {:>10.2} {:>10.2} {:>9.4}",
            s.class, name, s.count, s.mean_nodes, s.mean_edges, s.mean_density
        );
    }
    println!("wrote {} and {}", out.display(), stats_path.display());
    Ok(0)
}

fn train_cmd(cfg: &ExperimentConfig, exec: Exec) -> anyhow::Result<u8> {
    let h = load(&cfg.paths.dataset)?;
    let (state, report) = train(&h, &cfg.train, exec)?;
    let dir = &cfg.paths.out_dir;
    write_atomic(&dir.join("model.json"), |w| {
        Ok(write_checkpoint(&state, w)?)
    })?;
    write_atomic(&dir.join("report.csv"), |w| Ok(report.write_csv(w)?))?;
    write_atomic(&dir.join("epochs.csv"), |w| Ok(report.write_epochs_csv(w)?))?;
    write_atomic(&dir.join("selection.json"), |w| {
        Ok(report.write_selection_log(w)?)
    })?;
    let resolved = cfg.to_toml()?;
    write_atomic(&dir.join("config.toml"), |w| {
        Ok(w.write_all(resolved.as_bytes())?)
    })?;

    let metrics = if h.splits.test.is_empty() {
        None
    } else {
        Some(evaluate(&state, &h, &h.splits.test, exec)?)
    };
    write_atomic(&dir.join("metrics.csv"), |w| {
        writeln!(w, "{METRICS_HEADER}")?;
        if let Some(m) = &metrics {
            writeln!(w, "{},{},{}", state.mode, m.accuracy, m.macro_f1)?;
        }
        Ok(())
    })?;

    println!("{}: {} iteration(s)", state.mode, report.records.len());
    if let Some(m) = &metrics {
        println!(
            "test accuracy {:.4}, macro-F1 {:.4}",
            m.accuracy, m.macro_f1
        );
    }
    println!("wrote {}", dir.display());
    Ok(0)
}

fn split_ids(h: &HierarchicalGraph, split: Split) -> &[usize] {
    match split {
        Split::Labeled => &h.splits.labeled,
        Split::Unlabeled => &h.splits.unlabeled,
        Split::Test => &h.splits.test,
    }
}

fn eval(
    checkpoints: &[PathBuf],
    dataset: &Path,
    split: Split,
    out: Option<&Path>,
    curve: Option<&Path>,
    grid: &[usize],
    exec: Exec,
) -> anyhow::Result<u8> {
    let h = load(dataset)?;
    let mut states = Vec::with_capacity(checkpoints.len());
    let mut rows: Vec<(String, Mode, Evaluation)> = Vec::new();
    for path in checkpoints {
        let state = load_checkpoint(path)
            .with_context(|| format!("loading checkpoint {}", path.display()))?;
        let ev = evaluate(&state, &h, split_ids(&h, split), exec)
            .with_context(|| format!("evaluating {}", path.display()))?;
        rows.push((path.display().to_string(), state.mode, ev));
        states.push(state);
    }
    let write_rows = |w: &mut dyn Write| -> anyhow::Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["checkpoint", "mode", "accuracy", "macro_f1"])?;
        for (path, mode, ev) in &rows {
            csv.write_record([
                path.as_str(),
                mode.as_str(),
                &ev.accuracy.to_string(),
                &ev.macro_f1.to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    };
    match out {
        Some(p) => write_atomic(p, write_rows)?,
        None => write_rows(&mut io::stdout().lock())?,
    }

    if let Some(curve_path) = curve {
        if grid.is_empty() || grid.contains(&0) {
            return Err(UsageError("lambda grid values must be positive".into()).into());
        }
        let points = false_prediction_curve(&states, &h, grid, exec)?;
        write_atomic(curve_path, |w| {
            writeln!(w, "lambda,false_prediction_rate")?;
            for (l, r) in &points {
                writeln!(w, "{l},{r}")?;
            }
            Ok(())
        })?;
        eprintln!("wrote {}", curve_path.display());
    }
    Ok(0)
}

fn verify(
    trials: usize,
    sizes: &str,
    seed: u64,
    out: Option<&Path>,
    exec: Exec,
) -> anyhow::Result<u8> {
    let sizes: SizeSpec = sizes.parse()?;
    let report = verify_theorems(trials, sizes, seed, exec);
    match out {
        Some(p) => {
            write_atomic(p, |w| Ok(report.write_csv(w)?))?;
            for r in &report.rows {
                println!(
                    "{:<28} {} (max violation {:.3e}, tolerance {:.0e})",
                    r.check,
                    if r.pass { "pass" } else { "FAIL" },
                    r.max_violation,
                    r.tolerance
                );
            }
        }
        None => report.write_csv(io::stdout().lock())?,
    }
    if report.passed() {
        Ok(0)
    } else {
        eprintln!("mutual-information identities violated");
        Ok(EXIT_INTERNAL)
    }
}

#[derive(Debug, Deserialize)]
struct MetricsRow {
    mode: String,
    accuracy: f64,
    macro_f1: f64,
}

#[derive(Debug, PartialEq, Serialize)]
pub struct Summary {
    pub mode: String,
    pub runs: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_macro_f1: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; zero for a single run.
fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn summarize(rows: &[MetricsRow]) -> Vec<Summary> {
    let mut by_mode: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let e = by_mode.entry(&r.mode).or_default();
        e.0.push(r.accuracy);
        e.1.push(r.macro_f1);
    }
    by_mode
        .into_iter()
        .map(|(mode, (acc, f1))| Summary {
            mode: mode.to_string(),
            runs: acc.len(),
            mean_accuracy: mean(&acc),
            std_accuracy: std_dev(&acc),
            mean_macro_f1: mean(&f1),
        })
        .collect()
}

fn report(paths: &[PathBuf], out: Option<&Path>) -> anyhow::Result<u8> {
    let mut rows = Vec::new();
    for p in paths {
        let mut rdr =
            csv::Reader::from_path(p).map_err(|e| UsageError(format!("{}: {e}", p.display())))?;
        for rec in rdr.deserialize::<MetricsRow>() {
            rows.push(rec.map_err(|e| UsageError(format!("{}: {e}", p.display())))?);
        }
    }
    if rows.is_empty() {
        return Err(UsageError("no metrics rows to aggregate".into()).into());
    }
    let summary = summarize(&rows);
    let write = |w: &mut dyn Write| -> anyhow::Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        for s in &summary {
            csv.serialize(s)?;
        }
        csv.flush()?;
        Ok(())
    };
    match out {
        Some(p) => write_atomic(p, write)?,
        None => write(&mut io::stdout().lock())?,
    }
    Ok(0)
}
