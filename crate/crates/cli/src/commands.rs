use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use specprobe_core::feature_store::{import_csv, load_manifest, read_ftrx, write_ftrx};
use specprobe_core::logme::logme_score;
use specprobe_core::pipeline::{analyze_checkpoint, probe_component, AnalysisOptions, FeatureSource, SplitOptions};
use specprobe_core::probe::ProbeConfig;
use specprobe_core::ranking::{analyze_trajectory, render_csv, render_markdown, CheckpointMeasurement};
use specprobe_core::spectral::{split_batches, split_components, Component, SvdScope};
use specprobe_core::synthgen::{gen_features, gen_trajectory, SynthSpec, TrajectorySpec, MANIFEST_FILE};
use specprobe_core::{Error, Result};

use crate::{
    Format, GlobalOpts, ImportArgs, LogmeArgs, LogmeSplit, ProbeArgs, ProbeFlags, SplitArgs, SplitFlags,
    SynthBase, SynthFeaturesArgs, SynthTrajectoryArgs, TrajectoryArgs,
};

/// Writes the command's single output document to `--output` or stdout.
fn emit(g: &GlobalOpts, doc: &str) -> Result<()> {
    let mut doc = doc.to_string();
    if !doc.ends_with('\n') {
        doc.push('\n');
    }
    match &g.output {
        Some(path) => fs::write(path, doc).map_err(|e| Error::io(path, e)),
        None => {
            print!("{doc}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

fn json_only(g: &GlobalOpts, command: &str) -> Result<()> {
    if g.format == Format::Json {
        Ok(())
    } else {
        Err(Error::invalid(format!("{command} only produces json output")))
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn probe_config(g: &GlobalOpts, p: &ProbeFlags) -> Result<ProbeConfig> {
    let cfg = ProbeConfig {
        epochs: p.epochs as usize,
        batch_size: p.batch as usize,
        learning_rate: p.lr,
        seed: g.seed,
        ..Default::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn split_options(s: &SplitFlags) -> SplitOptions {
    SplitOptions {
        threshold: s.energy,
        scope: s.svd_scope,
    }
}

pub fn import(_g: &GlobalOpts, a: ImportArgs) -> Result<()> {
    let imported = import_csv(&a.csv, &a.label_col)?;
    for w in &imported.warnings {
        eprintln!("warning: {w}");
    }
    write_ftrx(&imported.matrix, &a.out)?;
    let m = &imported.matrix;
    println!("n={} d={} classes={}", m.n(), m.d(), m.num_classes());
    Ok(())
}

pub fn split(g: &GlobalOpts, a: SplitArgs) -> Result<()> {
    json_only(g, "split")?;
    let f = read_ftrx(&a.features)?;
    let whole = split_components(&f.to_dmatrix(), a.split.energy)?;
    let mut sidecar = json!({
        "k": whole.k,
        "energy_ratio": whole.energy_ratio,
        "sigma": whole.factors.sigma,
    });
    let (main, resid) = match a.split.svd_scope {
        SvdScope::Full => (f.with_values(&whole.main)?, f.with_values(&whole.residual)?),
        SvdScope::Batch => {
            let (main, resid, batches) = split_batches(&f, a.split.energy, a.batch as usize)?;
            sidecar["batches"] = serde_json::to_value(batches)?;
            (main, resid)
        }
    };
    sidecar["svd_scope"] = serde_json::to_value(a.split.svd_scope)?;
    sidecar["threshold"] = json!(a.split.energy);

    write_ftrx(&main, with_suffix(&a.out_prefix, ".main.ftrx"))?;
    write_ftrx(&resid, with_suffix(&a.out_prefix, ".resid.ftrx"))?;
    let doc = to_json(&sidecar)?;
    let sidecar_path = with_suffix(&a.out_prefix, ".json");
    fs::write(&sidecar_path, format!("{doc}\n")).map_err(|e| Error::io(&sidecar_path, e))?;
    emit(g, &doc)
}

#[derive(Serialize)]
struct ProbeReport {
    component: Component,
    #[serde(skip_serializing_if = "Option::is_none")]
    svd_scope: Option<SvdScope>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    energy_ratio: Option<f64>,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    seed: u64,
    train_accuracy: f64,
    test_accuracy: Option<f64>,
    final_loss: Option<f64>,
    loss_history: Vec<f64>,
}

pub fn probe(g: &GlobalOpts, a: ProbeArgs) -> Result<()> {
    let cfg = probe_config(g, &a.probe)?;
    let train = read_ftrx(&a.train)?;
    let test = read_ftrx(&a.test)?;
    let split = split_options(&a.split);
    let (k, energy_ratio, scope) = if a.component == Component::Full {
        (None, None, None)
    } else {
        let whole = split_components(&train.to_dmatrix(), split.threshold)?;
        (Some(whole.k), Some(whole.energy_ratio), Some(split.scope))
    };
    let result = probe_component(&train, &test, &cfg, a.component, split)?;
    let report = ProbeReport {
        component: a.component,
        svd_scope: scope,
        k,
        energy_ratio,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        seed: cfg.seed,
        train_accuracy: result.train_accuracy,
        test_accuracy: result.test_accuracy,
        final_loss: result.train_loss_history.last().copied(),
        loss_history: result.train_loss_history,
    };
    let doc = match g.format {
        Format::Json => to_json(&report)?,
        Format::Markdown => {
            let mut out = String::from("| metric | value |\n| :--- | ---: |\n");
            let _ = writeln!(out, "| component | {:?} |", report.component);
            if let Some(k) = report.k {
                let _ = writeln!(out, "| k | {k} |");
            }
            let _ = writeln!(out, "| train accuracy | {:.4} |", report.train_accuracy);
            if let Some(t) = report.test_accuracy {
                let _ = writeln!(out, "| test accuracy | {t:.4} |");
            }
            if let Some(l) = report.final_loss {
                let _ = writeln!(out, "| final loss | {l:.6} |");
            }
            out
        }
        Format::Csv => {
            let mut out = String::from("epoch,loss\n");
            for (i, l) in report.loss_history.iter().enumerate() {
                let _ = writeln!(out, "{},{l}", i + 1);
            }
            out
        }
    };
    emit(g, &doc)
}

pub fn logme(g: &GlobalOpts, a: LogmeArgs) -> Result<()> {
    let f = read_ftrx(&a.features)?;
    let result = logme_score(&f)?;
    if !result.converged {
        eprintln!("warning: LogME did not converge for every class");
    }
    let doc = match g.format {
        Format::Json => to_json(&result)?,
        Format::Markdown => {
            let mut out = format!("LogME score: {:.6}\n\n", result.score);
            out.push_str("| class | alpha | beta | evidence | iterations | converged |\n");
            out.push_str("| ---: | ---: | ---: | ---: | ---: | :---: |\n");
            for c in &result.per_class {
                let _ = writeln!(
                    out,
                    "| {} | {:.6e} | {:.6e} | {:.6} | {} | {} |",
                    c.class, c.alpha, c.beta, c.evidence, c.iterations, c.converged
                );
            }
            out
        }
        Format::Csv => {
            let mut out = String::from("class,alpha,beta,evidence,iterations,converged\n");
            for c in &result.per_class {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    c.class, c.alpha, c.beta, c.evidence, c.iterations, c.converged
                );
            }
            out
        }
    };
    emit(g, &doc)
}

fn describe(m: &CheckpointMeasurement) -> String {
    if let Some(e) = &m.error {
        return format!("epoch {}: failed: {e}", m.epoch);
    }
    let mut line = format!("epoch {}:", m.epoch);
    let mut field = |name: &str, v: Option<f64>| {
        if let Some(v) = v {
            let _ = write!(line, " {name}={v:.4}");
        }
    };
    field("fe", m.fe_accuracy);
    field("main", m.main_accuracy);
    field("resid", m.residual_accuracy);
    field("logme", m.logme);
    if let Some(k) = m.k {
        let _ = write!(line, " k={k}");
    }
    line
}

pub fn trajectory(g: &GlobalOpts, a: TrajectoryArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let opts = AnalysisOptions {
        probe: probe_config(g, &a.probe)?,
        split: a.with_split.then(|| split_options(&a.split)),
        logme: match (a.with_logme, a.logme_split) {
            (false, _) => None,
            (true, Some(LogmeSplit::Train)) => Some(FeatureSource::Train),
            (true, Some(LogmeSplit::Test)) => Some(FeatureSource::Test),
            (true, None) => return Err(Error::invalid("--with-logme needs --logme-split train|test")),
        },
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(g.threads as usize)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {} worker threads: {e}", g.threads)))?;
    let mut measurements: Vec<CheckpointMeasurement> = pool.install(|| {
        manifest
            .checkpoints
            .par_iter()
            .map(|rec| {
                let m = analyze_checkpoint(rec, &opts);
                eprintln!("{}", describe(&m));
                m
            })
            .collect()
    });
    measurements.sort_by_key(|m| m.epoch);

    let report = analyze_trajectory(&manifest, &measurements)?;
    let doc = match g.format {
        Format::Json => to_json(&report)?,
        Format::Markdown => render_markdown(&report),
        Format::Csv => render_csv(&report),
    };
    emit(g, &doc)
}

fn synth_spec(g: &GlobalOpts, b: &SynthBase) -> SynthSpec {
    SynthSpec {
        n: b.n,
        n_test: b.n_test,
        d: b.d,
        classes: b.classes,
        signal_dim: b.signal_dim,
        signal_scale: b.signal_scale,
        noise_scale: b.noise_scale,
        seed: g.seed,
    }
}

pub fn synth_features(g: &GlobalOpts, a: SynthFeaturesArgs) -> Result<()> {
    json_only(g, "synth features")?;
    let spec = synth_spec(g, &a.base);
    let (train, test) = gen_features(&spec)?;
    let train_path = with_suffix(&a.out_prefix, ".train.ftrx");
    let test_path = with_suffix(&a.out_prefix, ".test.ftrx");
    write_ftrx(&train, &train_path)?;
    write_ftrx(&test, &test_path)?;
    let doc = json!({
        "spec": spec,
        "train_features": train_path,
        "test_features": test_path,
    });
    emit(g, &to_json(&doc)?)
}

pub fn synth_trajectory(g: &GlobalOpts, a: SynthTrajectoryArgs) -> Result<()> {
    json_only(g, "synth trajectory")?;
    let tspec = TrajectorySpec::planted(a.checkpoints, a.peak, synth_spec(g, &a.base));
    gen_trajectory(&tspec, &a.out_dir)?;
    // echo the manifest as written, with paths relative to its directory
    let path = a.out_dir.join(MANIFEST_FILE);
    let written = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: serde_json::Value = serde_json::from_str(&written)?;
    emit(g, &to_json(&json!({ "manifest": path, "contents": manifest }))?)
}
