//! File outputs: per-step metrics CSV, agent and edge snapshots, churn log
//! and summary JSON.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Ensemble, RunOutput, RunSummary, ScenarioConfig, Snapshot, SweepPoint};
use crate::Result;

pub const SOFTWARE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub software_version: String,
    pub ensemble_size: usize,
    pub window: usize,
    pub strategies: BTreeMap<String, RunSummary>,
    pub config: ScenarioConfig,
}

impl SummaryDocument {
    pub fn new(config: &ScenarioConfig, summaries: &[RunSummary]) -> Self {
        Self {
            software_version: SOFTWARE_VERSION.to_string(),
            ensemble_size: summaries.first().map_or(0, |s| s.ensemble_size),
            window: config.window,
            strategies: summaries.iter().map(|s| (s.strategy.name().to_string(), s.clone())).collect(),
            config: config.clone(),
        }
    }
}

pub fn write_summary_json(path: &Path, doc: &SummaryDocument) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// `metrics.csv`, `churn.csv` (when churn happened) and `snapshots/`.
pub fn write_run(dir: &Path, run: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("metrics.csv"))?;
    for record in &run.series {
        w.serialize(record)?;
    }
    w.flush()?;

    if !run.churn_events.is_empty() {
        let mut w = csv::Writer::from_path(dir.join("churn.csv"))?;
        w.write_record(["step", "kind", "count", "active_after"])?;
        for e in &run.churn_events {
            let kind = match e.kind {
                super::ChurnKind::Remove => "remove",
                super::ChurnKind::Add => "add",
            };
            w.write_record([
                e.step.to_string(),
                kind.to_string(),
                e.agents.len().to_string(),
                e.active_after.to_string(),
            ])?;
        }
        w.flush()?;
    }

    if !run.snapshots.is_empty() {
        let snap_dir = dir.join("snapshots");
        fs::create_dir_all(&snap_dir)?;
        for snap in &run.snapshots {
            write_snapshot(&snap_dir, snap)?;
        }
    }
    Ok(())
}

fn write_snapshot(dir: &Path, snap: &Snapshot) -> Result<()> {
    let dims = snap.agents.first().map_or(2, |a| a.position.len());
    let mut w = csv::Writer::from_path(dir.join(format!("agents_{:06}.csv", snap.step)))?;
    let mut header = vec!["id", "x", "y"];
    if dims == 3 {
        header.push("z");
    }
    header.extend(["radius", "degree", "active"]);
    w.write_record(&header)?;
    for a in &snap.agents {
        let mut row = vec![a.id.to_string()];
        row.extend(a.position.iter().map(|c| c.to_string()));
        row.push(a.radius.to_string());
        row.push(a.degree.to_string());
        row.push(u8::from(a.active).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join(format!("edges_{:06}.csv", snap.step)))?;
    for e in &snap.edges {
        w.serialize(e)?;
    }
    if snap.edges.is_empty() {
        w.write_record(["id_a", "id_b", "distance"])?;
    }
    w.flush()?;
    Ok(())
}

/// `run_000/`, `run_001/`, ... plus nothing else; summaries are written by the caller.
pub fn write_ensemble(dir: &Path, ensemble: &Ensemble) -> Result<()> {
    for (k, run) in ensemble.runs.iter().enumerate() {
        write_run(&dir.join(format!("run_{k:03}")), run)?;
    }
    Ok(())
}

/// One sub-directory per density plus `sweep.json` listing every summary.
pub fn write_sweep(dir: &Path, config: &ScenarioConfig, points: &[SweepPoint]) -> Result<()> {
    fs::create_dir_all(dir)?;
    #[derive(Serialize)]
    struct Row<'a> {
        rho: f64,
        side_length: f64,
        summary: &'a RunSummary,
    }
    let rows: Vec<Row> = points
        .iter()
        .map(|p| Row {
            rho: p.rho,
            side_length: p.ensemble.summary.side_length,
            summary: &p.ensemble.summary,
        })
        .collect();
    for p in points {
        let sub = dir.join(format!("rho_{}", p.rho));
        write_ensemble(&sub, &p.ensemble)?;
        let doc = SummaryDocument::new(&config.at_density(p.rho), std::slice::from_ref(&p.ensemble.summary));
        write_summary_json(&sub.join("summary.json"), &doc)?;
    }
    let doc = serde_json::json!({
        "software_version": SOFTWARE_VERSION,
        "points": rows,
        "config": config,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    fs::write(dir.join("sweep.json"), text)?;
    Ok(())
}
