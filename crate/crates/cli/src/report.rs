use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;

use crate::run::FinalReport;

#[derive(Args)]
pub struct ReportArgs {
    /// Run directories containing final_report.json.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// One row per run. Columns: run_dir, run_id, regime, then the union of
/// metric columns in first-seen order; missing cells are empty.
pub fn run(a: ReportArgs) -> Result<()> {
    let mut rows = Vec::new();
    let mut columns: Vec<String> = Vec::new();
    for dir in &a.runs {
        let path = dir.join("final_report.json");
        if !path.is_file() {
            bail!("missing report file in {}", dir.display());
        }
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let report: FinalReport =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let cols = report.columns();
        for (k, _) in &cols {
            if !columns.contains(k) {
                columns.push(k.clone());
            }
        }
        rows.push((dir.display().to_string(), report, cols));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["run_dir".to_string(), "run_id".into(), "regime".into()];
    header.extend(columns.iter().cloned());
    w.write_record(&header)?;
    for (dir, report, cols) in rows {
        let mut rec = vec![dir, report.run_id, report.regime];
        for c in &columns {
            rec.push(
                cols.iter()
                    .find(|(k, _)| k == c)
                    .map(|(_, v)| v.clone())
                    .unwrap_or_default(),
            );
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().context("finishing CSV")?;
    match a.out {
        Some(p) => fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}
