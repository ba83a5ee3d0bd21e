//! CSV and Markdown report files. Values are kept at full precision in
//! memory and rounded to three decimals only here.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::{DistanceMetric, EpsilonHeuristic};
use crate::error::{Error, Result};
use crate::metrics::MetricsRow;

pub const WB_CSV: &str = "wb_metrics.csv";
pub const MC_CSV: &str = "mc_metrics.csv";
pub const SUCCESS_CSV: &str = "success_vs_iteration.csv";
pub const REPORT_MD: &str = "report.md";

pub const WB_HEADER: [&str; 7] = ["iterations", "success_rate", "accuracy", "precision", "recall", "fpr", "f1"];
pub const MC_HEADER: [&str; 6] = ["epochs", "single_mi_accuracy", "set_mi_accuracy", "heuristic", "metric", "trials"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub epochs: u64,
    pub single_mi_accuracy: f64,
    pub set_mi_accuracy: f64,
    pub heuristic: EpsilonHeuristic,
    pub metric: DistanceMetric,
    pub trials: usize,
}

/// Tables for one model. `None` means the attack was not run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReportTables {
    pub title: String,
    pub whitebox: Option<Vec<MetricsRow>>,
    pub mc: Option<Vec<McRow>>,
}

fn f3(x: f64) -> String {
    format!("{x:.3}")
}

fn to_string(buf: Vec<u8>) -> String {
    String::from_utf8(buf).expect("csv output is UTF-8")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Metadata(format!("csv: {e}"))
}

fn sorted_wb(rows: &[MetricsRow]) -> Vec<MetricsRow> {
    let mut rows = rows.to_vec();
    rows.sort_by_key(|r| r.iteration);
    rows
}

fn sorted_mc(rows: &[McRow]) -> Vec<McRow> {
    let mut rows = rows.to_vec();
    // Stable: rows of one checkpoint keep their configured order.
    rows.sort_by_key(|r| r.epochs);
    rows
}

pub fn render_wb_csv(rows: &[MetricsRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::NoRows);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(WB_HEADER).map_err(csv_err)?;
    for r in sorted_wb(rows) {
        w.write_record([
            r.iteration.to_string(),
            f3(r.success_rate),
            f3(r.accuracy),
            f3(r.precision),
            f3(r.recall),
            f3(r.fpr),
            f3(r.f1),
        ])
        .map_err(csv_err)?;
    }
    Ok(to_string(w.into_inner().map_err(|e| Error::Metadata(e.to_string()))?))
}

pub fn render_mc_csv(rows: &[McRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::NoRows);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MC_HEADER).map_err(csv_err)?;
    for r in sorted_mc(rows) {
        w.write_record([
            r.epochs.to_string(),
            f3(r.single_mi_accuracy),
            f3(r.set_mi_accuracy),
            r.heuristic.to_string(),
            r.metric.to_string(),
            r.trials.to_string(),
        ])
        .map_err(csv_err)?;
    }
    Ok(to_string(w.into_inner().map_err(|e| Error::Metadata(e.to_string()))?))
}

/// Success rate against training iterations, one row per checkpoint.
pub fn render_success_csv(rows: &[MetricsRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::NoRows);
    }
    let mut out = String::from("iterations,success_rate\n");
    for r in sorted_wb(rows) {
        out.push_str(&format!("{},{}\n", r.iteration, f3(r.success_rate)));
    }
    Ok(out)
}

pub fn render_markdown(tables: &ReportTables) -> Result<String> {
    let mut md = format!("# {}\n", tables.title);
    if let Some(rows) = &tables.whitebox {
        if rows.is_empty() {
            return Err(Error::NoRows);
        }
        md.push_str("\n## White-box discriminator attack\n\n");
        md.push_str("| Iterations | Success Rate | Accuracy | Precision | Recall/TPR | FPR | F1 |\n");
        md.push_str("|---:|---:|---:|---:|---:|---:|---:|\n");
        let rows = sorted_wb(rows);
        for r in &rows {
            md.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} | {} |\n",
                r.iteration,
                f3(r.success_rate),
                f3(r.accuracy),
                f3(r.precision),
                f3(r.recall),
                f3(r.fpr),
                f3(r.f1)
            ));
        }
        let degenerate: Vec<String> = rows.iter().filter(|r| r.degenerate).map(|r| r.iteration.to_string()).collect();
        if !degenerate.is_empty() {
            md.push_str(&format!(
                "\nRows with an undefined (0/0) metric reported as 0: {}\n",
                degenerate.join(", ")
            ));
        }
        let mean = rows.iter().map(|r| r.success_rate).sum::<f64>() / rows.len() as f64;
        md.push_str(&format!("\nMean success rate: {}\n", f3(mean)));
    }
    if let Some(rows) = &tables.mc {
        if rows.is_empty() {
            return Err(Error::NoRows);
        }
        md.push_str("\n## Monte Carlo attack\n\n");
        md.push_str("| Epochs | Single MI Accuracy | Set MI Accuracy | Heuristic | Metric | Trials |\n");
        md.push_str("|---:|---:|---:|:---|:---|---:|\n");
        for r in sorted_mc(rows) {
            md.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} |\n",
                r.epochs,
                f3(r.single_mi_accuracy),
                f3(r.set_mi_accuracy),
                r.heuristic,
                r.metric,
                r.trials
            ));
        }
    }
    Ok(md)
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes the CSVs for every attack that ran plus `report.md`.
pub fn emit_reports(tables: &ReportTables, output_dir: &Path) -> Result<Vec<PathBuf>> {
    if tables.whitebox.is_none() && tables.mc.is_none() {
        return Err(Error::NoRows);
    }
    // Render everything first so an empty table writes nothing.
    let wb = tables
        .whitebox
        .as_deref()
        .map(|rows| Ok::<_, Error>((render_wb_csv(rows)?, render_success_csv(rows)?)))
        .transpose()?;
    let mc = tables.mc.as_deref().map(render_mc_csv).transpose()?;
    let md = render_markdown(tables)?;

    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let mut written = Vec::new();
    if let Some((wb_csv, success_csv)) = wb {
        written.push(write(output_dir.join(WB_CSV), &wb_csv)?);
        written.push(write(output_dir.join(SUCCESS_CSV), &success_csv)?);
    }
    if let Some(mc_csv) = mc {
        written.push(write(output_dir.join(MC_CSV), &mc_csv)?);
    }
    written.push(write(output_dir.join(REPORT_MD), &md)?);
    Ok(written)
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let header = reader.headers().map_err(csv_err)?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Metadata(format!("unexpected CSV header {:?}", header)));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    rec.get(i)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Metadata(format!("bad CSV field {i} in {rec:?}")))
}

/// Reads back a white-box CSV (values carry the file's 3-decimal precision).
pub fn parse_wb_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    check_header(&mut reader, &WB_HEADER)?;
    reader
        .records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(MetricsRow {
                iteration: field(&rec, 0)?,
                success_rate: field(&rec, 1)?,
                accuracy: field(&rec, 2)?,
                precision: field(&rec, 3)?,
                recall: field(&rec, 4)?,
                fpr: field(&rec, 5)?,
                f1: field(&rec, 6)?,
                degenerate: false,
            })
        })
        .collect()
}

pub fn parse_mc_csv(text: &str) -> Result<Vec<McRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    check_header(&mut reader, &MC_HEADER)?;
    reader
        .records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(McRow {
                epochs: field(&rec, 0)?,
                single_mi_accuracy: field(&rec, 1)?,
                set_mi_accuracy: field(&rec, 2)?,
                heuristic: rec.get(3).unwrap_or_default().parse()?,
                metric: rec.get(4).unwrap_or_default().parse()?,
                trials: field(&rec, 5)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half(iteration: u64) -> MetricsRow {
        MetricsRow {
            iteration,
            success_rate: 0.5,
            accuracy: 0.5,
            precision: 0.5,
            recall: 0.5,
            fpr: 0.5,
            f1: 0.5,
            degenerate: false,
        }
    }

    fn table3_row(epochs: u64, single: f64) -> McRow {
        McRow {
            epochs,
            single_mi_accuracy: single,
            set_mi_accuracy: 1.0,
            heuristic: EpsilonHeuristic::Median,
            metric: DistanceMetric::EuclideanRaw,
            trials: 1,
        }
    }

    #[test]
    fn wb_line_format() {
        let csv = render_wb_csv(&[half(1000)]).unwrap();
        assert_eq!(csv, "iterations,success_rate,accuracy,precision,recall,fpr,f1\n1000,0.500,0.500,0.500,0.500,0.500,0.500\n");
    }

    #[test]
    fn mc_line_format() {
        let csv = render_mc_csv(&[table3_row(40000, 0.504), table3_row(20000, 0.501)]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "epochs,single_mi_accuracy,set_mi_accuracy,heuristic,metric,trials");
        assert_eq!(lines[1], "20000,0.501,1.000,median,euclidean,1");
        assert_eq!(lines[2], "40000,0.504,1.000,median,euclidean,1");
    }

    #[test]
    fn empty_tables() {
        assert_eq!(render_wb_csv(&[]).unwrap_err().to_string(), "no rows");
        let dir = tempfile::tempdir().unwrap();
        let t = ReportTables {
            title: "x".into(),
            whitebox: Some(vec![]),
            mc: None,
        };
        assert!(matches!(emit_reports(&t, dir.path()), Err(Error::NoRows)));
        assert!(matches!(emit_reports(&ReportTables::default(), dir.path()), Err(Error::NoRows)));
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn parse_back() {
        let wb = vec![half(200), half(400)];
        assert_eq!(parse_wb_csv(&render_wb_csv(&wb).unwrap()).unwrap(), wb);
        let mc = vec![table3_row(20000, 0.501)];
        assert_eq!(parse_mc_csv(&render_mc_csv(&mc).unwrap()).unwrap(), mc);
        assert!(parse_wb_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn markdown_tables() {
        let t = ReportTables {
            title: "Report".into(),
            whitebox: Some(vec![half(200)]),
            mc: Some(vec![table3_row(200, 0.5)]),
        };
        let md = render_markdown(&t).unwrap();
        assert!(md.contains("| 200 | 0.500 | 0.500 | 0.500 | 0.500 | 0.500 | 0.500 |"));
        assert!(md.contains("| 200 | 0.500 | 1.000 | median | euclidean | 1 |"));
    }
}
