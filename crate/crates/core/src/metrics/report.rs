//! CSV and JSON report files.

use std::path::Path;

use serde_json::{json, Value};

use super::{ImageScore, MethodSummary};

fn csv_err(path: &Path, e: csv::Error) -> std::io::Error {
    std::io::Error::other(format!("{}: {e}", path.display()))
}

/// Rows of `path,method,mse,psnr`; infinite PSNR is written as `inf`.
pub fn write_scores_csv(path: &Path, scores: &[ImageScore]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for s in scores {
        w.serialize(s).map_err(|e| csv_err(path, e))?;
    }
    w.flush()
}

pub fn read_scores_csv(path: &Path) -> std::io::Result<Vec<ImageScore>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_err(path, e)))
        .collect()
}

fn number(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

/// `{"<method>": {"mean_psnr", "var_psnr", "count", "infinite"}, ...}`.
pub fn summary_json(summaries: &[MethodSummary]) -> Value {
    let mut map = serde_json::Map::new();
    for s in summaries {
        map.insert(
            s.method.clone(),
            json!({
                "mean_psnr": number(s.mean_psnr),
                "var_psnr": number(s.var_psnr),
                "count": s.count,
                "infinite": s.infinite,
            }),
        );
    }
    Value::Object(map)
}

/// Rows of `bin,lower,upper,count`.
pub fn write_histogram_csv(path: &Path, counts: &[u64]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["bin", "lower", "upper", "count"])
        .map_err(|e| csv_err(path, e))?;
    let n = counts.len() as f64;
    for (i, c) in counts.iter().enumerate() {
        w.write_record([
            i.to_string(),
            (i as f64 / n).to_string(),
            ((i + 1) as f64 / n).to_string(),
            c.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush()
}
