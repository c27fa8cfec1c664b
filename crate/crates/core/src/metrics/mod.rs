//! Segmentation overlap, surface agreement, reader-study scores, and
//! appearance features.

mod features;
mod overlap;
mod reader;

use std::io::Write;

pub use features::{extract_features, FeatureVector, ENTROPY_BINS};
pub use overlap::{dsc, nsd, nsd_with, SurfaceDistanceMethod, SurfaceTolerance, BRUTE_FORCE_LIMIT};
pub use reader::{parse_reader_csv, reader_metrics, reader_metrics_with, Call, ReaderMetrics, Truth, UnsurePolicy};

pub const CSV_HEADER: &str = "case_id,metric,value";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub case_id: String,
    pub metric: String,
    pub value: f64,
}

impl MetricRow {
    pub fn new(case_id: impl Into<String>, metric: impl Into<String>, value: f64) -> Self {
        Self {
            case_id: case_id.into(),
            metric: metric.into(),
            value,
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes the header and one `case_id,metric,value` line per row.
pub fn write_metric_csv<W: Write>(mut out: W, rows: &[MetricRow]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{}", csv_field(&r.case_id), csv_field(&r.metric), r.value)?;
    }
    Ok(())
}
