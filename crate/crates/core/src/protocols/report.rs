//! Run records, aggregation and CSV / Markdown output.

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub fold: Option<usize>,
    pub run: usize,
    pub value: f64,
    /// Query classification accuracy of the underlying classifier, when there is one.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolReport {
    pub protocol: String,
    pub features: String,
    pub method: String,
    /// `mAP` or `accuracy`.
    pub metric: String,
    pub n_label: Option<usize>,
    pub h: Option<usize>,
    pub code_size_bits: Option<usize>,
    pub records: Vec<RunRecord>,
    pub mean: f64,
    /// Population standard deviation over `records`.
    pub std: f64,
    pub config: Vec<(String, String)>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mut sum = 0.0;
    for v in values {
        sum += v;
    }
    let mean = sum / n;
    let mut var = 0.0;
    for v in values {
        var += (v - mean) * (v - mean);
    }
    (mean, (var / n).sqrt())
}

impl ProtocolReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        protocol: &str,
        features: &str,
        method: &str,
        metric: &str,
        n_label: Option<usize>,
        h: Option<usize>,
        code_size_bits: Option<usize>,
        records: Vec<RunRecord>,
        config: Vec<(String, String)>,
    ) -> Self {
        let values: Vec<f64> = records.iter().map(|r| r.value).collect();
        let (mean, std) = mean_std(&values);
        Self {
            protocol: protocol.into(),
            features: features.into(),
            method: method.into(),
            metric: metric.into(),
            n_label,
            h,
            code_size_bits,
            records,
            mean,
            std,
            config,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.value).collect()
    }

    pub fn config_value(&self, key: &str) -> Option<&str> {
        self.config
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn summary_row(&self) -> SummaryRow {
        SummaryRow {
            protocol: self.protocol.clone(),
            features: self.features.clone(),
            n_label: self.n_label,
            h: self.h,
            method: self.method.clone(),
            bits: self.code_size_bits,
            metric: self.metric.clone(),
            mean: self.mean,
            std: self.std,
            runs: self.records.len(),
        }
    }
}

pub const CSV_HEADER: [&str; 12] = [
    "protocol", "features", "n_label", "h", "method", "bits", "metric", "fold", "run", "value", "std",
    "accuracy",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per run and one `all`/`all` aggregate row per report.
pub fn write_csv<W: Write>(reports: &[ProtocolReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in reports {
        let head = [
            r.protocol.clone(),
            r.features.clone(),
            opt(r.n_label),
            opt(r.h),
            r.method.clone(),
            opt(r.code_size_bits),
            r.metric.clone(),
        ];
        for rec in &r.records {
            let mut row = head.to_vec();
            row.extend([
                opt(rec.fold),
                rec.run.to_string(),
                rec.value.to_string(),
                String::new(),
                opt(rec.accuracy),
            ]);
            out.write_record(&row)?;
        }
        let mut row = head.to_vec();
        row.extend([
            "all".into(),
            "all".into(),
            r.mean.to_string(),
            r.std.to_string(),
            String::new(),
        ]);
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn csv_string(reports: &[ProtocolReport]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(reports, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

/// Aggregate line of a report, as recovered from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub protocol: String,
    pub features: String,
    pub n_label: Option<usize>,
    pub h: Option<usize>,
    pub method: String,
    pub bits: Option<usize>,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

/// Reads the aggregate rows (and run counts) back from a report CSV.
pub fn read_summary_csv<R: Read>(r: R) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Data(format!("unexpected report header: {headers:?}")));
    }
    let parse_opt = |s: &str| -> Result<Option<usize>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse()
                .map(Some)
                .map_err(|_| Error::Data(format!("bad integer '{s}' in report")))
        }
    };
    let parse_f = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::Data(format!("bad number '{s}' in report")))
    };
    let mut out = Vec::new();
    let mut runs = 0;
    for rec in rdr.records() {
        let rec = rec?;
        if &rec[7] != "all" {
            runs += 1;
            continue;
        }
        out.push(SummaryRow {
            protocol: rec[0].to_string(),
            features: rec[1].to_string(),
            n_label: parse_opt(&rec[2])?,
            h: parse_opt(&rec[3])?,
            method: rec[4].to_string(),
            bits: parse_opt(&rec[5])?,
            metric: rec[6].to_string(),
            mean: parse_f(&rec[9])?,
            std: parse_f(&rec[10])?,
            runs,
        });
        runs = 0;
    }
    Ok(out)
}

/// Table with columns features, n_label, h, method, bits and the metric (percent, mean ± std).
pub fn markdown_table(rows: &[SummaryRow]) -> String {
    let metric = match rows.first() {
        Some(first) if rows.iter().all(|r| r.metric == first.metric) => first.metric.clone(),
        _ => "value".to_string(),
    };
    let dash = |v: Option<usize>| v.map_or("-".to_string(), |x| x.to_string());
    let mut s = String::new();
    writeln!(s, "| Features | n_label | h | Method | bits | {metric} (%) |").unwrap();
    writeln!(s, "|---|---|---|---|---|---|").unwrap();
    for r in rows {
        writeln!(
            s,
            "| {} | {} | {} | {} | {} | {:.1} ± {:.1} |",
            r.features,
            dash(r.n_label),
            dash(r.h),
            r.method,
            dash(r.bits),
            100.0 * r.mean,
            100.0 * r.std
        )
        .unwrap();
    }
    s
}

pub fn markdown_for_reports(reports: &[ProtocolReport]) -> String {
    let rows: Vec<SummaryRow> = reports.iter().map(|r| r.summary_row()).collect();
    let mut s = markdown_table(&rows);
    for r in reports {
        if r.config.is_empty() {
            continue;
        }
        writeln!(s, "\n{} / {}:", r.protocol, r.method).unwrap();
        for (k, v) in &r.config {
            writeln!(s, "- {k} = {v}").unwrap();
        }
    }
    s
}

/// `(bytes_per_image, accuracy)` pairs as a two-column CSV.
pub fn curve_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("bytes_per_image,accuracy\n");
    for (b, a) in points {
        writeln!(s, "{b},{a}").unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> ProtocolReport {
        ProtocolReport::new(
            "ssh",
            "toy",
            "Classifier+one-hot",
            "mAP",
            Some(100),
            Some(10),
            Some(4),
            vec![
                RunRecord { fold: None, run: 0, value: 0.5, accuracy: Some(0.4) },
                RunRecord { fold: None, run: 1, value: 0.7, accuracy: Some(0.6) },
            ],
            vec![("seed".into(), "1".into())],
        )
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[0.5, 0.7]);
        assert!((m - 0.6).abs() < 1e-15);
        assert!((s - 0.1).abs() < 1e-12);
        let r = report();
        let (m2, s2) = mean_std(&r.values());
        assert_eq!((r.mean, r.std), (m2, s2));
    }

    #[test]
    fn csv_round_trip_of_summary() {
        let r = report();
        let text = csv_string(std::slice::from_ref(&r)).unwrap();
        assert!(text.starts_with("protocol,features,n_label,h,method,bits,metric,fold,run,value,std,accuracy\n"));
        assert!(text.contains("ssh,toy,100,10,Classifier+one-hot,4,mAP,,0,0.5,,0.4\n"));
        let rows = read_summary_csv(text.as_bytes()).unwrap();
        assert_eq!(rows, vec![r.summary_row()]);
        let md = markdown_table(&rows);
        assert!(md.contains("| toy | 100 | 10 | Classifier+one-hot | 4 | 60.0 ± 10.0 |"), "{md}");
    }

    #[test]
    fn curve_format() {
        assert_eq!(curve_csv(&[(1.0, 0.5), (2.0, 0.75)]), "bytes_per_image,accuracy\n1,0.5\n2,0.75\n");
    }
}
