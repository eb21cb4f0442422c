//! CSV readers and writers for admissions and preprocessed matrices.
//!
//! Admissions CSV: `patient_id,admission_id,timestamp,age,sex,label,<measurement columns>,codes`.
//! Timestamps are ISO-8601. A measurement cell may hold several readings
//! separated by `;`; an empty cell is missing. `codes` is `;`-separated.
//!
//! Matrix CSV: `patient_id,label,<feature columns>,codes`, empty cell = missing.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::analysis::CodeSet;
use crate::cohort::{default_feature_names, AdmissionRecord, PatientMatrix};
use crate::error::{Error, Result};
use crate::nn::Matrix;

const ADMISSION_KEYS: [&str; 6] = ["patient_id", "admission_id", "timestamp", "age", "sex", "label"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissionSchema {
    pub measurement_columns: Vec<String>,
}

impl Default for AdmissionSchema {
    fn default() -> Self {
        Self {
            measurement_columns: default_feature_names(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based line number in the file, header = line 1.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub records: Vec<AdmissionRecord>,
    pub errors: Vec<RowError>,
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(t) = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f") {
        return Some(t);
    }
    if let Ok(t) = NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f") {
        return Some(t);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.naive_utc());
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
}

pub fn format_timestamp(t: &NaiveDateTime) -> String {
    t.format("%Y-%m-%dT%H:%M:%S%.f").to_string()
}

fn parse_codes(s: &str) -> CodeSet {
    s.split(';')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(String::from)
        .collect()
}

fn join_codes(codes: &CodeSet) -> String {
    codes.iter().cloned().collect::<Vec<_>>().join(";")
}

fn parse_binary(s: &str, what: &str) -> std::result::Result<u8, String> {
    match s.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(format!("{what} {other:?} is not 0 or 1")),
    }
}

fn column_index(headers: &csv::StringRecord, required: &[&str]) -> Result<Vec<usize>> {
    let mut missing = Vec::new();
    let mut idx = Vec::new();
    for name in required {
        match headers.iter().position(|h| h.trim() == *name) {
            Some(i) => idx.push(i),
            None => missing.push(*name),
        }
    }
    if missing.is_empty() {
        Ok(idx)
    } else {
        Err(Error::Data(format!(
            "missing mandatory columns: {}",
            missing.join(", ")
        )))
    }
}

/// Reads admissions; `#` lines are comments. Rows that fail to parse are reported, not loaded;
/// missing columns and duplicate `(patient_id, admission_id)` keys are errors.
pub fn read_admissions<R: Read>(reader: R, schema: &AdmissionSchema) -> Result<LoadReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut required: Vec<&str> = ADMISSION_KEYS.to_vec();
    required.extend(schema.measurement_columns.iter().map(String::as_str));
    required.push("codes");
    let idx = column_index(&headers, &required)?;
    let n_meas = schema.measurement_columns.len();

    let mut report = LoadReport::default();
    let mut seen = HashSet::new();
    for (row_no, row) in rdr.records().enumerate() {
        let line = row_no + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                report.errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let cell = |k: usize| row.get(idx[k]).unwrap_or("").trim();
        let parsed = (|| -> std::result::Result<AdmissionRecord, String> {
            let patient_id = cell(0).to_string();
            let admission_id = cell(1).to_string();
            if patient_id.is_empty() || admission_id.is_empty() {
                return Err("empty patient_id or admission_id".into());
            }
            let timestamp = parse_timestamp(cell(2)).ok_or_else(|| format!("bad timestamp {:?}", cell(2)))?;
            let age: f64 = cell(3).parse().map_err(|_| format!("bad age {:?}", cell(3)))?;
            if !(age >= 0.0) || !age.is_finite() {
                return Err(format!("age {age} must be non-negative"));
            }
            let sex = parse_binary(cell(4), "sex")?;
            let label = parse_binary(cell(5), "label")?;
            let mut measurements = BTreeMap::new();
            for (m, name) in schema.measurement_columns.iter().enumerate() {
                let raw = cell(6 + m);
                let mut readings = Vec::new();
                for part in raw.split(';').map(str::trim).filter(|p| !p.is_empty()) {
                    let v: f64 = part.parse().map_err(|_| format!("non-numeric {name} {part:?}"))?;
                    if !v.is_finite() {
                        return Err(format!("non-finite {name}"));
                    }
                    readings.push(v);
                }
                measurements.insert(name.clone(), readings);
            }
            let diagnosis_codes = parse_codes(cell(6 + n_meas));
            Ok(AdmissionRecord {
                patient_id,
                admission_id,
                timestamp,
                age,
                sex,
                label,
                measurements,
                diagnosis_codes,
            })
        })();
        match parsed {
            Ok(rec) => {
                if !seen.insert((rec.patient_id.clone(), rec.admission_id.clone())) {
                    return Err(Error::Data(format!(
                        "duplicate admission key ({}, {}) at line {line}",
                        rec.patient_id, rec.admission_id
                    )));
                }
                report.records.push(rec);
            }
            Err(message) => report.errors.push(RowError { line, message }),
        }
    }
    Ok(report)
}

pub fn load_admissions(path: &Path, schema: &AdmissionSchema) -> Result<LoadReport> {
    read_admissions(std::fs::File::open(path)?, schema)
}

pub fn write_admissions<W: Write>(writer: W, records: &[AdmissionRecord], schema: &AdmissionSchema) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ADMISSION_KEYS.iter().map(|s| s.to_string()).collect();
    header.extend(schema.measurement_columns.iter().cloned());
    header.push("codes".into());
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.patient_id.clone(),
            r.admission_id.clone(),
            format_timestamp(&r.timestamp),
            r.age.to_string(),
            r.sex.to_string(),
            r.label.to_string(),
        ];
        for name in &schema.measurement_columns {
            let readings = r.measurements.get(name).map(Vec::as_slice).unwrap_or(&[]);
            row.push(readings.iter().map(f64::to_string).collect::<Vec<_>>().join(";"));
        }
        row.push(join_codes(&r.diagnosis_codes));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_admissions(path: &Path, records: &[AdmissionRecord], schema: &AdmissionSchema) -> Result<()> {
    write_admissions(std::fs::File::create(path)?, records, schema)
}

pub fn write_patient_matrix<W: Write>(writer: W, pm: &PatientMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["patient_id".to_string(), "label".to_string()];
    header.extend(pm.feature_names.iter().cloned());
    header.push("codes".into());
    w.write_record(&header)?;
    for i in 0..pm.n_patients() {
        let mut row = vec![pm.patient_ids[i].clone(), pm.labels[i].to_string()];
        for j in 0..pm.n_features() {
            row.push(if pm.present(i, j) {
                pm.features[(i, j)].to_string()
            } else {
                String::new()
            });
        }
        row.push(join_codes(&pm.codes[i]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_patient_matrix(path: &Path, pm: &PatientMatrix) -> Result<()> {
    write_patient_matrix(std::fs::File::create(path)?, pm)
}

pub fn read_patient_matrix<R: Read>(reader: R) -> Result<PatientMatrix> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let h: Vec<&str> = headers.iter().map(str::trim).collect();
    if h.len() < 3 || h[0] != "patient_id" || h[1] != "label" || h[h.len() - 1] != "codes" {
        return Err(Error::Data(
            "matrix CSV header must be patient_id,label,<features...>,codes".into(),
        ));
    }
    let feature_names: Vec<String> = h[2..h.len() - 1].iter().map(|s| s.to_string()).collect();
    let d = feature_names.len();
    let (mut ids, mut labels, mut codes, mut values, mut mask) = (vec![], vec![], vec![], vec![], vec![]);
    for (row_no, row) in rdr.records().enumerate() {
        let row = row?;
        let line = row_no + 2;
        ids.push(row[0].trim().to_string());
        labels.push(parse_binary(&row[1], "label").map_err(|e| Error::Data(format!("line {line}: {e}")))?);
        for j in 0..d {
            let cell = row[2 + j].trim();
            if cell.is_empty() {
                values.push(0.0);
                mask.push(false);
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| Error::Data(format!("line {line}: non-numeric {} {cell:?}", feature_names[j])))?;
                values.push(v);
                mask.push(true);
            }
        }
        codes.push(parse_codes(&row[2 + d]));
    }
    let n = ids.len();
    PatientMatrix::new(ids, Matrix::from_vec(n, d, values)?, mask, labels, feature_names, codes)
}

pub fn load_patient_matrix(path: &Path) -> Result<PatientMatrix> {
    read_patient_matrix(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        let mut h = ADMISSION_KEYS.join(",");
        for f in default_feature_names() {
            h.push(',');
            h.push_str(&f);
        }
        h.push_str(",codes\n");
        h
    }

    fn row(pid: &str, aid: &str, creatinine: &str) -> String {
        let mut cells = vec![
            pid.to_string(),
            aid.into(),
            "2019-03-01T10:00:00".into(),
            "71".into(),
            "1".into(),
            "0".into(),
        ];
        for f in default_feature_names() {
            cells.push(if f == "creatinine" {
                creatinine.to_string()
            } else {
                "1.5".into()
            });
        }
        cells.push("I10;E78.0".into());
        cells.join(",") + "\n"
    }

    #[test]
    fn empty_file_with_header() {
        let rep = read_admissions(header().as_bytes(), &AdmissionSchema::default()).unwrap();
        assert!(rep.records.is_empty() && rep.errors.is_empty());
    }

    #[test]
    fn bad_cell_is_reported_not_fatal() {
        let text = header() + &row("p1", "a1", "88") + &row("p2", "a1", "high") + &row("p3", "a1", "70;72");
        let rep = read_admissions(text.as_bytes(), &AdmissionSchema::default()).unwrap();
        assert_eq!(rep.records.len(), 2);
        assert_eq!(rep.errors.len(), 1);
        assert_eq!(rep.errors[0].line, 3);
        assert!(rep.errors[0].message.contains("creatinine"));
        assert_eq!(rep.records[1].mean("creatinine"), Some(71.0));
        assert_eq!(rep.records[0].diagnosis_codes.len(), 2);
    }

    #[test]
    fn missing_column_is_an_error() {
        let text = "patient_id,admission_id,timestamp\n";
        let err = read_admissions(text.as_bytes(), &AdmissionSchema::default()).unwrap_err();
        assert!(err.to_string().contains("age"), "{err}");
    }

    #[test]
    fn duplicate_key_is_an_error() {
        let text = header() + &row("p1", "a1", "88") + &row("p1", "a1", "90");
        assert!(read_admissions(text.as_bytes(), &AdmissionSchema::default()).is_err());
    }

    #[test]
    fn timestamp_formats() {
        assert!(parse_timestamp("2020-01-02").is_some());
        assert!(parse_timestamp("2020-01-02T03:04:05").is_some());
        assert!(parse_timestamp("2020-01-02T03:04:05.250").is_some());
        assert!(parse_timestamp("2020-01-02T03:04:05Z").is_some());
        assert!(parse_timestamp("yesterday").is_none());
        let t = parse_timestamp("2020-01-02T03:04:05.250").unwrap();
        assert_eq!(parse_timestamp(&format_timestamp(&t)), Some(t));
    }
}
