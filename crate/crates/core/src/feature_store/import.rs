use std::path::Path;

use super::FeatureMatrix;
use crate::error::{Error, Result};

/// Result of a CSV import. `class_names` is set when labels were strings and
/// had to be mapped to ids (first appearance order).
#[derive(Debug, Clone)]
pub struct CsvImport {
    pub matrix: FeatureMatrix,
    pub class_names: Option<Vec<String>>,
    pub warnings: Vec<String>,
}

pub fn import_csv(path: impl AsRef<Path>, label_column: &str) -> Result<CsvImport> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    import_csv_reader(file, label_column)
}

pub fn import_csv_reader<R: std::io::Read>(reader: R, label_column: &str) -> Result<CsvImport> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_owned)
        .collect();
    let label_idx = headers.iter().position(|h| h == label_column).ok_or_else(|| {
        Error::invalid(format!(
            "label column {label_column:?} not found; columns are: {}",
            headers.join(", ")
        ))
    })?;
    let d = headers.len() - 1;
    if d == 0 {
        return Err(Error::invalid("csv has no feature columns"));
    }

    let mut data = Vec::new();
    let mut raw_labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(csv_err)?;
        if record.len() != headers.len() {
            return Err(Error::Csv {
                row,
                column: "*".into(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            if j == label_idx {
                raw_labels.push(cell.to_owned());
                continue;
            }
            let v: f32 = cell.parse().map_err(|_| Error::Csv {
                row,
                column: headers[j].clone(),
                message: format!("non-numeric value {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Csv {
                    row,
                    column: headers[j].clone(),
                    message: format!("non-finite value {cell:?}"),
                });
            }
            data.push(v);
        }
    }
    let n = raw_labels.len();
    if n == 0 {
        return Err(Error::invalid("csv has no data rows"));
    }

    let mut warnings = Vec::new();
    let (labels, num_classes, class_names) = map_labels(&raw_labels);
    let present = {
        let mut seen = vec![false; num_classes as usize];
        labels.iter().for_each(|&l| seen[l as usize] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if present < 2 {
        warnings.push("only one class present in label column".to_string());
    }
    let matrix = FeatureMatrix::new(n, d, num_classes, data, labels)?;
    warnings.extend(matrix.warnings());
    Ok(CsvImport {
        matrix,
        class_names,
        warnings,
    })
}

fn map_labels(raw: &[String]) -> (Vec<u32>, u32, Option<Vec<String>>) {
    let numeric: Option<Vec<u32>> = raw.iter().map(|s| s.parse::<u32>().ok()).collect();
    if let Some(ids) = numeric {
        let classes = ids.iter().copied().max().unwrap_or(0).saturating_add(1).max(2);
        return (ids, classes, None);
    }
    let mut names: Vec<String> = Vec::new();
    let ids = raw
        .iter()
        .map(|s| match names.iter().position(|n| n == s) {
            Some(p) => p as u32,
            None => {
                names.push(s.clone());
                (names.len() - 1) as u32
            }
        })
        .collect();
    let classes = (names.len() as u32).max(2);
    (ids, classes, Some(names))
}

fn csv_err(e: csv::Error) -> Error {
    let row = e.position().map(|p| p.record() as usize).unwrap_or(0);
    Error::Csv {
        row,
        column: "*".into(),
        message: e.to_string(),
    }
}
