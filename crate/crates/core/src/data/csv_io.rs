use std::io::{Read, Write};
use std::path::Path;

use super::schema::{DataSchema, FeatureKind};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// Reads a headered CSV, one-hot encoding categoricals and mapping labels
/// to indices of the declared label set. Values outside a declared range
/// or label set are rejected with their line number.
pub fn load_csv(path: impl AsRef<Path>, schema: &DataSchema) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Load {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    read_csv(file, schema).map_err(|e| match e {
        Error::Load { line, message, .. } => Error::Load {
            path: path.to_path_buf(),
            line,
            message,
        },
        other => other,
    })
}

pub fn read_csv(reader: impl Read, schema: &DataSchema) -> Result<LabeledDataset> {
    let fail = |line: usize, message: String| Error::Load {
        path: "<input>".into(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| fail(1, e.to_string()))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| fail(1, format!("missing column {name:?}")))
    };
    let feature_cols = schema
        .features
        .iter()
        .map(|f| column(&f.name))
        .collect::<Result<Vec<_>>>()?;
    let label_col = column(&schema.label.name)?;

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            fail(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        for (f, &c) in schema.features.iter().zip(&feature_cols) {
            let cell = rec.get(c).unwrap_or("").trim();
            match &f.kind {
                FeatureKind::Continuous { min, max } => {
                    let v: f64 = cell
                        .parse()
                        .map_err(|_| fail(line, format!("cannot parse {cell:?} in column {:?}", f.name)))?;
                    if !(v >= *min && v <= *max) {
                        return Err(fail(
                            line,
                            format!("value {v} of {:?} outside declared range [{min}, {max}]", f.name),
                        ));
                    }
                    features.push(v);
                }
                FeatureKind::Categorical { values } => {
                    let hot = values
                        .iter()
                        .position(|v| v == cell)
                        .ok_or_else(|| fail(line, format!("undeclared value {cell:?} in column {:?}", f.name)))?;
                    features.extend((0..values.len()).map(|i| if i == hot { 1.0 } else { 0.0 }));
                }
            }
        }
        let cell = rec.get(label_col).unwrap_or("").trim();
        let y = schema
            .label
            .values
            .iter()
            .position(|v| v == cell)
            .ok_or_else(|| fail(line, format!("label {cell:?} outside the declared label set")))?;
        labels.push(y as u32);
    }
    LabeledDataset::new(schema.encoded_names(), schema.label.values.clone(), features, labels)
}

/// Writes `data` in the original (un-encoded) column layout of `schema`.
pub fn write_csv(path: impl AsRef<Path>, data: &LabeledDataset, schema: &DataSchema) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv_to(file, data, schema)
}

pub fn write_csv_to(writer: impl Write, data: &LabeledDataset, schema: &DataSchema) -> Result<()> {
    if data.n_features() != schema.n_encoded() {
        return Err(Error::invalid("dataset does not match the schema"));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = schema.features.iter().map(|f| f.name.as_str()).collect();
    header.push(&schema.label.name);
    w.write_record(&header)?;
    for (x, y) in data.rows() {
        let mut out = Vec::with_capacity(header.len());
        let mut col = 0;
        for f in &schema.features {
            match &f.kind {
                FeatureKind::Continuous { .. } => {
                    // Display prints the shortest string that parses back exactly
                    out.push(x[col].to_string());
                    col += 1;
                }
                FeatureKind::Categorical { values } => {
                    let hot = (0..values.len())
                        .find(|&i| x[col + i] == 1.0)
                        .ok_or_else(|| Error::invalid(format!("row has no hot column for {:?}", f.name)))?;
                    out.push(values[hot].clone());
                    col += values.len();
                }
            }
        }
        out.push(schema.label.values[y as usize].clone());
        w.write_record(&out)?;
    }
    w.flush()?;
    Ok(())
}
