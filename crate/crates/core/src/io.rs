//! Dataset CSV: one row per unit, base covariates by name and items named
//! `<dim>_<j>` coded `0`, `1` or `NA`.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::linalg::Matrix;
use crate::model::{Dataset, ModelError, ModelSpec, MISSING};

pub const NA: &str = "NA";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IoError {
    #[error("{0}")]
    Csv(String),
    #[error("required column {0} not found in header")]
    MissingColumn(String),
    #[error("row {row}, column {column}: item value {value:?} is not 0, 1 or NA")]
    BadItem { row: usize, column: String, value: String },
    #[error("row {row}, column {column}: covariate is missing")]
    MissingCovariate { row: usize, column: String },
    #[error("row {row}, column {column}: covariate value {value:?} is not a finite number")]
    BadCovariate { row: usize, column: String, value: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn csv_err(e: impl std::fmt::Display) -> IoError {
    IoError::Csv(e.to_string())
}

/// Reads a dataset; columns not named by the model are ignored. Rows are
/// numbered from 1 after the header in error messages.
pub fn read_dataset<R: Read>(spec: &ModelSpec, input: R) -> Result<Dataset, IoError> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rd.headers().map_err(csv_err)?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IoError::MissingColumn(name.to_string()))
    };
    let cov_cols: Vec<(usize, &String)> =
        spec.base_names().iter().map(|n| Ok((find(n)?, n))).collect::<Result<_, IoError>>()?;
    let mut item_cols = Vec::with_capacity(spec.total_items());
    for (d, dim) in spec.dims().iter().enumerate() {
        for j in 0..dim.items {
            let name = spec.item_column_name(d, j);
            item_cols.push((find(&name)?, name));
        }
    }
    let p = cov_cols.len() + 1;
    let mut z = Vec::new();
    let mut items = Vec::new();
    let mut n = 0;
    for (r, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = r + 1;
        z.push(1.0);
        for &(c, name) in &cov_cols {
            let v = &rec[c];
            if v.is_empty() || v == NA {
                return Err(IoError::MissingCovariate {
                    row,
                    column: name.clone(),
                });
            }
            match v.parse::<f64>() {
                Ok(x) if x.is_finite() => z.push(x),
                _ => {
                    return Err(IoError::BadCovariate {
                        row,
                        column: name.clone(),
                        value: v.to_string(),
                    })
                }
            }
        }
        for (c, name) in &item_cols {
            items.push(match &rec[*c] {
                "0" => 0,
                "1" => 1,
                NA => MISSING,
                v => {
                    return Err(IoError::BadItem {
                        row,
                        column: name.clone(),
                        value: v.to_string(),
                    })
                }
            });
        }
        n += 1;
    }
    Ok(Dataset::new(spec, items, Matrix::from_row_major(n, p, z))?)
}

pub fn read_dataset_path(spec: &ModelSpec, path: &Path) -> Result<Dataset, IoError> {
    let f = std::fs::File::open(path).map_err(|e| IoError::Csv(format!("{}: {e}", path.display())))?;
    read_dataset(spec, std::io::BufReader::new(f))
}

/// Writes base covariates then items; floats in shortest round-trip form.
pub fn write_dataset<W: Write>(spec: &ModelSpec, data: &Dataset, out: W) -> Result<(), IoError> {
    let mut wr = csv::Writer::from_writer(out);
    let mut header: Vec<String> = spec.base_names().to_vec();
    for (d, dim) in spec.dims().iter().enumerate() {
        header.extend((0..dim.items).map(|j| spec.item_column_name(d, j)));
    }
    wr.write_record(&header).map_err(csv_err)?;
    let z = data.z();
    for i in 0..data.n() {
        let mut rec: Vec<String> = z.row(i)[1..].iter().map(|v| v.to_string()).collect();
        rec.extend(data.items(i).iter().map(|&v| match v {
            MISSING => NA.to_string(),
            v => v.to_string(),
        }));
        wr.write_record(&rec).map_err(csv_err)?;
    }
    wr.flush().map_err(csv_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpecDoc;

    fn spec() -> ModelSpec {
        let doc: ModelSpecDoc = serde_json::from_str(
            r#"{
              "dims": [{"name":"P","items":2},{"name":"F","items":1}],
              "class_sides": [{"name":"G","dims":["P"]},{"name":"R","dims":["F"]}],
              "covariates": ["const","age"],
              "mean_covariates": ["const"],
              "corr_covariates": ["const"],
              "class_covariates": ["const","age"]
            }"#,
        )
        .unwrap();
        ModelSpec::from_doc(doc).unwrap()
    }

    #[test]
    fn na_item_sets_mask_and_side_flag_uses_the_rest() {
        let csv = "id,age,P_1,P_2,F_1\n1,0.5,NA,1,0\n2,-1,NA,0,NA\n";
        let d = read_dataset(&spec(), csv.as_bytes()).unwrap();
        assert_eq!(d.items(0), &[MISSING, 1, 0]);
        assert_eq!(d.nonzero(0), [true, false]);
        assert_eq!(d.nonzero(1), [false, false]);
        assert_eq!(d.z().row(1), &[1.0, -1.0]);
    }

    #[test]
    fn covariate_na_names_the_location() {
        let csv = "age,P_1,P_2,F_1\n1,0,0,0\nNA,1,1,1\n";
        let e = read_dataset(&spec(), csv.as_bytes()).unwrap_err();
        assert_eq!(e, IoError::MissingCovariate { row: 2, column: "age".into() });
        assert!(e.to_string().contains("row 2, column age"));
    }

    #[test]
    fn non_binary_item_is_rejected() {
        let csv = "age,P_1,P_2,F_1\n1,0,2,0\n";
        assert!(matches!(read_dataset(&spec(), csv.as_bytes()), Err(IoError::BadItem { row: 1, .. })));
    }

    #[test]
    fn round_trip() {
        let csv = "age,P_1,P_2,F_1\n0.1,1,NA,0\n-3.25,0,0,1\n";
        let s = spec();
        let d = read_dataset(&s, csv.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_dataset(&s, &d, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), csv);
        assert_eq!(read_dataset(&s, buf.as_slice()).unwrap(), d);
    }
}
