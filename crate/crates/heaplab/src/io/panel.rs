//! Panel CSV ingestion and export.
//!
//! Required columns: `subject_id`, `time_index`, `y`. Optional covariates by
//! prefix: `w_` fixed effects, `z_` random-effect design, `h_` per-subject
//! heaping covariates. Continuous covariates are standardized to mean 0 and
//! unit standard deviation; 0/1 flag columns pass through unchanged. An
//! intercept column is prepended to W and H, and Z defaults to the scalar 1.

use std::path::Path;

use crate::error::{HeapError, Result};
use crate::model::PanelData;

struct Column {
    name: String,
    index: usize,
    values: Vec<f64>,
}

fn is_flag(values: &[f64]) -> bool {
    values.iter().all(|&v| v == 0.0 || v == 1.0)
}

fn standardize(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    if sd < 1e-12 {
        for v in values.iter_mut() {
            *v = 0.0;
        }
    } else {
        for v in values.iter_mut() {
            *v = (*v - mean) / sd;
        }
    }
}

/// Read and validate a panel CSV.
pub fn ingest_csv(path: &Path) -> Result<PanelData> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();

    let find = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            HeapError::Ingestion {
                row: 0,
                column: name.to_string(),
                msg: "required column missing from header".into(),
            }
        })
    };
    let id_col = find("subject_id")?;
    let t_col = find("time_index")?;
    let y_col = find("y")?;

    let mut w_cols: Vec<Column> = Vec::new();
    let mut z_cols: Vec<Column> = Vec::new();
    let mut h_cols: Vec<Column> = Vec::new();
    for (index, name) in headers.iter().enumerate() {
        let col = Column {
            name: name.clone(),
            index,
            values: Vec::new(),
        };
        if name.starts_with("w_") {
            w_cols.push(col);
        } else if name.starts_with("z_") {
            z_cols.push(col);
        } else if name.starts_with("h_") {
            h_cols.push(col);
        }
    }

    let mut ids: Vec<String> = Vec::new();
    let mut times: Vec<u32> = Vec::new();
    let mut ys: Vec<u32> = Vec::new();

    for (ri, record) in reader.records().enumerate() {
        let row = ri + 1;
        let record = record?;
        let field = |idx: usize, col: &str| -> Result<String> {
            record
                .get(idx)
                .map(|s| s.trim().to_string())
                .ok_or_else(|| HeapError::Ingestion {
                    row,
                    column: col.into(),
                    msg: "missing field".into(),
                })
        };

        ids.push(field(id_col, "subject_id")?);
        let t_raw = field(t_col, "time_index")?;
        times.push(t_raw.parse::<u32>().map_err(|_| HeapError::Ingestion {
            row,
            column: "time_index".into(),
            msg: format!("expected a nonnegative integer, got `{t_raw}`"),
        })?);
        let y_raw = field(y_col, "y")?;
        let y: i64 = y_raw.parse().map_err(|_| HeapError::Ingestion {
            row,
            column: "y".into(),
            msg: format!("expected an integer count, got `{y_raw}`"),
        })?;
        if y < 0 {
            return Err(HeapError::Ingestion {
                row,
                column: "y".into(),
                msg: format!("counts must be nonnegative, got {y}"),
            });
        }
        ys.push(y as u32);

        for col in w_cols.iter_mut().chain(&mut z_cols).chain(&mut h_cols) {
            let raw = field(col.index, &col.name)?;
            let v: f64 = raw.parse().map_err(|_| HeapError::Ingestion {
                row,
                column: col.name.clone(),
                msg: format!("expected a number, got `{raw}`"),
            })?;
            col.values.push(v);
        }
    }

    if ys.is_empty() {
        return Err(HeapError::Ingestion {
            row: 1,
            column: "y".into(),
            msg: "file contains a header but no data rows".into(),
        });
    }

    for col in w_cols.iter_mut().chain(&mut h_cols) {
        if !is_flag(&col.values) {
            standardize(&mut col.values);
        }
    }
    // The random-effect design is used as given (no standardization).

    let n = ys.len();
    let mut w_names = vec!["intercept".to_string()];
    w_names.extend(w_cols.iter().map(|c| c.name.clone()));
    let mut h_names = vec!["intercept".to_string()];
    h_names.extend(h_cols.iter().map(|c| c.name.clone()));

    let rows: Vec<(String, u32, u32, Vec<f64>, Vec<f64>, Vec<f64>)> = (0..n)
        .map(|i| {
            let mut w = vec![1.0];
            w.extend(w_cols.iter().map(|c| c.values[i]));
            let z = if z_cols.is_empty() {
                vec![1.0]
            } else {
                z_cols.iter().map(|c| c.values[i]).collect()
            };
            let mut h = vec![1.0];
            h.extend(h_cols.iter().map(|c| c.values[i]));
            (ids[i].clone(), times[i], ys[i], w, z, h)
        })
        .collect();

    PanelData::assemble(rows, w_names, h_names)
}

/// Write a panel as CSV (the simulated-panel format: ids, times, reports).
pub fn write_panel_csv(panel: &PanelData, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["subject_id", "time_index", "y"])?;
    for obs in &panel.obs {
        w.write_record([
            panel.subjects[obs.subject].id.as_str(),
            &obs.time_index.to_string(),
            &obs.y.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("heaplab-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!(
            "panel-{}.csv",
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .unwrap()
                .as_nanos()
        ));
        std::fs::write(&path, content).unwrap();
        path
    }

    #[test]
    fn minimal_two_row_file_parses() {
        let p = write_tmp("subject_id,time_index,y\na,0,3\na,1,5\n");
        let panel = ingest_csv(&p).unwrap();
        assert_eq!(panel.n_subjects(), 1);
        assert_eq!(panel.n_obs(), 2);
        assert_eq!(panel.obs[1].y, 5);
        assert_eq!(panel.obs[0].w, vec![1.0]);
    }

    #[test]
    fn negative_count_is_rejected_with_row_number() {
        let p = write_tmp("subject_id,time_index,y\na,0,3\na,1,-1\n");
        match ingest_csv(&p) {
            Err(HeapError::Ingestion { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "y");
            }
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }

    #[test]
    fn missing_required_column_is_rejected() {
        let p = write_tmp("subject_id,t,y\na,0,3\n");
        assert!(matches!(
            ingest_csv(&p),
            Err(HeapError::Ingestion { column, .. }) if column == "time_index"
        ));
    }

    #[test]
    fn continuous_covariates_are_standardized_flags_pass_through() {
        let p = write_tmp(
            "subject_id,time_index,y,w_age,w_male\na,0,3,20,1\na,1,5,30,1\nb,0,2,40,0\nb,1,1,50,0\n",
        );
        let panel = ingest_csv(&p).unwrap();
        assert_eq!(panel.w_dim, 3);
        let ages: Vec<f64> = panel.obs.iter().map(|o| o.w[1]).collect();
        let mean: f64 = ages.iter().sum::<f64>() / 4.0;
        let var: f64 = ages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
        let males: Vec<f64> = panel.obs.iter().map(|o| o.w[2]).collect();
        assert_eq!(males, vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn heaping_covariates_become_subject_level() {
        let p = write_tmp(
            "subject_id,time_index,y,h_male\na,0,3,1\na,1,5,1\nb,0,2,0\n",
        );
        let panel = ingest_csv(&p).unwrap();
        assert_eq!(panel.h_dim, 2);
        assert_eq!(panel.subjects[0].h, vec![1.0, 1.0]);
        assert_eq!(panel.subjects[1].h, vec![1.0, 0.0]);
    }
}
