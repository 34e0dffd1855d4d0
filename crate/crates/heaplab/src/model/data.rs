//! Longitudinal panel data: reported counts with covariates.

use serde::{Deserialize, Serialize};

use crate::error::{HeapError, Result};

/// One observation (subject visit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Index into [`PanelData::subjects`].
    pub subject: usize,
    pub time_index: u32,
    /// Reported count.
    pub y: u32,
    /// Fixed-effect covariates (leading 1 for the intercept).
    pub w: Vec<f64>,
    /// Random-effect design (defaults to the scalar 1: random intercept).
    pub z: Vec<f64>,
}

/// Per-subject record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub id: String,
    /// Heaping covariates (leading 1 for the intercept).
    pub h: Vec<f64>,
    /// Contiguous observation range in [`PanelData::obs`].
    pub obs_start: usize,
    pub obs_end: usize,
}

/// A validated longitudinal panel. Observations are grouped contiguously by
/// subject in order of first appearance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelData {
    pub obs: Vec<Observation>,
    pub subjects: Vec<Subject>,
    pub w_dim: usize,
    pub z_dim: usize,
    pub h_dim: usize,
    /// Covariate labels used in reports (`intercept` plus column names).
    pub w_names: Vec<String>,
    pub h_names: Vec<String>,
}

impl PanelData {
    /// Group raw observations by subject id (order of first appearance) and
    /// validate dimensions.
    pub fn assemble(
        rows: Vec<(String, u32, u32, Vec<f64>, Vec<f64>, Vec<f64>)>,
        w_names: Vec<String>,
        h_names: Vec<String>,
    ) -> Result<PanelData> {
        if rows.is_empty() {
            return Err(HeapError::Domain("panel has no observations".into()));
        }
        let w_dim = rows[0].3.len();
        let z_dim = rows[0].4.len();
        let h_dim = rows[0].5.len();

        let mut order: Vec<String> = Vec::new();
        for (id, ..) in &rows {
            if !order.contains(id) {
                order.push(id.clone());
            }
        }

        let mut obs = Vec::with_capacity(rows.len());
        let mut subjects = Vec::with_capacity(order.len());
        for (si, id) in order.iter().enumerate() {
            let start = obs.len();
            let mut h: Option<Vec<f64>> = None;
            for (rid, t, y, w, z, hrow) in rows.iter().filter(|(rid, ..)| rid == id) {
                if w.len() != w_dim || z.len() != z_dim || hrow.len() != h_dim {
                    return Err(HeapError::Domain(format!(
                        "covariate dimensions vary within the panel (subject {rid})"
                    )));
                }
                match &h {
                    None => h = Some(hrow.clone()),
                    Some(prev) if prev != hrow => {
                        return Err(HeapError::Domain(format!(
                            "heaping covariates must be constant within subject {rid}"
                        )));
                    }
                    _ => {}
                }
                obs.push(Observation {
                    subject: si,
                    time_index: *t,
                    y: *y,
                    w: w.clone(),
                    z: z.clone(),
                });
            }
            subjects.push(Subject {
                id: id.clone(),
                h: h.unwrap(),
                obs_start: start,
                obs_end: obs.len(),
            });
        }

        Ok(PanelData {
            obs,
            subjects,
            w_dim,
            z_dim,
            h_dim,
            w_names,
            h_names,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.obs.len()
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn subject_obs(&self, i: usize) -> &[Observation] {
        let s = &self.subjects[i];
        &self.obs[s.obs_start..s.obs_end]
    }

    pub fn mean_y(&self) -> f64 {
        self.obs.iter().map(|o| o.y as f64).sum::<f64>() / self.n_obs() as f64
    }
}
