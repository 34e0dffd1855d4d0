//! Model parameters, fit variants and prior hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{HeapError, Result};
use crate::linalg::SmallMat;
use crate::model::data::PanelData;
use crate::report::validate_gamma;

/// The six model variants fit in the application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    NoHeaping,
    Wh08,
    DispersionOnly,
    Heaping,
    SubjectHeaping,
    SubjectHeapingCov,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::NoHeaping,
        Variant::Wh08,
        Variant::DispersionOnly,
        Variant::Heaping,
        Variant::SubjectHeaping,
        Variant::SubjectHeapingCov,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::NoHeaping => "no-heaping",
            Variant::Wh08 => "wh08",
            Variant::DispersionOnly => "dispersion-only",
            Variant::Heaping => "heaping",
            Variant::SubjectHeaping => "subject-heaping",
            Variant::SubjectHeapingCov => "subject-heaping-cov",
        }
    }

    /// Latent counts are free (not pinned to the reports).
    pub fn has_latent(&self) -> bool {
        !matches!(self, Variant::NoHeaping)
    }

    /// The reporting process is a dispersion/heaping BDP.
    pub fn has_bdp_reporting(&self) -> bool {
        matches!(
            self,
            Variant::DispersionOnly
                | Variant::Heaping
                | Variant::SubjectHeaping
                | Variant::SubjectHeapingCov
        )
    }

    pub fn has_theta_disp(&self) -> bool {
        self.has_bdp_reporting()
    }

    /// Global heaping intensity parameter.
    pub fn has_global_heap(&self) -> bool {
        matches!(self, Variant::Heaping)
    }

    /// Subject-specific heaping intensities (Eq.-style log-linear model).
    pub fn has_subject_heap(&self) -> bool {
        matches!(self, Variant::SubjectHeaping | Variant::SubjectHeapingCov)
    }

    /// Regime-transition parameters are part of the model.
    pub fn has_gamma(&self) -> bool {
        !matches!(self, Variant::NoHeaping | Variant::DispersionOnly)
    }
}

impl std::str::FromStr for Variant {
    type Err = HeapError;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                HeapError::Domain(format!(
                    "unknown variant `{s}`; expected one of {:?}",
                    Variant::ALL.map(|v| v.name())
                ))
            })
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One full state of the hierarchical model. Fields unused by a variant stay
/// at neutral values and are skipped by the sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Fixed effects (length d).
    pub alpha: Vec<f64>,
    /// Per-subject random effects (each length c).
    pub beta: Vec<Vec<f64>>,
    /// Random-effect covariance (c x c, SPD).
    pub sigma_beta: SmallMat,
    pub theta_disp: f64,
    /// Global heaping intensity (heaping variant).
    pub theta_heap: f64,
    /// Heaping covariate effects (subject-specific variants).
    pub omega: Vec<f64>,
    /// Per-subject heaping random effects.
    pub xi: Vec<f64>,
    pub sigma2_xi: f64,
    /// Regime transition parameters (gamma_0, ..., gamma_J).
    pub gamma: Vec<f64>,
    /// Latent true count per observation.
    pub x: Vec<u32>,
}

impl ModelParams {
    /// Subject i's heaping intensity under `variant`.
    pub fn theta_heap_for(&self, variant: Variant, data: &PanelData, i: usize) -> f64 {
        match variant {
            Variant::Heaping => self.theta_heap,
            Variant::SubjectHeaping | Variant::SubjectHeapingCov => {
                let h = &data.subjects[i].h;
                let lin: f64 = h.iter().zip(&self.omega).map(|(a, b)| a * b).sum();
                (lin + self.xi[i]).exp()
            }
            _ => 0.0,
        }
    }

    pub fn validate(&self, variant: Variant, data: &PanelData) -> Result<()> {
        if self.alpha.len() != data.w_dim {
            return Err(HeapError::Domain(format!(
                "alpha has {} entries for {} fixed-effect covariates",
                self.alpha.len(),
                data.w_dim
            )));
        }
        if self.beta.len() != data.n_subjects() || self.xi.len() != data.n_subjects() {
            return Err(HeapError::Domain("per-subject vectors sized wrong".into()));
        }
        if self.x.len() != data.n_obs() {
            return Err(HeapError::Domain("latent counts sized wrong".into()));
        }
        if self.beta.iter().any(|b| b.len() != data.z_dim) {
            return Err(HeapError::Domain("beta dimension mismatch".into()));
        }
        if self.sigma_beta.n != data.z_dim {
            return Err(HeapError::Domain("sigma_beta dimension mismatch".into()));
        }
        self.sigma_beta.cholesky().map(|_| ())?;
        if variant.has_theta_disp() && !(self.theta_disp > 0.0) {
            return Err(HeapError::Domain("theta_disp must be positive".into()));
        }
        if variant.has_subject_heap() && !(self.sigma2_xi > 0.0) {
            return Err(HeapError::Domain("sigma2_xi must be positive".into()));
        }
        if variant.has_gamma() {
            validate_gamma(&self.gamma, 3.min(self.gamma.len().saturating_sub(1)))?;
        }
        if !variant.has_latent() {
            for (o, &x) in data.obs.iter().zip(&self.x) {
                if x != o.y {
                    return Err(HeapError::Domain(
                        "no-heaping variant requires latent counts pinned to reports".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Prior hyperparameters with the application defaults. Covariance priors
/// are scalar multiples of the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// alpha ~ Normal(0, v_alpha I).
    pub v_alpha: f64,
    /// theta_disp ~ Inverse-Gamma(shape, rate).
    pub ig_shape_disp: f64,
    pub ig_rate_disp: f64,
    /// theta_heap ~ Inverse-Gamma(shape, rate).
    pub ig_shape_heap: f64,
    pub ig_rate_heap: f64,
    /// omega ~ Normal(0, sigma2_omega I).
    pub sigma2_omega: f64,
    /// gamma ~ Normal(0, sigma2_gamma I) restricted to the ordering region.
    pub sigma2_gamma: f64,
    /// sigma^2_beta ~ Inverse-Gamma(a_beta, m_beta) when c = 1; for c > 1,
    /// Sigma_beta ~ Inverse-Wishart(2 m_beta I, 2 a_beta), which reduces to
    /// the same scalar law.
    pub a_beta: f64,
    pub m_beta: f64,
    /// sigma^2_xi ~ Inverse-Gamma(shape, rate).
    pub ig_shape_xi: f64,
    pub ig_rate_xi: f64,
    /// Heaping grid spacings.
    pub grids: Vec<u32>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            v_alpha: 10.0,
            ig_shape_disp: 0.001,
            ig_rate_disp: 0.001,
            ig_shape_heap: 0.001,
            ig_rate_heap: 0.001,
            sigma2_omega: 100.0,
            sigma2_gamma: 100.0,
            a_beta: 4.0,
            m_beta: 5.0,
            ig_shape_xi: 0.001,
            ig_rate_xi: 0.001,
            grids: vec![5, 10, 50],
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("v_alpha", self.v_alpha),
            ("ig_shape_disp", self.ig_shape_disp),
            ("ig_rate_disp", self.ig_rate_disp),
            ("ig_shape_heap", self.ig_shape_heap),
            ("ig_rate_heap", self.ig_rate_heap),
            ("sigma2_omega", self.sigma2_omega),
            ("sigma2_gamma", self.sigma2_gamma),
            ("a_beta", self.a_beta),
            ("m_beta", self.m_beta),
            ("ig_shape_xi", self.ig_shape_xi),
            ("ig_rate_xi", self.ig_rate_xi),
        ];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(HeapError::Domain(format!(
                    "hyperparameter {name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.grids.is_empty() {
            return Err(HeapError::Domain("at least one heaping grid required".into()));
        }
        for w in self.grids.windows(2) {
            if w[1] <= w[0] {
                return Err(HeapError::Domain(format!(
                    "grids must be strictly increasing, got {:?}",
                    self.grids
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("bogus".parse::<Variant>().is_err());
    }

    #[test]
    fn defaults_match_the_application_settings() {
        let h = Hyperparams::default();
        assert_eq!(h.v_alpha, 10.0);
        assert_eq!(h.sigma2_gamma, 100.0);
        assert_eq!(h.a_beta, 4.0);
        assert_eq!(h.m_beta, 5.0);
        assert_eq!(h.ig_shape_disp, 0.001);
        assert_eq!(h.grids, vec![5, 10, 50]);
        h.validate().unwrap();
    }
}
