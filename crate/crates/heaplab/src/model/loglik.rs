//! Likelihood and prior terms of the hierarchical model.

use crate::bdp::SolverConfig;
use crate::error::{HeapError, Result};
use crate::linalg::{inv_wishart_log_pdf, mvn_log_pdf_zero, SmallMat, Spd};
use crate::model::data::PanelData;
use crate::model::params::{Hyperparams, ModelParams, Variant};
use crate::model::wh08::wh08_pmf;
use crate::report::{reporting_pmf, HeapParams, RegimeModel};
use crate::util::{inv_gamma_log_pdf, normal_log_pdf, poisson_log_pmf};

/// Below this, dispersion and heaping intensities are treated as exactly
/// zero and the reporting pmf degenerates to the indicator y = x.
pub const FROZEN_EPS: f64 = 1e-8;

/// Linear predictor for the latent-count mean: eta = exp(w alpha + z beta).
pub fn latent_intensity(w: &[f64], z: &[f64], alpha: &[f64], beta: &[f64]) -> Result<f64> {
    debug_assert_eq!(w.len(), alpha.len());
    debug_assert_eq!(z.len(), beta.len());
    let lin: f64 = w.iter().zip(alpha).map(|(a, b)| a * b).sum::<f64>()
        + z.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
    if lin > 700.0 {
        return Err(HeapError::Numerical(format!(
            "latent intensity overflows: linear predictor {lin}"
        )));
    }
    Ok(lin.exp())
}

/// Subject heaping intensity: theta_heap_i = exp(h omega + xi).
pub fn subject_heap_intensity(h: &[f64], omega: &[f64], xi: f64) -> Result<f64> {
    debug_assert_eq!(h.len(), omega.len());
    let lin: f64 = h.iter().zip(omega).map(|(a, b)| a * b).sum::<f64>() + xi;
    if lin > 700.0 {
        return Err(HeapError::Numerical(format!(
            "heaping intensity overflows: linear predictor {lin}"
        )));
    }
    Ok(lin.exp())
}

/// Heaping process parameters for one observation under a variant.
pub fn heap_params_for(
    params: &ModelParams,
    variant: Variant,
    data: &PanelData,
    subject: usize,
    hyper: &Hyperparams,
) -> HeapParams {
    match variant {
        Variant::DispersionOnly => HeapParams::dispersion_only(params.theta_disp),
        Variant::Heaping | Variant::SubjectHeaping | Variant::SubjectHeapingCov => HeapParams {
            theta_disp: params.theta_disp,
            theta_heap: params.theta_heap_for(variant, data, subject),
            grids: hyper.grids.clone(),
            regimes: RegimeModel::Logistic(params.gamma.clone()),
        },
        Variant::NoHeaping | Variant::Wh08 => HeapParams::dispersion_only(0.0),
    }
}

/// log g(y|x) for one observation: the BDP reporting probability, the
/// rounding-model pmf, or the degenerate indicator, depending on variant.
pub fn report_log_lik(
    y: u32,
    x: u32,
    heap: &HeapParams,
    variant: Variant,
    gamma: &[f64],
    grids: &[u32],
    cfg: &SolverConfig,
) -> Result<f64> {
    match variant {
        Variant::NoHeaping => Ok(if y == x { 0.0 } else { f64::NEG_INFINITY }),
        Variant::Wh08 => {
            let p = wh08_pmf(y, x, gamma, grids)?;
            Ok(if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
        }
        _ => {
            if heap.theta_disp < FROZEN_EPS && heap.theta_heap < FROZEN_EPS {
                return Ok(if y == x { 0.0 } else { f64::NEG_INFINITY });
            }
            let row = reporting_pmf(heap, x, cfg)?;
            Ok(match row.get(y as usize) {
                Some(&g) if g > 0.0 => g.ln(),
                _ => f64::NEG_INFINITY,
            })
        }
    }
}

/// log prior density over the variant's active parameter blocks. Returns
/// -inf outside the support (for example a misordered gamma). The gamma
/// prior is a normal restricted to the ordering region; its normalizing
/// constant is a fixed number and is omitted.
pub fn log_prior(params: &ModelParams, hyper: &Hyperparams, variant: Variant) -> f64 {
    let mut lp = 0.0;
    for &a in &params.alpha {
        lp += normal_log_pdf(a, 0.0, hyper.v_alpha);
    }
    if variant.has_theta_disp() {
        lp += inv_gamma_log_pdf(params.theta_disp, hyper.ig_shape_disp, hyper.ig_rate_disp);
    }
    if variant.has_global_heap() {
        lp += inv_gamma_log_pdf(params.theta_heap, hyper.ig_shape_heap, hyper.ig_rate_heap);
    }
    if variant.has_subject_heap() {
        for &o in &params.omega {
            lp += normal_log_pdf(o, 0.0, hyper.sigma2_omega);
        }
        lp += inv_gamma_log_pdf(params.sigma2_xi, hyper.ig_shape_xi, hyper.ig_rate_xi);
    }
    if variant.has_gamma() {
        if crate::report::validate_gamma(&params.gamma, params.gamma.len() - 1).is_err() {
            return f64::NEG_INFINITY;
        }
        for &g in &params.gamma {
            lp += normal_log_pdf(g, 0.0, hyper.sigma2_gamma);
        }
    }
    // Random-effect covariance prior.
    let c = params.sigma_beta.n;
    if c == 1 {
        lp += inv_gamma_log_pdf(params.sigma_beta.at(0, 0), hyper.a_beta, hyper.m_beta);
    } else {
        let psi = SmallMat::scaled_identity(c, 2.0 * hyper.m_beta);
        match inv_wishart_log_pdf(&params.sigma_beta, &psi, 2.0 * hyper.a_beta) {
            Ok(v) => lp += v,
            Err(_) => return f64::NEG_INFINITY,
        }
    }
    lp
}

/// Full log joint density: reporting terms, latent Poisson terms, random
/// effect laws and the priors.
pub fn log_joint(
    params: &ModelParams,
    data: &PanelData,
    hyper: &Hyperparams,
    variant: Variant,
    cfg: &SolverConfig,
) -> Result<f64> {
    params.validate(variant, data)?;
    hyper.validate()?;

    let mut ll = 0.0;

    for (oi, obs) in data.obs.iter().enumerate() {
        let beta = &params.beta[obs.subject];
        let eta = latent_intensity(&obs.w, &obs.z, &params.alpha, beta)?;
        let x = params.x[oi];
        ll += poisson_log_pmf(x, eta);
        if variant.has_latent() {
            let heap = heap_params_for(params, variant, data, obs.subject, hyper);
            ll += report_log_lik(obs.y, x, &heap, variant, &params.gamma, &hyper.grids, cfg)?;
        }
        if ll == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
    }

    let sigma_beta = Spd::new(&params.sigma_beta)?;
    for beta in &params.beta {
        ll += mvn_log_pdf_zero(beta, &sigma_beta);
    }
    if variant.has_subject_heap() {
        for &xi in &params.xi {
            ll += normal_log_pdf(xi, 0.0, params.sigma2_xi);
        }
    }

    Ok(ll + log_prior(params, hyper, variant))
}
