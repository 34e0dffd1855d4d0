//! Random-walk Metropolis blocks with Robbins-Monro step adaptation, and the
//! conjugate variance updates.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};

use crate::bdp::SolverConfig;
use crate::error::{HeapError, Result};
use crate::linalg::{mvn_log_pdf_zero, SmallMat, Spd};
use crate::model::{wh08_pmf, Hyperparams, PanelData, Variant};
use crate::report::validate_gamma;
use crate::util::{inv_gamma_log_pdf, normal_log_pdf, poisson_log_pmf};

use super::cache::SigId;
use super::run::RunState;

/// Robbins-Monro scaling of a log step size toward a target acceptance rate
/// (0.44 for scalar blocks, 0.234 for vector blocks); frozen after burn-in.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveStep {
    pub step: f64,
    target: f64,
    count: u64,
}

/// Target acceptance rate for scalar random-walk blocks.
pub const TARGET_SCALAR: f64 = 0.44;
/// Target acceptance rate for vector random-walk blocks.
pub const TARGET_VECTOR: f64 = 0.234;

impl AdaptiveStep {
    pub fn new(step: f64, target: f64) -> Self {
        AdaptiveStep {
            step,
            target,
            count: 0,
        }
    }

    pub fn adapt(&mut self, accept_prob: f64, adapting: bool) {
        if !adapting {
            return;
        }
        self.count += 1;
        let gain = 2.0 * (self.count as f64).powf(-0.6);
        self.step = (self.step.ln() + gain * (accept_prob - self.target))
            .clamp(-12.0, 6.0)
            .exp();
    }
}

/// Accept/propose counters for one block.
#[derive(Debug, Default, Clone, Copy)]
pub struct BlockStats {
    pub accepted: u64,
    pub proposed: u64,
}

impl BlockStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

fn mh_accept<R: Rng>(log_alpha: f64, rng: &mut R) -> (bool, f64) {
    let alpha = log_alpha.exp().min(1.0);
    if log_alpha.is_nan() {
        // Both sides degenerate; drawing keeps the random stream aligned.
        let _: f64 = rng.random();
        return (false, 0.0);
    }
    let u: f64 = rng.random();
    (u.ln() < log_alpha, alpha)
}

fn linear_predictor(w: &[f64], z: &[f64], alpha: &[f64], beta: &[f64]) -> f64 {
    w.iter().zip(alpha).map(|(a, b)| a * b).sum::<f64>()
        + z.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()
}

/// Fixed-effects block: spherical Gaussian random walk on alpha.
pub fn update_alpha<R: Rng>(
    rs: &mut RunState,
    data: &PanelData,
    hyper: &Hyperparams,
    step: &mut AdaptiveStep,
    stats: &mut BlockStats,
    adapting: bool,
    rng: &mut R,
) -> Result<()> {
    let d = rs.params.alpha.len();
    let prop: Vec<f64> = rs
        .params
        .alpha
        .iter()
        .map(|&a| a + step.step * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let mut delta = 0.0;
    let mut new_etas = Vec::with_capacity(data.n_obs());
    for (oi, obs) in data.obs.iter().enumerate() {
        let lin = linear_predictor(&obs.w, &obs.z, &prop, &rs.params.beta[obs.subject]);
        if lin > 700.0 {
            delta = f64::NEG_INFINITY;
            break;
        }
        let eta_new = lin.exp();
        new_etas.push(eta_new);
        let x = rs.params.x[oi];
        delta += poisson_log_pmf(x, eta_new) - poisson_log_pmf(x, rs.etas[oi]);
    }
    for j in 0..d {
        delta += normal_log_pdf(prop[j], 0.0, hyper.v_alpha)
            - normal_log_pdf(rs.params.alpha[j], 0.0, hyper.v_alpha);
    }

    let (accept, alpha_prob) = mh_accept(delta, rng);
    stats.proposed += 1;
    if accept {
        stats.accepted += 1;
        rs.params.alpha = prop;
        rs.etas = new_etas;
    }
    step.adapt(alpha_prob, adapting);
    Ok(())
}

/// Per-subject random-effect blocks.
pub fn update_betas<R: Rng>(
    rs: &mut RunState,
    data: &PanelData,
    step: &mut AdaptiveStep,
    stats: &mut BlockStats,
    adapting: bool,
    rng: &mut R,
) -> Result<()> {
    let sigma_beta = Spd::new(&rs.params.sigma_beta)?;
    for i in 0..data.n_subjects() {
        let prop: Vec<f64> = rs.params.beta[i]
            .iter()
            .map(|&b| b + step.step * rng.sample::<f64, _>(StandardNormal))
            .collect();

        let s = &data.subjects[i];
        let mut delta =
            mvn_log_pdf_zero(&prop, &sigma_beta) - mvn_log_pdf_zero(&rs.params.beta[i], &sigma_beta);
        let mut new_etas = Vec::with_capacity(s.obs_end - s.obs_start);
        for oi in s.obs_start..s.obs_end {
            let obs = &data.obs[oi];
            let lin = linear_predictor(&obs.w, &obs.z, &rs.params.alpha, &prop);
            if lin > 700.0 {
                delta = f64::NEG_INFINITY;
                break;
            }
            let eta_new = lin.exp();
            new_etas.push(eta_new);
            let x = rs.params.x[oi];
            delta += poisson_log_pmf(x, eta_new) - poisson_log_pmf(x, rs.etas[oi]);
        }

        let (accept, alpha_prob) = mh_accept(delta, rng);
        stats.proposed += 1;
        if accept {
            stats.accepted += 1;
            rs.params.beta[i] = prop;
            rs.etas[s.obs_start..s.obs_end].copy_from_slice(&new_etas);
        }
        step.adapt(alpha_prob, adapting);
    }
    Ok(())
}

/// Summed reporting log-likelihood difference when every subject's reporting
/// configuration changes from the current one to `new_sigs`.
fn g_delta(
    rs: &mut RunState,
    data: &PanelData,
    solver: &SolverConfig,
    new_sigs: &[SigId],
) -> Result<f64> {
    let wants: Vec<(SigId, u32)> = data
        .obs
        .iter()
        .enumerate()
        .map(|(oi, o)| (new_sigs[o.subject], rs.params.x[oi]))
        .collect();
    rs.cache.ensure(&wants, solver)?;
    let mut delta = 0.0;
    for (oi, obs) in data.obs.iter().enumerate() {
        let x = rs.params.x[oi];
        delta += rs.cache.log_g(new_sigs[obs.subject], obs.y, x, solver)?
            - rs.cache.log_g(rs.sigs[obs.subject], obs.y, x, solver)?;
        if delta == f64::NEG_INFINITY {
            return Ok(delta);
        }
    }
    Ok(delta)
}

/// Same difference restricted to one subject (for xi updates).
fn g_delta_subject(
    rs: &mut RunState,
    data: &PanelData,
    solver: &SolverConfig,
    subject: usize,
    new_sig: SigId,
) -> Result<f64> {
    let s = &data.subjects[subject];
    let wants: Vec<(SigId, u32)> = (s.obs_start..s.obs_end)
        .map(|oi| (new_sig, rs.params.x[oi]))
        .collect();
    rs.cache.ensure(&wants, solver)?;
    let mut delta = 0.0;
    for oi in s.obs_start..s.obs_end {
        let obs = &data.obs[oi];
        let x = rs.params.x[oi];
        delta += rs.cache.log_g(new_sig, obs.y, x, solver)?
            - rs.cache.log_g(rs.sigs[subject], obs.y, x, solver)?;
    }
    Ok(delta)
}

/// Dispersion intensity: log-scale random walk.
#[allow(clippy::too_many_arguments)]
pub fn update_theta_disp<R: Rng>(
    rs: &mut RunState,
    data: &PanelData,
    hyper: &Hyperparams,
    variant: Variant,
    solver: &SolverConfig,
    step: &mut AdaptiveStep,
    stats: &mut BlockStats,
    adapting: bool,
    rng: &mut R,
) -> Result<()> {
    let cur = rs.params.theta_disp;
    let prop = cur * (step.step * rng.sample::<f64, _>(StandardNormal)).exp();

    let new_sigs = rs.sigs_with(data, variant, hyper, |p| p.theta_disp = prop);
    let mut delta = g_delta(rs, data, solver, &new_sigs)?;
    delta += inv_gamma_log_pdf(prop, hyper.ig_shape_disp, hyper.ig_rate_disp)
        - inv_gamma_log_pdf(cur, hyper.ig_shape_disp, hyper.ig_rate_disp);
    // Log-scale proposal Jacobian.
    delta += prop.ln() - cur.ln();

    let (accept, alpha_prob) = mh_accept(delta, rng);
    stats.proposed += 1;
    if accept {
        stats.accepted += 1;
        rs.params.theta_disp = prop;
        rs.sigs = new_sigs;
    }
    step.adapt(alpha_prob, adapting);
    Ok(())
}

/// Global heaping intensity: log-scale random walk.
#[allow(clippy::too_many_arguments)]
pub fn update_theta_heap<R: Rng>(
    rs: &mut RunState,
    data: &PanelData,
    hyper: &Hyperparams,
    variant: Variant,
    solver: &SolverConfig,
    step: &mut AdaptiveStep,
    stats: &mut BlockStats,
    adapting: bool,
    rng: &mut R,
) -> Result<()> {
    let cur = rs.params.theta_heap;
    let prop = cur * (step.step * rng.sample::<f64, _>(StandardNormal)).exp();

    let new_sigs = rs.sigs_with(data, variant, hyper, |p| p.theta_heap = prop);
    let mut delta = g_delta(rs, data, solver, &new_sigs)?;
    delta += inv_gamma_log_pdf(prop, hyper.ig_shape_heap, hyper.ig_rate_heap)
        - inv_gamma_log_pdf(cur, hyper.ig_shape_heap, hyper.ig_rate_heap);
    delta += prop.ln() - cur.ln();

    let (accept, alpha_prob) = mh_accept(delta, rng);
    stats.proposed += 1;
    if accept {
        stats.accepted += 1;
        rs.params.theta_heap = prop;
        rs.sigs = new_sigs;
    }
    step.adapt(alpha_prob, adapting);
    Ok(())
}

/// Regime-transition block: vector random walk; proposals that violate the
/// ordering constraint are rejected outright (zero prior mass).
#[allow(clippy::too_many_arguments)]
pub fn update_gamma<R: Rng>(
    rs: &mut RunState,
    data: &PanelData,
    hyper: &Hyperparams,
    variant: Variant,
    solver: &SolverConfig,
    step: &mut AdaptiveStep,
    stats: &mut BlockStats,
    adapting: bool,
    rng: &mut R,
) -> Result<()> {
    let cur = rs.params.gamma.clone();
    let prop: Vec<f64> = cur
        .iter()
        .map(|&g| g + step.step * rng.sample::<f64, _>(StandardNormal))
        .collect();

    stats.proposed += 1;
    if validate_gamma(&prop, prop.len() - 1).is_err() {
        step.adapt(0.0, adapting);
        return Ok(());
    }

    let mut delta = match variant {
        Variant::Wh08 => {
            let mut d = 0.0;
            for (oi, obs) in data.obs.iter().enumerate() {
                let x = rs.params.x[oi];
                let p_new = wh08_pmf(obs.y, x, &prop, &hyper.grids)?;
                let p_old = wh08_pmf(obs.y, x, &cur, &hyper.grids)?;
                if p_new <= 0.0 {
                    d = f64::NEG_INFINITY;
                    break;
                }
                d += p_new.ln() - p_old.ln();
            }
            d
        }
        _ => {
            let new_sigs = rs.sigs_with(data, variant, hyper, |p| {
                p.regimes = crate::report::RegimeModel::Logistic(prop.clone());
            });
            let d = g_delta(rs, data, solver, &new_sigs)?;
            if d > f64::NEG_INFINITY {
                // Commit lazily below; stash for the accept branch.
                rs.pending_sigs = Some(new_sigs);
            }
            d
        }
    };
    for j in 0..cur.len() {
        delta += normal_log_pdf(prop[j], 0.0, hyper.sigma2_gamma)
            - normal_log_pdf(cur[j], 0.0, hyper.sigma2_gamma);
    }

    let (accept, alpha_prob) = mh_accept(delta, rng);
    if accept {
        stats.accepted += 1;
        rs.params.gamma = prop;
        if let Some(sigs) = rs.pending_sigs.take() {
            rs.sigs = sigs;
        }
    } else {
        rs.pending_sigs = None;
    }
    step.adapt(alpha_prob, adapting);
    Ok(())
}

/// Heaping covariate effects (subject-specific variants): vector random walk
/// on omega; every subject's intensity changes.
#[allow(clippy::too_many_arguments)]
pub fn update_omega<R: Rng>(
    rs: &mut RunState,
    data: &PanelData,
    hyper: &Hyperparams,
    variant: Variant,
    solver: &SolverConfig,
    step: &mut AdaptiveStep,
    stats: &mut BlockStats,
    adapting: bool,
    rng: &mut R,
) -> Result<()> {
    let cur = rs.params.omega.clone();
    let prop: Vec<f64> = cur
        .iter()
        .map(|&o| o + step.step * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let saved = std::mem::replace(&mut rs.params.omega, prop.clone());
    let new_sigs = rs.rebuild_sigs(data, variant, hyper);
    rs.params.omega = saved;

    let mut delta = g_delta(rs, data, solver, &new_sigs)?;
    for j in 0..cur.len() {
        delta += normal_log_pdf(prop[j], 0.0, hyper.sigma2_omega)
            - normal_log_pdf(cur[j], 0.0, hyper.sigma2_omega);
    }

    let (accept, alpha_prob) = mh_accept(delta, rng);
    stats.proposed += 1;
    if accept {
        stats.accepted += 1;
        rs.params.omega = prop;
        rs.sigs = new_sigs;
    }
    step.adapt(alpha_prob, adapting);
    Ok(())
}

/// Per-subject heaping random effects.
#[allow(clippy::too_many_arguments)]
pub fn update_xis<R: Rng>(
    rs: &mut RunState,
    data: &PanelData,
    hyper: &Hyperparams,
    variant: Variant,
    solver: &SolverConfig,
    step: &mut AdaptiveStep,
    stats: &mut BlockStats,
    adapting: bool,
    rng: &mut R,
) -> Result<()> {
    for i in 0..data.n_subjects() {
        let cur = rs.params.xi[i];
        let prop = cur + step.step * rng.sample::<f64, _>(StandardNormal);

        let saved = std::mem::replace(&mut rs.params.xi[i], prop);
        let new_sig = rs.subject_sig(data, variant, hyper, i);
        rs.params.xi[i] = saved;

        let mut delta = g_delta_subject(rs, data, solver, i, new_sig)?;
        delta += normal_log_pdf(prop, 0.0, rs.params.sigma2_xi)
            - normal_log_pdf(cur, 0.0, rs.params.sigma2_xi);

        let (accept, alpha_prob) = mh_accept(delta, rng);
        stats.proposed += 1;
        if accept {
            stats.accepted += 1;
            rs.params.xi[i] = prop;
            rs.sigs[i] = new_sig;
        }
        step.adapt(alpha_prob, adapting);
    }
    Ok(())
}

/// Draw from Inverse-Gamma(shape, rate).
pub fn sample_inv_gamma<R: Rng>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0).expect("gamma shape must be positive");
    rate / g.sample(rng)
}

/// Draw from Inverse-Wishart(scale `psi`, dof `nu`) via a Bartlett-factor
/// Wishart draw on the precision side.
pub fn sample_inv_wishart<R: Rng>(psi: &SmallMat, nu: f64, rng: &mut R) -> Result<SmallMat> {
    let p = psi.n;
    if nu <= (p - 1) as f64 {
        return Err(HeapError::Domain(format!(
            "inverse-Wishart dof {nu} too small for dimension {p}"
        )));
    }
    let v = Spd::new(psi)?.inverse();
    let l = v.cholesky()?;

    // Bartlett factor of Wishart(nu, V).
    let mut a = SmallMat::zeros(p);
    for i in 0..p {
        let df = nu - i as f64;
        let chi2 = 2.0 * Gamma::new(df / 2.0, 1.0).unwrap().sample(rng);
        a.set(i, i, chi2.sqrt());
        for j in 0..i {
            a.set(i, j, Normal::new(0.0, 1.0).unwrap().sample(rng));
        }
    }
    // T = L A; W = T T^t ~ Wishart(nu, V); return W^{-1}.
    let mut t = SmallMat::zeros(p);
    for i in 0..p {
        for j in 0..p {
            let mut s = 0.0;
            for k in 0..p {
                s += l.at(i, k) * a.at(k, j);
            }
            t.set(i, j, s);
        }
    }
    let mut w = SmallMat::zeros(p);
    for i in 0..p {
        for j in 0..p {
            let mut s = 0.0;
            for k in 0..p {
                s += t.at(i, k) * t.at(j, k);
            }
            w.set(i, j, s);
        }
    }
    Ok(Spd::new(&w)?.inverse())
}

/// Conjugate draw of the random-effect covariance given the current effects.
pub fn update_sigma_beta<R: Rng>(
    rs: &mut RunState,
    data: &PanelData,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<()> {
    let c = data.z_dim;
    let n = data.n_subjects() as f64;
    if c == 1 {
        let ssq: f64 = rs.params.beta.iter().map(|b| b[0] * b[0]).sum();
        let draw = sample_inv_gamma(hyper.a_beta + n / 2.0, hyper.m_beta + 0.5 * ssq, rng);
        rs.params.sigma_beta = SmallMat::scaled_identity(1, draw);
    } else {
        let mut scale = SmallMat::scaled_identity(c, 2.0 * hyper.m_beta);
        for b in &rs.params.beta {
            scale.add_outer(b);
        }
        rs.params.sigma_beta = sample_inv_wishart(&scale, 2.0 * hyper.a_beta + n, rng)?;
    }
    Ok(())
}

/// Conjugate draw of the heaping random-effect variance.
pub fn update_sigma2_xi<R: Rng>(
    rs: &mut RunState,
    data: &PanelData,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<()> {
    let n = data.n_subjects() as f64;
    let ssq: f64 = rs.params.xi.iter().map(|x| x * x).sum();
    rs.params.sigma2_xi =
        sample_inv_gamma(hyper.ig_shape_xi + n / 2.0, hyper.ig_rate_xi + 0.5 * ssq, rng);
    Ok(())
}
