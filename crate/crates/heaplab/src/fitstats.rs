//! Goodness-of-fit measures and posterior summaries.
//!
//! DIC conditions on the parameters that directly drive the reported counts
//! (the focus set differs by variant), with the classic effective-parameter
//! count p_D = mean deviance minus deviance at the plug-in. SSPE compares
//! each report against its posterior-predictive mean.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bdp::SolverConfig;
use crate::datagen::sample_from_pmf;
use crate::error::{HeapError, Result};
use crate::model::{
    heap_params_for, wh08_pmf, wh08_report, Hyperparams, ModelParams, PanelData, Variant,
};
use crate::report::reporting_pmf;
use crate::sampler::Chain;
use crate::util::{derive_seed, mean_var, poisson_log_pmf, quantile};

/// Posterior summary for one scalar parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
}

/// Fit summary: goodness-of-fit scores plus per-parameter posteriors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub variant: Variant,
    pub n_samples: usize,
    pub dic: Option<f64>,
    pub sspe: Option<f64>,
    pub params: Vec<ParamSummary>,
}

impl FitReport {
    pub fn get(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Plain-text table.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "variant: {}  (kept samples: {})\n",
            self.variant, self.n_samples
        ));
        if let Some(dic) = self.dic {
            out.push_str(&format!("DIC:  {dic:.1}\n"));
        }
        if let Some(sspe) = self.sspe {
            out.push_str(&format!("SSPE: {sspe:.1}\n"));
        }
        out.push_str(&format!(
            "{:<24} {:>12} {:>12} {:>12}\n",
            "parameter", "mean", "2.5%", "97.5%"
        ));
        for p in &self.params {
            out.push_str(&format!(
                "{:<24} {:>12.4} {:>12.4} {:>12.4}\n",
                p.name, p.mean, p.q025, p.q975
            ));
        }
        out
    }
}

fn summary_of(name: &str, values: &mut Vec<f64>) -> ParamSummary {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.sort_by(f64::total_cmp);
    ParamSummary {
        name: name.to_string(),
        mean,
        q025: quantile(values, 0.025),
        q975: quantile(values, 0.975),
    }
}

fn series<F: Fn(&ModelParams) -> f64>(chain: &Chain, f: F) -> Vec<f64> {
    chain.samples.iter().map(f).collect()
}

/// Posterior means and 95% quantiles of the variant's active parameters,
/// including the regime transition midpoints -gamma_j / gamma_0.
pub fn summarize(chain: &Chain, data: &PanelData) -> Result<FitReport> {
    if chain.samples.is_empty() {
        return Err(HeapError::Domain("chain has no kept samples".into()));
    }
    let variant = chain.variant;
    let mut params = Vec::new();

    let d = chain.samples[0].alpha.len();
    for j in 0..d {
        let name = data
            .w_names
            .get(j)
            .map(|n| format!("alpha[{n}]"))
            .unwrap_or_else(|| format!("alpha[{j}]"));
        params.push(summary_of(&name, &mut series(chain, |p| p.alpha[j])));
    }

    let c = chain.samples[0].sigma_beta.n;
    if c == 1 {
        params.push(summary_of(
            "sigma2_beta",
            &mut series(chain, |p| p.sigma_beta.at(0, 0)),
        ));
    } else {
        for i in 0..c {
            for j in 0..=i {
                params.push(summary_of(
                    &format!("sigma_beta[{i},{j}]"),
                    &mut series(chain, |p| p.sigma_beta.at(i, j)),
                ));
            }
        }
    }

    if variant.has_theta_disp() {
        params.push(summary_of(
            "theta_disp",
            &mut series(chain, |p| p.theta_disp),
        ));
    }
    if variant.has_global_heap() {
        params.push(summary_of(
            "theta_heap",
            &mut series(chain, |p| p.theta_heap),
        ));
    }
    if variant.has_gamma() {
        let j_max = chain.samples[0].gamma.len();
        for j in 0..j_max {
            params.push(summary_of(
                &format!("gamma[{j}]"),
                &mut series(chain, |p| p.gamma[j]),
            ));
        }
        for j in 1..j_max {
            params.push(summary_of(
                &format!("midpoint[{j}]"),
                &mut series(chain, |p| -p.gamma[j] / p.gamma[0]),
            ));
        }
    }
    if variant.has_subject_heap() {
        let k = chain.samples[0].omega.len();
        for j in 0..k {
            let name = if j == 0 {
                "omega[intercept]".to_string()
            } else {
                data.h_names
                    .get(j)
                    .map(|n| format!("omega[{n}]"))
                    .unwrap_or_else(|| format!("omega[{j}]"))
            };
            params.push(summary_of(&name, &mut series(chain, |p| p.omega[j])));
        }
        params.push(summary_of(
            "sigma2_xi",
            &mut series(chain, |p| p.sigma2_xi),
        ));
    }

    Ok(FitReport {
        variant,
        n_samples: chain.samples.len(),
        dic: None,
        sspe: None,
        params,
    })
}

/// -2 log p(Y | focus parameters) for one parameter state.
fn deviance(
    params: &ModelParams,
    data: &PanelData,
    variant: Variant,
    hyper: &Hyperparams,
    cfg: &SolverConfig,
) -> Result<f64> {
    let mut log_lik = 0.0;
    match variant {
        Variant::NoHeaping => {
            for obs in &data.obs {
                let eta = crate::model::latent_intensity(
                    &obs.w,
                    &obs.z,
                    &params.alpha,
                    &params.beta[obs.subject],
                )?;
                log_lik += poisson_log_pmf(obs.y, eta);
            }
        }
        Variant::Wh08 => {
            for (oi, obs) in data.obs.iter().enumerate() {
                let p = wh08_pmf(obs.y, params.x[oi], &params.gamma, &hyper.grids)?;
                log_lik += p.max(1e-300).ln();
            }
        }
        _ => {
            // Rows keyed by (subject heap parameters, x) within this state.
            let mut cache = crate::sampler::GRowCache::with_limit(usize::MAX);
            let mut sigs = Vec::with_capacity(data.n_subjects());
            for i in 0..data.n_subjects() {
                sigs.push(cache.sig(&heap_params_for(params, variant, data, i, hyper)));
            }
            for (oi, obs) in data.obs.iter().enumerate() {
                let lg = cache.log_g(sigs[obs.subject], obs.y, params.x[oi], cfg)?;
                log_lik += lg.max(-690.0);
            }
        }
    }
    Ok(-2.0 * log_lik)
}

/// Plug-in state at the posterior mean of the focus parameters, with
/// per-observation posterior-mode latent counts.
fn plug_in_state(chain: &Chain, data: &PanelData) -> ModelParams {
    let n = chain.samples.len() as f64;
    let mut plug = chain.samples[0].clone();

    for j in 0..plug.alpha.len() {
        plug.alpha[j] = chain.samples.iter().map(|s| s.alpha[j]).sum::<f64>() / n;
    }
    for i in 0..plug.beta.len() {
        for j in 0..plug.beta[i].len() {
            plug.beta[i][j] = chain.samples.iter().map(|s| s.beta[i][j]).sum::<f64>() / n;
        }
    }
    plug.theta_disp = chain.samples.iter().map(|s| s.theta_disp).sum::<f64>() / n;
    plug.theta_heap = chain.samples.iter().map(|s| s.theta_heap).sum::<f64>() / n;
    for j in 0..plug.gamma.len() {
        plug.gamma[j] = chain.samples.iter().map(|s| s.gamma[j]).sum::<f64>() / n;
    }
    for j in 0..plug.omega.len() {
        plug.omega[j] = chain.samples.iter().map(|s| s.omega[j]).sum::<f64>() / n;
    }
    plug.sigma2_xi = chain.samples.iter().map(|s| s.sigma2_xi).sum::<f64>() / n;

    // Posterior mean subject heaping intensity, realized through xi so the
    // plug-in state carries exactly the averaged intensity.
    if chain.variant.has_subject_heap() {
        for i in 0..plug.xi.len() {
            let mean_heap = chain
                .samples
                .iter()
                .map(|s| s.theta_heap_for(chain.variant, data, i))
                .sum::<f64>()
                / n;
            let lin: f64 = data.subjects[i]
                .h
                .iter()
                .zip(&plug.omega)
                .map(|(a, b)| a * b)
                .sum();
            plug.xi[i] = mean_heap.ln() - lin;
        }
    }

    // Posterior mode of each latent count.
    for oi in 0..plug.x.len() {
        let mut counts: std::collections::HashMap<u32, usize> = std::collections::HashMap::new();
        for s in &chain.samples {
            *counts.entry(s.x[oi]).or_insert(0) += 1;
        }
        plug.x[oi] = counts
            .into_iter()
            .max_by_key(|&(x, c)| (c, std::cmp::Reverse(x)))
            .map(|(x, _)| x)
            .unwrap();
    }
    plug
}

/// Deviance information criterion for the chain's variant.
pub fn dic(
    chain: &Chain,
    data: &PanelData,
    hyper: &Hyperparams,
    cfg: &SolverConfig,
) -> Result<f64> {
    if chain.samples.is_empty() {
        return Err(HeapError::Domain("chain has no kept samples".into()));
    }
    let variant = chain.variant;
    check_focus(chain, variant)?;

    let deviances: Vec<Result<f64>> = chain
        .samples
        .par_iter()
        .map(|s| deviance(s, data, variant, hyper, cfg))
        .collect();
    let mut mean_dev = 0.0;
    for d in deviances {
        mean_dev += d?;
    }
    mean_dev /= chain.samples.len() as f64;

    let plug = plug_in_state(chain, data);
    let dev_plug = deviance(&plug, data, variant, hyper, cfg)?;
    Ok(2.0 * mean_dev - dev_plug)
}

fn check_focus(chain: &Chain, variant: Variant) -> Result<()> {
    let s = &chain.samples[0];
    if variant.has_gamma() && s.gamma.is_empty() {
        return Err(HeapError::Domain(format!(
            "variant {variant} needs gamma samples in the chain"
        )));
    }
    if chain.variant != variant {
        return Err(HeapError::Domain(format!(
            "chain was sampled under {}, not {variant}",
            chain.variant
        )));
    }
    Ok(())
}

/// Sum of squared mean posterior-predictive errors. One predictive draw per
/// kept sample; each sample's RNG stream is derived from `seed` and a hash
/// of the sample itself, so the result does not depend on sample order.
pub fn sspe(
    chain: &Chain,
    data: &PanelData,
    hyper: &Hyperparams,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<f64> {
    if chain.samples.is_empty() {
        return Err(HeapError::Domain("chain has no kept samples".into()));
    }
    let variant = chain.variant;

    let draws: Vec<Result<Vec<f64>>> = chain
        .samples
        .par_iter()
        .map(|s| {
            let fingerprint = crate::io::config_hash(
                serde_json::to_string(s).unwrap_or_default().as_bytes(),
            );
            let stream = u64::from_str_radix(&fingerprint, 16).unwrap_or(0);
            predictive_draw(s, data, variant, hyper, cfg, derive_seed(seed, stream))
        })
        .collect();

    let mut mean_pred = vec![0.0f64; data.n_obs()];
    for d in draws {
        for (m, y) in mean_pred.iter_mut().zip(d?) {
            *m += y;
        }
    }
    let n = chain.samples.len() as f64;
    Ok(data
        .obs
        .iter()
        .zip(&mean_pred)
        .map(|(o, m)| {
            let e = o.y as f64 - m / n;
            e * e
        })
        .sum())
}

fn predictive_draw(
    params: &ModelParams,
    data: &PanelData,
    variant: Variant,
    hyper: &Hyperparams,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(data.n_obs());
    match variant {
        Variant::NoHeaping => {
            for obs in &data.obs {
                let eta = crate::model::latent_intensity(
                    &obs.w,
                    &obs.z,
                    &params.alpha,
                    &params.beta[obs.subject],
                )?;
                out.push(Poisson::new(eta.max(1e-12)).unwrap().sample(&mut rng));
            }
        }
        Variant::Wh08 => {
            for (oi, _) in data.obs.iter().enumerate() {
                out.push(wh08_report(params.x[oi], &params.gamma, &hyper.grids, &mut rng)? as f64);
            }
        }
        _ => {
            let mut rows: std::collections::HashMap<(usize, u32), std::sync::Arc<Vec<f64>>> =
                std::collections::HashMap::new();
            for (oi, obs) in data.obs.iter().enumerate() {
                let x = params.x[oi];
                let hp = heap_params_for(params, variant, data, obs.subject, hyper);
                let key = (
                    if variant == Variant::Heaping || variant == Variant::DispersionOnly {
                        0
                    } else {
                        obs.subject
                    },
                    x,
                );
                let row = match rows.get(&key) {
                    Some(r) => r.clone(),
                    None => {
                        let r = if hp.theta_disp < crate::model::FROZEN_EPS
                            && hp.theta_heap < crate::model::FROZEN_EPS
                        {
                            let mut v = vec![0.0; x as usize + 1];
                            v[x as usize] = 1.0;
                            std::sync::Arc::new(v)
                        } else {
                            std::sync::Arc::new(reporting_pmf(&hp, x, cfg)?)
                        };
                        rows.insert(key, r.clone());
                        r
                    }
                };
                out.push(sample_from_pmf(&row, &mut rng) as f64);
            }
        }
    }
    Ok(out)
}

/// Table-style aggregation across simulation replicates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub true_value: f64,
    pub mean_of_posterior_means: f64,
    pub sd_of_posterior_means: f64,
    pub mean_posterior_variance: f64,
    pub mse: f64,
}

pub fn replicate_summary(
    true_value: f64,
    posterior_means: &[f64],
    posterior_variances: &[f64],
) -> ReplicateSummary {
    let (mean, var) = mean_var(posterior_means);
    let mse = posterior_means
        .iter()
        .map(|m| (m - true_value) * (m - true_value))
        .sum::<f64>()
        / posterior_means.len() as f64;
    ReplicateSummary {
        true_value,
        mean_of_posterior_means: mean,
        sd_of_posterior_means: var.sqrt(),
        mean_posterior_variance: posterior_variances.iter().sum::<f64>()
            / posterior_variances.len() as f64,
        mse,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SmallMat;

    fn toy_panel(ys: &[u32]) -> PanelData {
        let rows = ys
            .iter()
            .enumerate()
            .map(|(t, &y)| {
                (
                    "s1".to_string(),
                    t as u32,
                    y,
                    vec![1.0],
                    vec![1.0],
                    vec![1.0],
                )
            })
            .collect();
        PanelData::assemble(rows, vec!["intercept".into()], vec!["intercept".into()]).unwrap()
    }

    fn state(alpha: f64, data: &PanelData) -> ModelParams {
        ModelParams {
            alpha: vec![alpha],
            beta: vec![vec![0.0]; data.n_subjects()],
            sigma_beta: SmallMat::identity(1),
            theta_disp: 0.5,
            theta_heap: 1.0,
            omega: vec![0.0],
            xi: vec![0.0; data.n_subjects()],
            sigma2_xi: 1.0,
            gamma: vec![0.5, -5.0, -10.0, -20.0],
            x: data.obs.iter().map(|o| o.y).collect(),
        }
    }

    fn chain_of(variant: Variant, samples: Vec<ModelParams>) -> Chain {
        Chain {
            variant,
            seed: 0,
            iterations: samples.len(),
            burn_in: 0,
            thin: 1,
            acceptance: Default::default(),
            wall_secs: 0.0,
            samples,
        }
    }

    #[test]
    fn degenerate_chain_has_zero_effective_parameters() {
        let data = toy_panel(&[3, 5]);
        let hyper = Hyperparams::default();
        let s = state(1.0, &data);
        let chain = chain_of(Variant::NoHeaping, vec![s.clone(), s.clone(), s]);
        let got = dic(&chain, &data, &hyper, &SolverConfig::default()).unwrap();
        // p_D = 0, so DIC equals the common deviance.
        let dev = -2.0
            * (poisson_log_pmf(3, 1.0f64.exp()) + poisson_log_pmf(5, 1.0f64.exp()));
        assert!((got - dev).abs() < 1e-10, "{got} vs {dev}");
    }

    #[test]
    fn two_sample_dic_matches_hand_computation() {
        let data = toy_panel(&[4]);
        let hyper = Hyperparams::default();
        let s1 = state(1.0, &data);
        let s2 = state(2.0, &data);
        let chain = chain_of(Variant::NoHeaping, vec![s1, s2]);
        let got = dic(&chain, &data, &hyper, &SolverConfig::default()).unwrap();

        let d = |a: f64| -2.0 * poisson_log_pmf(4, a.exp());
        let mean_dev = 0.5 * (d(1.0) + d(2.0));
        let expect = 2.0 * mean_dev - d(1.5);
        assert!((got - expect).abs() < 1e-10, "{got} vs {expect}");
    }

    #[test]
    fn sspe_is_zero_when_predictions_hit_reports() {
        // Frozen reporting (theta -> 0) and latent counts pinned at the
        // reports make every predictive draw equal the report.
        let data = toy_panel(&[7, 11, 2]);
        let hyper = Hyperparams::default();
        let mut s = state(1.0, &data);
        s.theta_disp = 0.0;
        s.theta_heap = 0.0;
        let chain = chain_of(Variant::Heaping, vec![s.clone(), s]);
        let got = sspe(&chain, &data, &hyper, &SolverConfig::default(), 42).unwrap();
        assert_eq!(got, 0.0);
    }

    #[test]
    fn sspe_matches_hand_computation_for_constant_predictions() {
        // Single observation y = 10 with predictive mass fixed at 8: the
        // squared error is 4.
        let data = toy_panel(&[10]);
        let hyper = Hyperparams::default();
        let mut s = state(0.0, &data);
        s.theta_disp = 0.0;
        s.theta_heap = 0.0;
        s.x = vec![8];
        let chain = chain_of(Variant::Heaping, vec![s.clone(), s]);
        let got = sspe(&chain, &data, &hyper, &SolverConfig::default(), 1).unwrap();
        assert!((got - 4.0).abs() < 1e-12);
    }

    #[test]
    fn summarize_reports_constants_and_midpoints() {
        let data = toy_panel(&[3]);
        let s = state(1.5, &data);
        let chain = chain_of(Variant::Heaping, vec![s.clone(), s]);
        let rep = summarize(&chain, &data).unwrap();
        let a = rep.get("alpha[intercept]").unwrap();
        assert_eq!(a.mean, 1.5);
        assert_eq!(a.q025, 1.5);
        assert_eq!(a.q975, 1.5);
        // gamma = (0.5, -5, -10, -20) -> midpoints (10, 20, 40).
        assert!((rep.get("midpoint[1]").unwrap().mean - 10.0).abs() < 1e-12);
        assert!((rep.get("midpoint[2]").unwrap().mean - 20.0).abs() < 1e-12);
        assert!((rep.get("midpoint[3]").unwrap().mean - 40.0).abs() < 1e-12);
    }

    #[test]
    fn quantiles_are_ordered() {
        let data = toy_panel(&[3]);
        let samples: Vec<ModelParams> = (0..40).map(|k| state(k as f64 / 10.0, &data)).collect();
        let chain = chain_of(Variant::Heaping, samples);
        let rep = summarize(&chain, &data).unwrap();
        for p in &rep.params {
            assert!(p.q025 <= p.mean + 1e-12 && p.mean <= p.q975 + 1e-12, "{}", p.name);
        }
    }

    #[test]
    fn sspe_and_dic_are_invariant_to_sample_order() {
        let data = toy_panel(&[9, 4]);
        let hyper = Hyperparams::default();
        let samples: Vec<ModelParams> = (0..6)
            .map(|k| {
                let mut s = state(0.5 + k as f64 / 10.0, &data);
                s.x = vec![9 + k % 2, 4];
                s
            })
            .collect();
        let mut reversed = samples.clone();
        reversed.reverse();
        let c1 = chain_of(Variant::Heaping, samples);
        let c2 = chain_of(Variant::Heaping, reversed);
        let cfg = SolverConfig::default();
        let s1 = sspe(&c1, &data, &hyper, &cfg, 5).unwrap();
        let s2 = sspe(&c2, &data, &hyper, &cfg, 5).unwrap();
        assert_eq!(s1, s2);
        let d1 = dic(&c1, &data, &hyper, &cfg).unwrap();
        let d2 = dic(&c2, &data, &hyper, &cfg).unwrap();
        assert!((d1 - d2).abs() < 1e-9);
    }

    #[test]
    fn replicate_summary_aggregates() {
        let s = replicate_summary(2.0, &[1.9, 2.1, 2.0], &[0.05, 0.07, 0.06]);
        assert!((s.mean_of_posterior_means - 2.0).abs() < 1e-12);
        assert!((s.mean_posterior_variance - 0.06).abs() < 1e-12);
        assert!((s.mse - (0.01 + 0.01 + 0.0) / 3.0).abs() < 1e-12);
    }
}
