//! Python bindings: the reporting distribution, the engine's transition
//! rows, panel simulation and MCMC fits, exposed as plain functions plus a
//! couple of small classes.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use heaplab::bdp::{
    dispersion_moments as moments, normal_approx_pmf as napprox, transition_row as trow,
    uniformization_row as urow, SolverConfig, TabulatedRates,
};
use heaplab::datagen::{simulate_panel as simulate, Mechanism, SimConfig};
use heaplab::error::HeapError;
use heaplab::fitstats::{dic as dic_rs, sspe as sspe_rs, summarize};
use heaplab::model::{Hyperparams, PanelData, Variant};
use heaplab::report::{
    heap_rates, mixture_loglik as mixture, regime_weights as rweights, HeapParams, RegimeModel,
};
use heaplab::sampler::{run_mcmc, SamplerConfig};

fn err(e: HeapError) -> PyErr {
    match e {
        HeapError::Domain(_) | HeapError::Ingestion { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn heap_params(
    theta_disp: f64,
    theta_heap: f64,
    grids: Vec<u32>,
    gamma: Option<Vec<f64>>,
) -> PyResult<HeapParams> {
    let p = match gamma {
        Some(g) => HeapParams {
            theta_disp,
            theta_heap,
            grids,
            regimes: RegimeModel::Logistic(g),
        },
        None if theta_heap == 0.0 => HeapParams::dispersion_only(theta_disp),
        None => {
            if grids.len() != 1 {
                return Err(PyValueError::new_err(
                    "without gamma, pass exactly one grid (always-heap model)",
                ));
            }
            HeapParams::single_grid(theta_disp, theta_heap, grids[0])
        }
    };
    p.validate().map_err(err)?;
    Ok(p)
}

/// Reporting pmf g(.|x) as a list of probabilities indexed by the report.
#[pyfunction]
#[pyo3(signature = (x, theta_disp, theta_heap, grids=vec![5, 10, 50], gamma=None))]
fn reporting_pmf(
    x: u32,
    theta_disp: f64,
    theta_heap: f64,
    grids: Vec<u32>,
    gamma: Option<Vec<f64>>,
) -> PyResult<Vec<f64>> {
    let p = heap_params(theta_disp, theta_heap, grids, gamma)?;
    heaplab::report::reporting_pmf(&p, x, &SolverConfig::default()).map_err(err)
}

/// Proportional-odds regime weights (v_0, ..., v_J) at true count x.
#[pyfunction]
fn regime_weights(gamma: Vec<f64>, x: u32) -> PyResult<Vec<f64>> {
    rweights(&gamma, x).map_err(err)
}

/// Birth and death rate tables of the heaping process out of x.
#[pyfunction]
#[pyo3(signature = (x, theta_disp, theta_heap, grids=vec![5, 10, 50], gamma=None, max_state=100))]
fn heaping_rates(
    x: u32,
    theta_disp: f64,
    theta_heap: f64,
    grids: Vec<u32>,
    gamma: Option<Vec<f64>>,
    max_state: u32,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    use heaplab::bdp::RateSchedule;
    let p = heap_params(theta_disp, theta_heap, grids, gamma)?;
    let r = heap_rates(&p, x).map_err(err)?;
    let birth = (0..=max_state).map(|k| r.birth(k)).collect();
    let death = (0..=max_state)
        .map(|k| if k == 0 { 0.0 } else { r.death(k) })
        .collect();
    Ok((birth, death))
}

/// Transition row P_a.(t) for explicit rate tables.
#[pyfunction]
#[pyo3(signature = (birth, death, a, t=1.0, oracle=false))]
fn transition_row(
    birth: Vec<f64>,
    death: Vec<f64>,
    a: u32,
    t: f64,
    oracle: bool,
) -> PyResult<Vec<f64>> {
    if birth.len() != death.len() {
        return Err(PyValueError::new_err("birth and death tables must align"));
    }
    let cap = birth.len().saturating_sub(1);
    let rates = TabulatedRates { birth, death };
    let mut cfg = SolverConfig::with_cap(cap.max(8));
    cfg.max_doublings = 0; // explicit tables cannot extend past their end
    let row = if oracle {
        urow(&rates, a, t, &cfg)
    } else {
        trow(&rates, a, t, &cfg)
    };
    row.map_err(err)
}

/// Dispersion-only mean and variance of the report after time t.
#[pyfunction]
#[pyo3(signature = (a, theta_disp, t=1.0))]
fn dispersion_moments(a: u32, theta_disp: f64, t: f64) -> (f64, f64) {
    moments(a, theta_disp, t)
}

/// Discretized-normal approximation to the dispersion-only reporting pmf.
#[pyfunction]
fn normal_approx_pmf(a: u32, theta_disp: f64, lo: u32, hi: u32) -> PyResult<Vec<f64>> {
    napprox(a, theta_disp, lo..=hi).map_err(err)
}

/// Log marginal likelihood of one report under a Poisson true-count law.
#[pyfunction]
#[pyo3(signature = (y, eta, theta_disp, theta_heap, grids=vec![5, 10, 50], gamma=None))]
fn mixture_loglik(
    y: u32,
    eta: f64,
    theta_disp: f64,
    theta_heap: f64,
    grids: Vec<u32>,
    gamma: Option<Vec<f64>>,
) -> PyResult<(f64, bool)> {
    let p = heap_params(theta_disp, theta_heap, grids, gamma)?;
    let m = mixture(y, eta, &p, &SolverConfig::default()).map_err(err)?;
    Ok((m.log_lik, m.underflow))
}

/// A simulated heaped panel with its ground truth.
#[pyclass]
struct Panel {
    data: PanelData,
    truth_json: String,
}

#[pymethods]
impl Panel {
    /// Rows as (subject_id, time_index, y) tuples.
    fn rows(&self) -> Vec<(String, u32, u32)> {
        self.data
            .obs
            .iter()
            .map(|o| {
                (
                    self.data.subjects[o.subject].id.clone(),
                    o.time_index,
                    o.y,
                )
            })
            .collect()
    }

    /// Ground-truth parameters as a JSON string.
    fn truth(&self) -> &str {
        &self.truth_json
    }

    fn __len__(&self) -> usize {
        self.data.n_obs()
    }
}

/// Simulate a longitudinal heaped panel.
#[pyfunction]
#[pyo3(signature = (n_subjects=100, repeats=5, alpha=2.0, sigma2_beta=1.21,
                    theta_disp=0.5, theta_heap=2.0,
                    gamma=vec![0.5, -5.0, -10.0, -20.0], grids=vec![5, 10, 50],
                    seed=1, mechanism="bdp"))]
#[allow(clippy::too_many_arguments)]
fn simulate_panel(
    n_subjects: usize,
    repeats: usize,
    alpha: f64,
    sigma2_beta: f64,
    theta_disp: f64,
    theta_heap: f64,
    gamma: Vec<f64>,
    grids: Vec<u32>,
    seed: u64,
    mechanism: &str,
) -> PyResult<Panel> {
    let mechanism = match mechanism {
        "bdp" => Mechanism::Bdp,
        "wh08" => Mechanism::Wh08,
        "none" => Mechanism::None,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown mechanism `{other}`"
            )))
        }
    };
    let cfg = SimConfig {
        n_subjects,
        repeats,
        alpha,
        sigma2_beta,
        theta_disp,
        theta_heap,
        gamma,
        grids,
        seed,
        mechanism,
    };
    let (data, truth) = simulate(&cfg).map_err(err)?;
    Ok(Panel {
        data,
        truth_json: serde_json::to_string(&truth).map_err(|e| PyRuntimeError::new_err(e.to_string()))?,
    })
}

/// Fit a model variant to a panel by MCMC; returns a summary dict.
#[pyfunction]
#[pyo3(signature = (panel, variant="heaping", iterations=4000, burn_in=1000,
                    thin=5, seed=0, compute_fit_stats=false))]
#[allow(clippy::too_many_arguments)]
fn fit_panel(
    py: Python<'_>,
    panel: &Panel,
    variant: &str,
    iterations: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
    compute_fit_stats: bool,
) -> PyResult<Py<PyDict>> {
    let variant: Variant = variant.parse().map_err(err)?;
    let hyper = Hyperparams::default();
    let cfg = SamplerConfig {
        iterations,
        burn_in,
        thin,
        seed,
        ..SamplerConfig::default()
    };
    let chain = py
        .detach(|| run_mcmc(&panel.data, &hyper, variant, &cfg))
        .map_err(err)?;

    let mut report = summarize(&chain, &panel.data).map_err(err)?;
    if compute_fit_stats {
        let solver = SolverConfig::default();
        report.dic = Some(
            py.detach(|| dic_rs(&chain, &panel.data, &hyper, &solver))
                .map_err(err)?,
        );
        report.sspe = Some(
            py.detach(|| sspe_rs(&chain, &panel.data, &hyper, &solver, seed))
                .map_err(err)?,
        );
    }

    let out = PyDict::new(py);
    out.set_item("variant", report.variant.name())?;
    out.set_item("n_samples", report.n_samples)?;
    out.set_item("dic", report.dic)?;
    out.set_item("sspe", report.sspe)?;
    let params = PyDict::new(py);
    for p in &report.params {
        params.set_item(&p.name, (p.mean, p.q025, p.q975))?;
    }
    out.set_item("params", params)?;
    let acc = PyDict::new(py);
    for (k, v) in &chain.acceptance {
        acc.set_item(k, *v)?;
    }
    out.set_item("acceptance", acc)?;
    Ok(out.into())
}

/// Deterministic-rounding report for a true count (the WH08 baseline), as
/// (report, regime) under the given regime draw probabilities.
#[pyfunction]
#[pyo3(signature = (x, gamma, grids=vec![5, 10, 50], seed=0))]
fn wh08_report(x: u32, gamma: Vec<f64>, grids: Vec<u32>, seed: u64) -> PyResult<u32> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    heaplab::model::wh08_report(x, &gamma, &grids, &mut rng).map_err(err)
}

#[pymodule]
fn heaplab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(reporting_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(regime_weights, m)?)?;
    m.add_function(wrap_pyfunction!(heaping_rates, m)?)?;
    m.add_function(wrap_pyfunction!(transition_row, m)?)?;
    m.add_function(wrap_pyfunction!(dispersion_moments, m)?)?;
    m.add_function(wrap_pyfunction!(normal_approx_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(mixture_loglik, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_panel, m)?)?;
    m.add_function(wrap_pyfunction!(fit_panel, m)?)?;
    m.add_function(wrap_pyfunction!(wh08_report, m)?)?;
    m.add_class::<Panel>()?;
    Ok(())
}
