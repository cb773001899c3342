//! Python bindings for the transfer-mdp library.
//!
//! Build with `cargo build -p transfer-mdp-py --release`, then import the
//! produced cdylib as `transfer_mdp_py` (rename/copy
//! `libtransfer_mdp_py.so` to `transfer_mdp_py.so` somewhere on
//! `sys.path`).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use transfer_mdp::convexhull::{estimate_coefficients, select_anchor_pairs, MixCoefficients};
use transfer_mdp::hardcase::{build_family, derive_params, eps_ceiling, HardCaseParams};
use transfer_mdp::learners::LearnerConfig;
use transfer_mdp::mdp::{
    candidate_set, is_eps_optimal, perturb_within_ball, policy_evaluation_exact, random_dense_mdp,
    tv_distance, value_iteration, Policy,
};
use transfer_mdp::sailing::{make_sailing, SailingInstance};
use transfer_mdp::transfer::{transfer_learn, ThresholdVariant, TransferConfig};

fn err(e: transfer_mdp::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn variant_from_str(name: &str) -> PyResult<ThresholdVariant> {
    match name {
        "theorem" => Ok(ThresholdVariant::TheoremBound),
        "lemma" => Ok(ThresholdVariant::LemmaBound),
        other => Err(PyValueError::new_err(format!(
            "unknown threshold variant {other:?}; expected \"theorem\" or \"lemma\""
        ))),
    }
}

/// A finite discounted MDP with per-state action sets.
#[pyclass(name = "Mdp", from_py_object)]
#[derive(Clone)]
struct PyMdp {
    inner: transfer_mdp::Mdp,
}

#[pymethods]
impl PyMdp {
    /// Build from nested lists: transition[s][a][s'], reward[s][a][s'].
    #[new]
    fn new(gamma: f64, transition: Vec<Vec<Vec<f64>>>, reward: Vec<Vec<Vec<f64>>>) -> PyResult<Self> {
        Ok(PyMdp { inner: transfer_mdp::Mdp::new(gamma, transition, reward).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyMdp { inner: transfer_mdp::io::load_mdp(path).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyMdp { inner: transfer_mdp::io::mdp_from_json(text).map_err(err)? })
    }

    #[staticmethod]
    fn random_dense(states: usize, actions: usize, gamma: f64, seed: u64) -> PyResult<Self> {
        Ok(PyMdp { inner: random_dense_mdp(states, actions, gamma, seed).map_err(err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        transfer_mdp::io::save_mdp(&self.inner, path).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        transfer_mdp::io::mdp_to_json(&self.inner).map_err(err)
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    fn num_actions(&self, s: usize) -> usize {
        self.inner.num_actions(s)
    }

    fn transition_row(&self, s: usize, a: usize) -> Vec<f64> {
        self.inner.transition_row(s, a).to_vec()
    }

    /// Exact planning: (optimal values, optimal Q, greedy policy).
    #[pyo3(signature = (tol = 1e-9))]
    fn plan(&self, tol: f64) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, Vec<usize>)> {
        let (v, q, pi) = value_iteration(&self.inner, tol).map_err(err)?;
        Ok((v.values, q.values, pi.actions))
    }

    /// Per-state candidate action sets at elimination threshold `c`.
    fn candidate_sets(&self, c: f64) -> PyResult<Vec<Vec<usize>>> {
        let (_, q, _) = value_iteration(&self.inner, 1e-9).map_err(err)?;
        Ok(candidate_set(&self.inner, &q, c).sets)
    }

    fn tv_distance(&self, other: &PyMdp) -> PyResult<f64> {
        tv_distance(&self.inner, &other.inner).map_err(err)
    }

    fn perturb_within_ball(&self, beta: f64, seed: u64) -> PyResult<PyMdp> {
        Ok(PyMdp { inner: perturb_within_ball(&self.inner, beta, seed).map_err(err)? })
    }

    /// Exact value of a deterministic policy (one action index per state).
    fn policy_value(&self, actions: Vec<usize>) -> PyResult<Vec<f64>> {
        let pi = Policy { actions };
        pi.validate(&self.inner).map_err(err)?;
        Ok(policy_evaluation_exact(&self.inner, &pi).map_err(err)?.values)
    }

    /// (is_eps_optimal, worst per-state value gap) of a deterministic policy.
    fn is_eps_optimal(&self, actions: Vec<usize>, eps: f64) -> PyResult<(bool, f64)> {
        let pi = Policy { actions };
        let rep = is_eps_optimal(&self.inner, &pi, eps).map_err(err)?;
        Ok((rep.is_eps_optimal, rep.worst_gap))
    }

    fn __repr__(&self) -> String {
        format!(
            "Mdp(states={}, pairs={}, gamma={})",
            self.inner.num_states(),
            self.inner.num_pairs(),
            self.inner.gamma()
        )
    }
}

/// Seeded sampling oracle for an MDP with per-pair substreams and counters.
#[pyclass(name = "GenerativeModel")]
struct PyGenerativeModel {
    inner: transfer_mdp::GenerativeModel,
}

#[pymethods]
impl PyGenerativeModel {
    #[new]
    fn new(mdp: &PyMdp, seed: u64) -> Self {
        PyGenerativeModel { inner: transfer_mdp::GenerativeModel::new(mdp.inner.clone(), seed) }
    }

    /// One generative draw: (next state, reward).
    fn sample(&self, s: usize, a: usize) -> PyResult<(usize, f64)> {
        self.inner.sample(s, a).map_err(err)
    }

    #[getter]
    fn total_samples(&self) -> u64 {
        self.inner.report().total
    }

    fn per_pair_counts(&self) -> Vec<Vec<u64>> {
        self.inner.report().per_pair
    }
}

/// Elimination threshold; `variant` is "theorem" or "lemma".
#[pyfunction(name = "compute_c_bar")]
#[pyo3(signature = (beta, gamma, eps, variant = "theorem"))]
fn py_compute_c_bar(beta: f64, gamma: f64, eps: f64, variant: &str) -> PyResult<f64> {
    Ok(transfer_mdp::compute_c_bar(beta, gamma, eps, variant_from_str(variant)?))
}

/// Plan on the prior, eliminate actions, learn the rest through the oracle.
/// Returns a dict with the threshold, candidate sets, policy, sample count
/// and retained-pair counts.
#[pyfunction(name = "transfer_learn")]
#[pyo3(signature = (prior, oracle, beta, eps, delta = 0.05, budget_scale = 1.0, variant = "theorem"))]
fn py_transfer_learn<'py>(
    py: Python<'py>,
    prior: &PyMdp,
    oracle: &PyGenerativeModel,
    beta: f64,
    eps: f64,
    delta: f64,
    budget_scale: f64,
    variant: &str,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let cfg = TransferConfig {
        beta,
        eps,
        delta,
        threshold_variant: variant_from_str(variant)?,
        learner: LearnerConfig { budget_scale, ..LearnerConfig::default() },
    };
    let out = transfer_learn(&prior.inner, &oracle.inner, &cfg).map_err(err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("c_bar", out.c_bar)?;
    dict.set_item("candidate_sets", out.candidate_sets.sets)?;
    dict.set_item("policy", out.policy.actions)?;
    dict.set_item("samples", out.report.total)?;
    dict.set_item("n_bar", out.retained_over_sprime)?;
    dict.set_item("retained_total", out.retained_total)?;
    dict.set_item("eliminated_fraction", out.eliminated_fraction)?;
    Ok(dict)
}

/// Derived parameters of the three-layer hard-case family, plus the prior and
/// every hypothesis as Mdp objects. `p0` is one nonincreasing row of prior
/// self-loop probabilities per decision state; `eps=None` uses half the
/// admissible ceiling.
#[pyfunction(name = "hardcase_family")]
#[pyo3(signature = (beta, gamma, p0, eps = None))]
fn py_hardcase_family<'py>(
    py: Python<'py>,
    beta: f64,
    gamma: f64,
    p0: Vec<Vec<f64>>,
    eps: Option<f64>,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let base = HardCaseParams {
        k_states: p0.len(),
        l_actions: p0.first().map_or(0, Vec::len),
        beta,
        gamma,
        p0,
        eps: f64::MIN_POSITIVE,
    };
    let eps = match eps {
        Some(e) => e,
        None => eps_ceiling(&base).map_err(err)? / 2.0,
    };
    let params = HardCaseParams { eps, ..base };
    let derived = derive_params(&params).map_err(err)?;
    let fam = build_family(&params).map_err(err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("eps", eps)?;
    dict.set_item("p0k", derived.p0k)?;
    dict.set_item("eps0", derived.eps0)?;
    dict.set_item("alpha1", derived.alpha1)?;
    dict.set_item("alpha2", derived.alpha2)?;
    dict.set_item("lk", derived.lk)?;
    dict.set_item("c_lower", derived.c_lower)?;
    dict.set_item("c_bar", derived.c_bar)?;
    dict.set_item("prior", PyMdp { inner: fam.prior.clone() })?;
    let hyps: Vec<_> = fam
        .hypotheses()
        .map(|m| PyMdp { inner: m.clone() })
        .collect();
    dict.set_item("hypotheses", hyps)?;
    Ok(dict)
}

/// Convex hull of base models with its anchor pairs fixed at construction.
#[pyclass(name = "Hull")]
struct PyHull {
    inner: transfer_mdp::convexhull::HullModel,
}

#[pymethods]
impl PyHull {
    #[new]
    fn new(bases: Vec<PyMdp>) -> PyResult<Self> {
        let models: Vec<_> = bases.into_iter().map(|b| b.inner).collect();
        Ok(PyHull { inner: select_anchor_pairs(&models).map_err(err)? })
    }

    #[getter]
    fn anchor_pairs(&self) -> Vec<(usize, usize)> {
        self.inner.anchor_pairs.clone()
    }

    #[getter]
    fn lambda_min(&self) -> f64 {
        self.inner.lambda_min
    }

    #[getter]
    fn lambda_max(&self) -> f64 {
        self.inner.lambda_max
    }

    /// Convex combination of the bases with the given simplex weights.
    fn mix(&self, weights: Vec<f64>) -> PyResult<PyMdp> {
        let c = MixCoefficients { weights };
        c.validate().map_err(err)?;
        Ok(PyMdp { inner: self.inner.mix(&c).map_err(err)? })
    }

    /// Estimate the target's mixing coefficients from `samples` oracle draws.
    fn estimate(&self, oracle: &PyGenerativeModel, samples: u64, seed: u64) -> PyResult<Vec<f64>> {
        let (c, _) = estimate_coefficients(&self.inner, &oracle.inner, samples, seed).map_err(err)?;
        Ok(c.weights)
    }

    fn theoretical_l(&self, eps: f64, delta: f64) -> f64 {
        self.inner.theoretical_l(eps, delta)
    }
}

/// Seeded sailing gridworld: wind in the state, 8 move actions, absorbing
/// zero-reward goal at the bottom-right, reward 1 on arrival.
#[pyfunction(name = "make_sailing")]
#[pyo3(signature = (width, height, wind_count = 1, wind_change = 0.0, gamma = 0.9, seed = 0))]
fn py_make_sailing(
    width: usize,
    height: usize,
    wind_count: usize,
    wind_change: f64,
    gamma: f64,
    seed: u64,
) -> PyResult<PyMdp> {
    let inst = SailingInstance { width, height, wind_count, wind_change, gamma };
    Ok(PyMdp { inner: make_sailing(&inst, seed).map_err(err)? })
}

#[pymodule]
fn transfer_mdp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMdp>()?;
    m.add_class::<PyGenerativeModel>()?;
    m.add_class::<PyHull>()?;
    m.add_function(wrap_pyfunction!(py_compute_c_bar, m)?)?;
    m.add_function(wrap_pyfunction!(py_transfer_learn, m)?)?;
    m.add_function(wrap_pyfunction!(py_hardcase_family, m)?)?;
    m.add_function(wrap_pyfunction!(py_make_sailing, m)?)?;
    Ok(())
}
