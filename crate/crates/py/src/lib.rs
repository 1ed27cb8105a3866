//! Python bindings: permutations, IETs, renormalization steps, exponent
//! estimators, suspensions and the experiment drivers.
//!
//! Structured records cross the boundary as JSON strings.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde_json::Value;

use iet_core::experiments::{self, Experiment, RunConfig};
use iet_core::iet::{birkhoff_sum, discrepancy, twisted_birkhoff_sum, Subinterval};
use iet_core::lyapunov::{top_exponent_twisted, top_exponents_zorich, EstimatorConfig, FiberMode};
use iet_core::numeric::seeded_simplex;
use iet_core::renorm::{orbit_dump, rauzy_step, zorich_step};
use iet_core::suspension::{build_suspension, check_cell, in_delta_p, sweep_lengths};
use iet_core::{
    genus_and_singularities, rauzy_class, IetMap, LocallyConstantFunction, MoveKind, Precision, TwistParameter,
};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_json(v: &impl serde::Serialize) -> PyResult<String> {
    serde_json::to_string(v).map_err(err)
}

#[pyclass(name = "Permutation", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyPermutation {
    inner: iet_core::Permutation,
}

#[pymethods]
impl PyPermutation {
    /// Two rows separated by `/`, e.g. `"A B C D / D C B A"` or `"1234/4321"`.
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(PyPermutation { inner: iet_core::Permutation::parse(spec).map_err(err)? })
    }

    #[staticmethod]
    fn from_word(word: Vec<usize>) -> PyResult<Self> {
        Ok(PyPermutation { inner: iet_core::Permutation::from_word(&word).map_err(err)? })
    }

    #[staticmethod]
    fn reversal(d: usize) -> PyResult<Self> {
        Ok(PyPermutation { inner: iet_core::Permutation::reversal(d).map_err(err)? })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn top(&self) -> Vec<String> {
        self.inner.top().iter().map(|&a| self.inner.name(a).to_string()).collect()
    }

    #[getter]
    fn bottom(&self) -> Vec<String> {
        self.inner.bottom().iter().map(|&a| self.inner.name(a).to_string()).collect()
    }

    fn canonical_word(&self) -> Vec<usize> {
        self.inner.canonical_word()
    }

    fn is_irreducible(&self) -> bool {
        self.inner.is_irreducible()
    }

    /// `"top"` or `"bottom"`.
    fn rauzy_move(&self, kind: &str) -> PyResult<Self> {
        Ok(PyPermutation { inner: self.inner.rauzy_move(parse_kind(kind)?) })
    }

    fn genus(&self) -> PyResult<usize> {
        Ok(genus_and_singularities(&self.inner).map_err(err)?.genus)
    }

    fn num_singularities(&self) -> PyResult<usize> {
        Ok(genus_and_singularities(&self.inner).map_err(err)?.num_singularities)
    }

    fn class_size(&self) -> usize {
        rauzy_class(&self.inner).len()
    }

    fn __repr__(&self) -> String {
        let (t, b) = self.inner.rows_string();
        format!("Permutation('{t} / {b}')")
    }
}

fn parse_kind(kind: &str) -> PyResult<MoveKind> {
    match kind {
        "top" => Ok(MoveKind::Top),
        "bottom" => Ok(MoveKind::Bottom),
        other => Err(err(format!("unknown move kind {other}"))),
    }
}

#[pyclass(name = "Iet", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyIet {
    inner: IetMap,
}

#[pymethods]
impl PyIet {
    #[new]
    #[pyo3(signature = (perm, lengths, precision_bits = 128))]
    fn new(perm: &PyPermutation, lengths: Vec<f64>, precision_bits: u32) -> PyResult<Self> {
        let prec = Precision::with_bits(precision_bits);
        Ok(PyIet { inner: IetMap::from_f64(&perm.inner, &lengths, prec).map_err(err)? })
    }

    /// Lengths drawn uniformly from the simplex with a seeded stream.
    #[staticmethod]
    #[pyo3(signature = (perm, seed, precision_bits = 128))]
    fn random(perm: &PyPermutation, seed: u64, precision_bits: u32) -> PyResult<Self> {
        let lam = seeded_simplex(seed, perm.inner.d(), precision_bits);
        let inner = IetMap::new(perm.inner.clone(), lam, Precision::with_bits(precision_bits)).map_err(err)?;
        Ok(PyIet { inner })
    }

    /// Lengths inside the slab where the order-`p` suspension is defined.
    #[staticmethod]
    #[pyo3(signature = (perm, p, precision_bits = 128))]
    fn for_suspension(perm: &PyPermutation, p: u64, precision_bits: u32) -> PyResult<Self> {
        let prec = Precision::with_bits(precision_bits);
        let lam = sweep_lengths(&perm.inner, p, prec).map_err(err)?;
        Ok(PyIet { inner: IetMap::new(perm.inner.clone(), lam, prec).map_err(err)? })
    }

    fn in_slab(&self, p: u64) -> PyResult<bool> {
        in_delta_p(self.inner.lengths(), self.inner.perm(), p).map_err(err)
    }

    #[getter]
    fn perm(&self) -> PyPermutation {
        PyPermutation { inner: self.inner.perm().clone() }
    }

    #[getter]
    fn lengths(&self) -> Vec<f64> {
        self.inner.lengths().iter().map(|x| x.to_f64()).collect()
    }

    fn __call__(&self, x: f64) -> f64 {
        let p = self.inner.precision();
        self.inner.apply(&p.float(x)).to_f64()
    }

    /// One Rauzy-Veech step: `(next IET, kind, matrix)`.
    fn rauzy_step(&self) -> PyResult<(PyIet, String, Vec<Vec<i64>>)> {
        let p = self.inner.precision();
        let s = rauzy_step(self.inner.lengths(), self.inner.perm(), p).map_err(err)?;
        let next = IetMap::new(s.next_perm, s.next_lambda, p).map_err(err)?;
        Ok((PyIet { inner: next }, s.kind.as_str().into(), rows(&s.matrix)?))
    }

    /// One Zorich step: `(next IET normalized, kind, Rauzy steps grouped, matrix)`.
    fn zorich_step(&self) -> PyResult<(PyIet, String, u64, Vec<Vec<i64>>)> {
        let p = self.inner.precision();
        let s = zorich_step(self.inner.lengths(), self.inner.perm(), p).map_err(err)?;
        let m = rows(&s.matrix)?;
        let next = IetMap::new(s.next_perm, s.next_lambda, p).map_err(err)?;
        Ok((PyIet { inner: next }, s.kind.as_str().into(), s.rauzy_count, m))
    }

    /// JSON lines of the first `n` Zorich steps.
    fn orbit_dump(&self, n: usize) -> PyResult<Vec<String>> {
        orbit_dump(self.inner.lengths(), self.inner.perm(), self.inner.precision(), n).map_err(err)
    }

    fn birkhoff_sum(&self, f: Vec<f64>, x: f64, n: usize) -> Complex64 {
        let p = self.inner.precision();
        birkhoff_sum(&self.inner, &LocallyConstantFunction::real(&f), &p.float(x), n)
    }

    fn twisted_birkhoff_sum(&self, f: Vec<f64>, zeta: Vec<f64>, x: f64, n: usize) -> Complex64 {
        let p = self.inner.precision();
        let z = TwistParameter::from_f64(&zeta, p);
        twisted_birkhoff_sum(&self.inner, &LocallyConstantFunction::real(&f), &z, &p.float(x), n)
    }

    /// `sup_x |#{k < n : T^k x ∈ [a, b)} - n (b - a)|`.
    fn discrepancy(&self, a: f64, b: f64, n: usize) -> PyResult<f64> {
        let j = Subinterval::from_f64(a, b, self.inner.precision());
        discrepancy(&self.inner, &j, n).map_err(err)
    }

    /// Suspension over this IET, with every structural check, as JSON.
    fn suspension(&self, p: u64, nvec: Vec<i64>) -> PyResult<String> {
        let s = build_suspension(&self.inner, &nvec, p).map_err(err)?;
        let report = check_cell(&s).map_err(err)?;
        let failures: Vec<&str> = report.suspension_failures().into_iter().chain(report.surface_failures()).collect();
        to_json(&serde_json::json!({
            "intervals": s.intervals(),
            "perm_s": s.perm_s(),
            "report": report,
            "failures": failures,
        }))
    }

    fn __repr__(&self) -> String {
        format!("Iet({:?}, {:?})", self.perm().__repr__(), self.lengths())
    }
}

fn rows(m: &iet_core::IntMatrix) -> PyResult<Vec<Vec<i64>>> {
    m.to_i64_rows().ok_or_else(|| err("matrix entries exceed 64 bits"))
}

fn estimator(segments: usize, orbit_length: usize, seed: u64, precision_bits: u32, mode: FiberMode) -> EstimatorConfig {
    EstimatorConfig { segments, orbit_length, seed, precision_bits, fiber_mode: mode, ..Default::default() }
}

/// Top `k` Zorich exponents as `[(value, stderr), ...]`.
#[pyfunction]
#[pyo3(signature = (perm, k = 2, segments = 64, orbit_length = 200, seed = 1, precision_bits = 1024))]
fn top_exponents(
    perm: &PyPermutation,
    k: usize,
    segments: usize,
    orbit_length: usize,
    seed: u64,
    precision_bits: u32,
) -> PyResult<Vec<(f64, f64)>> {
    let cfg = estimator(segments, orbit_length, seed, precision_bits, FiberMode::Zero);
    let est = top_exponents_zorich(&perm.inner, k, &cfg).map_err(err)?;
    Ok(est.iter().map(|e| (e.value, e.stderr)).collect())
}

/// Top twisted exponent `(value, stderr)`; `fiber` is zero, lebesgue, h-fiber or rational.
#[pyfunction]
#[pyo3(signature = (perm, fiber = "lebesgue", p = None, nvec = None, segments = 64, orbit_length = 200, seed = 1, precision_bits = 1024))]
#[allow(clippy::too_many_arguments)]
fn twisted_exponent(
    perm: &PyPermutation,
    fiber: &str,
    p: Option<u64>,
    nvec: Option<Vec<i64>>,
    segments: usize,
    orbit_length: usize,
    seed: u64,
    precision_bits: u32,
) -> PyResult<(f64, f64)> {
    let mode = FiberMode::parse(fiber, p, nvec).map_err(err)?;
    let e = top_exponent_twisted(&perm.inner, &estimator(segments, orbit_length, seed, precision_bits, mode))
        .map_err(err)?;
    Ok((e.value, e.stderr))
}

fn overlay(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

/// Runs an experiment from its preset overlaid with `overrides` (a JSON object
/// with RunConfig keys); returns the result record as JSON.
#[pyfunction]
#[pyo3(signature = (experiment, overrides = None))]
fn run_experiment(experiment: &str, overrides: Option<&str>) -> PyResult<String> {
    let exp: Experiment = experiment.parse().map_err(err)?;
    let mut cfg = serde_json::to_value(RunConfig::preset(exp)).map_err(err)?;
    if let Some(o) = overrides {
        overlay(&mut cfg, serde_json::from_str(o).map_err(err)?);
    }
    let cfg: RunConfig = serde_json::from_value(cfg).map_err(err)?;
    let rec = experiments::run(&cfg).map_err(err)?;
    to_json(&rec)
}

#[pymodule]
fn iet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPermutation>()?;
    m.add_class::<PyIet>()?;
    m.add_function(wrap_pyfunction!(top_exponents, m)?)?;
    m.add_function(wrap_pyfunction!(twisted_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
