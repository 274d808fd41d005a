use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use nestnet::cli::{deserialize_net, parse_target, serialize_net};
use nestnet::constructive::{
    approximator_full, bit_extract_net, floor_nested, point_fit_net, step_function_net, PNorm,
};
use nestnet::ir::NestNet;
use nestnet::numerics::{parse_rational, Backend, Q};
use nestnet::verify::exhaustive_bit_check;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rational(text: &str) -> PyResult<Q> {
    parse_rational(text).map_err(err)
}

fn show(v: &Q) -> String {
    v.to_string()
}

/// A nested ReLU network. Exact values cross the boundary as `"p/q"` strings.
#[pyclass(name = "Net", module = "nestnet_py", frozen)]
struct PyNet {
    inner: NestNet,
}

#[pymethods]
impl PyNet {
    #[staticmethod]
    fn floor(n: u32, r: u32, delta: &str) -> PyResult<Self> {
        Ok(Self { inner: floor_nested(n, r, &rational(delta)?).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(name = "step")]
    fn step_net(n: u32, r: u32, delta: &str, j: u64) -> PyResult<Self> {
        Ok(Self { inner: step_function_net(n, r, &rational(delta)?, j).map_err(err)? })
    }

    #[staticmethod]
    fn bit_extract(n: u32, s: u32) -> PyResult<Self> {
        Ok(Self { inner: bit_extract_net(n, s).map_err(err)? })
    }

    #[staticmethod]
    fn point_fit(values: Vec<String>, eps: &str, n: u32, s: u32) -> PyResult<Self> {
        let y = values.iter().map(|v| rational(v)).collect::<PyResult<Vec<_>>>()?;
        Ok(Self { inner: point_fit_net(&y, &rational(eps)?, n, s).map_err(err)? })
    }

    /// `p` is `None` for the sup norm.
    #[staticmethod]
    #[pyo3(signature = (target, d, n, s, p=None))]
    fn approximator(target: &str, d: usize, n: u32, s: u32, p: Option<u32>) -> PyResult<Self> {
        let f = parse_target(target, d).map_err(err)?;
        let p = p.map(PNorm::Finite).unwrap_or(PNorm::Infinity);
        Ok(Self { inner: approximator_full(&f, n, s, p).map_err(err)?.net })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: deserialize_net(text.as_bytes()).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        let bytes = serialize_net(&self.inner).map_err(err)?;
        String::from_utf8(bytes).map_err(err)
    }

    fn eval(&self, x: Vec<String>) -> PyResult<Vec<String>> {
        let x = x.iter().map(|v| rational(v)).collect::<PyResult<Vec<_>>>()?;
        Ok(self.inner.eval_exact(&x).map_err(err)?.iter().map(show).collect())
    }

    fn eval_f64(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let net = match self.inner.backend() {
            Some(Backend::Float) => self.inner.clone(),
            _ => self.inner.to_backend(Backend::Float).map_err(err)?,
        };
        net.eval_f64(&x).map_err(err)
    }

    fn expand(&self) -> PyResult<Self> {
        Ok(Self { inner: self.inner.expand().map_err(err)? })
    }

    #[getter]
    fn param_count(&self) -> PyResult<usize> {
        self.inner.param_count().map_err(err)
    }

    #[getter]
    fn height(&self) -> PyResult<usize> {
        self.inner.height().map_err(err)
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn __repr__(&self) -> String {
        let params = self.inner.param_count().map(|c| c.to_string()).unwrap_or_else(|_| "?".into());
        format!("Net(inputs={}, outputs={}, params={params})", self.inner.input_dim(), self.inner.output_dim())
    }
}

/// `(exact, cases)` of the exhaustive bit-extraction check.
#[pyfunction]
fn verify_bits(n: u32, s: u32) -> PyResult<(u64, u64)> {
    let r = exhaustive_bit_check(n, s).map_err(err)?;
    Ok((r.exact, r.cases))
}

#[pymodule]
fn nestnet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNet>()?;
    m.add_function(wrap_pyfunction!(verify_bits, m)?)?;
    Ok(())
}
