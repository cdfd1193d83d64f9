//! Central finite differences for checking analytic gradients.

use ndarray::Array2;

use crate::params::{ParamId, ParamStore};

/// Numerical gradient of `f` with respect to one parameter matrix.
pub fn numeric_param_grad<F>(store: &ParamStore, id: ParamId, h: f64, mut f: F) -> Array2<f64>
where
    F: FnMut(&ParamStore) -> f64,
{
    let mut probe = store.clone();
    let base = store.value(id).clone();
    let mut grad = Array2::zeros(base.dim());
    for ((i, j), g) in grad.indexed_iter_mut() {
        let mut plus = base.clone();
        plus[[i, j]] += h;
        probe.set(id, plus).expect("probe store is not frozen");
        let fp = f(&probe);
        let mut minus = base.clone();
        minus[[i, j]] -= h;
        probe.set(id, minus).expect("probe store is not frozen");
        let fm = f(&probe);
        *g = (fp - fm) / (2.0 * h);
    }
    grad
}

/// Numerical gradient of `f` with respect to an input matrix.
pub fn numeric_input_grad<F>(x: &Array2<f64>, h: f64, mut f: F) -> Array2<f64>
where
    F: FnMut(&Array2<f64>) -> f64,
{
    let mut grad = Array2::zeros(x.dim());
    let mut probe = x.clone();
    for ((i, j), g) in grad.indexed_iter_mut() {
        let orig = probe[[i, j]];
        probe[[i, j]] = orig + h;
        let fp = f(&probe);
        probe[[i, j]] = orig - h;
        let fm = f(&probe);
        probe[[i, j]] = orig;
        *g = (fp - fm) / (2.0 * h);
    }
    grad
}

/// `|a - b| / max(|a|, |b|)` in the Frobenius norm; 0 when both vanish.
pub fn relative_error(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let norm = |m: &Array2<f64>| m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = norm(a).max(norm(b));
    if scale < 1e-12 {
        0.0
    } else {
        norm(&(a - b)) / scale
    }
}
