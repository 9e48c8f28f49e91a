use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Compares the reverse-mode gradient of `f` at `point` with central finite
/// differences and returns the largest relative error over coordinates,
/// `|ad − fd| / max(1, |ad|, |fd|)`.
///
/// `f` receives a fresh graph and the input variable and must return a scalar.
pub fn grad_check<F>(f: F, point: &Tensor, step: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    if step.is_nan() || step <= 0.0 {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let mut g = Graph::new();
    let x = g.leaf(point.clone(), true);
    let y = f(&mut g, x)?;
    g.backward(y)?;
    let analytic = g.adjoint(x).cloned().unwrap_or_else(|| Tensor::zeros(point.shape()));

    let eval = |values: Tensor| -> Result<f64> {
        let mut g = Graph::new();
        let x = g.leaf(values, false);
        let y = f(&mut g, x)?;
        Ok(g.value(y).item())
    };

    let mut worst = 0.0f64;
    for i in 0..point.numel() {
        let mut plus = point.clone();
        plus.data_mut()[i] += step;
        let mut minus = point.clone();
        minus.data_mut()[i] -= step;
        let fd = (eval(plus)? - eval(minus)?) / (2.0 * step);
        let ad = analytic.data()[i];
        let rel = (ad - fd).abs() / 1f64.max(ad.abs()).max(fd.abs());
        worst = worst.max(rel);
    }
    Ok(worst)
}
