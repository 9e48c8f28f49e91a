use crate::autodiff::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams { lr: 0.0004, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerConfig {
    Adam(AdamParams),
    Sgd { lr: f64 },
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            OptimizerConfig::Adam(p) => {
                if p.lr.is_nan() || p.lr <= 0.0 {
                    return Err(Error::invalid("learning rate must be positive"));
                }
                if !(0.0..1.0).contains(&p.beta1) || !(0.0..1.0).contains(&p.beta2) {
                    return Err(Error::invalid("Adam betas must lie in [0, 1)"));
                }
                if p.eps.is_nan() || p.eps <= 0.0 {
                    return Err(Error::invalid("Adam epsilon must be positive"));
                }
            }
            OptimizerConfig::Sgd { lr } => {
                if lr.is_nan() || lr <= 0.0 {
                    return Err(Error::invalid("learning rate must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn lr(&self) -> f64 {
        match self {
            OptimizerConfig::Adam(p) => p.lr,
            OptimizerConfig::Sgd { lr } => *lr,
        }
    }
}

/// First/second moment accumulators and the step counter.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new(shapes: &[&[usize]]) -> Self {
        AdamState {
            m: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            t: 0,
        }
    }
}

fn check_shapes(params: &[&mut Tensor], grads: &[Tensor]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::shape(
            "optimizer",
            format!("{} parameters but {} gradients", params.len(), grads.len()),
        ));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() {
            return Err(Error::shape(
                "optimizer",
                format!("parameter {i} has shape {:?} but gradient {:?}", p.shape(), g.shape()),
            ));
        }
    }
    Ok(())
}

/// One bias-corrected Adam update.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    hp: &AdamParams,
) -> Result<()> {
    check_shapes(params, grads)?;
    if state.m.is_empty() && !params.is_empty() {
        let shapes: Vec<&[usize]> = params.iter().map(|p| p.shape()).collect();
        *state = AdamState::new(&shapes);
    }
    if state.m.len() != params.len() {
        return Err(Error::shape("adam_step", "optimizer state does not match parameters"));
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - hp.beta1.powi(t);
    let bc2 = 1.0 - hp.beta2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (j, (pv, &gv)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            m[j] = hp.beta1 * m[j] + (1.0 - hp.beta1) * gv;
            v[j] = hp.beta2 * v[j] + (1.0 - hp.beta2) * gv * gv;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            *pv -= hp.lr * m_hat / (v_hat.sqrt() + hp.eps);
        }
    }
    Ok(())
}

pub fn sgd_step(params: &mut [&mut Tensor], grads: &[Tensor], lr: f64) -> Result<()> {
    check_shapes(params, grads)?;
    for (p, g) in params.iter_mut().zip(grads) {
        for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
            *pv -= lr * gv;
        }
    }
    Ok(())
}

/// An optimizer bound to one parameter list.
#[derive(Clone, Debug)]
pub struct Optimizer {
    config: OptimizerConfig,
    adam: AdamState,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Optimizer { config, adam: AdamState::default() }
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        match &self.config {
            OptimizerConfig::Adam(hp) => adam_step(params, grads, &mut self.adam, hp),
            OptimizerConfig::Sgd { lr } => sgd_step(params, grads, *lr),
        }
    }
}
