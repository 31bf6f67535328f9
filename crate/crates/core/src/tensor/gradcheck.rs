//! Central finite-difference gradient checks.

use super::{ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Magnitudes below this are compared absolutely. Central differences at
/// `h = 1e-6` carry round-off of order `1e-10 · |f|`, which would swamp a
/// purely relative comparison of near-zero gradients.
pub const GRADCHECK_FLOOR: f64 = 1e-3;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRADCHECK_FLOOR)
}

fn eval<F>(f: &F, x: &Tensor) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let v = tape.input(x.clone());
    let out = f(&mut tape, v)?;
    Ok(tape.value(out).item())
}

/// Max relative error between the tape gradient of `f` at `x` and
/// `(f(x + h e_i) - f(x - h e_i)) / 2h` over all coordinates.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if !(1e-7..=1e-4).contains(&h) {
        return Err(Error::InvalidArgument(format!("finite-difference step {h} outside [1e-7, 1e-4]")));
    }
    let mut tape = Tape::new();
    let v = tape.input(x.clone());
    let loss = f(&mut tape, v)?;
    let grads = tape.backward(loss)?;
    let zero = Tensor::zeros(x.rows(), x.cols());
    let analytic = grads.get(v).unwrap_or(&zero);

    let mut worst: f64 = 0.0;
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = eval(&f, &probe)?;
        probe.data_mut()[i] = orig - h;
        let down = eval(&f, &probe)?;
        probe.data_mut()[i] = orig;
        worst = worst.max(relative_error(analytic.data()[i], (up - down) / (2.0 * h)));
    }
    Ok(worst)
}

/// Same check over every scalar of every parameter in `store`.
pub fn param_grad_check<F>(store: &ParamStore, f: F, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    let mut grads = super::GradStore::zeros_like(store);
    tape.backward_into(loss, &mut grads)?;

    let value = |s: &ParamStore| -> Result<f64> {
        let mut t = Tape::new();
        let out = f(&mut t, s)?;
        Ok(t.value(out).item())
    };

    let mut probe = store.clone();
    let mut worst: f64 = 0.0;
    for (id, p) in store.iter() {
        for i in 0..p.value().len() {
            let orig = p.value().data()[i];
            let mut t = p.value().clone();
            t.data_mut()[i] = orig + h;
            probe.set_value(id, t.clone())?;
            let up = value(&probe)?;
            t.data_mut()[i] = orig - h;
            probe.set_value(id, t.clone())?;
            let down = value(&probe)?;
            t.data_mut()[i] = orig;
            probe.set_value(id, t)?;
            worst = worst.max(relative_error(grads.get(id).data()[i], (up - down) / (2.0 * h)));
        }
    }
    Ok(worst)
}
