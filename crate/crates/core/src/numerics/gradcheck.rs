//! Central finite-difference gradient checking.
//!
//! The relative error of one coordinate is `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
//! The floor keeps coordinates whose true gradient is ~0 from being judged on
//! round-off noise; with the default floor it acts as an absolute tolerance of
//! `1e-7` for gradients below `1e-3`.

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::Result;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// `(parameter, flat index, analytic, numeric)` at the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
    /// Largest analytic gradient magnitude per parameter, in store order.
    pub max_abs_grad: Vec<(String, f64)>,
}

impl GradCheckReport {
    pub fn max_abs_grad_of(&self, prefix: &str) -> f64 {
        self.max_abs_grad
            .iter()
            .filter(|(n, _)| n.starts_with(prefix))
            .map(|(_, g)| *g)
            .fold(0.0, f64::max)
    }
}

/// Compares tape gradients of `loss` against central differences over every
/// scalar of every parameter. `make_tape` must yield identically seeded tapes
/// so stochastic ops (dropout) replay the same masks.
pub fn gradcheck<T, L>(
    store: &mut ParamStore,
    make_tape: T,
    mut loss: L,
    step: f64,
    floor: f64,
) -> Result<GradCheckReport>
where
    T: Fn() -> Tape,
    L: FnMut(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = make_tape();
    let l = loss(&mut tape, store)?;
    let grads = tape.backward(l, store)?;

    let eval = |store: &ParamStore, loss: &mut L| -> Result<f64> {
        let mut t = make_tape();
        let v = loss(&mut t, store)?;
        t.value(v).item()
    };

    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst: None,
        max_abs_grad: Vec::new(),
    };
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        let analytic = grads.get(id).clone();
        let name = store.name(id).to_string();
        report.max_abs_grad.push((
            name.clone(),
            analytic.data().iter().fold(0.0f64, |m, v| m.max(v.abs())),
        ));
        for k in 0..analytic.len() {
            let orig = store.get(id).data()[k];
            store.get_mut(id).data_mut()[k] = orig + step;
            let plus = eval(store, &mut loss)?;
            store.get_mut(id).data_mut()[k] = orig - step;
            let minus = eval(store, &mut loss)?;
            store.get_mut(id).data_mut()[k] = orig;

            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic.data()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            report.checked += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                if rel >= report.max_rel_error {
                    report.worst = Some((name.clone(), k, a, numeric));
                }
            }
        }
    }
    Ok(report)
}
