//! Linear-chain CRF over `K` tags with synthetic START and STOP states.
//!
//! Transitions form a `(K+2)×(K+2)` matrix indexed `[from][to]`; row `K` is
//! START and column `K+1` is STOP.

use crate::error::{shape_err, Error, Result};
use crate::numerics::kernels::log_sum_exp;
use crate::numerics::{Tape, Tensor, Var};

fn check(emissions: &Tensor, transitions: &Tensor) -> Result<(usize, usize)> {
    let (n, k) = emissions.dims2()?;
    if n == 0 {
        return Err(Error::InvalidArgument("CRF over an empty sequence".into()));
    }
    if transitions.shape() != [k + 2, k + 2] {
        return Err(shape_err(
            "crf",
            format!("transitions {:?} for {k} tags", transitions.shape()),
        ));
    }
    Ok((n, k))
}

fn check_tags(tags: &[usize], n: usize, k: usize) -> Result<()> {
    if tags.len() != n {
        return Err(Error::LengthMismatch(format!("{} tags for {n} positions", tags.len())));
    }
    if let Some(&t) = tags.iter().find(|&&t| t >= k) {
        return Err(Error::InvalidArgument(format!("tag index {t} with {k} tags")));
    }
    Ok(())
}

/// Unnormalized score of one tag path.
pub fn path_score(emissions: &Tensor, transitions: &Tensor, tags: &[usize]) -> Result<f64> {
    let (n, k) = check(emissions, transitions)?;
    check_tags(tags, n, k)?;
    let (start, stop) = (k, k + 1);
    let mut s = transitions.get(start, tags[0]);
    for (t, &y) in tags.iter().enumerate() {
        s += emissions.get(t, y);
        if t > 0 {
            s += transitions.get(tags[t - 1], y);
        }
    }
    Ok(s + transitions.get(tags[n - 1], stop))
}

fn forward_table(emissions: &Tensor, transitions: &Tensor, n: usize, k: usize) -> Vec<Vec<f64>> {
    let mut alpha = vec![vec![0.0; k]; n];
    for j in 0..k {
        alpha[0][j] = transitions.get(k, j) + emissions.get(0, j);
    }
    let mut buf = vec![0.0; k];
    for t in 1..n {
        for j in 0..k {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = alpha[t - 1][i] + transitions.get(i, j);
            }
            alpha[t][j] = log_sum_exp(&buf) + emissions.get(t, j);
        }
    }
    alpha
}

fn backward_table(emissions: &Tensor, transitions: &Tensor, n: usize, k: usize) -> Vec<Vec<f64>> {
    let mut beta = vec![vec![0.0; k]; n];
    for i in 0..k {
        beta[n - 1][i] = transitions.get(i, k + 1);
    }
    let mut buf = vec![0.0; k];
    for t in (0..n - 1).rev() {
        for i in 0..k {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = transitions.get(i, j) + emissions.get(t + 1, j) + beta[t + 1][j];
            }
            beta[t][i] = log_sum_exp(&buf);
        }
    }
    beta
}

fn final_log_z(alpha_last: &[f64], transitions: &Tensor, k: usize) -> f64 {
    let v: Vec<f64> = (0..k).map(|i| alpha_last[i] + transitions.get(i, k + 1)).collect();
    log_sum_exp(&v)
}

/// Log partition function by the forward algorithm.
pub fn log_partition(emissions: &Tensor, transitions: &Tensor) -> Result<f64> {
    let (n, k) = check(emissions, transitions)?;
    let alpha = forward_table(emissions, transitions, n, k);
    Ok(final_log_z(&alpha[n - 1], transitions, k))
}

/// Highest-scoring path. Ties go to the lower tag index.
pub fn viterbi(emissions: &Tensor, transitions: &Tensor) -> Result<Vec<usize>> {
    let (n, k) = check(emissions, transitions)?;
    let mut score: Vec<f64> = (0..k).map(|j| transitions.get(k, j) + emissions.get(0, j)).collect();
    let mut back = vec![vec![0usize; k]; n];
    for t in 1..n {
        let mut next = vec![0.0; k];
        for j in 0..k {
            let mut best = (f64::NEG_INFINITY, 0);
            for (i, s) in score.iter().enumerate() {
                let v = s + transitions.get(i, j);
                if v > best.0 {
                    best = (v, i);
                }
            }
            next[j] = best.0 + emissions.get(t, j);
            back[t][j] = best.1;
        }
        score = next;
    }
    let mut last = (f64::NEG_INFINITY, 0);
    for (i, s) in score.iter().enumerate() {
        let v = s + transitions.get(i, k + 1);
        if v > last.0 {
            last = (v, i);
        }
    }
    let mut path = vec![last.1; n];
    for t in (1..n).rev() {
        path[t - 1] = back[t][path[t]];
    }
    Ok(path)
}

/// Negative log-likelihood of `gold` with its gradients w.r.t. emissions and
/// transitions (marginals minus gold indicator counts).
pub fn nll_and_grads(
    emissions: &Tensor,
    transitions: &Tensor,
    gold: &[usize],
) -> Result<(f64, Tensor, Tensor)> {
    let (n, k) = check(emissions, transitions)?;
    check_tags(gold, n, k)?;
    let alpha = forward_table(emissions, transitions, n, k);
    let beta = backward_table(emissions, transitions, n, k);
    let log_z = final_log_z(&alpha[n - 1], transitions, k);
    let nll = log_z - path_score(emissions, transitions, gold)?;

    let mut d_e = Tensor::zeros(n, k);
    let mut d_t = Tensor::zeros(k + 2, k + 2);
    for t in 0..n {
        for j in 0..k {
            let p = (alpha[t][j] + beta[t][j] - log_z).exp();
            d_e.set(t, j, p);
            if t == 0 {
                d_t.set(k, j, d_t.get(k, j) + p);
            }
            if t == n - 1 {
                d_t.set(j, k + 1, d_t.get(j, k + 1) + p);
            }
        }
        if t + 1 < n {
            for i in 0..k {
                for j in 0..k {
                    let p = (alpha[t][i] + transitions.get(i, j) + emissions.get(t + 1, j)
                        + beta[t + 1][j]
                        - log_z)
                        .exp();
                    d_t.set(i, j, d_t.get(i, j) + p);
                }
            }
        }
    }
    d_t.set(k, gold[0], d_t.get(k, gold[0]) - 1.0);
    d_t.set(gold[n - 1], k + 1, d_t.get(gold[n - 1], k + 1) - 1.0);
    for (t, &y) in gold.iter().enumerate() {
        d_e.set(t, y, d_e.get(t, y) - 1.0);
        if t > 0 {
            d_t.set(gold[t - 1], y, d_t.get(gold[t - 1], y) - 1.0);
        }
    }
    Ok((nll, d_e, d_t))
}

/// Records the CRF negative log-likelihood on the tape.
pub fn crf_nll(tape: &mut Tape, emissions: Var, transitions: Var, gold: &[usize]) -> Result<Var> {
    let (nll, d_e, d_t) = nll_and_grads(tape.value(emissions), tape.value(transitions), gold)?;
    tape.scalar_custom(nll, vec![(emissions, d_e), (transitions, d_t)])
}
