//! Running co-moments of observations sorted by the threshold variable.
//!
//! Splitting the sample at successive order statistics of `q` only moves
//! observations from one regime to the other, so every regime-wise cross
//! product on the grid can be read off prefix (and suffix) accumulators
//! instead of refitting from scratch.

use nalgebra::{DMatrix, DVector};

/// Centered co-moments of an `m`-vector stream (Welford update).
#[derive(Debug, Clone)]
pub(crate) struct Comoments {
    pub n: usize,
    pub mean: DVector<f64>,
    /// `sum (v - mean)(v - mean)'`.
    pub centered: DMatrix<f64>,
}

impl Comoments {
    pub fn new(m: usize) -> Self {
        Self {
            n: 0,
            mean: DVector::zeros(m),
            centered: DMatrix::zeros(m, m),
        }
    }

    pub fn push(&mut self, v: &[f64]) {
        self.n += 1;
        let m = self.mean.len();
        let w = (self.n - 1) as f64 / self.n as f64;
        let nf = self.n as f64;
        let mut delta = [0.0f64; 32];
        let delta = &mut delta[..m];
        for i in 0..m {
            delta[i] = v[i] - self.mean[i];
            self.mean[i] += delta[i] / nf;
        }
        for j in 0..m {
            for i in 0..m {
                self.centered[(i, j)] += w * delta[i] * delta[j];
            }
        }
    }

    /// Uncentered `sum v v'`.
    pub fn raw(&self) -> DMatrix<f64> {
        &self.centered + (&self.mean * self.mean.transpose()) * self.n as f64
    }
}

/// Observation order by ascending `q` (stable for ties).
pub(crate) fn order_by(q: &DVector<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..q.len()).collect();
    idx.sort_by(|&a, &b| q[a].total_cmp(&q[b]));
    idx
}

/// Lower and upper regime moments at each split size in `counts`
/// (`counts[g]` observations with the smallest `q` form the lower regime).
///
/// `row(t, buf)` writes the `m`-vector of observation `t` into `buf`.
pub(crate) fn split_moments(
    order: &[usize],
    counts: &[usize],
    m: usize,
    row: impl Fn(usize, &mut [f64]),
) -> Vec<(Comoments, Comoments)> {
    let n = order.len();
    let mut buf = vec![0.0; m];

    let mut lower = Vec::with_capacity(counts.len());
    let mut acc = Comoments::new(m);
    let mut pushed = 0;
    for &k in counts {
        while pushed < k {
            row(order[pushed], &mut buf);
            acc.push(&buf);
            pushed += 1;
        }
        lower.push(acc.clone());
    }

    let mut upper = vec![None; counts.len()];
    let mut acc = Comoments::new(m);
    let mut pushed = 0;
    for (g, &k) in counts.iter().enumerate().rev() {
        while pushed < n - k {
            row(order[n - 1 - pushed], &mut buf);
            acc.push(&buf);
            pushed += 1;
        }
        upper[g] = Some(acc.clone());
    }
    lower
        .into_iter()
        .zip(upper.into_iter().map(|u| u.expect("filled above")))
        .collect()
}
