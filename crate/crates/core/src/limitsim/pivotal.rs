//! The pivotal limit `W(1)'W(1) + sup BB(l)'BB(l) / (l (1 - l))`.

use crate::error::Result;
use crate::rng::StreamKey;

use super::{check_trimming, MeshSpec};

const TAG_W1: u64 = 21;
const TAG_BRIDGE: u64 = 22;

/// One draw with a `p`-dimensional Brownian bridge on the mesh
/// `l_k = k / steps`, supremum over mesh points in the trimming interval.
/// A collapsed interval without a mesh point uses the exact marginal
/// `BB(l) ~ N(0, l (1 - l) I)`.
pub fn draw_ivx_h2_limit(
    trimming: (f64, f64),
    p: usize,
    mesh: &MeshSpec,
    key: StreamKey,
) -> Result<f64> {
    check_trimming(trimming)?;
    let (a, b) = trimming;
    let mut w1 = vec![0.0; p];
    key.child(TAG_W1).normals(p).row(0, &mut w1);
    let pooled: f64 = w1.iter().map(|v| v * v).sum();

    let n = mesh.steps;
    let nf = n as f64;
    let lo = (a * nf).ceil() as usize;
    let hi = ((b * nf).floor() as usize).min(n - 1);
    let mut rows = key.child(TAG_BRIDGE).normals(p);
    let mut xi = vec![0.0; p];
    if lo > hi {
        rows.row(0, &mut xi);
        let bb: f64 = xi.iter().map(|v| v * v).sum();
        return Ok(pooled + bb);
    }
    // Random walk B_k, then BB_k = B_k - (k/n) B_n.
    let sd = nf.sqrt().recip();
    let mut walk = vec![vec![0.0; p]; n + 1];
    for k in 1..=n {
        rows.row((k - 1) as u64, &mut xi);
        for i in 0..p {
            walk[k][i] = walk[k - 1][i] + xi[i] * sd;
        }
    }
    let mut sup = f64::NEG_INFINITY;
    for (k, bk) in walk.iter().enumerate().take(hi + 1).skip(lo.max(1)) {
        let l = k as f64 / nf;
        let q: f64 = (0..p).map(|i| (bk[i] - l * walk[n][i]).powi(2)).sum();
        sup = sup.max(q / (l * (1.0 - l)));
    }
    Ok(pooled + sup)
}
