//! Memory-sum kernels.
//!
//! `x(s) = x0 + c · Σ_{r=0}^{s-1} w[s-1-r] · Δ_r` for every site, where `Δ_r`
//! is the increment row stored at step `r`. Every routine here adds terms to
//! a site's accumulator one at a time in ascending `r`, starting from `0.0`,
//! so all of them produce bit-identical sums for the same range of `r`.
//!
//! The blocked routine makes one pass over the history for `BLOCK` future
//! target times, cutting memory traffic by the same factor. The remaining
//! recent rows are added step by step as they are produced.

/// Number of future target times served by one pass over the history.
pub(crate) const BLOCK: usize = 16;

/// Rows processed together while a site's accumulators sit in registers.
const ROW_GROUP: usize = 16;

/// For sites `sites` of the lattice, adds rows `0..origin` to the pending
/// accumulators of the `BLOCK` targets `origin + 1 ..= origin + BLOCK`.
///
/// `pending` holds `BLOCK` values per site for the sites in range, site-major.
/// `weights` must extend to index `origin + BLOCK - 1`.
pub(crate) fn accumulate_block(
    pending: &mut [f64],
    history: &[f64],
    n: usize,
    sites: std::ops::Range<usize>,
    origin: usize,
    weights: &[f64],
) {
    debug_assert_eq!(pending.len(), sites.len() * BLOCK);
    pending.fill(0.0);
    let mut r = 0;
    while r + ROW_GROUP <= origin {
        let rows: [&[f64]; ROW_GROUP] =
            std::array::from_fn(|k| &history[(r + k) * n..(r + k + 1) * n]);
        // Target origin+1+b reads weight index origin+b-r.
        let w: [&[f64; BLOCK]; ROW_GROUP] = std::array::from_fn(|k| {
            let lo = origin - (r + k);
            weights[lo..lo + BLOCK].try_into().unwrap()
        });
        for (acc, i) in pending.chunks_exact_mut(BLOCK).zip(sites.clone()) {
            let acc: &mut [f64; BLOCK] = acc.try_into().unwrap();
            let mut local = *acc;
            for k in 0..ROW_GROUP {
                let v = rows[k][i];
                for b in 0..BLOCK {
                    local[b] += w[k][b] * v;
                }
            }
            *acc = local;
        }
        r += ROW_GROUP;
    }
    while r < origin {
        let row = &history[r * n..(r + 1) * n];
        let lo = origin - r;
        let w: &[f64; BLOCK] = weights[lo..lo + BLOCK].try_into().unwrap();
        for (acc, i) in pending.chunks_exact_mut(BLOCK).zip(sites.clone()) {
            let v = row[i];
            for b in 0..BLOCK {
                acc[b] += w[b] * v;
            }
        }
        r += 1;
    }
}

/// Finishes target `t + 1` for the sites in range: continues each pending
/// accumulator (slot `t - origin`) over rows `origin..=t` and writes
/// `x0 + prefactor · acc` into `out`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn finish_target(
    out: &mut [f64],
    pending: &[f64],
    history: &[f64],
    x0: &[f64],
    n: usize,
    sites: std::ops::Range<usize>,
    origin: usize,
    t: usize,
    weights: &[f64],
    prefactor: f64,
) {
    let slot = t - origin;
    for ((o, acc), i) in out.iter_mut().zip(pending.chunks_exact(BLOCK)).zip(sites) {
        let mut sum = acc[slot];
        for r in origin..=t {
            sum += weights[t - r] * history[r * n + i];
        }
        *o = x0[i] + prefactor * sum;
    }
}

/// Direct sum over rows `first..=t` for target `t + 1`, optionally with
/// Kahan compensation. Used for truncated memory and compensated runs.
#[allow(clippy::too_many_arguments)]
pub(crate) fn direct_target(
    out: &mut [f64],
    history: &[f64],
    x0: &[f64],
    n: usize,
    sites: std::ops::Range<usize>,
    first: usize,
    t: usize,
    weights: &[f64],
    prefactor: f64,
    compensated: bool,
) {
    for (o, i) in out.iter_mut().zip(sites) {
        let mut sum = 0.0;
        if compensated {
            let mut carry = 0.0;
            for r in first..=t {
                let y = weights[t - r] * history[r * n + i] - carry;
                let next = sum + y;
                carry = (next - sum) - y;
                sum = next;
            }
        } else {
            for r in first..=t {
                sum += weights[t - r] * history[r * n + i];
            }
        }
        *o = x0[i] + prefactor * sum;
    }
}
