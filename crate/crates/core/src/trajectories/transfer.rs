//! Exact summation over histories without visiting them one by one.
//!
//! When every level that carries work uses the same table of increments, the
//! work of a history depends only on how often each index occurs. Partial
//! class-operator products can then be summed over all prefixes sharing the
//! current index and the index counts, since both `Tr[C rho]` and
//! `C rho C^dagger` are linear in the partial sums. The state space has
//! `d * C(K + d - 1, d - 1)` entries instead of `d^(K+1)`.

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::walk::Level;
use crate::error::{Error, Result};
use crate::operator::{trace, CMatrix, DensityMatrix};
use crate::tol;

/// Work-resolved sums produced by the transfer engine.
#[derive(Debug, Clone)]
pub(crate) struct TransferOutput {
    /// `(work, sum of amplitudes, sum of measured weights)` per count vector.
    pub bins: Vec<(f64, Complex64, f64)>,
}

fn tables_match(a: &[f64], b: &[f64]) -> bool {
    let scale = a.iter().chain(b).fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * scale)
}

/// Returns the shared work table, or `None` if the levels do not share one.
pub(crate) fn shared_table(levels: &[Level]) -> Option<Vec<f64>> {
    let mut table: Option<&[f64]> = None;
    for l in levels {
        if l.work.iter().all(|&x| x == 0.0) {
            continue;
        }
        match table {
            None => table = Some(&l.work),
            Some(t) if tables_match(t, &l.work) => {}
            Some(_) => return None,
        }
    }
    Some(table.map(<[f64]>::to_vec).unwrap_or_default())
}

pub(crate) fn applicable(levels: &[Level]) -> bool {
    shared_table(levels).is_some()
}

type Key = (usize, Vec<u32>);

pub(crate) fn run(levels: &[Level], rho: &DensityMatrix) -> Result<TransferOutput> {
    let table = shared_table(levels).ok_or_else(|| {
        Error::Domain("transfer method needs identical work tables at every working step".into())
    })?;
    let width = table.len();
    let mut states: BTreeMap<Key, (CMatrix, CMatrix)> = BTreeMap::new();
    let r = rho.matrix();
    for (l, level) in levels.iter().enumerate() {
        let counts_here = !level.work.iter().all(|&x| x == 0.0);
        let mut next: BTreeMap<Key, (CMatrix, CMatrix)> = BTreeMap::new();
        for (n, q) in level.projectors.iter().enumerate() {
            let bump = |counts: &[u32]| {
                let mut c = counts.to_vec();
                if counts_here {
                    c[n] += 1;
                }
                c
            };
            if l == 0 {
                let key = (n, bump(&vec![0; width]));
                next.insert(key, (q * r, q * r * q));
            } else {
                for ((_, counts), (m, nn)) in &states {
                    let key = (n, bump(counts));
                    let am = q * m;
                    let an = q * nn * q;
                    match next.get_mut(&key) {
                        Some((sm, sn)) => {
                            *sm += am;
                            *sn += an;
                        }
                        None => {
                            next.insert(key, (am, an));
                        }
                    }
                }
            }
        }
        states = next;
    }
    let mut by_counts: BTreeMap<Vec<u32>, (Complex64, f64)> = BTreeMap::new();
    for ((_, counts), (m, nn)) in states {
        let e = by_counts.entry(counts).or_insert((Complex64::new(0.0, 0.0), 0.0));
        e.0 += trace(&m);
        e.1 += trace(&nn).re;
    }
    let mut bins = Vec::with_capacity(by_counts.len());
    for (counts, (amp, meas)) in by_counts {
        if meas < -tol::MEASURED_CLAMP {
            return Err(Error::Consistency(format!("negative measured weight {meas:e}")));
        }
        let w: f64 = counts.iter().zip(&table).map(|(&c, &x)| c as f64 * x).sum();
        bins.push((w, amp, meas.max(0.0)));
    }
    bins.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(TransferOutput { bins })
}
