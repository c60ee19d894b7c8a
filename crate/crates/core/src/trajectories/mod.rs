//! Histories of power-operator outcomes and their weights.
//!
//! A trajectory fixes one projector at each of the `K + 1` slots. Its class
//! operator is `C = P^(K) ... P^(0)`; the linear weight is `Re Tr[C rho]` and
//! the measured weight is `Tr[C^dagger C rho]`.

mod transfer;
mod walk;

use std::io::Write;

use num_complex::Complex64;
use ordered_float::OrderedFloat;

use crate::error::{Error, Result};
use crate::operator::{trace, CMatrix, DensityMatrix};
use crate::protocol::DiscretizedProtocol;
use crate::tol;

pub(crate) use walk::{Leaf, Level, Walk};

/// One index per projector slot, `n_0 ... n_K`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trajectory {
    indices: Vec<usize>,
}

impl Trajectory {
    /// Checks the indices against the alphabet of `proto`.
    pub fn new(indices: Vec<usize>, proto: &DiscretizedProtocol) -> Result<Self> {
        let alphabet = proto.alphabet();
        if indices.len() != alphabet.len() {
            return Err(Error::Shape(format!(
                "trajectory has {} indices, protocol has {} slots",
                indices.len(),
                alphabet.len()
            )));
        }
        for (j, (&n, s)) in indices.iter().zip(alphabet).enumerate() {
            if n >= s.len() {
                return Err(Error::Shape(format!(
                    "index {n} at slot {j} exceeds alphabet size {}",
                    s.len()
                )));
            }
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub trajectory: Trajectory,
    pub work: f64,
    pub amplitude: Complex64,
    pub linear_weight: f64,
    pub measured_weight: f64,
}

/// Upper bound on the number of trajectories an enumeration may visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationGuard {
    pub cap: u64,
}

impl Default for EnumerationGuard {
    fn default() -> Self {
        Self { cap: 1 << 24 }
    }
}

impl EnumerationGuard {
    pub fn new(cap: u64) -> Result<Self> {
        if cap == 0 {
            return Err(Error::config("enum_cap", None, "enum_cap must be at least 1"));
        }
        Ok(Self { cap })
    }

    pub fn check(&self, required: u128) -> Result<()> {
        if required > self.cap as u128 {
            Err(Error::Resource {
                required,
                cap: self.cap,
            })
        } else {
            Ok(())
        }
    }
}

fn check_rho(proto: &DiscretizedProtocol, rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != proto.dim() {
        return Err(Error::Shape(format!(
            "density matrix is {}x{}, protocol dimension is {}",
            rho.dim(),
            rho.dim(),
            proto.dim()
        )));
    }
    Ok(())
}

pub(crate) fn clamp_measured(x: f64) -> Result<f64> {
    if x < -tol::MEASURED_CLAMP {
        Err(Error::Consistency(format!("measured weight {x:e} is negative beyond rounding")))
    } else {
        Ok(x.max(0.0))
    }
}

/// Work increments `dt * x_n^(j)` per slot; the last slot carries none.
fn work_tables(proto: &DiscretizedProtocol) -> Vec<Vec<f64>> {
    proto
        .alphabet()
        .iter()
        .enumerate()
        .map(|(j, s)| {
            if j < proto.k {
                s.eigenvalues.iter().map(|x| x * proto.dt).collect()
            } else {
                vec![0.0; s.len()]
            }
        })
        .collect()
}

pub(crate) fn forward_walk(proto: &DiscretizedProtocol, rho: &DensityMatrix) -> Result<Walk> {
    check_rho(proto, rho)?;
    let levels = proto
        .alphabet()
        .iter()
        .zip(work_tables(proto))
        .map(|(s, w)| Level::from_spectrum(s, w))
        .collect();
    Ok(Walk::new(levels, rho))
}

/// Levels in reverse slot order with negated increments, so the class
/// operator becomes `C^dagger = P^(0) ... P^(K)`.
pub(crate) fn reverse_walk(proto: &DiscretizedProtocol, rho: &DensityMatrix) -> Result<Walk> {
    check_rho(proto, rho)?;
    let levels = proto
        .alphabet()
        .iter()
        .zip(work_tables(proto))
        .rev()
        .map(|(s, w)| Level::from_spectrum(s, w.into_iter().map(|x| -x).collect()))
        .collect();
    Ok(Walk::new(levels, rho))
}

/// Work `dt * sum_{j<K} x_{n_j}^(j)`.
pub fn work_value(traj: &Trajectory, proto: &DiscretizedProtocol) -> f64 {
    let alphabet = proto.alphabet();
    let sum: f64 = traj.indices[..proto.k]
        .iter()
        .zip(alphabet)
        .map(|(&n, s)| s.eigenvalues[n])
        .sum();
    sum * proto.dt
}

/// The class operator `P^(K)_{n_K} ... P^(0)_{n_0}` as an explicit matrix.
pub fn class_operator(traj: &Trajectory, proto: &DiscretizedProtocol) -> CMatrix {
    let alphabet = proto.alphabet();
    let mut c = crate::operator::identity(proto.dim());
    for (&n, s) in traj.indices.iter().zip(alphabet) {
        c = &s.projectors[n] * c;
    }
    c
}

/// `Tr[C rho]`.
pub fn amplitude(traj: &Trajectory, proto: &DiscretizedProtocol, rho: &DensityMatrix) -> Result<Complex64> {
    Ok(forward_walk(proto, rho)?.evaluate(&traj.indices).amplitude)
}

pub fn linear_weight(traj: &Trajectory, proto: &DiscretizedProtocol, rho: &DensityMatrix) -> Result<f64> {
    Ok(amplitude(traj, proto, rho)?.re)
}

pub fn measured_weight(traj: &Trajectory, proto: &DiscretizedProtocol, rho: &DensityMatrix) -> Result<f64> {
    clamp_measured(forward_walk(proto, rho)?.evaluate(&traj.indices).measured)
}

fn reversed_indices(traj: &Trajectory) -> Vec<usize> {
    traj.indices.iter().rev().copied().collect()
}

/// Linear weight of `C^dagger` and the negated work.
pub fn reverse_weight(
    traj: &Trajectory,
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
) -> Result<(f64, f64)> {
    let leaf = reverse_walk(proto, rho)?.evaluate(&reversed_indices(traj));
    Ok((leaf.amplitude.re, leaf.work))
}

/// Measured weight of the reversed history, `Tr[C C^dagger rho]`.
pub fn reverse_measured_weight(
    traj: &Trajectory,
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
) -> Result<f64> {
    clamp_measured(reverse_walk(proto, rho)?.evaluate(&reversed_indices(traj)).measured)
}

/// Splits the work of a fixed-basis history as
/// `w = (e^(K)_{n_K} - e^(0)_{n_0}) - dE`, where `dE` collects the energy
/// jumps at level hops. Returns `(endpoint_diff, dE)`.
pub fn endpoint_decomposition(traj: &Trajectory, proto: &DiscretizedProtocol) -> Result<(f64, f64)> {
    let fb = proto
        .fixed_basis
        .as_ref()
        .ok_or_else(|| Error::Domain("endpoint decomposition needs a fixed-basis protocol".into()))?;
    let level = |j: usize| -> Result<usize> {
        fb.level_of[j][traj.indices[j]]
            .ok_or_else(|| Error::Consistency(format!("projector at slot {j} matches no basis level")))
    };
    let k = proto.k;
    let first = fb.energies[0][level(0)?];
    let last = fb.energies[k][level(k)?];
    // Energy jumps E_{t_{j+1}}(m) - E_{t_{j+1}}(n) at each hop n -> m.
    let mut delta_e = 0.0;
    for j in 0..k {
        let a = level(j)?;
        let b = level(j + 1)?;
        if a != b {
            delta_e += fb.energies[j + 1][b] - fb.energies[j + 1][a];
        }
    }
    Ok((last - first, delta_e))
}

/// Summation strategy for work-resolved sums over histories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Visit every trajectory; subject to the enumeration guard.
    #[default]
    Enumerate,
    /// Sum over index-count classes; needs a shared work table.
    Transfer,
    /// Enumerate when the guard allows it, otherwise transfer if possible.
    Auto,
}

/// One work-resolved contribution: `(work, amplitude, measured weight)`.
pub(crate) type Contribution = (f64, Complex64, f64);

/// Sums amplitudes and measured weights of all histories in `walk`, grouped
/// by work value. `key` maps a raw work value to the value used for grouping.
pub(crate) fn work_resolved(
    walk: &Walk,
    guard: &EnumerationGuard,
    method: Method,
    key: &(dyn Fn(f64) -> f64 + Sync),
) -> Result<Vec<Contribution>> {
    let use_transfer = match method {
        Method::Enumerate => false,
        Method::Transfer => true,
        Method::Auto => guard.check(walk.leaf_count()).is_err() && transfer::applicable(&walk.levels),
    };
    if use_transfer {
        let out = transfer::run(&walk.levels, &walk.rho)?;
        return Ok(out.bins.into_iter().map(|(w, a, m)| (key(w), a, m)).collect());
    }
    guard.check(walk.leaf_count())?;
    let acc = fold(
        walk,
        WorkMap::default,
        |acc: &mut WorkMap, leaf: Leaf| acc.add(key(leaf.work), leaf.amplitude, leaf.measured),
        WorkMap::merge,
    );
    if acc.min_measured < -tol::MEASURED_CLAMP {
        return Err(Error::Consistency(format!(
            "measured weight {:e} is negative beyond rounding",
            acc.min_measured
        )));
    }
    Ok(acc
        .map
        .into_iter()
        .map(|(w, (a, m))| (w.0, a, m.max(0.0)))
        .collect())
}

#[derive(Default)]
struct WorkMap {
    map: std::collections::BTreeMap<OrderedFloat<f64>, (Complex64, f64)>,
    min_measured: f64,
}

impl WorkMap {
    fn add(&mut self, w: f64, a: Complex64, m: f64) {
        self.min_measured = self.min_measured.min(m);
        let e = self.map.entry(OrderedFloat(w)).or_insert((Complex64::new(0.0, 0.0), 0.0));
        e.0 += a;
        e.1 += m.max(0.0);
    }

    fn merge(mut self, other: Self) -> Self {
        self.min_measured = self.min_measured.min(other.min_measured);
        for (w, (a, m)) in other.map {
            let e = self.map.entry(w).or_insert((Complex64::new(0.0, 0.0), 0.0));
            e.0 += a;
            e.1 += m;
        }
        self
    }
}

/// Prefixes that split the index space into independent subtrees. The split
/// depends only on the alphabet, never on the thread count, and results are
/// merged in prefix order, so output does not depend on scheduling.
fn split_prefixes(walk: &Walk) -> Vec<Vec<usize>> {
    let depth = walk.depth();
    let mut prefixes = vec![Vec::new()];
    for l in 0..depth.min(2) {
        if prefixes.len() >= 16 {
            break;
        }
        let n = walk.levels[l].len();
        prefixes = prefixes
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    prefixes
}

fn fold_subtree<A>(walk: &Walk, prefix: &[usize], init: &(impl Fn() -> A + Sync), step: &(impl Fn(&mut A, Leaf) + Sync)) -> A {
    let mut acc = init();
    let mut cursor = walk.cursor(prefix);
    while cursor.advance(walk) {
        step(&mut acc, cursor.leaf(walk));
    }
    acc
}

/// Folds every leaf of `walk` into an accumulator, splitting the work across
/// subtrees (in parallel when the `parallel` feature is enabled).
pub(crate) fn fold<A: Send>(
    walk: &Walk,
    init: impl Fn() -> A + Sync,
    step: impl Fn(&mut A, Leaf) + Sync,
    merge: impl Fn(A, A) -> A,
) -> A {
    let prefixes = split_prefixes(walk);
    #[cfg(feature = "parallel")]
    let parts: Vec<A> = {
        use rayon::prelude::*;
        prefixes
            .par_iter()
            .map(|p| fold_subtree(walk, p, &init, &step))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<A> = prefixes
        .iter()
        .map(|p| fold_subtree(walk, p, &init, &step))
        .collect();
    parts.into_iter().reduce(merge).unwrap_or_else(init)
}

/// Streams every trajectory of a protocol in lexicographic index order.
pub struct Enumeration {
    walk: Walk,
    cursor: walk::Cursor,
    remaining: u128,
}

impl Iterator for Enumeration {
    type Item = TrajectoryRecord;

    fn next(&mut self) -> Option<TrajectoryRecord> {
        if !self.cursor.advance(&self.walk) {
            return None;
        }
        self.remaining = self.remaining.saturating_sub(1);
        let leaf = self.cursor.leaf(&self.walk);
        Some(TrajectoryRecord {
            trajectory: Trajectory {
                indices: self.cursor.indices.clone(),
            },
            work: leaf.work,
            amplitude: leaf.amplitude,
            linear_weight: leaf.amplitude.re,
            measured_weight: leaf.measured.max(0.0),
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, usize::try_from(self.remaining).ok())
    }
}

/// Enumerates all trajectories, failing up front if the guard is exceeded.
pub fn enumerate(
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
    guard: &EnumerationGuard,
) -> Result<Enumeration> {
    let walk = forward_walk(proto, rho)?;
    let count = walk.leaf_count();
    guard.check(count)?;
    let cursor = walk.cursor(&[]);
    Ok(Enumeration {
        walk,
        cursor,
        remaining: count,
    })
}

/// Like [`enumerate`], but over the reversed class operators `C^dagger`.
/// Indices in the records are reported in forward slot order.
pub fn enumerate_reversed(
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
    guard: &EnumerationGuard,
) -> Result<impl Iterator<Item = TrajectoryRecord>> {
    let walk = reverse_walk(proto, rho)?;
    let count = walk.leaf_count();
    guard.check(count)?;
    let cursor = walk.cursor(&[]);
    Ok(Enumeration {
        walk,
        cursor,
        remaining: count,
    }
    .map(|mut r| {
        r.trajectory.indices.reverse();
        r
    }))
}

/// Writes one tab-separated line per trajectory: indices (comma separated),
/// work, Re and Im of the amplitude, linear weight, measured weight.
pub fn spill_records<W: Write>(
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
    guard: &EnumerationGuard,
    mut out: W,
) -> Result<u128> {
    let mut n = 0u128;
    writeln!(out, "indices\twork\tamp_re\tamp_im\tlinear\tmeasured")?;
    for r in enumerate(proto, rho, guard)? {
        let idx: Vec<String> = r.trajectory.indices.iter().map(usize::to_string).collect();
        writeln!(
            out,
            "{}\t{:.11e}\t{:.11e}\t{:.11e}\t{:.11e}\t{:.11e}",
            idx.join(","),
            r.work,
            r.amplitude.re,
            r.amplitude.im,
            r.linear_weight,
            r.measured_weight
        )?;
        n += 1;
    }
    out.flush()?;
    Ok(n)
}

/// Direct evaluation of `Tr[C rho]` by explicit matrix products.
pub fn amplitude_by_products(traj: &Trajectory, proto: &DiscretizedProtocol, rho: &DensityMatrix) -> Complex64 {
    trace(&(class_operator(traj, proto) * rho.matrix()))
}
