//! Depth-first traversal of projector sequences with prefix reuse.
//!
//! A walk is an ordered list of levels `Q_0, Q_1, ..., Q_L`; a leaf is one
//! index per level. For each leaf the walk yields the amplitude
//! `Tr[Q_L ... Q_0 rho]`, the measured weight `Tr[Q_L ... Q_0 rho Q_0 ... Q_L]`
//! and the summed work increments. Rank-1 alphabets extend a prefix in O(1)
//! through precomputed overlaps; otherwise prefixes are d x d matrices.

use num_complex::Complex64;

use crate::operator::{trace, CMatrix, CVector, DensityMatrix, SpectralDecomposition, ONE};

#[derive(Debug, Clone)]
pub(crate) struct Level {
    pub projectors: Vec<CMatrix>,
    pub vectors: Option<Vec<CVector>>,
    pub work: Vec<f64>,
}

impl Level {
    pub fn from_spectrum(s: &SpectralDecomposition, work: Vec<f64>) -> Self {
        let vectors = s
            .all_rank_one()
            .then(|| s.vectors.iter().map(|v| v.clone().unwrap()).collect());
        Self {
            projectors: s.projectors.clone(),
            vectors,
            work,
        }
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }
}

/// Precomputed tables for one walk over one initial state.
pub(crate) struct Walk {
    pub levels: Vec<Level>,
    pub rho: DensityMatrix,
    rank_one: Option<RankOne>,
}

struct RankOne {
    /// `overlaps[l][b][a] = <v_{l+1,b} | v_{l,a}>`.
    overlaps: Vec<Vec<Vec<Complex64>>>,
    /// `ends[a][b] = <v_{0,a}| rho |v_{L,b}>`.
    ends: Vec<Vec<Complex64>>,
    /// `<v_{0,a}| rho |v_{0,a}>`.
    populations: Vec<f64>,
}

/// Values at one leaf.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Leaf {
    pub work: f64,
    pub amplitude: Complex64,
    pub measured: f64,
}

impl Walk {
    pub fn new(levels: Vec<Level>, rho: &DensityMatrix) -> Self {
        let rank_one = if levels.iter().all(|l| l.vectors.is_some()) {
            let vecs: Vec<&Vec<CVector>> = levels.iter().map(|l| l.vectors.as_ref().unwrap()).collect();
            let overlaps = vecs
                .windows(2)
                .map(|w| {
                    w[1].iter()
                        .map(|b| w[0].iter().map(|a| b.dotc(a)).collect())
                        .collect()
                })
                .collect();
            let first = vecs[0];
            let last = vecs[vecs.len() - 1];
            let rho_last: Vec<CVector> = last.iter().map(|v| rho.matrix() * v).collect();
            let ends = first
                .iter()
                .map(|a| rho_last.iter().map(|rv| a.dotc(rv)).collect())
                .collect();
            let populations = first.iter().map(|a| a.dotc(&(rho.matrix() * a)).re).collect();
            Some(RankOne {
                overlaps,
                ends,
                populations,
            })
        } else {
            None
        };
        Self {
            levels,
            rho: rho.clone(),
            rank_one,
        }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn leaf_count(&self) -> u128 {
        self.levels
            .iter()
            .fold(1u128, |acc, l| acc.saturating_mul(l.len() as u128))
    }

    /// Evaluates one leaf from scratch (no prefix reuse).
    pub fn evaluate(&self, indices: &[usize]) -> Leaf {
        let work = indices
            .iter()
            .zip(&self.levels)
            .map(|(&n, l)| l.work[n])
            .sum();
        match &self.rank_one {
            Some(r) => {
                let mut amp = ONE;
                let mut meas = r.populations[indices[0]];
                for l in 0..indices.len() - 1 {
                    let o = r.overlaps[l][indices[l + 1]][indices[l]];
                    amp *= o;
                    meas *= o.norm_sqr();
                }
                Leaf {
                    work,
                    amplitude: r.ends[indices[0]][indices[indices.len() - 1]] * amp,
                    measured: meas,
                }
            }
            None => {
                let mut m = self.rho.matrix().clone();
                let mut n = self.rho.matrix().clone();
                for (&i, l) in indices.iter().zip(&self.levels) {
                    let q = &l.projectors[i];
                    m = q * m;
                    n = q * n * q;
                }
                Leaf {
                    work,
                    amplitude: trace(&m),
                    measured: trace(&n).re,
                }
            }
        }
    }

    pub fn cursor(&self, prefix: &[usize]) -> Cursor {
        Cursor::new(self, prefix)
    }
}

/// Odometer over the leaves below a fixed prefix, reusing prefix state.
/// The cursor does not borrow the walk; every call takes it explicitly.
pub(crate) struct Cursor {
    fixed: usize,
    pub indices: Vec<usize>,
    work: Vec<f64>,
    amp: Vec<Complex64>,
    meas: Vec<f64>,
    mats: Vec<(CMatrix, CMatrix)>,
    started: bool,
    done: bool,
}

impl Cursor {
    fn new(walk: &Walk, prefix: &[usize]) -> Self {
        let depth = walk.depth();
        let mut indices = vec![0; depth];
        indices[..prefix.len()].copy_from_slice(prefix);
        let d = walk.rho.dim();
        let mats = if walk.rank_one.is_some() {
            Vec::new()
        } else {
            vec![(CMatrix::zeros(d, d), CMatrix::zeros(d, d)); depth]
        };
        Self {
            fixed: prefix.len(),
            indices,
            work: vec![0.0; depth],
            amp: vec![ONE; depth],
            meas: vec![0.0; depth],
            mats,
            started: false,
            done: depth == 0,
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn recompute_from(&mut self, walk: &Walk, start: usize) {
        let levels = &walk.levels;
        for l in start..levels.len() {
            let n = self.indices[l];
            let prev_work = if l == 0 { 0.0 } else { self.work[l - 1] };
            self.work[l] = prev_work + levels[l].work[n];
            match &walk.rank_one {
                Some(r) => {
                    if l == 0 {
                        self.amp[0] = ONE;
                        self.meas[0] = r.populations[n];
                    } else {
                        let o = r.overlaps[l - 1][n][self.indices[l - 1]];
                        self.amp[l] = self.amp[l - 1] * o;
                        self.meas[l] = self.meas[l - 1] * o.norm_sqr();
                    }
                }
                None => {
                    let q = &levels[l].projectors[n];
                    let (m, nn) = if l == 0 {
                        (q * walk.rho.matrix(), q * walk.rho.matrix() * q)
                    } else {
                        let (pm, pn) = &self.mats[l - 1];
                        (q * pm, q * pn * q)
                    };
                    self.mats[l] = (m, nn);
                }
            }
        }
    }

    /// Moves to the next leaf; returns false when the subtree is exhausted.
    pub fn advance(&mut self, walk: &Walk) -> bool {
        if self.done {
            return false;
        }
        if !self.started {
            self.started = true;
            if walk.levels.iter().any(|l| l.len() == 0) {
                self.done = true;
                return false;
            }
            self.recompute_from(walk, 0);
            return true;
        }
        let levels = &walk.levels;
        let mut l = levels.len();
        loop {
            if l == self.fixed {
                self.done = true;
                return false;
            }
            l -= 1;
            self.indices[l] += 1;
            if self.indices[l] < levels[l].len() {
                break;
            }
            self.indices[l] = 0;
        }
        self.recompute_from(walk, l);
        true
    }

    pub fn leaf(&self, walk: &Walk) -> Leaf {
        let last = walk.depth() - 1;
        match &walk.rank_one {
            Some(r) => Leaf {
                work: self.work[last],
                amplitude: r.ends[self.indices[0]][self.indices[last]] * self.amp[last],
                measured: self.meas[last],
            },
            None => Leaf {
                work: self.work[last],
                amplitude: trace(&self.mats[last].0),
                measured: trace(&self.mats[last].1).re,
            },
        }
    }
}
