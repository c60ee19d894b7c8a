#![allow(dead_code)]

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::Rng;
use workhist::operator::{pauli, unitary_step, CMatrix, DensityMatrix, HermitianOperator};
use workhist::protocol::{
    discretize, projectors_from_basis, DiscretizedProtocol, ProtocolKind, ProtocolSpec, Schedule,
};

pub fn random_matrix(rng: &mut StdRng, d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_hermitian(rng: &mut StdRng, d: usize, scale: f64) -> HermitianOperator {
    let g = random_matrix(rng, d);
    HermitianOperator::new((&g + g.adjoint()) * Complex64::new(0.5 * scale, 0.0)).unwrap()
}

/// Full-rank mixed state `G G^dagger / Tr`.
pub fn random_density(rng: &mut StdRng, d: usize) -> DensityMatrix {
    let g = random_matrix(rng, d);
    DensityMatrix::normalized(&g * g.adjoint()).unwrap()
}

pub fn random_fixed_basis(rng: &mut StdRng, d: usize, tau: f64) -> ProtocolSpec {
    let basis = unitary_step(&random_hermitian(rng, d, 1.0), 1.0).unwrap();
    let tracks = (0..d)
        .map(|_| {
            let start = rng.gen_range(-1.0..1.0);
            let end = rng.gen_range(-1.0..1.0);
            if rng.gen_bool(0.5) {
                Schedule::Linear { start, end }
            } else {
                Schedule::Cosine { start, end }
            }
        })
        .collect();
    ProtocolSpec {
        kind: ProtocolKind::FixedBasis {
            projectors: projectors_from_basis(basis.matrix()).unwrap(),
            tracks,
        },
        tau,
    }
}

/// A random protocol of dimension `d`, cycling through the available kinds.
pub fn random_protocol(rng: &mut StdRng, d: usize, k: usize, variant: usize) -> (ProtocolSpec, DiscretizedProtocol) {
    let tau = rng.gen_range(0.5..2.0);
    let spec = match (variant % 4, d) {
        (0, 2) => ProtocolSpec::qubit_drive(rng.gen_range(0.5..1.5), rng.gen_range(0.5..1.5), tau),
        (0, _) | (1, _) => ProtocolSpec {
            kind: ProtocolKind::LinearRamp {
                a: random_hermitian(rng, d, 1.0),
                b: random_hermitian(rng, d, 1.0),
                schedule: if rng.gen_bool(0.5) {
                    Schedule::Linear { start: 0.0, end: rng.gen_range(0.5..1.5) }
                } else {
                    Schedule::Cosine { start: -0.5, end: rng.gen_range(0.5..1.5) }
                },
            },
            tau,
        },
        (2, _) => ProtocolSpec {
            kind: ProtocolKind::Tabulated {
                hamiltonians: (0..=k).map(|_| random_hermitian(rng, d, 1.0)).collect(),
            },
            tau,
        },
        _ => random_fixed_basis(rng, d, tau),
    };
    let proto = discretize(&spec, k).unwrap();
    (spec, proto)
}

pub fn sigma(m: CMatrix) -> HermitianOperator {
    HermitianOperator::new(m).unwrap()
}

pub fn sx() -> CMatrix {
    pauli::x()
}

pub fn sz() -> CMatrix {
    pauli::z()
}

/// A coherent qubit state with Bloch vector `(0.6, 0.3, 0.5)`.
pub fn coherent_qubit() -> DensityMatrix {
    let m = (CMatrix::identity(2, 2) + pauli::x() * Complex64::new(0.6, 0.0) + pauli::y() * Complex64::new(0.3, 0.0)
        + pauli::z() * Complex64::new(0.5, 0.0))
        * Complex64::new(0.5, 0.0);
    DensityMatrix::new(m).unwrap()
}
