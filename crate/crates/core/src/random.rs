//! Seeded random matrices for property checks and experiment configs.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::gaussmodel::PerturbationS;
use crate::symkernels::{SpdMatrix, SymMatrix};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn stream(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Symmetric matrix with i.i.d. `N(0, scale²)` entries on and above the
/// diagonal.
pub fn random_sym<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> SymMatrix {
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let v: f64 = rng.sample(StandardNormal);
            m[(i, j)] = scale * v;
            m[(j, i)] = scale * v;
        }
    }
    SymMatrix::from_symmetric_unchecked(m)
}

/// Haar-distributed orthogonal matrix (QR with sign correction).
pub fn random_orthogonal<R: Rng>(rng: &mut R, dim: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, dim, dim).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// SPD matrix `Q diag(e^{u_k}) Qᵀ` with `u_k` uniform on `[-spread, spread]`.
pub fn random_spd<R: Rng>(rng: &mut R, dim: usize, spread: f64) -> SpdMatrix {
    let q = random_orthogonal(rng, dim);
    let eig: Vec<f64> = (0..dim).map(|_| rng.random_range(-spread..=spread).exp()).collect();
    SpdMatrix::from_spectrum(&eig, &q).expect("random spectrum is admissible")
}

/// `S = Q diag(u) Qᵀ` with `u_k` uniform on `(-radius, radius)`, `radius < 1`.
pub fn random_perturbation<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> PerturbationS {
    assert!(radius > 0.0 && radius < 1.0, "radius must lie in (0, 1)");
    let q = random_orthogonal(rng, dim);
    let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-radius..radius)).collect();
    let s = SymMatrix::from_diagonal(&u)
        .and_then(|d| d.congruence(&q))
        .expect("finite diagonal");
    PerturbationS::new(s).expect("spectrum below 1")
}

pub fn random_unit_vector<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_differ_and_repeat() {
        let a: Vec<u64> = (0..4).map(|_| stream(7, 0).random()).collect();
        let b: u64 = stream(7, 1).random();
        assert!(a.iter().all(|&x| x == a[0]));
        assert_ne!(a[0], b);
    }

    #[test]
    fn orthogonal_is_orthogonal() {
        let q = random_orthogonal(&mut seeded(3), 7);
        let err = (q.transpose() * &q - DMatrix::identity(7, 7)).amax();
        assert!(err < 1e-13);
    }

    #[test]
    fn spd_spectrum_in_range() {
        let p = random_spd(&mut seeded(1), 6, 1.0);
        assert!(p.min_eig() >= (-1.0f64).exp() * (1.0 - 1e-12));
        assert!(p.max_eig() <= 1.0f64.exp() * (1.0 + 1e-12));
    }

    #[test]
    fn perturbation_gap_positive() {
        let s = random_perturbation(&mut seeded(2), 5, 0.9);
        assert!(s.gap() > 0.1 - 1e-12);
    }
}
