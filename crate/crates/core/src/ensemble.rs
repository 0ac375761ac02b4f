//! Seeded random kernels for sweeps and property checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kernel::MarkovKernel;
use crate::linalg::Matrix;

fn weight<R: Rng>(rng: &mut R) -> f64 {
    // cubing spreads the weights so some transitions are rare
    let u: f64 = rng.gen_range(0.02..1.0);
    u * u * u
}

/// Reversible by construction: `P(x, y) = w(x, y) / sum_z w(x, z)` with a
/// symmetric positive weight matrix `w`.
pub fn random_reversible<R: Rng>(rng: &mut R, n: usize) -> MarkovKernel {
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = weight(rng);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    normalize_rows(w)
}

/// Independent positive rows; non-reversible for almost every draw when
/// `n >= 3`.
pub fn random_kernel<R: Rng>(rng: &mut R, n: usize) -> MarkovKernel {
    let w = Matrix::from_fn(n, n, |_, _| weight(rng));
    normalize_rows(w)
}

fn normalize_rows(mut w: Matrix) -> MarkovKernel {
    for i in 0..w.rows() {
        let s: f64 = w.row(i).iter().sum();
        w.row_mut(i).iter_mut().for_each(|x| *x /= s);
    }
    let states = (0..w.rows()).map(|i| i.to_string()).collect();
    MarkovKernel::new(states, w).expect("normalized positive rows form a kernel")
}

#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub kernel: MarkovKernel,
    pub reversible_by_construction: bool,
}

/// `count` reversible kernels followed by `count` general ones, with state
/// counts cycling through `2..=6`.
pub fn standard_ensemble(seed: u64, count: usize) -> Vec<EnsembleMember> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * count);
    for i in 0..count {
        out.push(EnsembleMember { kernel: random_reversible(&mut rng, 2 + i % 5), reversible_by_construction: true });
    }
    for i in 0..count {
        out.push(EnsembleMember { kernel: random_kernel(&mut rng, 2 + i % 5), reversible_by_construction: false });
    }
    out
}
