#![allow(dead_code)]

use markov_conc::{Distribution, MarkovKernel, Matrix};
use proptest::prelude::*;

fn normalize(n: usize, w: Vec<f64>) -> MarkovKernel {
    let mut m = Matrix::from_fn(n, n, |i, j| w[i * n + j]);
    for i in 0..n {
        let s: f64 = m.row(i).iter().sum();
        m.row_mut(i).iter_mut().for_each(|x| *x /= s);
    }
    MarkovKernel::new((0..n).map(|i| i.to_string()).collect(), m).unwrap()
}

/// Positive kernel on 2..=max_n states.
pub fn kernel(max_n: usize) -> impl Strategy<Value = MarkovKernel> {
    (2..=max_n).prop_flat_map(|n| prop::collection::vec(0.01f64..1.0, n * n).prop_map(move |w| normalize(n, w)))
}

/// Reversible positive kernel from a symmetric weight matrix.
pub fn reversible_kernel(max_n: usize) -> impl Strategy<Value = MarkovKernel> {
    (2..=max_n).prop_flat_map(|n| {
        prop::collection::vec(0.01f64..1.0, n * n).prop_map(move |w| {
            let sym = (0..n * n).map(|k| {
                let (i, j) = (k / n, k % n);
                w[i.min(j) * n + i.max(j)]
            });
            normalize(n, sym.collect())
        })
    })
}

pub fn with_pi(p: MarkovKernel) -> (MarkovKernel, Distribution) {
    let pi = p.stationary_distribution().unwrap();
    (p, pi)
}

pub fn function(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n)
}
