//! Thin wrappers over `rustfft`: per-column 1D transforms and a 3D transform
//! on cubic arrays.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

type PlanCache = (FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>);

thread_local! {
    static PLANS: RefCell<PlanCache> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|p| {
        let mut p = p.borrow_mut();
        if let Some(f) = p.1.get(&(n, inverse)) {
            return f.clone();
        }
        let f = if inverse { p.0.plan_fft_inverse(n) } else { p.0.plan_fft_forward(n) };
        p.1.insert((n, inverse), f.clone());
        f
    })
}

/// Unnormalized forward transform `X_k = sum_j x_j e^{-2 pi i jk/n}` of every
/// length-`n` chunk of `data`.
pub fn forward(data: &mut [Complex64], n: usize) {
    plan(n, false).process(data);
}

/// Inverse transform including the `1/n` factor.
pub fn inverse(data: &mut [Complex64], n: usize) {
    plan(n, true).process(data);
    let s = 1.0 / n as f64;
    data.iter_mut().for_each(|v| *v *= s);
}

/// In-place 3D transform of an `n^3` array stored with the last index fastest.
pub fn fft3(data: &mut [Complex64], n: usize, inv: bool) {
    assert_eq!(data.len(), n * n * n);
    let f = plan(n, inv);
    // last axis: contiguous
    f.process(data);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    // middle axis
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                line[j] = data[(i * n + j) * n + k];
            }
            f.process(&mut line);
            for j in 0..n {
                data[(i * n + j) * n + k] = line[j];
            }
        }
    }
    // first axis
    for j in 0..n {
        for k in 0..n {
            for i in 0..n {
                line[i] = data[(i * n + j) * n + k];
            }
            f.process(&mut line);
            for i in 0..n {
                data[(i * n + j) * n + k] = line[i];
            }
        }
    }
    if inv {
        let s = 1.0 / (n * n * n) as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

/// Angular frequencies `2 pi k / (n h)` in FFT order.
pub fn frequencies(n: usize, h: f64) -> Vec<f64> {
    let base = 2.0 * std::f64::consts::PI / (n as f64 * h);
    (0..n as i64).map(|k| if k <= n as i64 / 2 { k } else { k - n as i64 } as f64 * base).collect()
}
