//! Centralized reference optimizer for the FACT cost, over coordinates
//! flattened as `x[2 * (t * n + i) + axis]`.

use nalgebra::DMatrix;
use uwb_collide::Vec2;

/// Stress over ordered pairs plus second-difference smoothness, written out
/// directly from the definition.
pub fn oracle_cost(x: &[f64], d: &[DMatrix<f64>], n: usize, r: f64) -> f64 {
    let p = |t: usize, i: usize| Vec2::new(x[2 * (t * n + i)], x[2 * (t * n + i) + 1]);
    let mut s = 0.0;
    for (t, f) in d.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += (f[(i, j)] - p(t, i).distance(p(t, j))).powi(2);
                }
            }
        }
    }
    for t in 1..d.len().saturating_sub(1) {
        for i in 0..n {
            s += r * (p(t - 1, i) + p(t + 1, i) - p(t, i) * 2.0).norm_sq();
        }
    }
    s
}

pub fn oracle_grad(x: &[f64], d: &[DMatrix<f64>], n: usize, r: f64) -> Vec<f64> {
    let p = |t: usize, i: usize| Vec2::new(x[2 * (t * n + i)], x[2 * (t * n + i) + 1]);
    let mut g = vec![0.0; x.len()];
    let mut add = |t: usize, i: usize, v: Vec2| {
        g[2 * (t * n + i)] += v.x;
        g[2 * (t * n + i) + 1] += v.y;
    };
    for (t, f) in d.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let diff = p(t, i) - p(t, j);
                let dist = diff.norm();
                if dist == 0.0 {
                    continue;
                }
                // Term (d_ij - |x_i - x_j|)^2 appears for (i, j) and (j, i).
                let c = -2.0 * (f[(i, j)] - dist) / dist;
                add(t, i, diff * c);
                add(t, j, diff * -c);
            }
        }
    }
    for t in 1..d.len().saturating_sub(1) {
        for i in 0..n {
            let s = (p(t - 1, i) + p(t + 1, i) - p(t, i) * 2.0) * (2.0 * r);
            add(t - 1, i, s);
            add(t + 1, i, s);
            add(t, i, s * -2.0);
        }
    }
    g
}

/// Gradient descent with Barzilai-Borwein trial steps and Armijo backtracking.
pub fn oracle_descent(mut x: Vec<f64>, d: &[DMatrix<f64>], n: usize, r: f64) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let mut f = oracle_cost(&x, d, n, r);
    let mut g = oracle_grad(&x, d, n, r);
    let mut step = 1e-3;
    for _ in 0..200_000 {
        let gg = dot(&g, &g);
        if gg.sqrt() < 1e-11 {
            break;
        }
        let mut a = step;
        let (xn, fnew) = loop {
            let xn: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - a * gi).collect();
            let fnew = oracle_cost(&xn, d, n, r);
            if fnew <= f - 1e-4 * a * gg || a < 1e-20 {
                break (xn, fnew);
            }
            a *= 0.5;
        };
        let gn = oracle_grad(&xn, d, n, r);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(p, q)| p - q).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(p, q)| p - q).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 { dot(&s, &s) / sy } else { 1e-3 };
        let done = f - fnew <= 1e-16 * f.max(1e-300);
        x = xn;
        g = gn;
        f = fnew;
        if done {
            break;
        }
    }
    f
}
