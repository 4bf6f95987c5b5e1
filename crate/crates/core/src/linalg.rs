//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Singular values below this fraction of the largest are treated as zero.
pub const PINV_RTOL: f64 = 1e-12;

/// Moore-Penrose pseudo-inverse with relative singular-value cutoff `rtol`.
pub fn pinv(m: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = rtol * smax;
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += vt.row(k).transpose() * u.column(k).transpose() * (1.0 / s);
        }
    }
    out
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when the relative decrease of the squared residual drops below this.
    pub ftol: f64,
    /// Stop when the step is below `xtol * (|x| + xtol)`.
    pub xtol: f64,
    pub initial_lambda: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            ftol: 1e-15,
            xtol: 1e-14,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub x: DVector<f64>,
    pub cost: f64,
    pub iterations: usize,
}

/// Levenberg-Marquardt minimization of `|r(x)|^2`.
///
/// `problem` fills the residual vector and its Jacobian at `x`.
pub fn levenberg_marquardt<F>(mut problem: F, x0: DVector<f64>, opts: LmOptions) -> LmReport
where
    F: FnMut(&DVector<f64>, &mut DVector<f64>, &mut DMatrix<f64>),
{
    let n = x0.len();
    let mut x = x0;
    let mut r = DVector::zeros(0);
    let mut j = DMatrix::zeros(0, 0);
    problem(&x, &mut r, &mut j);
    let mut cost = r.norm_squared();
    let mut lambda = opts.initial_lambda;
    let mut iterations = 0;
    let mut r_try = DVector::zeros(0);
    let mut j_try = DMatrix::zeros(0, 0);

    while iterations < opts.max_iter {
        iterations += 1;
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let x_try = &x + &step;
            problem(&x_try, &mut r_try, &mut j_try);
            let c_try = r_try.norm_squared();
            if c_try.is_finite() && c_try <= cost {
                let rel = (cost - c_try) / cost.max(f64::MIN_POSITIVE);
                let small_step = step.norm() <= opts.xtol * (x.norm() + opts.xtol);
                x = x_try;
                std::mem::swap(&mut r, &mut r_try);
                std::mem::swap(&mut j, &mut j_try);
                cost = c_try;
                lambda = (lambda * 0.3).max(1e-15);
                improved = true;
                if rel < opts.ftol || small_step {
                    return LmReport {
                        x,
                        cost,
                        iterations,
                    };
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    LmReport {
        x,
        cost,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_rank_deficient() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let p = pinv(&m, PINV_RTOL);
        assert_eq!(p, m);
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let p = pinv(&a, PINV_RTOL);
        let back = &a * &p * &a;
        assert!((back - a).abs().max() < 1e-12);
    }

    #[test]
    fn lm_fits_rosenbrock() {
        let rep = levenberg_marquardt(
            |x, r, j| {
                *r = DVector::from_vec(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]);
                *j = DMatrix::from_row_slice(2, 2, &[-20.0 * x[0], 10.0, -1.0, 0.0]);
            },
            DVector::from_vec(vec![-1.2, 1.0]),
            LmOptions::default(),
        );
        assert!((rep.x[0] - 1.0).abs() < 1e-8 && (rep.x[1] - 1.0).abs() < 1e-8);
    }
}
