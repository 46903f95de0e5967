//! Restarted GMRES with modified Gram-Schmidt and Givens rotations.
//!
//! Reductions are plain sequential sums so results are bit-reproducible.

#[derive(Clone, Debug)]
pub struct GmresOptions {
    pub restart: usize,
    pub max_cycles: usize,
    /// Stop when `||b - A x|| <= rel_tol * ||b||`.
    pub rel_tol: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            restart: 80,
            max_cycles: 10,
            rel_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve `A x = b` from `x = 0`.
pub fn gmres(apply: impl Fn(&[f64], &mut [f64]), b: &[f64], opts: &GmresOptions) -> GmresOutcome {
    let len = b.len();
    let m = opts.restart.max(1);
    let bnorm = norm(b);
    let mut x = vec![0.0; len];
    if bnorm == 0.0 {
        return GmresOutcome {
            x,
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
        };
    }
    let target = opts.rel_tol * bnorm;
    let mut iterations = 0;
    let mut r = b.to_vec();
    let mut rnorm = bnorm;
    let mut w = vec![0.0; len];

    for _cycle in 0..opts.max_cycles {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / rnorm).collect());
        let mut hess = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = rnorm;
        let mut k_used = 0;

        for k in 0..m {
            apply(&basis[k], &mut w);
            iterations += 1;
            for (i, v) in basis.iter().enumerate() {
                let hik = dot(&w, v);
                hess[i][k] = hik;
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= hik * b);
            }
            let wn = norm(&w);
            hess[k + 1][k] = wn;
            for i in 0..k {
                let t = cs[i] * hess[i][k] + sn[i] * hess[i + 1][k];
                hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                hess[i][k] = t;
            }
            let (a, bb) = (hess[k][k], hess[k + 1][k]);
            let d = a.hypot(bb);
            if d == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = a / d;
            sn[k] = bb / d;
            hess[k][k] = d;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            let breakdown = wn <= 1e-14 * bnorm;
            if g[k + 1].abs() <= target || breakdown {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }

        // back substitution on the k_used x k_used triangle
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hess[i][j] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            x.iter_mut().zip(&basis[j]).for_each(|(a, v)| *a += yj * v);
        }

        apply(&x, &mut w);
        r.iter_mut()
            .zip(b.iter().zip(&w))
            .for_each(|(ri, (bi, ai))| *ri = bi - ai);
        rnorm = norm(&r);
        if rnorm <= target || k_used == 0 {
            break;
        }
    }
    GmresOutcome {
        x,
        iterations,
        rel_residual: rnorm / bnorm,
        converged: rnorm <= target,
    }
}
