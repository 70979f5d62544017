use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
pub const TOLERANCE: f64 = 1e-10;

/// Largest singular value of a matrix with its singular vectors:
/// `M v = sigma u`, `‖u‖ = ‖v‖ = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularTriplet {
    pub sigma: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Squarings applied to the Gram matrix before iterating, so each step
/// multiplies by `(MᵀM)^(2^SQUARINGS)`.
pub const SQUARINGS: usize = 8;

fn mat_vec(m: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        out[r] = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `(MᵀM)^(2^SQUARINGS)` up to a positive scale, `cols × cols`.
fn gram_power(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut g = vec![0.0; cols * cols];
    for i in 0..cols {
        for j in i..cols {
            let d: f64 = (0..rows).map(|r| m[r * cols + i] * m[r * cols + j]).sum();
            g[i * cols + j] = d;
            g[j * cols + i] = d;
        }
    }
    let mut next = vec![0.0; cols * cols];
    for _ in 0..SQUARINGS {
        let scale = g.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if scale == 0.0 {
            break;
        }
        g.iter_mut().for_each(|x| *x /= scale);
        for i in 0..cols {
            for j in i..cols {
                let d: f64 = (0..cols).map(|k| g[i * cols + k] * g[k * cols + j]).sum();
                next[i * cols + j] = d;
                next[j * cols + i] = d;
            }
        }
        std::mem::swap(&mut g, &mut next);
    }
    g
}

/// Power iteration for the top singular pair of a row-major `rows × cols`
/// matrix, run on `MᵀM` raised to the power `2^`[`SQUARINGS`] by repeated
/// squaring so that nearly equal singular values still separate quickly.
///
/// Starts from the normalized all-ones vector and stops once no entry of the
/// unit iterate `v` moves by more than [`TOLERANCE`], or after
/// [`MAX_ITERATIONS`] steps. If the start vector lies in the null space (so
/// the first product vanishes on a nonzero matrix) it restarts from the basis
/// vector of the heaviest column. `sigma` is `‖M v‖`. The all-zero matrix has
/// norm 0.
pub fn spectral_norm(m: &[f64], rows: usize, cols: usize) -> Result<SingularTriplet> {
    if rows == 0 || cols == 0 || m.len() != rows * cols {
        return Err(Error::Shape(format!(
            "spectral norm needs a nonempty {rows}x{cols} matrix, got {} values",
            m.len()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let mut v = vec![1.0 / (cols as f64).sqrt(); cols];
    let mut w = vec![0.0; rows];
    let mut z = vec![0.0; cols];
    if m.iter().all(|&x| x == 0.0) {
        return Ok(SingularTriplet {
            sigma: 0.0,
            u: vec![0.0; rows],
            v,
        });
    }

    let p = gram_power(m, rows, cols);
    let mut restarted = false;
    for _ in 0..MAX_ITERATIONS {
        mat_vec(&p, cols, cols, &v, &mut z);
        let zn = norm(&z);
        if zn == 0.0 {
            if restarted {
                break;
            }
            restarted = true;
            let heaviest = (0..cols)
                .max_by(|&a, &b| {
                    let ca: f64 = (0..rows).map(|r| m[r * cols + a].powi(2)).sum();
                    let cb: f64 = (0..rows).map(|r| m[r * cols + b].powi(2)).sum();
                    ca.total_cmp(&cb).then(b.cmp(&a))
                })
                .expect("cols > 0");
            v.fill(0.0);
            v[heaviest] = 1.0;
            continue;
        }
        let mut moved = 0.0f64;
        for (vi, zi) in v.iter_mut().zip(&z) {
            let next = zi / zn;
            moved = moved.max((next - *vi).abs());
            *vi = next;
        }
        if moved < TOLERANCE {
            break;
        }
    }
    mat_vec(m, rows, cols, &v, &mut w);
    let sigma = norm(&w);
    let u = if sigma > 0.0 {
        w.iter().map(|x| x / sigma).collect()
    } else {
        vec![0.0; rows]
    };
    Ok(SingularTriplet { sigma, u, v })
}
