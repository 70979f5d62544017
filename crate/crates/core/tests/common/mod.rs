//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use marslab::cluster::Metric;
use marslab::data::{Dataset, TriggerSpec};
use marslab::energy::BeProfile;
use marslab::nn::{Layer, Mode, Model, Tensor};

/// Singular values of a row-major matrix, descending, by one-sided Jacobi
/// rotations (Hestenes). Works on the orientation with more rows.
pub fn jacobi_singular_values(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    // Column-major working copy of A (rows ≥ cols) or of Aᵀ.
    let (r, c, mut a) = if rows >= cols {
        let mut a = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                a[j * rows + i] = m[i * cols + j];
            }
        }
        (rows, cols, a)
    } else {
        (cols, rows, m.to_vec())
    };
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..c {
            for q in p + 1..c {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for k in 0..r {
                    let (x, y) = (a[p * r + k], a[q * r + k]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for k in 0..r {
                    let (x, y) = (a[p * r + k], a[q * r + k]);
                    a[p * r + k] = cs * x - sn * y;
                    a[q * r + k] = sn * x + cs * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut s: Vec<f64> = (0..c)
        .map(|j| a[j * r..(j + 1) * r].iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// W1 between the empirical distributions of `p` and `q` as the integral of
/// the absolute CDF difference.
pub fn w1_by_cdf(p: &[f64], q: &[f64]) -> f64 {
    let mut points: Vec<f64> = p.iter().chain(q).copied().collect();
    points.sort_by(f64::total_cmp);
    let cdf = |xs: &[f64], t: f64| xs.iter().filter(|&&x| x <= t).count() as f64 / xs.len() as f64;
    points
        .windows(2)
        .map(|w| (cdf(p, w[0]) - cdf(q, w[0])).abs() * (w[1] - w[0]))
        .sum()
}

/// Cost of a 2-partition: every point's distance to its cluster centroid.
pub fn partition_cost(points: &[Vec<f64>], assignment: &[usize], metric: Metric) -> f64 {
    let mut cost = 0.0;
    for c in 0..2 {
        let members: Vec<&[f64]> = points
            .iter()
            .zip(assignment)
            .filter(|(_, &a)| a == c)
            .map(|(p, _)| p.as_slice())
            .collect();
        if members.is_empty() {
            continue;
        }
        let center = metric.centroid(&members);
        cost += members
            .iter()
            .map(|m| metric.distance(m, &center).unwrap())
            .sum::<f64>();
    }
    cost
}

/// Lowest-cost split into two nonempty groups, by enumeration. Returns the
/// cost and the assignment with point 0 in cluster 0.
pub fn best_partition(points: &[Vec<f64>], metric: Metric) -> (f64, Vec<usize>) {
    let n = points.len();
    let mut best = (f64::INFINITY, Vec::new());
    for mask in 0u32..(1 << (n - 1)) {
        // Point 0 stays in cluster 0; bit i-1 places point i.
        let assignment: Vec<usize> = (0..n)
            .map(|i| if i == 0 { 0 } else { ((mask >> (i - 1)) & 1) as usize })
            .collect();
        if assignment.iter().all(|&a| a == 0) {
            continue;
        }
        let cost = partition_cost(points, &assignment, metric);
        if cost < best.0 {
            best = (cost, assignment);
        }
    }
    best
}

/// Same grouping regardless of which cluster is called 0.
pub fn same_split(a: &[usize], b: &[usize]) -> bool {
    a.iter().zip(b).all(|(x, y)| x == y) || a.iter().zip(b).all(|(x, y)| x != y)
}

/// Central differences of the cross-entropy w.r.t. every trainable parameter.
pub fn numeric_ce_grad(model: &Model, x: &Tensor, y: &[usize], mode: Mode, h: f64) -> Vec<f64> {
    let theta = model.trainable_vector();
    let mut probe = model.clone();
    let loss = |m: &Model| m.backward_ce(x, y, mode).unwrap().0;
    (0..theta.len())
        .map(|i| {
            let mut t = theta.clone();
            t[i] = theta[i] + h;
            probe.set_trainable_vector(&t).unwrap();
            let up = loss(&probe);
            t[i] = theta[i] - h;
            probe.set_trainable_vector(&t).unwrap();
            let down = loss(&probe);
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central differences of an arbitrary scalar function of the trainable
/// parameters.
pub fn numeric_grad(model: &Model, h: f64, f: impl Fn(&Model) -> f64) -> Vec<f64> {
    let theta = model.trainable_vector();
    let mut probe = model.clone();
    (0..theta.len())
        .map(|i| {
            let mut t = theta.clone();
            t[i] = theta[i] + h;
            probe.set_trainable_vector(&t).unwrap();
            let up = f(&probe);
            t[i] = theta[i] - h;
            probe.set_trainable_vector(&t).unwrap();
            let down = f(&probe);
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Worst relative error, with magnitudes below `floor` treated as `floor`.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Empirical backdoor energy recomputed one sample at a time, for the
/// analyzable layers in model order.
pub fn empirical_be_per_sample(
    model: &Model,
    data: &Dataset,
    trigger: &TriggerSpec,
    indices: &[usize],
) -> Vec<Vec<f64>> {
    let [c, h, w] = data.sample_shape();
    let to_chw = |img: &[f64]| {
        let mut out = vec![0.0; img.len()];
        for r in 0..h {
            for col in 0..w {
                for ch in 0..c {
                    out[ch * h * w + r * w + col] = img[(r * w + col) * c + ch];
                }
            }
        }
        Tensor::new(vec![1, c, h, w], out).unwrap()
    };
    let analyzable: Vec<usize> = model
        .layers()
        .iter()
        .enumerate()
        .filter(|(_, l)| matches!(l, Layer::Dense(_) | Layer::Conv2d(_) | Layer::BatchNorm(_)))
        .map(|(i, _)| i)
        .collect();
    let mut sums: Vec<Vec<f64>> = Vec::new();
    for &i in indices {
        let clean = data.image(i).to_vec();
        let mut stamped = clean.clone();
        trigger.stamp(&mut stamped, h, w, c);
        let a = model.forward(&to_chw(&clean), Mode::Eval).unwrap();
        let b = model.forward(&to_chw(&stamped), Mode::Eval).unwrap();
        for (slot, &li) in analyzable.iter().enumerate() {
            let (oa, ob) = (a.layer_output(li), b.layer_output(li));
            let units = oa.shape()[1];
            let per = oa.len() / units;
            let gaps: Vec<f64> = (0..units)
                .map(|k| {
                    (k * per..(k + 1) * per)
                        .map(|j| (oa.data()[j] - ob.data()[j]).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect();
            if sums.len() <= slot {
                sums.push(vec![0.0; units]);
            }
            for (s, g) in sums[slot].iter_mut().zip(gaps) {
                *s += g;
            }
        }
    }
    for s in &mut sums {
        s.iter_mut().for_each(|v| *v /= indices.len() as f64);
    }
    sums
}

pub fn flatten_profile(p: &BeProfile) -> Vec<Vec<f64>> {
    p.layers.iter().map(|l| l.values.clone()).collect()
}

/// Σ BE over the layers `policy` admits, recomputed with the Jacobi SVD for
/// convolution channels.
pub fn total_be_oracle(model: &Model, policy: marslab::energy::LayerPolicy) -> f64 {
    let mut total = 0.0;
    for layer in model.layers() {
        if !policy.admits(layer) {
            continue;
        }
        match layer {
            Layer::Dense(d) => {
                for k in 0..d.out_dim {
                    total += d.row(k).iter().map(|w| w * w).sum::<f64>().sqrt();
                }
            }
            Layer::Conv2d(c) => {
                for k in 0..c.out_channels {
                    total += jacobi_singular_values(c.filter(k), c.in_channels, c.kernel_h * c.kernel_w)[0];
                }
            }
            Layer::BatchNorm(b) => {
                for k in 0..b.channels {
                    total += b.gamma[k].abs() / (b.running_var[k] + b.eps).sqrt();
                }
            }
            _ => {}
        }
    }
    total
}
