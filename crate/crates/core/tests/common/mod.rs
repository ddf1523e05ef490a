//! Reference implementations shared by the integration tests. They are
//! written from the definitions, independently of the crate's code paths.

#![allow(dead_code)]

pub mod criteria;

use latent_gfl_core::{DecoderParams, DecoderShape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// `W x + b` for a row-major `W`.
fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    b.iter()
        .enumerate()
        .map(|(r, bias)| bias + w[r * x.len()..(r + 1) * x.len()].iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
        .collect()
}

/// Decoder output computed layer by layer from the parameter blocks.
pub fn reference_forward(p: &DecoderParams, z: &[f64]) -> Vec<f64> {
    let h1: Vec<f64> = affine(p.w1(), p.b1(), z).into_iter().map(relu).collect();
    let h2: Vec<f64> = affine(p.w2(), p.b2(), &h1).into_iter().map(relu).collect();
    affine(p.w3(), p.b3(), &h2)
}

pub fn reference_loglik(p: &DecoderParams, z: &[f64], y: &[f64]) -> f64 {
    let out = reference_forward(p, z);
    let ss: f64 = y.iter().zip(&out).map(|(a, b)| (a - b) * (a - b)).sum();
    -0.5 * ss - 0.5 * y.len() as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// Random decoder whose pre-activations stay away from the ReLU kinks at
/// the given latent points, so that central differences are valid.
pub fn kink_free_decoder(rng: &mut ChaCha8Rng, shape: DecoderShape, zs: &[Vec<f64>], margin: f64) -> DecoderParams {
    loop {
        let mut p = DecoderParams::zeros(shape).unwrap();
        for v in p.as_mut_slice() {
            *v = rng.random_range(-1.0..1.0);
        }
        let ok = zs.iter().all(|z| {
            let a1 = affine(p.w1(), p.b1(), z);
            let h1: Vec<f64> = a1.iter().copied().map(relu).collect();
            let a2 = affine(p.w2(), p.b2(), &h1);
            a1.iter().chain(&a2).all(|v| v.abs() > margin)
        });
        if ok {
            return p;
        }
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Nelder-Mead with restarts; good to ~1e-10 on small convex problems,
/// including ones with a kink at the minimum.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], scale: f64) -> Vec<f64> {
    let d = x0.len();
    let mut best = x0.to_vec();
    let mut step = scale;
    for _ in 0..12 {
        let mut simplex: Vec<Vec<f64>> = vec![best.clone()];
        for k in 0..d {
            let mut v = best.clone();
            v[k] += step;
            simplex.push(v);
        }
        let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
        for _ in 0..5000 {
            let mut idx: Vec<usize> = (0..=d).collect();
            idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
            simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
            vals = idx.iter().map(|&i| vals[i]).collect();
            let size = simplex[1..]
                .iter()
                .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if size < 1e-13 {
                break;
            }
            let centroid: Vec<f64> = (0..d).map(|k| simplex[..d].iter().map(|v| v[k]).sum::<f64>() / d as f64).collect();
            let towards = |t: f64| -> Vec<f64> { (0..d).map(|k| centroid[k] + t * (simplex[d][k] - centroid[k])).collect() };
            let xr = towards(-1.0);
            let fr = f(&xr);
            if fr < vals[0] {
                let xe = towards(-2.0);
                let fe = f(&xe);
                if fe < fr {
                    simplex[d] = xe;
                    vals[d] = fe;
                } else {
                    simplex[d] = xr;
                    vals[d] = fr;
                }
            } else if fr < vals[d - 1] {
                simplex[d] = xr;
                vals[d] = fr;
            } else {
                let xc = if fr < vals[d] { towards(-0.5) } else { towards(0.5) };
                let fc = f(&xc);
                if fc < vals[d].min(fr) {
                    simplex[d] = xc;
                    vals[d] = fc;
                } else {
                    for i in 1..=d {
                        simplex[i] = (0..d).map(|k| simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k])).collect();
                        vals[i] = f(&simplex[i]);
                    }
                }
            }
        }
        let (i, _) = vals.iter().enumerate().fold((0, f64::INFINITY), |b, (i, &v)| if v < b.1 { (i, v) } else { b });
        best = simplex[i].clone();
        step = (step * 0.1).max(1e-6);
    }
    best
}

fn choose2(x: usize) -> f64 {
    (x * x.saturating_sub(1)) as f64 / 2.0
}

/// ARI from counts taken directly over all unordered pairs.
pub fn brute_force_ari(truth: &[usize], pred: &[usize]) -> f64 {
    let n = truth.len();
    let (mut both, mut same_t, mut same_p) = (0usize, 0usize, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            let t = truth[i] == truth[j];
            let p = pred[i] == pred[j];
            same_t += t as usize;
            same_p += p as usize;
            both += (t && p) as usize;
        }
    }
    let pairs = choose2(n);
    let expected = same_t as f64 * same_p as f64 / pairs;
    let max = 0.5 * (same_t + same_p) as f64;
    if max == expected {
        1.0
    } else {
        (both as f64 - expected) / (max - expected)
    }
}

fn permutations(items: Vec<usize>) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.clone();
        let head = rest.remove(i);
        for mut p in permutations(rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// Best accuracy over every one-to-one map from predicted to true labels.
pub fn exhaustive_acc(truth: &[usize], pred: &[usize]) -> f64 {
    let r = truth.iter().max().unwrap() + 1;
    let c = pred.iter().max().unwrap() + 1;
    let m = r.max(c);
    permutations((0..m).collect())
        .into_iter()
        .map(|perm| truth.iter().zip(pred).filter(|(t, p)| perm[**p] == **t).count())
        .max()
        .unwrap() as f64
        / truth.len() as f64
}

/// Smallest k-means inertia over all partitions of the points into exactly
/// `k` non-empty groups.
pub fn brute_force_inertia(points: &[f64], dim: usize, k: usize) -> f64 {
    let n = points.len() / dim;
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        if counts.iter().all(|&c| c > 0) {
            let mut total = 0.0;
            for c in 0..k {
                let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
                for j in 0..dim {
                    let mean = members.iter().map(|&i| points[i * dim + j]).sum::<f64>() / members.len() as f64;
                    total += members.iter().map(|&i| (points[i * dim + j] - mean).powi(2)).sum::<f64>();
                }
            }
            best = best.min(total);
        }
        // next labelling in base k
        let mut pos = 0;
        loop {
            if pos == n {
                return best;
            }
            labels[pos] += 1;
            if labels[pos] < k {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
    }
}

/// Cholesky factor of a symmetric positive definite row-major matrix.
pub fn cholesky(a: &[f64], n: usize) -> Vec<f64> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                l[i * n + i] = (a[i * n + i] - s).sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    l
}

/// Solves `A x = b` given the Cholesky factor of `A`.
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i * n + k] * y[k]).sum::<f64>()) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| l[k * n + i] * x[k]).sum::<f64>()) / l[i * n + i];
    }
    x
}

/// `ln N(y; m, S)` for a dense covariance `S`.
pub fn gaussian_logpdf(y: &[f64], m: &[f64], cov: &[f64]) -> f64 {
    let n = y.len();
    let l = cholesky(cov, n);
    let r: Vec<f64> = y.iter().zip(m).map(|(a, b)| a - b).collect();
    let x = cholesky_solve(&l, n, &r);
    let quad: f64 = r.iter().zip(&x).map(|(a, b)| a * b).sum();
    let logdet: f64 = (0..n).map(|i| 2.0 * l[i * n + i].ln()).sum();
    -0.5 * (quad + logdet + n as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Decoder that computes `h(z) = A z + c` exactly, using `relu(x) - relu(-x) = x`.
/// `a` is `n x d` row-major.
pub fn linear_decoder(a: &[f64], c: &[f64], d: usize) -> DecoderParams {
    let n = c.len();
    let shape = DecoderShape::new(d, 2 * d, 2 * d, n);
    let mut w1 = vec![0.0; 2 * d * d];
    for k in 0..d {
        w1[k * d + k] = 1.0;
        w1[(d + k) * d + k] = -1.0;
    }
    let mut w2 = vec![0.0; 4 * d * d];
    for k in 0..2 * d {
        w2[k * 2 * d + k] = 1.0;
    }
    let mut w3 = vec![0.0; n * 2 * d];
    for o in 0..n {
        for k in 0..d {
            w3[o * 2 * d + k] = a[o * d + k];
            w3[o * 2 * d + d + k] = -a[o * d + k];
        }
    }
    DecoderParams::from_parts(shape, &w1, &vec![0.0; 2 * d], &w2, &vec![0.0; 2 * d], &w3, c).unwrap()
}

pub fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, sa) = mean_and_sd(a);
    let (mb, sb) = mean_and_sd(b);
    let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 - 1.0);
    cov / (sa * sb)
}
