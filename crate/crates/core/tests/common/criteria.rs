//! Checks behind the fast acceptance criteria. Each returns a one-line
//! summary on success and a description of the first violation otherwise.

#![allow(dead_code)]

use latent_gfl_core::admm::{fit, prox_group_lasso, update_mu, AdmmState, FitConfig};
use latent_gfl_core::graph::{Graph, NodeSeries};
use latent_gfl_core::inference::{langevin_chain, marginal_loglik_mc, prior_loglik_draws, InitMode, LangevinConfig};
use latent_gfl_core::metrics::{accuracy, ari, contingency};
use latent_gfl_core::rng::{Domain, RngStream};
use latent_gfl_core::simgen::{gen_ar_series, gen_var_series};
use latent_gfl_core::DecoderShape;
use rand::Rng;

use super::*;

pub type Check = Result<String, String>;

/// Decoder gradients against central differences of an independent forward
/// pass: 20 instances with `d = 3`, hidden width 8, `n = 16`.
pub fn gradients() -> Check {
    let mut r = rng(5);
    let shape = DecoderShape::new(3, 8, 8, 16);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for inst in 0..20 {
        let zs: Vec<Vec<f64>> = (0..3).map(|_| uniform_vec(&mut r, 3, -1.5, 1.5)).collect();
        let ys: Vec<Vec<f64>> = (0..3).map(|_| uniform_vec(&mut r, 16, -2.0, 2.0)).collect();
        let p = kink_free_decoder(&mut r, shape, &zs, 1e-3);

        // latent gradient of ln N(y; h(z), I)
        let analytic = p.grad_z(&zs[0], &ys[0]).unwrap();
        let numeric: Vec<f64> = (0..3)
            .map(|k| {
                let (mut zp, mut zm) = (zs[0].clone(), zs[0].clone());
                zp[k] += h;
                zm[k] -= h;
                (reference_loglik(&p, &zp, &ys[0]) - reference_loglik(&p, &zm, &ys[0])) / (2.0 * h)
            })
            .collect();
        let e = vec_rel_err(&analytic, &numeric);
        worst = worst.max(e);
        if e >= 1e-4 {
            return Err(format!("instance {inst}: latent gradient relative error {e:.2e}"));
        }

        // parameter gradient of -(1/S) sum ln N(y_u; h(z_u), I)
        let pairs: Vec<(&[f64], &[f64])> = zs.iter().zip(&ys).map(|(z, y)| (z.as_slice(), y.as_slice())).collect();
        let analytic = p.grad_params(&pairs).unwrap();
        let loss = |q: &latent_gfl_core::DecoderParams| -> f64 {
            -zs.iter().zip(&ys).map(|(z, y)| reference_loglik(q, z, y)).sum::<f64>() / zs.len() as f64
        };
        let numeric: Vec<f64> = (0..p.n_params())
            .map(|j| {
                let (mut qp, mut qm) = (p.clone(), p.clone());
                qp.as_mut_slice()[j] += h;
                qm.as_mut_slice()[j] -= h;
                (loss(&qp) - loss(&qm)) / (2.0 * h)
            })
            .collect();
        let e = vec_rel_err(analytic.as_slice(), &numeric);
        worst = worst.max(e);
        if e >= 1e-4 {
            return Err(format!("instance {inst}: parameter gradient relative error {e:.2e}"));
        }
    }
    Ok(format!("20 instances, worst relative error {worst:.2e}"))
}

/// `max_j |a_j - b_j| / max_j |b_j|`.
pub fn vec_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let den = b.iter().map(|y| y.abs()).fold(0.0, f64::max).max(1e-12);
    num / den
}

/// Block soft-thresholding against direct minimisation of
/// `lambda ||nu|| + gamma/2 ||nu - s||^2`, 100 triples, a quarter of them in
/// the region where the answer is zero.
pub fn prox() -> Check {
    let mut r = rng(11);
    let mut worst: f64 = 0.0;
    let mut zeros = 0;
    for t in 0..100 {
        let d = r.random_range(1..=4);
        let lambda = r.random_range(0.01..2.0);
        let gamma = r.random_range(0.1..3.0);
        let mut s = uniform_vec(&mut r, d, -2.0, 2.0);
        if t % 4 == 0 {
            let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
            let target = r.random_range(0.05..0.95) * lambda / gamma;
            s.iter_mut().for_each(|v| *v *= target / norm);
        }
        let objective = |nu: &[f64]| -> f64 {
            let n = nu.iter().map(|v| v * v).sum::<f64>().sqrt();
            let q: f64 = nu.iter().zip(&s).map(|(a, b)| (a - b) * (a - b)).sum();
            lambda * n + 0.5 * gamma * q
        };
        let numeric = nelder_mead(objective, &s, 0.5);
        let closed = prox_group_lasso(&s, lambda, gamma);
        if closed.iter().all(|&v| v == 0.0) {
            zeros += 1;
        }
        let err = closed.iter().zip(&numeric).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(err);
        if err > 1e-6 {
            return Err(format!("triple {t}: |closed - numeric| = {err:.2e} (s = {s:?}, lambda = {lambda}, gamma = {gamma})"));
        }
    }
    if zeros < 25 {
        return Err(format!("only {zeros} triples reached the zero region"));
    }
    Ok(format!("100 triples ({zeros} zero), worst deviation {worst:.2e}"))
}

/// Linear decoder `h(z) = A z + c`: Langevin posterior mean and Monte Carlo
/// marginal likelihood against their Gaussian closed forms.
pub fn conjugate() -> Check {
    let (d, n) = (2usize, 5usize);
    let mut r = rng(23);
    let a = uniform_vec(&mut r, n * d, -0.5, 0.5);
    let c = uniform_vec(&mut r, n, -1.0, 1.0);
    let mu = uniform_vec(&mut r, d, -1.0, 1.0);
    let y = uniform_vec(&mut r, n, -2.0, 2.0);
    let dec = linear_decoder(&a, &c, d);

    // posterior precision I + A^T A, mean P^{-1} (mu + A^T (y - c))
    let mut prec = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            prec[i * d + j] = (0..n).map(|o| a[o * d + i] * a[o * d + j]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
        }
    }
    let rhs: Vec<f64> = (0..d).map(|k| mu[k] + (0..n).map(|o| a[o * d + k] * (y[o] - c[o])).sum::<f64>()).collect();
    let exact_mean = cholesky_solve(&cholesky(&prec, d), d, &rhs);

    let s = 10_000;
    let cfg = LangevinConfig {
        delta: 0.4,
        mcmc_steps: 60,
        n_samples: s,
        init_mode: InitMode::PriorMean,
    };
    let samples = langevin_chain(&dec, &y, &mu, &cfg, RngStream::new(3, Domain::Langevin), None).unwrap();
    let mut detail = String::new();
    for k in 0..d {
        let xs: Vec<f64> = samples.iter().map(|z| z[k]).collect();
        let (m, sd) = mean_and_sd(&xs);
        let se = sd / (s as f64).sqrt();
        if (m - exact_mean[k]).abs() > 3.0 * se {
            return Err(format!("posterior mean[{k}] = {m:.5}, exact {:.5}, 3 SE = {:.5}", exact_mean[k], 3.0 * se));
        }
        detail += &format!("mean[{k}] off by {:.2} SE; ", (m - exact_mean[k]).abs() / se);
    }

    // marginal y ~ N(A mu + c, I + A A^T)
    let mean_y: Vec<f64> = (0..n).map(|o| c[o] + (0..d).map(|k| a[o * d + k] * mu[k]).sum::<f64>()).collect();
    let mut cov = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            cov[i * n + j] = (0..d).map(|k| a[i * d + k] * a[j * d + k]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
        }
    }
    let exact = gaussian_logpdf(&y, &mean_y, &cov);
    let stream = RngStream::new(4, Domain::Marginal);
    let est = marginal_loglik_mc(&dec, &y, &mu, s, stream).unwrap();
    let draws = prior_loglik_draws(&dec, &y, &mu, s, stream);
    let top = draws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = draws.iter().map(|v| (v - top).exp()).collect();
    let (wm, wsd) = mean_and_sd(&w);
    let se = wsd / (wm * (s as f64).sqrt());
    if (est - exact).abs() > 3.0 * se {
        return Err(format!("marginal {est:.5}, exact {exact:.5}, 3 SE = {:.5}", 3.0 * se));
    }
    detail += &format!("marginal off by {:.2} SE", (est - exact).abs() / se);
    Ok(detail)
}

fn random_labels(r: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|_| r.random_range(0..k)).collect()
}

/// Closed-form ARI against pair counting and optimal-assignment ACC against
/// exhaustive search on 50 random label pairs.
pub fn metric_oracles() -> Check {
    let mut r = rng(31);
    let mut worst: f64 = 0.0;
    for t in 0..50 {
        let n = r.random_range(2..=30);
        let kt = r.random_range(1..=6);
        let kp = r.random_range(1..=6);
        let truth = random_labels(&mut r, n, kt);
        let pred = random_labels(&mut r, n, kp);
        let table = contingency(&truth, &pred).unwrap();
        let (a, b) = (ari(&table), brute_force_ari(&truth, &pred));
        let (c, e) = (accuracy(&table), exhaustive_acc(&truth, &pred));
        let err = (a - b).abs().max((c - e).abs());
        worst = worst.max(err);
        if err > 1e-12 {
            return Err(format!("pair {t}: ARI {a} vs {b}, ACC {c} vs {e}"));
        }
    }
    Ok(format!("50 label pairs, worst deviation {worst:.1e}"))
}

fn random_graph(r: &mut ChaCha8Rng, n: usize, p: f64) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, &edges).unwrap()
}

/// Gradient of `1/2 ||mu_i - post||^2 + gamma/2 sum_e ||mu_a - mu_b - nu_e + w_e||^2`
/// in `mu_i`, accumulated edge by edge.
fn mu_stationarity(i: usize, mu_i: &[f64], post: &[f64], st: &AdmmState, g: &Graph, gamma: f64) -> f64 {
    let d = mu_i.len();
    let mut grad: Vec<f64> = mu_i.iter().zip(post).map(|(m, p)| m - p).collect();
    let row = |v: &[f64], idx: usize| v[idx * d..(idx + 1) * d].to_vec();
    for (e, &(a, b)) in g.edges().iter().enumerate() {
        if a != i && b != i {
            continue;
        }
        let ma = if a == i { mu_i.to_vec() } else { row(&st.mu, a) };
        let mb = if b == i { mu_i.to_vec() } else { row(&st.mu, b) };
        let (nu, w) = (row(&st.nu, e), row(&st.w, e));
        let sign = if a == i { 1.0 } else { -1.0 };
        for k in 0..d {
            grad[k] += sign * gamma * (ma[k] - mb[k] - nu[k] + w[k]);
        }
    }
    grad.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Closed-form prior-mean update zeroes its stationarity condition, and a
/// `lambda = 0` iteration leaves every dual at exactly zero.
pub fn closed_form_mu() -> Check {
    let mut r = rng(41);
    let mut worst: f64 = 0.0;
    let cfg = FitConfig {
        hidden1: 4,
        hidden2: 4,
        ..FitConfig::desk()
    };
    for t in 0..50 {
        let n = r.random_range(2..=12);
        let g = random_graph(&mut r, n, 0.4);
        let mut st = AdmmState::initial(&g, 4, &cfg).unwrap();
        st.mu = uniform_vec(&mut r, st.mu.len(), -2.0, 2.0);
        st.nu = uniform_vec(&mut r, st.nu.len(), -1.0, 1.0);
        st.w = uniform_vec(&mut r, st.w.len(), -1.0, 1.0);
        let gamma = r.random_range(0.05..3.0);
        for i in 0..n {
            let post = uniform_vec(&mut r, 3, -2.0, 2.0);
            let mu_i = update_mu(i, &post, &st, &g, gamma);
            let res = mu_stationarity(i, &mu_i, &post, &st, &g, gamma);
            worst = worst.max(res);
            if res > 1e-12 {
                return Err(format!("state {t}, node {i}: stationarity residual {res:.2e}"));
            }
        }
    }

    let g = random_graph(&mut r, 10, 0.5);
    let rows: Vec<Vec<f64>> = (0..10).map(|_| uniform_vec(&mut r, 6, -1.0, 1.0)).collect();
    let data = NodeSeries::from_rows(&rows).unwrap();
    let cfg = FitConfig {
        lambda: 0.0,
        admm_iters: 1,
        adam_iters: 2,
        hidden1: 8,
        hidden2: 8,
        langevin: LangevinConfig {
            n_samples: 10,
            mcmc_steps: 5,
            ..LangevinConfig::default()
        },
        ..FitConfig::desk()
    };
    let res = fit(&g, &data, &cfg).map_err(|e| e.to_string())?;
    if let Some(v) = res.state.w.iter().find(|v| **v != 0.0) {
        return Err(format!("lambda = 0 left a dual entry {v:e}"));
    }
    Ok(format!(
        "worst stationarity residual {worst:.1e}; {} duals exactly zero at lambda = 0",
        res.state.w.len()
    ))
}

/// Stationary AR(1) start variance and VAR(1) innovation correlation.
pub fn generator_statistics() -> Check {
    let draws = 20_000;
    let labels = vec![0usize; draws];
    let ar = gen_ar_series(&labels, &[0.7], &[0.5], &[1.0], 1, 9).map_err(|e| e.to_string())?;
    let first: Vec<f64> = ar.rows().map(|row| row[0]).collect();
    let (_, sd) = mean_and_sd(&first);
    let target = 1.0 / (1.0 - 0.25);
    let rel = (sd * sd - target).abs() / target;
    if rel > 0.05 {
        return Err(format!("AR start variance {:.4}, expected {target:.4}", sd * sd));
    }

    // innovations recovered from the recursion
    let labels = [0usize, 0, 0, 1, 1];
    let means = [-1.0, 1.0];
    let (phi, n) = (0.5, draws + 1);
    let var = gen_var_series(&labels, &means, phi, 0.3, n, 100, 9).map_err(|e| e.to_string())?;
    let xi = |i: usize| -> Vec<f64> {
        let b = means[labels[i]];
        let row = var.row(i);
        (1..n).map(|t| row[t] - b - phi * (row[t - 1] - b)).collect()
    };
    let within = correlation(&xi(0), &xi(1));
    let within2 = correlation(&xi(3), &xi(4));
    let across = correlation(&xi(0), &xi(3));
    for (what, v, want) in [("within", within, 0.3), ("within", within2, 0.3), ("across", across, 0.0)] {
        if (v - want).abs() > 0.03 {
            return Err(format!("{what}-cluster innovation correlation {v:.4}, expected {want}"));
        }
    }
    Ok(format!(
        "AR start variance {:.4} (target {target:.4}); innovation correlation within {within:.3}/{within2:.3}, across {across:.3}",
        sd * sd
    ))
}
