//! One runner per experiment kind. Each returns its result table and the
//! half-open range of stream ids it consumed under the run seed.

use rand_distr::Distribution;
use rayon::prelude::*;

use crate::analytics::{
    bertoin_closed_forms, bertoin_mc_grid, conditional_laplace, contraction_routes, r_law_fixed_point_route, second_moment,
    solve_fixed_point, solve_r_law_root, LaplaceArgs, Tilted,
};
use crate::analytics::bertoin::CHUNK;
use crate::cascade::{Cascade, CascadeParams};
use crate::mechanism::{BranchingMechanism, StableMechanism, TiltedMechanism};
use crate::replicates::{replicate_totals, run_replicates, LaplacePoint, ReplicatePlan};
use crate::rng::RngStream;
use crate::samplers::{stable_fractional_moment, FragmentSampler, NodeSampler, PositiveStable};
use crate::special::gamma;
use crate::stats::{fit_line, poisson_chi_square, Moments};

use super::config::Resolved;
use super::output::{Cell, Table};
use super::ExpError;

pub type Streams = (u64, u64);

fn tilted(alpha: f64, theta: f64) -> Result<Tilted<f64>, ExpError> {
    Ok(TiltedMechanism::new(StableMechanism::new(alpha)?, theta)?)
}

fn build_cascade(r: &Resolved, eps_min: f64) -> Result<Cascade, ExpError> {
    let mut p = CascadeParams::new(r.alpha, r.theta, r.s0)?;
    p.fragment_cutoff = r.fragment_cutoff.unwrap_or(eps_min / 100.0);
    if let Some(c) = r.node_cutoff {
        p.node_cutoff = c;
    }
    p.k_max = r.k_max;
    p.mass_tolerance = r.mass_tolerance * r.s0;
    if r.sigma_cap.is_some() {
        p.sigma_cap = r.sigma_cap;
    }
    Ok(Cascade::new(p)?)
}

fn z(est: f64, se: f64, oracle: f64) -> f64 {
    (est - oracle) / se
}

fn seeds(r: &Resolved, s: Streams) -> Vec<Cell> {
    vec![r.seed.into(), s.0.into(), s.1.into()]
}

fn log_slope(eps: &[f64], d: &[f64]) -> (f64, f64) {
    if d.iter().any(|&v| !(v > 0.0)) {
        return (f64::NAN, f64::NAN);
    }
    let lx: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = d.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly).map_or((f64::NAN, f64::NAN), |f| (f.slope, f.slope_stderr))
}

pub fn convergence(r: &Resolved) -> Result<(Table, Streams), ExpError> {
    let t = tilted(r.alpha, r.theta)?;
    let base = *t.base();
    let cascade = build_cascade(r, r.eps_grid[0])?;
    let mut plan = ReplicatePlan::new(r.eps_grid.clone(), r.beta);
    plan.lambda = r.lambda;
    let s = run_replicates(&cascade, &plan, r.replicates, r.seed)?;
    let streams = (0, r.replicates);
    let (l1, l2) = r.lambda;
    let mut oracle = Vec::new();
    for &eps in &r.eps_grid {
        let (tail, small) = (base.pi_star_tail(eps)?, base.phi_small_mass(eps)?);
        let at = |a: f64, b: f64| -> Result<f64, ExpError> {
            let args = LaplaceArgs::new(a / tail, b / small, -(a + b), r.beta, eps)?;
            Ok(second_moment(&t, &args, r.s0)?.conditional)
        };
        oracle.push([at(1.0, 0.0)?, at(0.0, 1.0)?, at(l1, l2)?]);
    }
    let col = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..r.eps_grid.len()).map(f).collect() };
    let d_n = col(&|i| s.per_eps[i].d_n.mean());
    let d_m = col(&|i| s.per_eps[i].d_m.mean());
    let d_mix = col(&|i| s.per_eps[i].d_mix.mean());
    let slopes = [
        log_slope(&r.eps_grid, &d_n),
        log_slope(&r.eps_grid, &d_m),
        log_slope(&r.eps_grid, &d_mix),
        log_slope(&r.eps_grid, &col(&|i| oracle[i][0])),
        log_slope(&r.eps_grid, &col(&|i| oracle[i][1])),
    ];
    let mut table = Table::new(&[
        "eps", "seed", "stream_first", "stream_end", "replicates", "n_scaled_mean", "n_scaled_se", "m_scaled_mean",
        "m_scaled_se", "r_mean", "r_se", "ratio_n_over_r", "d_n", "d_n_se", "d_n_oracle", "d_n_z", "d_m", "d_m_se",
        "d_m_oracle", "d_m_z", "d_mix", "d_mix_se", "d_mix_oracle", "d_mix_z", "count_gap", "count_gap_se",
        "count_rel_error", "slope_d_n", "slope_d_n_se", "slope_d_m", "slope_d_m_se", "slope_d_mix", "slope_d_mix_se",
        "slope_d_n_oracle", "slope_d_m_oracle", "expected_slope", "kmax_hits", "cap_hits", "identity_failures",
        "fragment_compensation_mean",
    ]);
    for (i, e) in s.per_eps.iter().enumerate() {
        let mut row: Vec<Cell> = vec![e.eps.into()];
        row.extend(seeds(r, streams));
        row.push(s.replicates.into());
        for m in [&e.n_scaled, &e.m_scaled, &s.r] {
            row.push(m.mean().into());
            row.push(m.stderr().into());
        }
        row.push((e.n_scaled.mean() / s.r.mean()).into());
        for (m, o) in [(&e.d_n, oracle[i][0]), (&e.d_m, oracle[i][1]), (&e.d_mix, oracle[i][2])] {
            row.extend([m.mean().into(), m.stderr().into(), o.into(), z(m.mean(), m.stderr(), o).into()]);
        }
        row.extend([e.count_gap.mean().into(), e.count_gap.stderr().into(), (e.count_gap.mean() / s.r.mean()).into()]);
        for (sl, se) in &slopes[..3] {
            row.push((*sl).into());
            row.push((*se).into());
        }
        row.push(slopes[3].0.into());
        row.push(slopes[4].0.into());
        row.push((1.0 / r.alpha).into());
        row.extend([s.kmax_hits.into(), s.cap_hits.into(), s.identity_failures.into(), s.fragment_compensation.mean().into()]);
        table.push(row);
    }
    Ok((table, streams))
}

pub fn laplace_xval(r: &Resolved) -> Result<(Table, Streams), ExpError> {
    let t = tilted(r.alpha, r.theta)?;
    let cascade = build_cascade(r, r.eps)?;
    let mut plan = ReplicatePlan::new(vec![r.eps], r.beta);
    for &x in &r.x_grid {
        for &y in &r.y_grid {
            for &gamma in &r.gamma_grid {
                plan.laplace.push(LaplacePoint { x, y, gamma, eps: r.eps });
            }
        }
    }
    let s = run_replicates(&cascade, &plan, r.replicates, r.seed)?;
    let streams = (0, r.replicates);
    let mut table = Table::new(&[
        "x", "y", "gamma", "eps", "beta", "seed", "stream_first", "stream_end", "replicates", "mc_mean", "mc_se",
        "oracle", "z", "flagged", "c_prime", "fp_iterations", "sm_mc", "sm_se", "sm_oracle", "sm_z", "error",
    ]);
    for l in &s.laplace {
        let p = l.point.expect("laplace summaries carry their point");
        let mut row: Vec<Cell> = vec![p.x.into(), p.y.into(), p.gamma.into(), p.eps.into(), r.beta.into()];
        row.extend(seeds(r, streams));
        row.push(s.replicates.into());
        let (mean, se) = (l.laplace.mean(), l.laplace.stderr());
        let args = LaplaceArgs::new(p.x, p.y, p.gamma, r.beta, p.eps)?;
        let fp = solve_fixed_point(&t, &args);
        let sm = second_moment(&t, &args, r.s0);
        let (oracle, c_prime, iters, err) = match &fp {
            Ok(f) => ((-(r.beta + f.c_prime) * r.s0).exp(), f.c_prime, f.iterations as u64, String::new()),
            Err(e) => (f64::NAN, f64::NAN, 0, e.to_string()),
        };
        let zl = z(mean, se, oracle);
        row.extend([mean.into(), se.into(), oracle.into(), zl.into(), (zl.abs() > 4.0).into()]);
        row.extend([c_prime.into(), iters.into()]);
        let (sm_mean, sm_se) = (l.second_moment.mean(), l.second_moment.stderr());
        let (sm_oracle, err) = match sm {
            Ok(m) => (m.conditional, err),
            Err(e) if err.is_empty() => (f64::NAN, e.to_string()),
            Err(_) => (f64::NAN, err),
        };
        row.extend([sm_mean.into(), sm_se.into(), sm_oracle.into(), z(sm_mean, sm_se, sm_oracle).into(), err.into()]);
        table.push(row);
    }
    Ok((table, streams))
}

pub fn second_moment_run(r: &Resolved) -> Result<(Table, Streams), ExpError> {
    let t = tilted(r.alpha, r.theta)?;
    let cascade = build_cascade(r, r.eps)?;
    let mut plan = ReplicatePlan::new(vec![r.eps], r.beta);
    plan.laplace.push(LaplacePoint { x: r.x, y: r.y, gamma: r.gamma, eps: r.eps });
    let args = LaplaceArgs::new(r.x, r.y, r.gamma, r.beta, r.eps)?;
    let m = second_moment(&t, &args, r.s0)?;
    let (quad, closed) = contraction_routes(&t, r.beta, r.eps)?;
    let lap = conditional_laplace(&t, &args, r.s0)?;
    let s = run_replicates(&cascade, &plan, r.replicates, r.seed)?;
    let streams = (0, r.replicates);
    let mut table = Table::new(&[
        "x", "y", "gamma", "eps", "beta", "s0", "seed", "stream_first", "stream_end", "replicates", "mc_mean", "mc_se",
        "oracle", "z", "unconditional_oracle", "h_beta", "c0", "c1", "c2", "a0", "a1", "a2", "contraction_quadrature",
        "contraction_closed_form", "laplace_mc", "laplace_se", "laplace_oracle", "laplace_z",
    ]);
    let l = &s.laplace[0];
    let mut row: Vec<Cell> = vec![r.x.into(), r.y.into(), r.gamma.into(), r.eps.into(), r.beta.into(), r.s0.into()];
    row.extend(seeds(r, streams));
    row.push(s.replicates.into());
    let (mean, se) = (l.second_moment.mean(), l.second_moment.stderr());
    row.extend([mean.into(), se.into(), m.conditional.into(), z(mean, se, m.conditional).into(), m.unconditional.into()]);
    let c = m.coeffs;
    for v in [c.h_beta, c.c0, c.c1, c.c2, c.a0, c.a1, c.a2, quad, closed] {
        row.push(v.into());
    }
    let (lm, ls) = (l.laplace.mean(), l.laplace.stderr());
    row.extend([lm.into(), ls.into(), lap.into(), z(lm, ls, lap).into()]);
    table.push(row);
    Ok((table, streams))
}

pub fn r_law(r: &Resolved) -> Result<(Table, Streams), ExpError> {
    let t = tilted(r.alpha, r.theta)?;
    let mut rr = r.clone();
    let min_beta = r.beta_grid.iter().copied().filter(|&b| b > 0.0).fold(f64::INFINITY, f64::min);
    if r.sigma_cap.is_none() || r.beta_grid.iter().any(|&b| b != r.beta) {
        rr.sigma_cap = min_beta.is_finite().then(|| (50.0 / min_beta).max(2.0 * r.s0));
    }
    let cascade = build_cascade(&rr, r.eps)?;
    let totals = replicate_totals(&cascade, r.replicates, r.seed)?;
    let streams = (0, r.replicates);
    let mut table = Table::new(&[
        "beta", "gamma", "v_bisection", "residual", "v_fixed_point", "c_fixed_point", "route_diff", "psi_inverse_beta",
        "seed", "stream_first", "stream_end", "replicates", "mc_mean", "mc_se", "oracle", "z", "error",
    ]);
    for &beta in &r.beta_grid {
        for &gamma in &r.gamma_grid {
            let a = solve_r_law_root(&t, beta, gamma);
            let b = r_law_fixed_point_route(&t, beta, gamma);
            let mut err = Vec::new();
            let (v, res) = match &a {
                Ok(x) => (x.v, x.residual),
                Err(e) => {
                    err.push(format!("bisection: {e}"));
                    (f64::NAN, f64::NAN)
                }
            };
            let (vf, cf) = match &b {
                Ok(x) => *x,
                Err(e) => {
                    err.push(format!("fixed point: {e}"));
                    (f64::NAN, f64::NAN)
                }
            };
            let mut row: Vec<Cell> = vec![beta.into(), gamma.into(), v.into(), res.into(), vf.into(), cf.into()];
            row.push((v - vf).abs().into());
            row.push(t.base().psi_inverse(beta)?.into());
            row.extend(seeds(r, streams));
            row.push(r.replicates.into());
            let mc = Moments::from_slice(&totals.iter().map(|(s, rt)| (-(gamma * rt + beta * s)).exp()).collect::<Vec<_>>());
            let oracle = if v.is_finite() { (-t.psi(v)? * r.s0).exp() } else { f64::NAN };
            row.extend([mc.mean().into(), mc.stderr().into(), oracle.into(), mc.z_score(oracle).into()]);
            row.push(err.join("; ").into());
            table.push(row);
        }
    }
    Ok((table, streams))
}

pub fn bertoin(r: &Resolved) -> Result<(Table, Streams), ExpError> {
    let chunks = r.draws.div_ceil(CHUNK);
    let streams = (0, chunks);
    let mut table = Table::new(&[
        "alpha", "eps", "quantity", "seed", "stream_first", "stream_end", "draws", "estimate", "stderr", "oracle", "z",
        "brackets", "error",
    ]);
    for &alpha in &r.alpha_grid {
        let est = bertoin_mc_grid(alpha, &r.eps_grid, r.draws, r.seed)?;
        let g1 = gamma(1.0 + 1.0 / alpha);
        for e in est {
            let eps = e.eps;
            let cf = bertoin_closed_forms(alpha, eps)?;
            let q = eps / (1.0 - eps);
            let p = 2.0 - 2.0 / alpha;
            let ca = cf.c_alpha;
            let lower_exact = ca * (1.0 - eps) / (1.0 + 2.0 * eps) * q.powf(p);
            let upper_exact = ca * (eps / (1.0 - 2.0 * eps)).powf(p);
            let diag_exact = gamma(2.0 - alpha) / gamma(1.0 / alpha) * q.powf(2.0 - 1.0 / alpha)
                / ((2.0 * alpha - 1.0) * gamma(1.0 - 1.0 / alpha));
            let target = cf.cross_term_asymptotic;
            let bracket = e.g_lower.mean <= target && target <= e.g_upper.mean;
            let c = cf.dislocation_constant;
            let f2 = cf.f_b * cf.f_b;
            let limit = c * ca * g1 * g1;
            let rows = [
                ("f_b", e.f_hat.mean, e.f_hat.stderr, cf.f_b, None),
                ("phi_b", e.phi_hat.mean, e.phi_hat.stderr, cf.phi_b, None),
                ("g_lower", e.g_lower.mean, e.g_lower.stderr, lower_exact, Some(bracket)),
                ("g_upper", e.g_upper.mean, e.g_upper.stderr, upper_exact, Some(bracket)),
                ("g_diagonal", e.g_diagonal.mean, e.g_diagonal.stderr, diag_exact, None),
                ("g_cross_asymptotic", f64::NAN, f64::NAN, target, Some(bracket)),
                ("g_b_over_f_b_sq_lower", c * e.g_lower.mean / f2, c * e.g_lower.stderr / f2, limit, None),
                (
                    "g_b_over_f_b_sq_upper",
                    c * (e.g_upper.mean + e.g_diagonal.mean) / f2,
                    c * (e.g_upper.stderr + e.g_diagonal.stderr) / f2,
                    limit,
                    None,
                ),
            ];
            for (name, est, se, oracle, br) in rows {
                let mut row: Vec<Cell> = vec![alpha.into(), eps.into(), name.into()];
                row.extend(seeds(r, streams));
                row.push(e.draws.into());
                row.extend([est.into(), se.into(), oracle.into(), z(est, se, oracle).into()]);
                row.push(br.map_or_else(|| "".into(), Cell::Bool));
                row.push("".into());
                table.push(row);
            }
        }
    }
    Ok((table, streams))
}

/// Moments of `S^b` over `n` draws, chunked into streams like the Bertoin runs.
fn stable_power_moments(alpha: f64, bs: &[f64], n: u64, seed: u64) -> Result<Vec<Moments>, ExpError> {
    let law = PositiveStable::new(1.0 / alpha)?;
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, i);
            let mut acc = vec![Moments::new(); bs.len()];
            for _ in 0..CHUNK.min(n - i * CHUNK) {
                let s = law.sample(&mut rng);
                for (m, &b) in acc.iter_mut().zip(bs) {
                    m.push(s.powf(b));
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Moments::new(); bs.len()];
    for p in &parts {
        for (t, m) in total.iter_mut().zip(p) {
            t.merge(m);
        }
    }
    Ok(total)
}

pub fn moments(r: &Resolved) -> Result<(Table, Streams), ExpError> {
    let streams = (0, r.draws.div_ceil(CHUNK));
    let mut table = Table::new(&[
        "alpha", "b", "seed", "stream_first", "stream_end", "draws", "estimate", "stderr", "oracle", "z", "error",
    ]);
    for &alpha in &r.alpha_grid {
        let mut bs: Vec<f64> = r.b_grid.clone();
        bs.extend(r.b_over_alpha_grid.iter().map(|v| v / alpha));
        let valid: Vec<f64> = bs.iter().copied().filter(|&b| stable_fractional_moment(alpha, b).is_ok()).collect();
        let ms = stable_power_moments(alpha, &valid, r.draws, r.seed)?;
        for &b in &bs {
            let mut row: Vec<Cell> = vec![alpha.into(), b.into()];
            row.extend(seeds(r, streams));
            row.push(r.draws.into());
            match stable_fractional_moment(alpha, b) {
                Ok(oracle) => {
                    let m = ms[valid.iter().position(|&v| v == b).expect("valid exponent")];
                    row.extend([m.mean().into(), m.stderr().into(), oracle.into(), m.z_score(oracle).into(), "".into()]);
                }
                Err(e) => {
                    row.extend([f64::NAN.into(), f64::NAN.into(), f64::INFINITY.into(), f64::NAN.into(), e.to_string().into()]);
                }
            }
            table.push(row);
        }
    }
    Ok((table, streams))
}

pub fn sampler_gof(r: &Resolved) -> Result<(Table, Streams), ExpError> {
    let t = tilted(r.alpha, r.theta)?;
    let n = r.replicates;
    let frag = FragmentSampler::new(&t, r.cutoff)?;
    let node = NodeSampler::new(&t, r.cutoff)?;
    let run = |offset: u64, f: &(dyn Fn(&mut RngStream) -> crate::Result<(u64, f64)> + Sync)| -> Result<Vec<(u64, f64)>, ExpError> {
        Ok((0..n).into_par_iter().map(|i| f(&mut RngStream::new(r.seed, offset + i))).collect::<crate::Result<_>>()?)
    };
    let fr = run(0, &|rng| frag.sample(r.rate, rng).map(|p| (p.count as u64, p.total())))?;
    let nd = run(n, &|rng| node.sample(r.rate, rng).map(|p| (p.count as u64, p.total())))?;
    let stable_streams = r.draws.div_ceil(CHUNK);
    let lambdas = [0.5, 1.0, 2.0];
    let law = PositiveStable::new(1.0 / r.alpha)?;
    let parts: Vec<Vec<Moments>> = (0..stable_streams)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(r.seed, 2 * n + i);
            let mut acc = vec![Moments::new(); lambdas.len()];
            for _ in 0..CHUNK.min(r.draws - i * CHUNK) {
                let s = law.sample(&mut rng);
                for (m, l) in acc.iter_mut().zip(lambdas) {
                    m.push((-l * s).exp());
                }
            }
            acc
        })
        .collect();
    let mut lap = vec![Moments::new(); lambdas.len()];
    for p in &parts {
        for (a, m) in lap.iter_mut().zip(p) {
            a.merge(m);
        }
    }
    let mut table = Table::new(&[
        "test", "alpha", "theta", "rate", "cutoff", "seed", "stream_first", "stream_end", "samples", "estimate",
        "stderr", "oracle", "z", "chi2", "dof", "p_value", "error",
    ]);
    let psi_p = t.base().psi_prime(r.theta)?;
    let mut emit = |name: String, streams: Streams, m: &Moments, oracle: f64, gof: Option<(f64, u64, f64)>, err: String| {
        let mut row: Vec<Cell> = vec![name.into(), r.alpha.into(), r.theta.into(), r.rate.into(), r.cutoff.into()];
        row.extend(seeds(r, streams));
        row.push(m.count().into());
        row.extend([m.mean().into(), m.stderr().into(), oracle.into(), m.z_score(oracle).into()]);
        let (c, d, p) = gof.unwrap_or((f64::NAN, 0, f64::NAN));
        row.extend([c.into(), d.into(), p.into(), err.into()]);
        table.push(row);
    };
    for (name, data, mean_count, mass, streams) in [
        ("fragment", &fr, frag.mean_count_per_rate(), 1.0 / psi_p, (0, n)),
        ("node", &nd, node.mean_count_per_rate(), psi_p, (n, 2 * n)),
    ] {
        let counts: Vec<u64> = data.iter().map(|d| d.0).collect();
        let cm = Moments::from_slice(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>());
        let expected = r.rate * mean_count;
        let (gof, err) = if expected > 0.0 {
            match poisson_chi_square(&counts, expected) {
                Ok(g) => (Some((g.statistic, g.dof as u64, g.p_value)), String::new()),
                Err(e) => (None, e.to_string()),
            }
        } else {
            (None, "null intensity".to_string())
        };
        emit(format!("{name}_count"), streams, &cm, expected, gof, err);
        let mm = Moments::from_slice(&data.iter().map(|d| d.1).collect::<Vec<_>>());
        emit(format!("{name}_mass"), streams, &mm, r.rate * mass, None, String::new());
    }
    for (l, m) in lambdas.iter().zip(&lap) {
        let oracle = (-l.powf(1.0 / r.alpha)).exp();
        emit(format!("stable_laplace_{l}"), (2 * n, 2 * n + stable_streams), m, oracle, None, String::new());
    }
    Ok((table, (0, 2 * n + stable_streams)))
}
