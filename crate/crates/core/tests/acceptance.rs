//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use fima::deconv::nonblind::normal_equation_residual;
use fima::deconv::{
    af_nonblind, convolve_circular, convolve_circular_direct, make_synthetic, solve_blind_observed, solve_nonblind,
    BlindOptions, CircularConvolution, HaarWavelet, ImageField, KernelField, KernelKind, ModuleChoice,
    NonblindOptions,
};
use fima::metrics::{kernel_similarity, psnr};
use fima::modules::{
    module_identity, module_pg_step, FnModule, Module, ModuleFault, ModulePair, RecursiveFilter, TvDenoiser,
};
use fima::problem::{subdiff_error, LeastSquares, MatrixOperator};
use fima::prox::{project_simplex, prox_l0, prox_l1, prox_lp_half};
use fima::solvers::{solve_baseline, solve_efima, solve_ifima, BaselineVariant, ToleranceRule};
use fima::trace::{IterateTrace, Policy, StopReason};
use fima::{CompositeProblem, PenaltyKind, ScalarPenalty, Scheme, SmoothTerm, SolverConfig};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn le_rel(a: f64, b: f64, rel: f64) -> bool {
    a <= b + rel * b.abs().max(1.0)
}

// ---------------------------------------------------------------- 1-3

struct Run {
    label: String,
    scheme: Scheme,
    trace: IterateTrace,
}

fn descent_runs() -> Result<Vec<Run>, String> {
    let mut runs = Vec::new();
    for i in 0..20u64 {
        let kind = if i % 2 == 0 {
            KernelKind::Gaussian { size: 9, sigma: 1.6 }
        } else {
            KernelKind::Motion { size: 9 }
        };
        let inst = make_synthetic(100 + i, 64, kind, 0.01).map_err(|e| e.to_string())?;
        let penalty = if i % 2 == 0 { PenaltyKind::L0 } else { PenaltyKind::L1 };
        let (mname, modules) = match (i / 2) % 3 {
            0 => ("tv", ModuleChoice::Denoiser(Arc::new(TvDenoiser::new(0.01, 20)))),
            1 => ("rf", ModuleChoice::Denoiser(Arc::new(RecursiveFilter::new(0.7)))),
            _ => ("identity", ModuleChoice::Identity),
        };
        let tau = if (i / 6) % 2 == 0 { 1.0 } else { 1e-3 };
        let opts = NonblindOptions { penalty, lambda: 1e-3, tau, ..Default::default() };
        for scheme in [Scheme::Efima, Scheme::Ifima] {
            let out = solve_nonblind(&inst.y, &inst.b_true, scheme, &modules, &opts).map_err(|e| e.to_string())?;
            runs.push(Run {
                label: format!("seed {} {} {mname} tau {tau:e} {}", 100 + i, penalty.name(), scheme.name()),
                scheme,
                trace: out.trace,
            });
        }
    }
    Ok(runs)
}

fn criterion_1(runs: &[Run]) -> Outcome {
    let mut rows = 0;
    for run in runs {
        for r in &run.trace.records {
            let (x, v, next) = (r.row.objective, r.diag.monitor_objective, r.diag.next_objective);
            check(le_rel(next, v, 1e-10) && le_rel(v, x, 1e-10), || {
                format!("{}: k {} Psi(x+) {next:e} Psi(v) {v:e} Psi(x) {x:e}", run.label, r.row.k)
            })?;
            rows += 1;
        }
    }
    let accepts: usize = runs.iter().map(|r| r.trace.accept_count()).sum();
    Ok(format!("{} runs, {rows} iterations, {accepts} module accepts", runs.len()))
}

fn criterion_2(runs: &[Run]) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for run in runs {
        for r in &run.trace.records {
            let alpha = 1.0 / (2.0 * r.diag.gamma) - r.diag.lipschitz / 2.0;
            check(alpha > 0.0, || format!("{}: alpha {alpha} not positive", run.label))?;
            let bound = r.diag.monitor_objective - alpha * r.diag.refine_step_sq + 1e-8;
            worst = worst.max(r.diag.next_objective - bound + 1e-8);
            check(r.diag.next_objective <= bound, || {
                format!("{}: k {} Psi(x+) {:e} > bound {bound:e}", run.label, r.row.k, r.diag.next_objective)
            })?;
        }
    }
    Ok(format!("max Psi(x+) - (Psi(v) - alpha |x+ - v|^2) = {worst:.3e}"))
}

fn criterion_3(runs: &[Run]) -> Outcome {
    let mut accepts = 0;
    for run in runs.iter().filter(|r| r.scheme == Scheme::Ifima) {
        for r in run.trace.records.iter().filter(|r| r.row.policy == Policy::Accept) {
            let (mu, c) = (r.diag.mu.unwrap(), r.diag.c.unwrap());
            let cand = r.diag.candidate_objective.unwrap();
            let bound = r.row.objective - (mu / 2.0 - c) * r.diag.candidate_dist_sq.unwrap() + 1e-8;
            check(cand <= bound, || format!("{}: k {} Psi(u~) {cand:e} > {bound:e}", run.label, r.row.k))?;
            accepts += 1;
        }
    }
    check(accepts > 0, || "no iFIMA accept iterations to check".into())?;
    Ok(format!("{accepts} iFIMA accept iterations"))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..12);
        let m = rng.random_range(n..2 * n + 4);
        let a = Array2::from_shape_fn((m, n), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(m, |_| rng.random_range(-1.0..1.0));
        let f = LeastSquares::new(Arc::new(MatrixOperator(a)), y).unwrap();
        let rand_vec = |rng: &mut ChaCha8Rng| Array1::from_shape_fn(n, |_| rng.random_range(-2.0..2.0));
        let (u, x) = (rand_vec(&mut rng), rand_vec(&mut rng));
        let gamma = rng.random_range(0.01..0.5);
        let mu = rng.random_range(0.1..5.0);
        let u_tilde = &u - &((f.gradient(&u) + (&u - &x) * mu) * gamma);
        let cert = subdiff_error(&f, &u, &u_tilde, &x, mu, gamma, 1.0).map_err(|e| e.to_string())?;
        let direct = f.gradient(&u_tilde) + (&u_tilde - &x) * mu;
        let err = (&cert.d - &direct).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = direct.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        worst = worst.max(err / scale);
        check(err <= 1e-10 * scale, || format!("d differs by {err:e}"))?;
        check((cert.norm_d - cert.d.dot(&cert.d).sqrt()).abs() <= 1e-12 * cert.norm_d.max(1.0), || {
            "norm_d mismatch".into()
        })?;
    }
    Ok(format!("100 instances, max relative deviation {worst:.2e}"))
}

// ---------------------------------------------------------------- 5

struct Shift;

impl Module for Shift {
    fn label(&self) -> String {
        "shift".into()
    }
    fn apply(&self, x: &Array1<f64>) -> Result<Array1<f64>, ModuleFault> {
        Ok(x + 1e3)
    }
}

fn bits(trace: &IterateTrace) -> Vec<(u64, u64, u64)> {
    trace
        .records
        .iter()
        .map(|r| (r.row.objective.to_bits(), r.row.iter_error.to_bits(), r.row.recon_error.to_bits()))
        .collect()
}

fn criterion_5() -> Outcome {
    let failing = FnModule::new("fails", |_: &Array1<f64>| Err(ModuleFault::Recoverable("always".into())));
    let rejected = ModulePair::new(Arc::new(Shift), Arc::new(fima::modules::Identity));
    let failed = ModulePair::new(Arc::new(failing), Arc::new(fima::modules::Identity));
    for i in 0..10u64 {
        let inst = make_synthetic(500 + i, 32, KernelKind::Gaussian { size: 5, sigma: 1.0 }, 0.01).unwrap();
        let penalty = if i % 2 == 0 { PenaltyKind::L0 } else { PenaltyKind::L1 };
        let (problem, op) =
            fima::deconv::nonblind::nonblind_problem(&inst.y, &inst.b_true, penalty, 1e-3, 2).map_err(|e| e.to_string())?;
        let x0 = Array1::from_iter(op.wavelet().wavelet_forward(inst.y.pixels()));
        let cfg = SolverConfig::default().with_max_iters(40).with_tol(0.0);
        let (x_pg, pg) = solve_baseline(&problem, &x0, &cfg, &BaselineVariant::Pg).unwrap();
        let (x_id, id) = solve_efima(&problem, &module_identity(), &x0, &cfg).unwrap();
        check(pg.rows().iter().zip(id.rows()).all(|(a, b)| a.k == b.k && a.policy == b.policy), || {
            format!("seed {}: policy columns differ", 500 + i)
        })?;
        check(bits(&pg) == bits(&id) && x_pg.iter().zip(&x_id).all(|(a, b)| a.to_bits() == b.to_bits()), || {
            format!("seed {}: identity-module trajectory differs from PG", 500 + i)
        })?;
        for pair in [&rejected, &failed] {
            let (x_r, tr) = solve_efima(&problem, pair, &x0, &cfg).unwrap();
            check(tr.accept_count() == 0, || format!("module `{}` was accepted", pair.label))?;
            check(bits(&pg) == bits(&tr) && x_pg.iter().zip(&x_r).all(|(a, b)| a.to_bits() == b.to_bits()), || {
                format!("seed {}: rejected-module trajectory differs from PG", 500 + i)
            })?;
        }
    }
    Ok("10 instances, identity / rejected / failing modules bitwise equal to PG".into())
}

// ---------------------------------------------------------------- 6

fn coordinate_descent(a: &Array2<f64>, y: &Array1<f64>, lambda: f64) -> Array1<f64> {
    // min |y - A x|^2 + lambda |x|_1
    let n = a.ncols();
    let mut x = Array1::<f64>::zeros(n);
    let mut r = y.clone();
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).dot(&a.column(j))).collect();
    for _ in 0..100_000 {
        let mut delta = 0.0f64;
        for j in 0..n {
            let col = a.column(j);
            let rho = col.dot(&r) + norms[j] * x[j];
            let new = rho.signum() * (rho.abs() - lambda / 2.0).max(0.0) / norms[j];
            let d = new - x[j];
            if d != 0.0 {
                r.scaled_add(-d, &col);
                x[j] = new;
            }
            delta = delta.max(d.abs());
        }
        if delta <= 1e-12 {
            break;
        }
    }
    x
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (m, n, lambda) = (40, 15, 0.3);
    let a = Array2::from_shape_fn((m, n), |_| rng.random_range(-1.0..1.0) / (m as f64).sqrt());
    let y = Array1::from_shape_fn(m, |_| rng.random_range(-1.0..1.0));
    let oracle = coordinate_descent(&a, &y, lambda);
    let smooth = Arc::new(LeastSquares::new(Arc::new(MatrixOperator(a)), y).unwrap());
    let x0 = Array1::zeros(n);
    let problem = CompositeProblem::new(smooth, Arc::new(ScalarPenalty::l1(lambda)), &x0).unwrap();
    let best = problem.objective(&oracle);
    let cfg = SolverConfig::default().with_max_iters(100_000).with_tol(1e-14);
    let gamma = 0.99 / problem.lipschitz();

    let runs: Vec<(&str, Array1<f64>)> = vec![
        ("pg", solve_baseline(&problem, &x0, &cfg, &BaselineVariant::Pg).unwrap().0),
        ("apg", solve_baseline(&problem, &x0, &cfg, &BaselineVariant::Apg).unwrap().0),
        ("mapg", solve_baseline(&problem, &x0, &cfg, &BaselineVariant::MonotoneApg).unwrap().0),
        ("efima/identity", solve_efima(&problem, &module_identity(), &x0, &cfg).unwrap().0),
        ("efima/pg-step", solve_efima(&problem, &module_pg_step(&problem, gamma), &x0, &cfg).unwrap().0),
        ("ifima/identity", solve_ifima(&problem, &module_identity(), &x0, &cfg).unwrap().0),
        ("ifima/pg-step", solve_ifima(&problem, &module_pg_step(&problem, gamma), &x0, &cfg).unwrap().0),
    ];
    let mut worst = (0.0f64, 0.0f64);
    for (name, x) in &runs {
        let fp = x - &problem.prox_gradient_step(x, gamma).unwrap();
        let res = fp.dot(&fp).sqrt();
        let gap = (problem.objective(x) - best).abs();
        worst = (worst.0.max(res), worst.1.max(gap));
        check(res <= 1e-6 && gap <= 1e-6, || format!("{name}: residual {res:e}, objective gap {gap:e}"))?;
    }
    Ok(format!("{} schemes, max residual {:.1e}, max gap {:.1e}", runs.len(), worst.0, worst.1))
}

// ---------------------------------------------------------------- 7

/// Golden-section refinement of a 1-D grid minimum.
fn grid_min(phi: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let steps = 20_000;
    let h = (hi - lo) / steps as f64;
    let (mut best, mut best_val) = (0.0, phi(0.0));
    for i in 0..=steps {
        let x = lo + i as f64 * h;
        let v = phi(x);
        if v < best_val {
            best = x;
            best_val = v;
        }
    }
    let (mut a, mut b) = (best - h, best + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if phi(c) < phi(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let refined = (a + b) / 2.0;
    if phi(refined) < best_val {
        refined
    } else {
        best
    }
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    type Prox = fn(&Array1<f64>, f64) -> fima::Result<Array1<f64>>;
    type Case = (&'static str, Prox, fn(f64) -> f64);
    let cases: [Case; 3] =
        [("l1", prox_l1, |x: f64| x.abs()), ("l0", prox_l0, |x: f64| (x != 0.0) as u8 as f64), ("l1/2", prox_lp_half, |x: f64| {
            x.abs().sqrt()
        })];
    let (mut worst, mut ties) = (0.0f64, 0);
    for (name, prox, pen) in cases {
        for _ in 0..1000 {
            let v: f64 = rng.random_range(-3.0..3.0);
            let theta: f64 = rng.random_range(0.01..2.0);
            let phi = |x: f64| theta * pen(x) + 0.5 * (x - v) * (x - v);
            let got = prox(&Array1::from(vec![v]), theta).map_err(|e| e.to_string())?[0];
            let oracle = grid_min(phi, -v.abs() - 1.0, v.abs() + 1.0);
            let err = (got - oracle).abs();
            // two global minimizers up to rounding (l0, l1/2 thresholds): either is correct
            let tie = err > 1e-5 && (phi(got) - phi(oracle)).abs() <= 1e-12;
            if tie {
                ties += 1;
            } else {
                worst = worst.max(err);
            }
            check(err <= 1e-5 || tie, || format!("{name}: v {v} theta {theta}: prox {got} oracle {oracle}"))?;
        }
    }

    let mut simplex_worst = 0.0f64;
    for _ in 0..200 {
        let v = Array1::from_shape_fn(3, |_| rng.random_range(-1.5..1.5));
        let p = project_simplex(&v).map_err(|e| e.to_string())?;
        let dist = |b: [f64; 3]| (0..3).map(|i| (b[i] - v[i]).powi(2)).sum::<f64>();
        let search = |center: [f64; 2], radius: f64, step: f64| {
            let mut best = ([0.0; 3], f64::INFINITY);
            let n = (2.0 * radius / step).round() as i64;
            for i in 0..=n {
                for j in 0..=n {
                    let b0 = center[0] - radius + i as f64 * step;
                    let b1 = center[1] - radius + j as f64 * step;
                    let b2 = 1.0 - b0 - b1;
                    if b0 < 0.0 || b1 < 0.0 || b2 < -1e-15 {
                        continue;
                    }
                    let b = [b0, b1, b2.max(0.0)];
                    let d = dist(b);
                    if d < best.1 {
                        best = (b, d);
                    }
                }
            }
            best.0
        };
        let coarse = search([0.5, 0.5], 0.5, 1e-2);
        let fine = search([coarse[0], coarse[1]], 2e-2, 5e-5);
        let err = (0..3).map(|i| (p[i] - fine[i]).abs()).fold(0.0, f64::max);
        simplex_worst = simplex_worst.max(err);
        check(err <= 2e-4, || format!("simplex: v {v} got {p} oracle {fine:?}"))?;
    }
    Ok(format!("3x1000 scalar draws (max err {worst:.1e}, {ties} ties), 200 simplex draws (max err {simplex_worst:.1e})"))
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut count = 0;
    for h in 8..=16 {
        for w in 8..=16 {
            let kh = 2 * rng.random_range(0..=(h - 1) / 2) + 1;
            let kw = 2 * rng.random_range(0..=(w - 1) / 2) + 1;
            let img = Array2::from_shape_fn((h, w), |_| rng.random_range(-1.0..1.0));
            let ker = Array2::from_shape_fn((kh, kw), |_| rng.random_range(-1.0..1.0));
            let fast = convolve_circular(&ImageField::new(img.clone()).unwrap(), &KernelField::new(ker.clone()).unwrap())
                .map_err(|e| e.to_string())?;
            let slow = convolve_circular_direct(&img, &ker);
            let err = (fast.pixels() - &slow).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            worst = worst.max(err);
            count += 1;
            check(err <= 1e-9, || format!("{h}x{w} with {kh}x{kw}: {err:e}"))?;
        }
    }
    let mut worst_res = 0.0f64;
    for i in 0..20u64 {
        let (h, w) = (8 * rng.random_range(2..5), 8 * rng.random_range(2..5));
        let y = ImageField::new(Array2::from_shape_fn((h, w), |_| rng.random_range(0.0..1.0))).unwrap();
        let x = Array2::from_shape_fn((h, w), |_| rng.random_range(-1.0..1.0));
        let kernel = KernelField::gaussian(2 * (i as usize % 4) + 3, 0.5 + 0.3 * i as f64).unwrap();
        let conv = CircularConvolution::new(&kernel, h, w).unwrap();
        let wav = HaarWavelet::fit(h, w, 3).unwrap();
        let tau = 10f64.powi(-(i as i32 % 5));
        let out = af_nonblind(&x, &y, &conv, tau, &wav).map_err(|e| e.to_string())?;
        let res = normal_equation_residual(&out, &x, &y, &conv, tau, &wav);
        worst_res = worst_res.max(res);
        check(res <= 1e-8, || format!("instance {i}: residual {res:e}"))?;
    }
    Ok(format!("{count} convolutions (max err {worst:.1e}), 20 normal-equation solves (max residual {worst_res:.1e})"))
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Outcome {
    let mut opts = NonblindOptions { penalty: PenaltyKind::L1, lambda: 1e-3, tau: 1.0, ..Default::default() };
    opts.solver = opts.solver.with_max_iters(1000).with_tol(1e-4);
    opts.solver.rules.tolerance = ToleranceRule::FractionOfMu(0.45);
    let tv = ModuleChoice::Denoiser(Arc::new(TvDenoiser::new(5e-4, 20)));
    let mut cells = Vec::new();
    for seed in 0..5u64 {
        let inst = make_synthetic(seed, 64, KernelKind::Gaussian { size: 9, sigma: 1.6 }, 0.01).unwrap();
        let pg = solve_nonblind(&inst.y, &inst.b_true, Scheme::Pg, &ModuleChoice::Identity, &opts).unwrap();
        let fi = solve_nonblind(&inst.y, &inst.b_true, Scheme::Ifima, &tv, &opts).unwrap();
        let (p_pg, p_fi) = (psnr(&pg.image, &inst.z_true, 1.0).unwrap(), psnr(&fi.image, &inst.z_true, 1.0).unwrap());
        let (i_pg, i_fi) = (pg.trace.iterations(), fi.trace.iterations());
        cells.push(format!("{i_fi}/{i_pg} it {p_fi:.2}/{p_pg:.2} dB"));
        check(pg.trace.stop == Some(StopReason::Tolerance) && fi.trace.stop == Some(StopReason::Tolerance), || {
            format!("seed {seed}: tolerance not reached ({:?}, {:?})", pg.trace.stop, fi.trace.stop)
        })?;
        check(i_fi < i_pg, || format!("seed {seed}: iFIMA {i_fi} iterations, PG {i_pg}"))?;
        check(p_fi >= p_pg - 0.1, || format!("seed {seed}: iFIMA {p_fi:.3} dB, PG {p_pg:.3} dB"))?;
    }
    Ok(format!("iFIMA/PG: {}", cells.join(", ")))
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Outcome {
    let opts = BlindOptions::default();
    let mut cells = Vec::new();
    for seed in 0..3u64 {
        let inst = make_synthetic(seed, 64, KernelKind::Motion { size: 11 }, 0.005).unwrap();
        let mut violation = None;
        let out = solve_blind_observed(&inst.y, None, &opts, &mut |s, k, n, blocks| {
            let b = &blocks[1];
            if violation.is_none() && ((b.sum() - 1.0).abs() > 1e-12 || b.iter().any(|v| *v < 0.0)) {
                violation = Some(format!("scale {s} sweep {k} block {n}: sum {}", b.sum()));
            }
        })
        .map_err(|e| e.to_string())?;
        check(violation.is_none(), || format!("seed {seed}: simplex violated at {}", violation.clone().unwrap()))?;
        check(out.kernel.is_on_simplex(1e-12), || format!("seed {seed}: final kernel off the simplex"))?;

        for (s, &start) in out.scale_starts.iter().enumerate() {
            let end = out.scale_starts.get(s + 1).copied().unwrap_or(out.trace.len());
            let recs = &out.trace.records[start..end];
            for pair in recs.windows(2) {
                check(le_rel(pair[1].row.objective, pair[0].row.objective, 1e-10), || {
                    format!("seed {seed} scale {s}: objective rose at sweep {}", pair[1].row.k)
                })?;
            }
            for r in recs {
                check(le_rel(r.diag.next_objective, r.row.objective, 1e-10), || {
                    format!("seed {seed} scale {s}: block {:?} update increased the objective", r.row.block)
                })?;
            }
        }
        let ks = kernel_similarity(&out.kernel, &inst.b_true).unwrap();
        let base = kernel_similarity(&KernelField::uniform(11).unwrap(), &inst.b_true).unwrap();
        cells.push(format!("{ks:.3} vs {base:.3}"));
        check(ks > base, || format!("seed {seed}: KS {ks:.4} <= uniform {base:.4}"))?;
    }
    Ok(format!("KS estimate vs uniform: {}", cells.join(", ")))
}

// ---------------------------------------------------------------- 11

fn fima(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fima")).args(args).output().map_err(|e| e.to_string())?;
    check(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
}

fn same_bytes(a: &Path, b: &Path) -> Result<(), String> {
    let (x, y) = (std::fs::read(a).map_err(|e| e.to_string())?, std::fs::read(b).map_err(|e| e.to_string())?);
    check(x == y, || format!("{} and {} differ", a.display(), b.display()))
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    let mut compared = 0;
    for run in ["a", "b"] {
        fima(&["make-synthetic", "--seed", "11", "--set", "synthetic_kernel=motion", "--out", &p(&format!("syn_{run}"))])?;
    }
    same_bytes(&dir.path().join("syn_a/y.pgm"), &dir.path().join("syn_b/y.pgm"))?;
    let (y, k) = (p("syn_a/y.pgm"), p("syn_a/b_true.txt"));
    for run in ["a", "b"] {
        fima(&["solve-nonblind", "--input", &y, "--kernel", &k, "--out", &p(&format!("nb_{run}"))])?;
        fima(&["solve-blind", "--input", &y, "--set", "scales=2", "--out", &p(&format!("bl_{run}"))])?;
        fima(&["bench", "--set", "instances=2", "--set", "schemes=pg,ifima", "--out", &p(&format!("be_{run}"))])?;
    }
    for (dir_a, dir_b, file) in [
        ("nb_a", "nb_b", "trace.csv"),
        ("nb_a", "nb_b", "trace.json"),
        ("nb_a", "nb_b", "restored.pgm"),
        ("bl_a", "bl_b", "trace.csv"),
        ("bl_a", "bl_b", "kernel.txt"),
        ("be_a", "be_b", "bench.csv"),
    ] {
        same_bytes(&dir.path().join(dir_a).join(file), &dir.path().join(dir_b).join(file))?;
        compared += 1;
    }
    Ok(format!("{} artifact pairs byte-identical across reruns", compared + 1))
}

fn main() {
    let total = Instant::now();
    let mut failures = 0;
    let mut report = |n: usize, name: &str, start: Instant, outcome: Outcome| {
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("criterion {n:>2} FAIL  {name} [{secs:.1}s]: {detail}");
            }
        }
    };

    let t = Instant::now();
    let runs = descent_runs();
    let setup = t.elapsed();
    let timed = |f: &dyn Fn(&[Run]) -> Outcome| -> Outcome {
        let runs = runs.as_ref().map_err(|e| format!("instances failed: {e}"))?;
        let out = f(runs)?;
        check(setup.as_secs_f64() < 60.0, || format!("instances took {:.1}s (budget 60s)", setup.as_secs_f64()))?;
        Ok(out)
    };
    report(1, "descent chain", t, timed(&criterion_1));
    report(2, "sufficient descent", Instant::now(), timed(&criterion_2));
    report(3, "error-control descent", Instant::now(), timed(&criterion_3));
    let t = Instant::now();
    report(4, "certificate formula", t, criterion_4());
    let t = Instant::now();
    report(5, "reduction to PG", t, criterion_5());
    let t = Instant::now();
    report(6, "criticality at termination", t, criterion_6());
    let t = Instant::now();
    report(7, "prox oracles", t, criterion_7());
    let t = Instant::now();
    report(8, "FFT correctness", t, criterion_8());
    let t = Instant::now();
    report(9, "deblurring ordering", t, criterion_9());
    let t = Instant::now();
    let c10 = criterion_10().and_then(|s| {
        check(t.elapsed().as_secs_f64() < 120.0, || format!("took {:.1}s (budget 120s)", t.elapsed().as_secs_f64()))
            .map(|_| s)
    });
    report(10, "blind pipeline", t, c10);
    let t = Instant::now();
    report(11, "determinism", t, criterion_11());

    println!("acceptance: {} of 11 passed in {:.1}s", 11 - failures, total.elapsed().as_secs_f64());
    if failures > 0 {
        std::process::exit(1);
    }
}
