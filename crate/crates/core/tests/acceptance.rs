//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::io::Write;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use srcloc::data_io::{Format, OutlierMode};
use srcloc::diffusion::{apply_diffusion, diffusion_matrix};
use srcloc::experiments::{
    generate_planted_dataset, generate_sensor_graph, run_distance_theta_grid, run_k_sweep,
    run_snr_theta_grid, sample_spike_pair, CellSummary, ExperimentGrid, GridOutput, GridSetup,
    KSweepOptions, PlantedSpec,
};
use srcloc::graph::{
    hop_distances, normalized_laplacian, spectral_decomposition, Graph, Sigma2,
    SpectralDecomposition,
};
use srcloc::metrics::hop_error;
use srcloc::solver::{
    alternating_solve, fista_solve_x, objective, soft_threshold, Observation, SolverConfig,
    ThetaFidelity,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn decompose(g: &Graph) -> SpectralDecomposition {
    spectral_decomposition(normalized_laplacian(g).unwrap().view()).unwrap()
}

fn gaussian(n: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    Array1::from_shape_fn(n, |_| StandardNormal.sample(rng))
}

fn sparse_signal(n: usize, nnz: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let mut x = Array1::zeros(n);
    for i in rand::seq::index::sample(rng, n, nnz) {
        x[i] = rng.random_range(0.5..2.0);
    }
    x
}

fn spectral_correctness() -> Outcome {
    let start = Instant::now();
    let mut worst_rec = 0.0f64;
    let mut range_ok = true;
    for s in 0..20 {
        let g = generate_sensor_graph(100, 10, Sigma2::Auto, 1000 + s).unwrap();
        let l = normalized_laplacian(&g).unwrap();
        let d = spectral_decomposition(l.view()).unwrap();
        let err = (&d.reconstruct() - &l).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        worst_rec = worst_rec.max(err);
        range_ok &= d.eigenvalues().iter().all(|&v| (0.0..=2.0 + 1e-8).contains(&v));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_rec <= 1e-8 && range_ok && secs < 10.0,
        format!("max reconstruction error {worst_rec:.2e}, spectrum in [0, 2]: {range_ok}, {secs:.2} s"),
    )
}

fn derivative_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = generate_sensor_graph(50, 6, Sigma2::Auto, 2).unwrap();
    let d = decompose(&g);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let x = sparse_signal(50, 4, &mut rng);
        let b = gaussian(50, &mut rng).mapv(f64::abs);
        let theta = rng.random_range(0.2..3.0);
        let obs = Observation::new(b).unwrap();
        let fid = ThetaFidelity::new(&d, x.view(), &obs, 1.0).unwrap();
        let (_, f1, f2) = fid.evaluate(theta);
        let h = 1e-4 * theta;
        let fd1 = (fid.value(theta + h) - fid.value(theta - h)) / (2.0 * h);
        let fd2 = (fid.evaluate(theta + h).1 - fid.evaluate(theta - h).1) / (2.0 * h);
        let rel = |a: f64, r: f64| (a - r).abs() / r.abs().max(1e-12);
        worst = worst.max(rel(f1, fd1)).max(rel(f2, fd2));
    }
    outcome(worst <= 1e-5, format!("worst relative deviation {worst:.2e}"))
}

fn lasso_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = generate_sensor_graph(50, 6, Sigma2::Auto, 3).unwrap();
    let d = decompose(&g);
    let cfg = SolverConfig {
        gamma: 0.3,
        alpha: 1.5,
        theta_min: 1e-13,
        fista_tol: 1e-14,
        ..SolverConfig::default()
    };
    let b = gaussian(50, &mut rng);
    let obs = Observation::new(b.clone()).unwrap();
    let out = fista_solve_x(1e-12, &obs, &cfg, &d, Array1::zeros(50).view()).unwrap();
    let expected = soft_threshold(b.view(), cfg.gamma / cfg.alpha);
    let err = (&out.x - &expected).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    outcome(err <= 1e-6, format!("max deviation {err:.2e}"))
}

/// Plain proximal gradient with step `1 / alpha`; `||A|| = 1` on a
/// Laplacian spectrum that contains 0.
fn ista(a: &Array2<f64>, b: &Array1<f64>, gamma: f64, alpha: f64, iters: usize) -> Array1<f64> {
    let lip = alpha;
    let mut x = Array1::zeros(b.len());
    for _ in 0..iters {
        let grad = a.t().dot(&(a.dot(&x) - b)) * alpha;
        let v = &x - &(grad / lip);
        x = v.mapv(|t: f64| t.signum() * (t.abs() - gamma / lip).max(0.0));
    }
    x
}

fn ista_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for s in 0..10 {
        let g = generate_sensor_graph(50, 6, Sigma2::Auto, 40 + s).unwrap();
        let d = decompose(&g);
        let theta = rng.random_range(0.3..2.0);
        let x0 = sparse_signal(50, 3, &mut rng);
        let b = apply_diffusion(&d, theta, x0.view()).unwrap() + &(gaussian(50, &mut rng) * 0.01);
        let cfg = SolverConfig {
            gamma: 0.02,
            fista_tol: 1e-15,
            fista_max_iter: 20_000,
            ..SolverConfig::default()
        };
        let obs = Observation::new(b.clone()).unwrap();
        let fista = fista_solve_x(theta, &obs, &cfg, &d, Array1::zeros(50).view()).unwrap();
        let a = diffusion_matrix(&d, theta).unwrap();
        let x_ref = ista(&a, &b, cfg.gamma, cfg.alpha, 10_000);
        let e_ref = objective(x_ref.view(), theta, &obs, &cfg, &d).unwrap();
        worst = worst.max((fista.objective - e_ref).abs());
    }
    outcome(worst <= 1e-6, format!("worst objective gap {worst:.2e}"))
}

fn random_small_graph(rng: &mut ChaCha8Rng) -> Graph {
    let n = rng.random_range(2..=10);
    let p = rng.random_range(0.15..0.7);
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                w[[i, j]] = 1.0;
                w[[j, i]] = 1.0;
            }
        }
    }
    Graph::from_weights(w).unwrap()
}

/// Zone-by-zone hop error from Floyd-Warshall distances.
fn brute_force_hop_error(g: &Graph, x_ref: &[f64], y: &[f64]) -> f64 {
    let n = g.n();
    let inf = usize::MAX / 4;
    let mut dist = vec![vec![inf; n]; n];
    for i in 0..n {
        dist[i][i] = 0;
        for j in 0..n {
            if g.weight(i, j) > 0.0 {
                dist[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if dist[i][k] + dist[k][j] < dist[i][j] {
                    dist[i][j] = dist[i][k] + dist[k][j];
                }
            }
        }
    }
    let active: Vec<usize> = (0..n).filter(|&i| x_ref[i] != 0.0).collect();
    if y.iter().all(|v| v.abs() <= f64::MIN_POSITIVE) {
        return f64::INFINITY;
    }
    let mut total = 0.0;
    for &s in &active {
        let zone: Vec<usize> = (0..n)
            .filter(|&j| {
                dist[s][j] < inf
                    && active.iter().all(|&t| {
                        t == s || dist[s][j] < dist[t][j] || (dist[s][j] == dist[t][j] && s < t)
                    })
            })
            .collect();
        let (mut mass, mut moment) = (0.0, 0.0);
        for &j in &zone {
            let m = if y[j].abs() > f64::MIN_POSITIVE { y[j].abs() } else { 0.0 };
            mass += m;
            moment += m * dist[s][j] as f64;
        }
        if mass > 0.0 {
            total += moment / mass;
        }
    }
    total
}

fn hop_error_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut mismatches, mut infinite, mut ties) = (0, 0, 0);
    for trial in 0..200 {
        let g = random_small_graph(&mut rng);
        let n = g.n();
        let mut x_ref = vec![0.0; n];
        let spikes = rng.random_range(1..=n.min(3));
        for i in rand::seq::index::sample(&mut rng, n, spikes) {
            x_ref[i] = 1.0;
        }
        let y: Vec<f64> = if trial % 10 == 0 {
            vec![0.0; n]
        } else {
            (0..n)
                .map(|_| if rng.random_bool(0.5) { rng.random_range(-2.0..2.0) } else { 0.0 })
                .collect()
        };
        let got = hop_error(&x_ref, &y, &g, 0.0).unwrap().total;
        let want = brute_force_hop_error(&g, &x_ref, &y);
        if got.is_infinite() {
            infinite += 1;
        }
        let hops = hop_distances(&g, None).unwrap();
        let active: Vec<usize> = (0..n).filter(|&i| x_ref[i] != 0.0).collect();
        let tied = (0..n).any(|j| {
            active.iter().any(|&a| {
                active
                    .iter()
                    .any(|&b| a < b && hops.get(a, j).is_some() && hops.get(a, j) == hops.get(b, j))
            })
        });
        ties += tied as usize;
        if got != want && !(got.is_infinite() && want.is_infinite()) {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0 && infinite > 0 && ties > 0,
        format!("{mismatches} mismatches over 200 graphs ({infinite} zero recoveries, {ties} with ties)"),
    )
}

fn cell(out: &GridOutput, theta: f64, h: usize, snr: Option<f64>) -> CellSummary {
    out.cell(theta, h, snr).expect("cell present")
}

fn pooled_std(a: &CellSummary, b: &CellSummary) -> f64 {
    let (na, nb) = (a.finite as f64, b.finite as f64);
    (((na - 1.0) * a.std.powi(2) + (nb - 1.0) * b.std.powi(2)) / (na + nb - 2.0)).sqrt()
}

fn usable(c: &CellSummary) -> bool {
    c.finite >= 2 && c.infinite == 0 && c.unavailable == 0
}

const SEED: u64 = 2024;

fn noiseless_recovery(grid_out: &GridOutput, secs: f64) -> Outcome {
    let cells: Vec<CellSummary> = [2, 6, 10].iter().map(|&h| cell(grid_out, 0.5, h, None)).collect();
    let means_ok = cells.iter().all(|c| usable(c) && c.mean <= 1.0);
    let mut independent = true;
    for i in 0..3 {
        for j in (i + 1)..3 {
            independent &= (cells[i].mean - cells[j].mean).abs() <= pooled_std(&cells[i], &cells[j]);
        }
    }
    let means: Vec<String> = cells
        .iter()
        .map(|c| format!("{:.3}+-{:.3}", c.mean, c.std))
        .collect();
    outcome(
        means_ok && independent && secs < 300.0,
        format!("means at h=2,6,10: {} ({secs:.1} s)", means.join(", ")),
    )
}

fn theta_trend(grid_out: &GridOutput) -> Outcome {
    let lo = cell(grid_out, 0.5, 6, None);
    let hi = cell(grid_out, 16.0, 6, None);
    outcome(
        usable(&lo) && hi.finite > 0 && hi.mean > lo.mean,
        format!("mean at theta=0.5: {:.3}, at theta=16: {:.3}", lo.mean, hi.mean),
    )
}

fn noise_trend(snr_out: &GridOutput, grid_out: &GridOutput) -> Outcome {
    let s0 = cell(snr_out, 0.5, 6, Some(0.0));
    let s20 = cell(snr_out, 0.5, 6, Some(20.0));
    let s300 = cell(snr_out, 0.5, 6, Some(300.0));
    let clean = cell(grid_out, 0.5, 6, None);
    let grows = s0.mean >= s20.mean;
    let limit = (s300.mean - clean.mean).abs() <= pooled_std(&s300, &clean);
    outcome(
        usable(&s0) && usable(&s20) && usable(&s300) && grows && limit,
        format!(
            "mean at 0 dB: {:.3}, 20 dB: {:.3}, 300 dB: {:.3}, noiseless: {:.3}",
            s0.mean, s20.mean, s300.mean, clean.mean
        ),
    )
}

fn energy_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = SolverConfig::default();
    let (mut monotone, mut good, mut total) = (0, 0, 0);
    for s in 0..50 {
        let g = generate_sensor_graph(100, 10, Sigma2::Auto, 900 + s).unwrap();
        let d = decompose(&g);
        let hops = hop_distances(&g, None).unwrap();
        let h = rng.random_range(2..=6);
        let Ok((x, _)) = sample_spike_pair(&hops, h, &mut rng) else {
            continue;
        };
        let theta = rng.random_range(0.5..2.0);
        let theta_init = theta * rng.random_range(0.5..1.5);
        let b = apply_diffusion(&d, theta, x.view()).unwrap();
        let obs = Observation::new(b).unwrap();
        let res = alternating_solve(&obs, &cfg, &d, None, theta_init).unwrap();
        total += 1;
        if res.energy_trace.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9) {
            monotone += 1;
        }
        let err = hop_error(x.as_slice().unwrap(), res.x.as_slice().unwrap(), &g, 0.0)
            .unwrap()
            .total;
        if err <= 2.0 {
            good += 1;
        }
    }
    let share = good as f64 / total.max(1) as f64;
    outcome(
        total == 50 && monotone == total && share >= 0.7,
        format!("{monotone}/{total} monotone traces, hop error <= 2 on {:.0}%", 100.0 * share),
    )
}

fn k_sweep_robustness() -> Outcome {
    let planted = generate_planted_dataset(&PlantedSpec {
        n: 200,
        seed: SEED,
        ..PlantedSpec::default()
    })
    .unwrap();
    let run = |outlier| {
        let opts = KSweepOptions {
            k_values: (5..=25).collect(),
            theta: 1.0,
            outlier,
            ..KSweepOptions::default()
        };
        run_k_sweep(&planted.dataset, &planted.sources, &opts).unwrap()
    };
    let best = |out: &srcloc::experiments::KSweepOutput| {
        out.records
            .iter()
            .filter(|r| r.hop_error.is_finite())
            .map(|r| (r.hop_error, r.k))
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
    };
    let plain = run(None);
    let masked = run(Some(OutlierMode::Mask));
    let interp = run(Some(OutlierMode::Interpolate));
    let complete = [&plain, &masked, &interp].iter().all(|o| o.records.len() == 21);
    let (bp, bm, bi) = (best(&plain), best(&masked), best(&interp));
    outcome(
        complete && bp.0 <= 1.0 && bm.0 <= 2.0 && bi.0 <= 2.0,
        format!(
            "best hop error {:.3} (k={}), mask {:.3} (k={}), interpolate {:.3} (k={})",
            bp.0, bp.1, bm.0, bm.1, bi.0, bi.1
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let setup = GridSetup {
        n: 80,
        k: 8,
        ..GridSetup::default()
    };
    let grid = ExperimentGrid {
        h_values: vec![2, 4],
        theta_values: vec![0.5, 4.0],
        snr_db: vec![0.0, 10.0],
        trials: 4,
        seed: SEED,
        ..ExperimentGrid::default()
    };
    let mut identical = true;
    let mut files = 0;
    for rep in 0..2 {
        for format in [Format::Csv, Format::Json] {
            let ext = if format == Format::Csv { "csv" } else { "json" };
            let d = run_distance_theta_grid(&grid, &setup).unwrap();
            d.write(&dir.path().join(format!("d{rep}.{ext}")), format).unwrap();
            let s = run_snr_theta_grid(&grid, &setup).unwrap();
            s.write(&dir.path().join(format!("s{rep}.{ext}")), format).unwrap();
        }
        let planted = generate_planted_dataset(&PlantedSpec {
            n: 80,
            k: 8,
            seed: SEED,
            ..PlantedSpec::default()
        })
        .unwrap();
        let opts = KSweepOptions {
            k_values: vec![5, 8, 12],
            ..KSweepOptions::default()
        };
        run_k_sweep(&planted.dataset, &planted.sources, &opts)
            .unwrap()
            .write(&dir.path().join(format!("k{rep}.csv")), Format::Csv)
            .unwrap();
    }
    for name in [
        "d{}.csv", "d{}_summary.csv", "s{}.csv", "s{}_summary.csv", "d{}.json",
        "d{}_summary.json", "s{}.json", "s{}_summary.json", "k{}.csv",
    ] {
        let a = std::fs::read(dir.path().join(name.replace("{}", "0"))).unwrap();
        let b = std::fs::read(dir.path().join(name.replace("{}", "1"))).unwrap();
        identical &= a == b;
        files += 1;
    }
    outcome(identical, format!("{files} tables compared byte for byte"))
}

fn main() {
    let setup = GridSetup::default();
    let start = Instant::now();
    let grid = ExperimentGrid {
        h_values: vec![2, 6, 10],
        theta_values: vec![0.5, 16.0],
        trials: 32,
        seed: SEED,
        ..ExperimentGrid::default()
    };
    let grid_out = run_distance_theta_grid(&grid, &setup).unwrap();
    let grid_secs = start.elapsed().as_secs_f64();
    let snr_grid = ExperimentGrid {
        h_values: vec![6],
        theta_values: vec![0.5],
        snr_db: vec![0.0, 20.0, 300.0],
        ..grid.clone()
    };
    let snr_out = run_snr_theta_grid(&snr_grid, &setup).unwrap();

    let checks: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("spectral correctness", Box::new(spectral_correctness)),
        ("theta derivatives vs finite differences", Box::new(derivative_oracle)),
        ("lasso limit at vanishing theta", Box::new(lasso_oracle)),
        ("FISTA vs long ISTA reference", Box::new(ista_equivalence)),
        ("hop error vs brute-force zones", Box::new(hop_error_oracle)),
        ("noiseless recovery independent of h", Box::new(|| noiseless_recovery(&grid_out, grid_secs))),
        ("error grows with theta", Box::new(|| theta_trend(&grid_out))),
        ("error grows with noise", Box::new(|| noise_trend(&snr_out, &grid_out))),
        ("joint solves: monotone energy and accuracy", Box::new(energy_monotonicity)),
        ("k-sweep robustness to outlier removal", Box::new(k_sweep_robustness)),
        ("bit-reproducible tables", Box::new(determinism)),
    ];

    let mut failed = 0;
    let stdout = std::io::stdout();
    for (i, (name, check)) in checks.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        let mark = if o.pass { "PASS" } else { "FAIL" };
        let mut lock = stdout.lock();
        writeln!(lock, "criterion {:>2} [{mark}] {name}: {}", i + 1, o.detail).unwrap();
        lock.flush().unwrap();
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all {} acceptance criteria passed", checks.len());
}
