//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs at full size by default. `WIKS_ACCEPTANCE_QUICK=1` skips the
//! simulation-heavy criteria for a fast smoke run.

mod common;

use std::collections::HashMap;
use std::time::Instant;

use common::*;
use rand::Rng;
use wiks::baselines::{classical_ks_test, wilcoxon_exact_test, Method};
use wiks::calibration::{calibrate_wiks_null, CalibrationConfig, CalibrationResult};
use wiks::distributions::{true_ks_distance, BivariateModel, Model, ScenarioId, UnivariateModel};
use wiks::index::{
    estimate_from_distances, estimate_index, wiks, wiks_survival_form, DistanceDraw,
    DistanceSampler, WeightSpec, WiksConfig,
};
use wiks::metrics::{ks_atomic, ks_atomic_bivariate, ks_mean_measures, z_statistic};
use wiks::posterior::{posterior, AtomicDistribution, DPPrior};
use wiks::power::{PowerStudy, PowerThresholds, ScenarioGrid};
use wiks::seed::SimRng;
use wiks::{Result, SeedSpec};

const MASTER: u64 = 20_240_601;

struct Report {
    failures: Vec<String>,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, detail: String) {
        println!("criterion {id:<4} {}  {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failures.push(id.to_string());
        }
    }
}

fn normal_prior() -> DPPrior<UnivariateModel> {
    DPPrior::new(1.0, UnivariateModel::standard_normal()).unwrap()
}

fn wiks_config(draws: usize) -> WiksConfig {
    WiksConfig {
        draws,
        ..Default::default()
    }
}

fn calibrate(null: Model, n: usize, replicates: usize, draws: usize, seed: SeedSpec) -> CalibrationResult {
    let config = CalibrationConfig {
        n,
        m: n,
        replicates,
        null_model: null,
        ..Default::default()
    };
    calibrate_wiks_null(&config, &normal_prior(), &wiks_config(draws), seed).unwrap()
}

/// Thresholds under the three nulls of the cutoff table.
fn table_one(replicates: usize, draws: usize, seed: SeedSpec) -> Vec<(UnivariateModel, f64, f64)> {
    [
        (UnivariateModel::standard_normal(), 0.7270),
        (UnivariateModel::uniform(0.0, 1.0), 0.7337),
        (UnivariateModel::log_normal(0.0, 1.0), 0.7302),
    ]
    .into_iter()
    .enumerate()
    .map(|(i, (null, target))| {
        let c = calibrate(null.into(), 50, replicates, draws, seed.child(i as u64));
        (null, c.threshold, target)
    })
    .collect()
}

fn table_line(rows: &[(UnivariateModel, f64, f64)], tol: f64) -> (bool, String) {
    let pass = rows.iter().all(|(_, c, t)| (c - t).abs() <= tol);
    let detail = rows
        .iter()
        .map(|(m, c, t)| format!("{m} {c:.4} (target {t:.4})"))
        .collect::<Vec<_>>()
        .join(", ");
    (pass, format!("{detail}; tolerance {tol}"))
}

/// Replays a fixed vector of distances, draw `s` getting entry `s`.
struct Replay {
    distances: Vec<f64>,
    index: HashMap<SeedSpec, usize>,
}

impl Replay {
    fn new(distances: Vec<f64>, seed: SeedSpec) -> Self {
        let index = (0..distances.len()).map(|i| (seed.child(i as u64), i)).collect();
        Self { distances, index }
    }
}

impl DistanceSampler for Replay {
    fn sample_distance(&self, seed: SeedSpec) -> Result<DistanceDraw> {
        Ok(DistanceDraw {
            distance: self.distances[self.index[&seed]],
            truncated: false,
        })
    }
}

fn random_weight(rng: &mut SimRng) -> WeightSpec {
    match rng.random_range(0..3) {
        0 => WeightSpec::Uniform,
        1 => WeightSpec::power_complement(rng.random_range(0.2..12.0)).unwrap(),
        _ => {
            let mid: f64 = rng.random_range(0.05..0.95);
            let at: f64 = rng.random();
            WeightSpec::tabulated(vec![0.0, mid, 1.0], vec![0.0, at, 1.0]).unwrap()
        }
    }
}

fn criterion_seven(r: &mut Report, seed: SeedSpec) {
    let mut rng = seed.rng();
    let trials = 1000;

    let mut ok = 0;
    for _ in 0..trials {
        let (lp, lq) = (rng.random_range(1..=20), rng.random_range(1..=20));
        let (pa, pw) = (int_atoms(&mut rng, lp, 10), dyadic_weights(&mut rng, lp, 12));
        let (qa, qw) = (int_atoms(&mut rng, lq, 10), dyadic_weights(&mut rng, lq, 12));
        let fast = ks_atomic(
            &AtomicDistribution::new(pa.clone(), pw.clone()).unwrap(),
            &AtomicDistribution::new(qa.clone(), qw.clone()).unwrap(),
        )
        .value();
        ok += usize::from(fast == brute_ks(&pa, &pw, &qa, &qw));
    }
    r.line("7a", ok == trials, format!("ks_atomic exact on {ok}/{trials} dyadic instances (<= 20 atoms)"));

    let mut ok = 0;
    for _ in 0..trials {
        let (lp, lq) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let mut pts = |l| {
            (0..l)
                .map(|_| [rng.random_range(0..5) as f64, rng.random_range(0..5) as f64])
                .collect::<Vec<_>>()
        };
        let (pa, qa) = (pts(lp), pts(lq));
        let (pw, qw) = (dyadic_weights(&mut rng, lp, 10), dyadic_weights(&mut rng, lq, 10));
        let fast = ks_atomic_bivariate(
            &AtomicDistribution::new(pa.clone(), pw.clone()).unwrap(),
            &AtomicDistribution::new(qa.clone(), qw.clone()).unwrap(),
        )
        .unwrap()
        .value();
        ok += usize::from(fast == brute_ks_2d(&pa, &pw, &qa, &qw));
    }
    r.line("7b", ok == trials, format!("ks_atomic_bivariate exact on {ok}/{trials} dyadic instances (<= 8 atoms)"));

    let mut ok = 0;
    for _ in 0..trials {
        let (n, m) = (rng.random_range(1..=15), rng.random_range(1..=15));
        let x = int_atoms(&mut rng, n, 8);
        let y = int_atoms(&mut rng, m, 8);
        let k = rng.random_range(0.01..5.0);
        ok += usize::from(z_statistic(&x, &y, k).unwrap() == brute_z(&x, &y, k));
    }
    r.line("7c", ok == trials, format!("z_statistic exact on {ok}/{trials} instances"));

    let mut ok = 0;
    for _ in 0..trials {
        let total = rng.random_range(2..=8);
        let n = rng.random_range(1..total);
        let pooled = distinct_values(&mut rng, total);
        let (x, y) = pooled.split_at(n);
        let p = wilcoxon_exact_test(x, y).unwrap().p_value.unwrap();
        ok += usize::from(p == enumerate_rank_sum_p(x, y));
    }
    r.line("7d", ok == trials, format!("exact rank-sum p-value equals enumeration on {ok}/{trials} untied pools of size <= 8"));

    let (mut exact, mut close, mut bitwise) = (0, 0, 0);
    for i in 0..trials {
        // Every other instance uses power-of-two sizes, where the ratio is
        // exactly representable.
        let (n, m) = if i % 2 == 0 {
            (1 << rng.random_range(0..5), 1 << rng.random_range(0..5))
        } else {
            (rng.random_range(1..=20), rng.random_range(1..=20))
        };
        let x = int_atoms(&mut rng, n, 8);
        let y = int_atoms(&mut rng, m, 8);
        let d = classical_ks_test(&x, &y).unwrap().statistic;
        let (num, den) = brute_ks_counts(&x, &y);
        let oracle = num as f64 / den as f64;
        if i % 2 == 0 {
            exact += usize::from(d == oracle);
        } else {
            close += usize::from((d - oracle).abs() <= 1e-12);
        }
        let via_atomic = ks_atomic(
            &AtomicDistribution::empirical(&x).unwrap(),
            &AtomicDistribution::empirical(&y).unwrap(),
        )
        .value();
        bitwise += usize::from(d.to_bits() == via_atomic.to_bits());
    }
    let half = trials / 2;
    r.line(
        "7e",
        exact == half && close == half && bitwise == trials,
        format!(
            "KS statistic: exact {exact}/{half} (dyadic sizes), within 1e-12 {close}/{half}, \
             bit-identical to ks_atomic {bitwise}/{trials}"
        ),
    );
}

fn criterion_six(r: &mut Report, seed: SeedSpec) {
    let mut rng = seed.rng();
    let trials = 1000usize;
    let (mut ok, mut worst) = (0, f64::NEG_INFINITY);
    for t in 0..trials as u64 {
        let n = rng.random_range(1..=60);
        let mut m = rng.random_range(1..=60);
        if m == n {
            m += 1;
        }
        let k = rng.random_range(0.05..20.0);
        let model = UnivariateModel::normal(rng.random_range(-2.0..2.0), rng.random_range(0.2..3.0));
        let x = model.sample(n, seed.child(t).child(0)).unwrap();
        let y = UnivariateModel::standard_normal().sample(m, seed.child(t).child(1)).unwrap();
        let prior = DPPrior::new(k, UnivariateModel::standard_normal()).unwrap();
        let (sx, sy) = (posterior(&prior, &x).unwrap(), posterior(&prior, &y).unwrap());
        let gap = (ks_mean_measures(&sx, &sy, 1024).value() - z_statistic(&x, &y, k).unwrap()).abs();
        let bound = k * (m as f64 - n as f64).abs() / ((k + m as f64) * (k + n as f64));
        worst = worst.max(gap - bound);
        ok += usize::from(gap <= bound + 1e-12);
    }
    r.line(
        "6",
        ok == trials,
        format!("|d(E P1, E P2) - Z| <= K|m-n|/((K+m)(K+n)) on {ok}/{trials} instances; max(gap - bound) = {worst:.3e}"),
    );
}

fn criterion_eight(r: &mut Report, seed: SeedSpec) {
    let mut rng = seed.rng();
    let mut worst = 0.0f64;
    let mut count = 0;
    for spec in [WeightSpec::Uniform, WeightSpec::default()] {
        for _ in 0..100 {
            let len = rng.random_range(1..=1000);
            let d: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
            let expectation = estimate_from_distances(&d, 0, &spec).unwrap().value;
            let survival = wiks_survival_form(&d, &spec, 8).unwrap();
            worst = worst.max((expectation - survival).abs());
            count += 1;
        }
    }
    r.line("8", worst <= 1e-4, format!("survival vs expectation form on {count} vectors, max diff {worst:.2e} (tol 1e-4)"));
}

fn criterion_ten(r: &mut Report, seed: SeedSpec) {
    let mut rng = seed.rng();
    let trials = 1000;
    let (mut range_ok, mut mono_ok) = (0, 0);
    for t in 0..trials {
        let spec = random_weight(&mut rng);
        let s = rng.random_range(1..=200);
        let lo: Vec<f64> = (0..s).map(|_| rng.random::<f64>()).collect();
        let hi: Vec<f64> = lo.iter().map(|d| d + (1.0 - d) * rng.random::<f64>()).collect();
        let base = seed.child(t as u64);
        let e_lo = estimate_index(&Replay::new(lo, base), &spec, s, base).unwrap();
        let e_hi = estimate_index(&Replay::new(hi, base), &spec, s, base).unwrap();
        range_ok += usize::from((0.0..=1.0).contains(&e_lo.value) && (0.0..=1.0).contains(&e_hi.value));
        mono_ok += usize::from(e_lo.value <= e_hi.value);
    }
    let mut degenerate_ok = true;
    for spec in [WeightSpec::Uniform, WeightSpec::default(), random_weight(&mut rng)] {
        for s in [1, 17, 1000] {
            let zero = estimate_index(&Replay::new(vec![0.0; s], seed), &spec, s, seed).unwrap();
            let one = estimate_index(&Replay::new(vec![1.0; s], seed), &spec, s, seed).unwrap();
            degenerate_ok &= zero.value == 0.0 && one.value == 1.0;
        }
    }
    r.line(
        "10",
        range_ok == trials && mono_ok == trials && degenerate_ok,
        format!(
            "stubbed samplers: range {range_ok}/{trials}, monotonicity {mono_ok}/{trials}, \
             degeneracy (d=0 -> 0, d=1 -> 1) {}",
            if degenerate_ok { "ok" } else { "violated" }
        ),
    );
}

fn criterion_five(r: &mut Report, seed: SeedSpec) {
    let x_model = UnivariateModel::standard_normal();
    let y_model = UnivariateModel::normal(1.0, 1.0);
    let truth = true_ks_distance(&x_model, &y_model, 1e-10).unwrap();
    let x = x_model.sample(2000, seed.child(0)).unwrap();
    let y = y_model.sample(2000, seed.child(1)).unwrap();
    let config = WiksConfig {
        weight: WeightSpec::Uniform,
        ..wiks_config(1000)
    };
    let est = wiks(&x, &y, &normal_prior(), &config, seed.child(2)).unwrap();
    r.line(
        "5",
        (est.value - truth).abs() <= 0.05 && (truth - 0.38292).abs() < 1e-4,
        format!(
            "n=m=2000, uniform weight: WIKS {:.4} (se {:.4}) vs true distance {truth:.5}; tol 0.05",
            est.value, est.mc_std_error
        ),
    );
}

fn run_power(study: &PowerStudy, thresholds: &PowerThresholds, seed: SeedSpec) -> Vec<wiks::power::PowerRow> {
    study.run(thresholds, seed).unwrap().rows
}

fn main() {
    let quick = std::env::var("WIKS_ACCEPTANCE_QUICK").is_ok_and(|v| v != "0");
    let root = SeedSpec::root(MASTER);
    let mut r = Report { failures: Vec::new() };
    let start = Instant::now();

    criterion_five(&mut r, root.child(5));
    criterion_six(&mut r, root.child(6));
    criterion_seven(&mut r, root.child(7));
    criterion_eight(&mut r, root.child(8));
    criterion_ten(&mut r, root.child(10));

    let t = Instant::now();
    let reduced = table_one(300, 300, root.child(11));
    let elapsed = t.elapsed();
    let (pass, detail) = table_line(&reduced, 0.05);
    r.line(
        "1r",
        pass && elapsed.as_secs_f64() < 60.0,
        format!("reduced R=S=300: {detail}; {:.1}s (limit 60s)", elapsed.as_secs_f64()),
    );

    if quick {
        println!("WIKS_ACCEPTANCE_QUICK set: criteria 1-4 and 9 skipped");
    } else {
        let full = table_one(1000, 1000, root.child(1));
        let (pass, detail) = table_line(&full, 0.03);
        r.line("1", pass, format!("R=S=1000: {detail}"));

        let cs: Vec<f64> = full.iter().map(|row| row.1).collect();
        let spread = cs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - cs.iter().copied().fold(f64::INFINITY, f64::min);
        r.line("2", spread < 0.03, format!("max pairwise threshold difference {spread:.4} (< 0.03)"));

        let c_normal = full[0].1;
        let prior = normal_prior();
        let config = wiks_config(1000);
        let ln = UnivariateModel::log_normal(0.0, 1.0);
        let level_seed = root.child(3);
        let rejections = (0..1000u64)
            .filter(|&i| {
                let s = level_seed.child(i);
                let x = ln.sample(50, s.child(0)).unwrap();
                let y = ln.sample(50, s.child(1)).unwrap();
                wiks(&x, &y, &prior, &config, s.child(2)).unwrap().value > c_normal
            })
            .count();
        let level = rejections as f64 / 1000.0;
        r.line(
            "3",
            (level - 0.05).abs() <= 0.02,
            format!("LN(0,1) null rejection rate {level:.3} at the N(0,1) threshold {c_normal:.4} (0.05 +/- 0.02)"),
        );

        let study = PowerStudy {
            scenarios: vec![ScenarioGrid { id: ScenarioId(1), thetas: vec![1.0] }],
            methods: vec![Method::Wiks, Method::Ks],
            reps: 1000,
            n: 50,
            m: 50,
            alpha: 0.05,
            prior: normal_prior(),
            wiks: wiks_config(1000),
        };
        let rows = run_power(&study, &PowerThresholds::fixed(c_normal), root.child(4));
        let (pw, pk) = (rows[0].power, rows[1].power);
        r.line("4", pw >= pk - 0.02, format!("scenario 1, theta=1: power WIKS {pw:.3} vs KS {pk:.3} (WIKS >= KS - 0.02)"));

        criterion_nine(&mut r, root.child(9));
    }

    println!(
        "acceptance: {} failure(s) in {:.1}s",
        r.failures.len(),
        start.elapsed().as_secs_f64()
    );
    if !r.failures.is_empty() {
        println!("failed: {}", r.failures.join(", "));
        std::process::exit(1);
    }
}

fn criterion_nine(r: &mut Report, seed: SeedSpec) {
    let draws = 200;
    let null: Model = BivariateModel::normal([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]).into();
    let c = calibrate(null, 100, 1000, draws, seed.child(0)).threshold;
    let id = ScenarioId(9);
    let grid = id.default_grid().unwrap();
    let study = |thetas: Vec<f64>, reps| PowerStudy {
        scenarios: vec![ScenarioGrid { id, thetas }],
        methods: vec![Method::Wiks],
        reps,
        n: 100,
        m: 100,
        alpha: 0.05,
        prior: normal_prior(),
        wiks: wiks_config(draws),
    };
    let thresholds = PowerThresholds { univariate: None, bivariate: Some(c) };
    let mut rows = run_power(&study(vec![grid[0]], 1000), &thresholds, seed.child(1));
    rows.extend(run_power(&study(grid[1..].to_vec(), 500), &thresholds, seed.child(2)));
    let level = rows[0].power;
    let monotone = rows.windows(2).all(|w| {
        let slack = 2.0 * (w[0].mc_se.powi(2) + w[1].mc_se.powi(2)).sqrt();
        w[1].power >= w[0].power - slack
    });
    let last = rows.last().unwrap().power;
    let curve = rows
        .iter()
        .map(|row| format!("{}:{:.3}", row.theta, row.power))
        .collect::<Vec<_>>()
        .join(" ");
    r.line(
        "9",
        (level - 0.05).abs() <= 0.02 && monotone && last >= 0.95,
        format!(
            "bivariate shift, n=m=100, threshold {c:.4}: power {curve}; \
             level 0.05 +/- 0.02, nondecreasing within 2 se, >= 0.95 at the largest theta"
        ),
    );
}
