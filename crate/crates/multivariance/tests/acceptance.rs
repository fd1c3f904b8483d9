//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status
//! if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use multivariance::parallel::power_study_parallel;
use multivariance_core::centering::{distance_matrix, double_center, scaled_matrices, Scaling};
use multivariance_core::independence::{conservative_test, resampling_test_with, PValueMethod, StatKind};
use multivariance_core::measures::{m_multivariance, multicorrelation, MMethod};
use multivariance_core::simulate::{PowerConfig, PowerTest};
use multivariance_core::special::{chi2_1_cdf, chi2_1_quantile};
use multivariance_core::streaming::streamed_statistics;
use multivariance_core::structure::{detect, Decision, DetectionOptions, Mode};
use multivariance_core::{Dataset, Psi, RngState, Scenario, ScenarioKind, StatisticEvaluator};

type Outcome = (bool, String);

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn scenario(text: &str) -> Scenario {
    Scenario::new(text.parse::<ScenarioKind>().unwrap())
}

fn power(sc: &Scenario, kind: StatKind, samples: usize, alpha: f64, runs: usize, seed: u64) -> f64 {
    let config = PowerConfig {
        test: PowerTest::Single(kind),
        method: PValueMethod::Resampling { replicates: 300 },
        alpha,
        psis: vec![Psi::default()],
    };
    power_study_parallel(sc, &config, &[samples], runs, seed, false, workers()).unwrap()[0].rate
}

fn m_multivariance_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = RngState::new(1001);
    let mut worst = 0.0f64;
    let mut families = [false; 3];
    for _ in 0..200 {
        let n = 2 + rng.below(7) as usize;
        let samples = 2 + rng.below(19) as usize;
        let dims = random_dims(&mut rng, n, 3);
        let data = if rng.uniform() < 0.5 {
            normal_dataset(&mut rng, samples, &dims)
        } else {
            mixed_dataset(&mut rng, samples, &dims)
        };
        let psis: Vec<Psi> = (0..n).map(|_| random_psi(&mut rng)).collect();
        for p in &psis {
            families[match p {
                Psi::EuclidPower { .. } => 0,
                Psi::BoundedExp { .. } => 1,
                Psi::LogType => 2,
            }] = true;
        }
        for scaling in [Scaling::Raw, Scaling::Normalized] {
            let mats = scaled_matrices(&data, &psis, scaling).unwrap();
            for m in 2..=n.min(3) {
                let naive: f64 = subsets_of_size(n, m).iter().map(|s| subset_multivariance(&mats, s)).sum();
                let fast = m_multivariance(&mats, m, MMethod::Fast, false).unwrap();
                worst = worst.max(rel_err(fast, naive));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst <= 1e-9 && secs < 10.0 && families.iter().all(|&f| f),
        format!("max relative error {worst:.2e}, {secs:.2} s"),
    )
}

fn centering_oracle() -> Outcome {
    let mut rng = RngState::new(1002);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let samples = 2 + rng.below(49) as usize;
        let dims = random_dims(&mut rng, 1, 3);
        let data = mixed_dataset(&mut rng, samples, &dims);
        let b = distance_matrix(&data, 0, &random_psi(&mut rng)).unwrap();
        let a = double_center(&b);
        for (x, y) in a.entries().iter().zip(cbc(&b)) {
            worst = worst.max((x - y).abs());
        }
    }
    (worst <= 1e-12, format!("max absolute error {worst:.2e}"))
}

fn pearson_oracle() -> Outcome {
    let square = [Psi::euclid(2.0).unwrap()];
    let mut rng = RngState::new(1003);
    let (mut worst_r, mut worst_rv) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let samples = 5 + rng.below(60) as usize;
        let data = mixed_dataset(&mut rng, samples, &[1, 1]);
        let x: Vec<f64> = (0..samples).map(|s| data.row(s)[0]).collect();
        let y: Vec<f64> = (0..samples).map(|s| data.row(s)[1]).collect();
        let r = multicorrelation(&data, &square, Scaling::RScaled(2)).unwrap().value;
        worst_r = worst_r.max((r - pearson(&x, &y).abs()).abs());
    }
    for _ in 0..100 {
        let samples = 5 + rng.below(60) as usize;
        let (dx, dy) = (2 + rng.below(2) as usize, 2 + rng.below(3) as usize);
        let data = mixed_dataset(&mut rng, samples, &[dx, dy]);
        let x: Vec<f64> = (0..samples).flat_map(|s| data.point(s, 0).to_vec()).collect();
        let y: Vec<f64> = (0..samples).flat_map(|s| data.point(s, 1).to_vec()).collect();
        let r = multicorrelation(&data, &square, Scaling::RScaled(2)).unwrap().value;
        // The squared multicorrelation is the RV coefficient.
        worst_rv = worst_rv.max((r * r - rv_coefficient(&x, dx, &y, dy)).abs());
    }
    (
        worst_r <= 1e-9 && worst_rv <= 1e-9,
        format!("Pearson max error {worst_r:.2e}, RV max error {worst_rv:.2e}"),
    )
}

const KINDS: [StatKind; 4] = [StatKind::Multi, StatKind::Total, StatKind::M(2), StatKind::M(3)];

fn statistics(data: &Dataset, psis: &[Psi]) -> Vec<f64> {
    let mut out: Vec<f64> = KINDS
        .iter()
        .filter(|k| k.check(data.variables()).is_ok())
        .map(|&k| multivariance_core::independence::statistic(data, psis, k).unwrap())
        .collect();
    for scaling in [Scaling::RScaled(0), Scaling::McorScaled(0)] {
        out.push(multicorrelation(data, psis, scaling).unwrap().value);
    }
    out
}

fn invariance() -> Outcome {
    let mut rng = RngState::new(1004);
    let mut worst = 0.0f64;
    let mut diff = |a: &[f64], b: &[f64]| {
        for (x, y) in a.iter().zip(b) {
            worst = worst.max((x - y).abs());
        }
    };
    for _ in 0..50 {
        let n = 2 + rng.below(3) as usize;
        let samples = 5 + rng.below(40) as usize;
        let mut dims = random_dims(&mut rng, n, 3);
        dims[0] = 2;
        let data = mixed_dataset(&mut rng, samples, &dims);
        let psis: Vec<Psi> = (0..n).map(|_| Psi::euclid(0.2 + 1.8 * rng.uniform()).unwrap()).collect();
        let base = statistics(&data, &psis);

        let perm = rng.permutation(samples);
        diff(&base, &statistics(&data.permute_samples(&perm).unwrap(), &psis));

        let g = rng.below(n as u64) as usize;
        let shift = 40.0 * rng.uniform() - 20.0;
        diff(&base, &statistics(&data.map_group(g, |p| p.iter_mut().for_each(|v| *v += shift)), &psis));
        diff(&base, &statistics(&data.map_group(g, |p| p.iter_mut().for_each(|v| *v = -*v)), &psis));

        let angle = 6.28 * rng.uniform();
        let (c, s) = (angle.cos(), angle.sin());
        let rotated = data.map_group(0, |p| {
            let (x, y) = (p[0], p[1]);
            p[0] = c * x - s * y;
            p[1] = s * x + c * y;
        });
        diff(&base, &statistics(&rotated, &psis));

        let r = if rng.uniform() < 0.5 { -1.0 } else { 1.0 } * (0.1 + 10.0 * rng.uniform());
        diff(&base, &statistics(&data.map_group(g, |p| p.iter_mut().for_each(|v| *v *= r)), &psis));
    }
    (worst <= 1e-9, format!("max change {worst:.2e}"))
}

fn null_calibration() -> Outcome {
    let start = Instant::now();
    let runs = 1000;
    let (mut multi_sum, mut total_sum) = (0.0, 0.0);
    let (mut conservative, mut resampling) = (0usize, 0usize);
    let psis = [Psi::default()];
    for run in 0..runs {
        let mut rng = RngState::derive(1005, run as u64);
        let data = normal_dataset(&mut rng, 100, &[1, 1, 1]);
        let multi = StatisticEvaluator::new(&data, &psis, StatKind::Multi).unwrap();
        let total = StatisticEvaluator::new(&data, &psis, StatKind::Total).unwrap();
        multi_sum += multi.observed();
        total_sum += total.observed();
        if conservative_test(StatKind::Multi, multi.observed(), 0.05).unwrap().reject {
            conservative += 1;
        }
        if resampling_test_with(&multi, 300, 0.05, &mut rng).unwrap().reject {
            resampling += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let (multi_mean, total_mean) = (multi_sum / runs as f64, total_sum / runs as f64);
    let (cons_size, res_size) = (conservative as f64 / runs as f64, resampling as f64 / runs as f64);
    let ok = (0.9..=1.1).contains(&multi_mean)
        && (0.9..=1.1).contains(&total_mean)
        && cons_size <= 0.05
        && (0.03..=0.07).contains(&res_size)
        && secs < 300.0;
    (
        ok,
        format!(
            "mean multi {multi_mean:.3}, mean total {total_mean:.3}, conservative size {cons_size:.3}, resampling size {res_size:.3}, {secs:.1} s single worker"
        ),
    )
}

fn grouped_normal_power() -> Outcome {
    let sc = scenario("mvnormal:15:const:0.1").with_groups(vec![5, 5, 5]);
    let total = power(&sc, StatKind::Total, 100, 0.1, 1000, 1006);
    let pairs = power(&sc, StatKind::M(2), 100, 0.1, 1000, 1007);
    (
        (0.93..=0.99).contains(&total) && (0.94..=1.0).contains(&pairs),
        format!("total power {total:.3}, m2 power {pairs:.3}"),
    )
}

fn coin_triples_power() -> Outcome {
    let sc = scenario("independent:6:coins:2");
    let triples = power(&sc, StatKind::M(3), 60, 0.05, 1000, 1008);
    let total = power(&sc, StatKind::Total, 60, 0.05, 1000, 1009);
    (
        triples >= 0.99 && (0.07..=0.16).contains(&total),
        format!("m3 power {triples:.3}, total power {total:.3}"),
    )
}

fn coins_against_pairwise_null() -> Outcome {
    let sc = scenario("coins:2");
    let multi = power(&sc, StatKind::Multi, 100, 0.05, 1000, 1010);
    let pairs = power(&sc, StatKind::M(2), 100, 0.05, 1000, 1011);
    (
        multi >= 0.99 && pairs <= 0.08,
        format!("multi power {multi:.3}, m2 rejection rate {pairs:.3}"),
    )
}

fn structure_recovery() -> Outcome {
    let opts = DetectionOptions::new(Mode::Clustered, Decision::Consistent { beta: 0.5, c: 2.0 });
    let psis = [Psi::default()];
    let (mut exact, mut empty) = (0, 0);
    for seed in 0..100 {
        let mut rng = RngState::derive(1012, seed);
        let coins = multivariance_core::simulate::generate(&scenario("coins:2"), 2000, &mut rng).unwrap();
        let g = detect(&coins, &psis, &opts, &mut rng).unwrap();
        let deps: Vec<_> = g.dependency_nodes().collect();
        if deps.len() == 1 && deps[0].order == Some(3) && deps[0].members == [0, 1, 2] {
            exact += 1;
        }
        let independent = normal_dataset(&mut rng, 2000, &[1, 1, 1]);
        if detect(&independent, &psis, &opts, &mut rng).unwrap().dependency_nodes().count() == 0 {
            empty += 1;
        }
    }
    (exact >= 99 && empty >= 99, format!("exact graph {exact}/100, empty graph {empty}/100"))
}

fn chi_squared_numerics() -> Outcome {
    let q = chi2_1_quantile(0.95).unwrap();
    let mut worst = 0.0f64;
    for i in 1..1000 {
        let p = i as f64 / 1000.0;
        worst = worst.max((chi2_1_cdf(chi2_1_quantile(p).unwrap()).unwrap() - p).abs());
    }
    for k in 4..=12 {
        let p = 1.0 - 10f64.powi(-k);
        worst = worst.max((chi2_1_cdf(chi2_1_quantile(p).unwrap()).unwrap() - p).abs());
    }
    (
        (q - 3.841459).abs() <= 1e-5 && worst <= 1e-9,
        format!("quantile(0.95) = {q:.7}, round trip max error {worst:.2e}"),
    )
}

fn performance() -> Outcome {
    let mut rng = RngState::new(1013);
    let data = normal_dataset(&mut rng, 1000, &[1; 100]);
    let start = Instant::now();
    let s = streamed_statistics(&data, &[Psi::default()]).unwrap();
    let secs = start.elapsed().as_secs_f64();
    (
        secs < 2.0 && s.m3.is_some(),
        format!("multi, total, m2 and m3 for n = 100, N = 1000 in {secs:.3} s"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("m-multivariance fast formulas vs subset enumeration", m_multivariance_oracle),
        ("double centering vs -CBC", centering_oracle),
        ("Pearson and RV coefficient limits", pearson_oracle),
        ("invariance suite", invariance),
        ("null calibration", null_calibration),
        ("grouped normal power", grouped_normal_power),
        ("six parity-coin triples power", coin_triples_power),
        ("coins vs pairwise null", coins_against_pairwise_null),
        ("structure recovery", structure_recovery),
        ("chi-squared numerics", chi_squared_numerics),
        ("performance", performance),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(_) => (false, "panicked".to_string()),
        };
        if !ok {
            failed += 1;
        }
        println!("{} {:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
