use nalgebra::Complex;
use proptest::prelude::*;
use rand::Rng;

use radcom::covdesign::{min_capacity_multiplier, solve_weighted_eip, verify_solution, water_capacity, ProblemData, SolverOptions};
use radcom::harness::{csv_string, parse_csv, ExperimentSpec, Method};
use radcom::interference::{eip_scheme1, tip, weight_schedule, NoiseCovSchedule, WeightMethod};
use radcom::mc::shrink;
use radcom::num::{frob, singular_values, CMat, RMat, Svd};
use radcom::rng::{complex_gaussian, stream};
use radcom::samplingopt::{hungarian, mask_singular_values, optimize_mask};
use radcom::{SamplingMask, ScenarioConfig};

fn gaussian(rows: usize, cols: usize, seed: u64) -> CMat<f64> {
    let mut rng = stream(seed, "prop");
    CMat::from_fn(rows, cols, |_, _| complex_gaussian::<f64, _>(&mut rng, 1.0))
}

fn mask_from_bits(rows: usize, cols: usize, seed: u64) -> SamplingMask {
    let mut rng = stream(seed, "bits");
    let bits: Vec<bool> = (0..rows * cols).map(|_| rng.random::<f64>() < 0.5).collect();
    SamplingMask::from_fn(rows, cols, |i, j| bits[i + rows * j])
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = stream(seed, "perm");
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.random_range(0..=i));
    }
    p
}

fn brute_force(c: &RMat<f64>) -> f64 {
    fn go(c: &RMat<f64>, row: usize, used: &mut Vec<bool>) -> f64 {
        if row == c.nrows() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for j in 0..c.ncols() {
            if !used[j] {
                used[j] = true;
                best = best.min(c[(row, j)] + go(c, row + 1, used));
                used[j] = false;
            }
        }
        best
    }
    go(c, 0, &mut vec![false; c.ncols()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svd_reconstructs(rows in 1usize..12, cols in 1usize..12, rank in 1usize..5, seed in any::<u64>()) {
        let k = rank.min(rows).min(cols);
        let x = gaussian(rows, k, seed) * gaussian(k, cols, seed ^ 1);
        let svd = Svd::new(&x);
        prop_assert!(frob(&(&x - svd.recompose())) <= 1e-11 * frob(&x));
        prop_assert!(svd.values.windows(2).all(|w| w[0] >= w[1]));
        let top = svd.values[0];
        prop_assert_eq!(svd.values.iter().filter(|&&s| s > 1e-9 * top).count(), k);
    }

    #[test]
    fn shrink_subtracts_threshold(n in 2usize..8, seed in any::<u64>(), t in 0.0f64..2.0) {
        let x = gaussian(n, n + 1, seed);
        let before = singular_values(&x);
        let (y, rank) = shrink(&x, t);
        let after = singular_values(&y);
        prop_assert_eq!(rank, before.iter().filter(|&&s| s > t).count());
        for (b, a) in before.iter().zip(&after) {
            prop_assert!((a - (b - t).max(0.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn hungarian_is_optimal(n in 1usize..7, seed in any::<u64>()) {
        let mut rng = stream(seed, "cost");
        let c = RMat::from_fn(n, n, |_, _| rng.random_range(-50..50) as f64);
        let a = hungarian(&c).unwrap();
        prop_assert_eq!(a.cost, brute_force(&c));
        let mut seen = a.permutation.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn permutations_keep_mask_spectrum(rows in 2usize..9, cols in 2usize..9, seed in any::<u64>()) {
        let m = mask_from_bits(rows, cols, seed);
        let p = m.permute_rows(&shuffled(rows, seed)).permute_cols(&shuffled(cols, seed ^ 7));
        prop_assert_eq!(p.ones_count(), m.ones_count());
        for (a, b) in mask_singular_values(&m).iter().zip(mask_singular_values(&p).iter()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn mask_optimization_never_worsens(rows in 2usize..7, cols in 2usize..7, seed in any::<u64>()) {
        let m = mask_from_bits(rows, cols, seed);
        let mut rng = stream(seed, "q");
        let q = RMat::from_fn(rows, cols, |_, _| rng.random::<f64>());
        let out = optimize_mask(&m, &q, 1e-12).unwrap();
        prop_assert!(out.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(out.mask.row_sums().iter().sum::<usize>(), m.ones_count());
    }

    #[test]
    fn water_level_is_tight(n in 1usize..40, l in 1usize..8, c in 0.1f64..10.0, seed in any::<u64>()) {
        let mut rng = stream(seed, "gains");
        let sigmas: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-1.5..1.5))).collect();
        let level = min_capacity_multiplier(&sigmas, c, l).unwrap();
        let g: Vec<f64> = sigmas.iter().map(|s| s * s).collect();
        let target = c * l as f64;
        prop_assert!(water_capacity(&g, level) >= target);
        prop_assert!(water_capacity(&g, level * (1.0 - 1e-6)) < target);
    }
}

#[test]
fn eip_bounded_by_tip() {
    let mut rng = stream(3, "eip");
    for _ in 0..50 {
        let (m, n, l) = (rng.random_range(1..6), rng.random_range(1..5), rng.random_range(1..7));
        let g2 = gaussian(m, n, rng.random());
        let mats = (0..l)
            .map(|_| {
                let a = gaussian(n, n, rng.random());
                &a * a.adjoint()
            })
            .collect();
        let sched = radcom::interference::CovarianceSchedule::new(mats).unwrap();
        let mask = mask_from_bits(m, l, rng.random());
        let e = eip_scheme1(&mask, &g2, &sched).unwrap();
        let t = tip(&sched, &g2).unwrap();
        assert!(e >= -1e-12 && e <= t * (1.0 + 1e-12));
    }
}

#[test]
fn designs_meet_constraints_on_random_links() {
    let mut rng = stream(4, "links");
    for trial in 0..20 {
        let (m_rc, m_tc, m_rr, l) = (3, 4, 5, 6);
        let h = gaussian(m_rc, m_tc, rng.random());
        let g2 = gaussian(m_rr, m_tc, rng.random()) * Complex::new(0.3, 0.0);
        let noise = NoiseCovSchedule::white(l, m_rc, 0.01);
        let mask = mask_from_bits(m_rr, l, trial);
        let (p_t, c) = (l as f64, 6.0);
        let problem = ProblemData { h: &h, g2: &g2, noise: &noise, p_t, c };
        let opts = SolverOptions::default();
        let w_tip = weight_schedule::<f64>(WeightMethod::Tip, l, m_rr, None, None).unwrap();
        let w_eip = weight_schedule::<f64>(WeightMethod::EipI, l, m_rr, Some(&mask), None).unwrap();
        let noncoop = solve_weighted_eip(&w_tip, &h, &g2, &noise, p_t, c, &opts).unwrap();
        let coop = solve_weighted_eip(&w_eip, &h, &g2, &noise, p_t, c, &opts).unwrap();
        for sol in [&noncoop, &coop] {
            let rep = verify_solution(sol, &problem, None).unwrap();
            assert!(rep.psd && rep.power_feasible);
            assert!(rep.capacity_gap.abs() < 1e-3, "gap {}", rep.capacity_gap);
        }
        let rep = verify_solution(&coop, &problem, Some((&w_eip, &noncoop))).unwrap();
        assert!(rep.ordering.unwrap().holds);
    }
}

#[test]
fn csv_round_trip() {
    let mut spec = ExperimentSpec::new(ScenarioConfig::scenario1());
    spec.methods = vec![Method::Selfish, Method::Coop];
    spec.seeds = vec![0, 1];
    let rows = radcom::harness::run_compare(&spec).unwrap();
    let text = csv_string(&rows);
    let back = parse_csv(&text).unwrap();
    assert_eq!(back.len(), rows.len());
    assert_eq!(csv_string(&back), text);
}
