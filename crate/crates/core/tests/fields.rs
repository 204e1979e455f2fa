use proptest::prelude::*;
use stablefield::covariation::sigma_from_flom;
use stablefield::field::{
    eval_kernel, read_observations_csv, simulate_measure, write_realization_csv, GaussianFieldSimulator,
    KernelFieldSimulator, SubGaussianFieldSimulator, COVERAGE_TOLERANCE,
};
use stablefield::stable::sample_stable;
use stablefield::{
    CovarianceModel, DiscreteMeasureGrid, FieldModel, MaKernel, Point, RngStream, StableParams,
};

fn unit_interval(cells: usize) -> DiscreteMeasureGrid<f64> {
    DiscreteMeasureGrid::regular(Point::new1(0.0), Point::new1(1.0), &[cells]).unwrap()
}

fn sign_correlation(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a.signum() * b.signum()).sum::<f64>() / x.len() as f64
}

fn sample_cov(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0)
}

/// Columns of `reps` realizations at each site.
fn columns(reps: Vec<Vec<f64>>, sites: usize) -> Vec<Vec<f64>> {
    (0..sites).map(|j| reps.iter().map(|r| r[j]).collect()).collect()
}

#[test]
fn kernel_examples() {
    let levy = FieldModel::levy_sheet(1.5).unwrap();
    let t = Point::new2(0.5, 0.5);
    assert_eq!(eval_kernel(&levy, &t, &Point::new2(0.2, 0.2)).unwrap(), 1.0);
    assert_eq!(eval_kernel(&levy, &t, &Point::new2(0.6, 0.2)).unwrap(), 0.0);
    let ou = FieldModel::ornstein_uhlenbeck(1.5, 2.0).unwrap();
    let v = eval_kernel(&ou, &Point::new1(1.0), &Point::new1(0.5)).unwrap();
    assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    let ma = FieldModel::moving_average(1.5, MaKernel::triangle(0.2).unwrap()).unwrap();
    assert_eq!(eval_kernel(&ma, &Point::new1(0.5), &Point::new1(0.8)).unwrap(), 0.0);
    let v: f64 = eval_kernel(&ma, &Point::new1(0.5), &Point::new1(0.6)).unwrap();
    assert!((v - 0.5).abs() < 1e-12);
}

#[test]
fn single_cell_measure_is_one_stable_draw() {
    let g = unit_interval(1);
    let m = simulate_measure(&g, 1.5, &mut RngStream::new(4, 2)).unwrap();
    let direct = sample_stable(&StableParams::symmetric(1.5, 1.0).unwrap(), &mut RngStream::new(4, 2));
    assert_eq!(m, vec![direct]);
}

#[test]
fn disjoint_cells_are_independent() {
    let g = unit_interval(2);
    let mut rng = RngStream::new(10, 0);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for _ in 0..10_000 {
        let m = simulate_measure(&g, 1.5, &mut rng).unwrap();
        a.push(m[0]);
        b.push(m[1]);
    }
    assert!(sign_correlation(&a, &b).abs() < 0.03);
}

#[test]
fn gaussian_cell_scale_follows_volume() {
    let g = DiscreteMeasureGrid::regular(Point::new1(0.0), Point::new1(16.0), &[1]).unwrap();
    let mut rng = RngStream::new(12, 0);
    let x: Vec<f64> = (0..100_000).map(|_| simulate_measure(&g, 2.0, &mut rng).unwrap()[0]).collect();
    let var = sample_cov(&x, &x);
    assert!((var / 32.0 - 1.0).abs() < 0.05, "variance {var}");
}

#[test]
fn levy_motion_scale_and_independent_increments() {
    let model = FieldModel::levy_sheet(1.5).unwrap();
    let sim = KernelFieldSimulator::new(&model, &unit_interval(8), &[Point::new1(0.75), Point::new1(1.0)]).unwrap();
    let mut rng = RngStream::new(21, 0);
    let reps: Vec<Vec<f64>> = (0..10_000).map(|_| sim.simulate(&mut rng).unwrap().values).collect();
    let cols = columns(reps, 2);
    let sigma = sigma_from_flom(&cols[1], 1.5, 0.5).unwrap();
    assert!((sigma - 1.0).abs() < 0.05, "scale of X(1): {sigma}");
    let inc: Vec<f64> = cols[1].iter().zip(&cols[0]).map(|(a, b)| a - b).collect();
    assert!(sign_correlation(&cols[0], &inc).abs() < 0.03);
}

#[test]
fn levy_sheet_scale_is_stable_under_refinement() {
    let model = FieldModel::levy_sheet(1.5).unwrap();
    let scale = |cells: usize, seed: u64| {
        let g = DiscreteMeasureGrid::unit(2, cells).unwrap();
        let sim = KernelFieldSimulator::new(&model, &g, &[Point::new2(1.0, 1.0)]).unwrap();
        let mut rng = RngStream::new(seed, 0);
        let x: Vec<f64> = (0..20_000).map(|_| sim.simulate(&mut rng).unwrap().values[0]).collect();
        sigma_from_flom(&x, 1.5, 0.5).unwrap()
    };
    let (coarse, fine) = (scale(4, 1), scale(8, 2));
    assert!((coarse - fine).abs() < 0.05, "{coarse} vs {fine}");
}

#[test]
fn levy_sheet_is_zero_at_origin() {
    let model = FieldModel::levy_sheet(1.5).unwrap();
    let g = DiscreteMeasureGrid::unit(2, 10).unwrap();
    let sim = KernelFieldSimulator::new(&model, &g, &[Point::new2(0.0, 0.0)]).unwrap();
    let r = sim.simulate(&mut RngStream::new(1, 0)).unwrap();
    assert_eq!(r.values, vec![0.0]);
}

#[test]
fn moving_average_is_stationary() {
    let model = FieldModel::moving_average(1.5, MaKernel::epanechnikov(0.1).unwrap()).unwrap();
    let g = DiscreteMeasureGrid::regular(Point::new1(-0.1), Point::new1(1.1), &[240]).unwrap();
    let sites = [Point::new1(0.2), Point::new1(0.75)];
    let sim = KernelFieldSimulator::new(&model, &g, &sites).unwrap();
    assert!(sim.coverage_deficit() < 1e-12);
    let mut rng = RngStream::new(30, 0);
    let reps: Vec<Vec<f64>> = (0..20_000).map(|_| sim.simulate(&mut rng).unwrap().values).collect();
    let cols = columns(reps, 2);
    let a = sigma_from_flom(&cols[0], 1.5, 0.5).unwrap();
    let b = sigma_from_flom(&cols[1], 1.5, 0.5).unwrap();
    assert!((a / b - 1.0).abs() < 0.05, "{a} vs {b}");
}

#[test]
fn truncated_ornstein_uhlenbeck_reports_deficit() {
    let model = FieldModel::ornstein_uhlenbeck(1.5, 1.0).unwrap();
    let short = DiscreteMeasureGrid::regular(Point::new1(0.0), Point::new1(1.0), &[50]).unwrap();
    let sim = KernelFieldSimulator::new(&model, &short, &[Point::new1(1.0)]).unwrap();
    assert!(sim.coverage_deficit() > COVERAGE_TOLERANCE);
    let r = sim.simulate(&mut RngStream::new(1, 0)).unwrap();
    assert_eq!(r.coverage_deficit, Some(sim.coverage_deficit()));
    let long = DiscreteMeasureGrid::regular(Point::new1(-12.0), Point::new1(1.0), &[1300]).unwrap();
    let sim = KernelFieldSimulator::new(&model, &long, &[Point::new1(1.0)]).unwrap();
    assert!(sim.coverage_deficit() < COVERAGE_TOLERANCE);
}

#[test]
fn gaussian_field_second_moments() {
    let cov = CovarianceModel::gaussian(7.0, 0.1).unwrap();
    let sites = [Point::new2(0.2, 0.2), Point::new2(0.3, 0.2), Point::new2(0.9, 0.9)];
    let sim = GaussianFieldSimulator::new(&cov, &sites, 1e-10).unwrap();
    let mut rng = RngStream::new(40, 0);
    let reps: Vec<Vec<f64>> = (0..100_000).map(|_| sim.draw(&mut rng)).collect();
    let cols = columns(reps, 3);
    let var = sample_cov(&cols[0], &cols[0]);
    assert!((var / 7.0 - 1.0).abs() < 0.05, "variance {var}");
    let lag = sample_cov(&cols[0], &cols[1]);
    let expect = 7.0 * (-1.0f64).exp();
    assert!((lag / expect - 1.0).abs() < 0.1, "lag covariance {lag} vs {expect}");
    let far = sample_cov(&cols[0], &cols[2]) / 7.0;
    assert!(far.abs() < 0.03);
    for i in 0..3 {
        for j in 0..3 {
            let c = sample_cov(&cols[i], &cols[j]);
            let truth = cov.between(&sites[i], &sites[j]);
            assert!((c - truth).abs() <= 0.1 * truth.max(0.07 * 7.0), "({i},{j}) {c} vs {truth}");
        }
    }
}

#[test]
fn subgaussian_marginal_scale_and_symmetry() {
    let cov = CovarianceModel::gaussian(7.0, 0.1).unwrap();
    let sim = SubGaussianFieldSimulator::new(&cov, 1.5, &[Point::new2(0.5, 0.5)], 1e-10).unwrap();
    let mut rng = RngStream::new(50, 0);
    let mut x = Vec::with_capacity(100_000);
    for _ in 0..100_000 {
        let r = sim.simulate(&mut rng).unwrap();
        assert!(r.mixing.unwrap() > 0.0);
        x.push(r.values[0]);
    }
    let sigma = sigma_from_flom(&x, 1.5, 0.5).unwrap();
    let expect = 3.5f64.sqrt();
    assert!((sigma / expect - 1.0).abs() < 0.1, "scale {sigma} vs {expect}");
    let positive = x.iter().filter(|&&v| v > 0.0).count() as f64 / x.len() as f64;
    assert!((0.48..=0.52).contains(&positive));
}

#[test]
fn gaussian_simulation_needs_jitter_for_duplicates() {
    let cov = CovarianceModel::gaussian(7.0, 0.1).unwrap();
    let sites = [Point::new2(0.5, 0.5), Point::new2(0.5, 0.5)];
    assert!(GaussianFieldSimulator::new(&cov, &sites, 0.0).is_err());
    assert!(GaussianFieldSimulator::new(&cov, &sites, 1e-10).is_ok());
}

#[test]
fn realization_csv_round_trip() {
    let model = FieldModel::levy_sheet(1.5).unwrap();
    let g = DiscreteMeasureGrid::unit(2, 4).unwrap();
    let sites: Vec<Point<f64>> = (1..=2)
        .flat_map(|i| (1..=2).map(move |j| Point::new2(i as f64 / 2.0, j as f64 / 2.0)))
        .collect();
    let r = KernelFieldSimulator::new(&model, &g, &sites).unwrap().simulate(&mut RngStream::new(3, 9)).unwrap();
    let mut buf = Vec::new();
    write_realization_csv(&r, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("# model=levy-sheet\n# alpha=1.5\n# seed=3\n# stream=9\n"));
    let back = read_observations_csv::<f64, _>(&buf[..]).unwrap();
    assert_eq!(back.sites, r.sites);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back.values), bits(&r.values));
}

proptest! {
    #[test]
    fn grid_cells_tile_the_box(
        lo in -2.0f64..1.0, w in 0.1f64..3.0, h in 0.1f64..3.0, nx in 1usize..30, ny in 1usize..30,
    ) {
        let g = DiscreteMeasureGrid::regular(Point::new2(lo, lo), Point::new2(lo + w, lo + h), &[nx, ny]).unwrap();
        prop_assert_eq!(g.len(), nx * ny);
        prop_assert!(g.volumes().iter().all(|&v| v > 0.0));
        let total: f64 = g.volumes().iter().sum();
        prop_assert!((total - w * h).abs() < 1e-12 * (w * h).max(1.0));
        for c in g.centers() {
            prop_assert!(c.x() > lo && c.x() < lo + w && c.y() > lo && c.y() < lo + h);
        }
    }

    #[test]
    fn kernel_simulation_is_deterministic(seed in 0u64..10_000, stream in 0u64..100) {
        let model = FieldModel::levy_sheet(1.7).unwrap();
        let g = DiscreteMeasureGrid::unit(2, 6).unwrap();
        let sim = KernelFieldSimulator::new(&model, &g, &[Point::new2(0.5, 0.7), Point::new2(1.0, 0.2)]).unwrap();
        let a = sim.simulate(&mut RngStream::new(seed, stream)).unwrap();
        let b = sim.simulate(&mut RngStream::new(seed, stream)).unwrap();
        prop_assert_eq!(a.values, b.values);
    }
}
