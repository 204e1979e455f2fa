use std::fs;

use stablefield::experiments::{
    evaluation_grid, paper_sites, read_surface_csv, run_benchmark, summary_stats,
    write_surface_csv,
};
use stablefield::{BenchmarkConfig, FieldModel, Method, Point};

fn small(mut config: BenchmarkConfig<f64>, realizations: usize, grid: usize) -> BenchmarkConfig<f64> {
    config.realizations = realizations;
    config.grid = grid;
    config
}

fn abs_median(values: &[f64]) -> f64 {
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    summary_stats(&abs).unwrap().median
}

#[test]
fn summary_statistics_examples() {
    let s = summary_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    assert_eq!((s.median, s.mean), (3.0, 3.0));
    let c = summary_stats(&[-0.7; 5]).unwrap();
    for v in [c.q05, c.q25, c.median, c.mean, c.q75, c.q95] {
        assert_eq!(v, -0.7);
    }
    let sym = summary_stats(&[-3.0, 3.0, -0.5, 0.5, -1.25, 1.25]).unwrap();
    assert_eq!((sym.median, sym.mean), (0.0, 0.0));
    assert!(sym.q05 <= sym.q25 && sym.q25 <= sym.median && sym.median <= sym.q75 && sym.q75 <= sym.q95);
    assert!(summary_stats::<f64>(&[]).is_err());
}

#[test]
fn surface_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("surface.csv");
    let points = evaluation_grid::<f64>(2);
    let values = [0.1 + 0.2, -1.0 / 3.0, 7.0e-300, f64::MAX];
    write_surface_csv(&points, &values, fs::File::create(&path).unwrap()).unwrap();
    let (p, v): (Vec<Point<f64>>, Vec<f64>) = read_surface_csv(fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(p, points);
    let bits = |x: &[f64]| x.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&v), bits(&values));
}

#[test]
fn invalid_configurations_are_rejected() {
    let base = BenchmarkConfig::<f64>::levy_default().unwrap();
    assert!(small(base.clone(), 0, 10).validate().is_err());
    assert!(run_benchmark(&small(base.clone(), 0, 10)).is_err());
    assert!(small(base.clone(), 1, 1).validate().is_err());
    let mut ml = base.clone();
    ml.methods = vec![Method::Ml];
    assert!(ml.validate().is_err());
    let mut ou = base;
    ou.model = FieldModel::ornstein_uhlenbeck(1.5, 1.0).unwrap();
    assert!(ou.validate().is_err());
}

#[test]
fn same_seed_same_summary() {
    let config = small(BenchmarkConfig::<f64>::subgaussian_default().unwrap(), 6, 8);
    let csv = |c: &BenchmarkConfig<f64>| {
        let mut buf = Vec::new();
        run_benchmark(c).unwrap().write_summary_csv(&mut buf).unwrap();
        buf
    };
    let first = csv(&config);
    assert_eq!(first, csv(&config));
    let mut other = config.clone();
    other.seed += 1;
    assert_ne!(first, csv(&other));
}

#[test]
fn deviations_vanish_at_the_sites() {
    let mut sub = small(BenchmarkConfig::<f64>::subgaussian_default().unwrap(), 4, 10);
    sub.methods = vec![Method::Lsl, Method::Col, Method::Mcl, Method::Ml, Method::Cs];
    let levy = small(BenchmarkConfig::<f64>::levy_default().unwrap(), 4, 10);
    for config in [sub, levy] {
        let report = run_benchmark(&config).unwrap();
        let points = config.evaluation_points();
        let at_sites: Vec<usize> = paper_sites::<f64>()
            .iter()
            .map(|s| points.iter().position(|p| p.coincides(s, 1e-12)).expect("site on the grid"))
            .collect();
        for r in &report.results {
            assert!(r.max_site_deviation.unwrap() <= 1e-10, "{}", r.method);
            for rep in 0..config.realizations {
                for &g in &at_sites {
                    assert!(r.deviations[rep * points.len() + g].abs() <= 1e-10);
                }
            }
        }
    }
}

#[test]
fn lsl_deviations_are_no_wider_than_mcl() {
    for config in [
        small(BenchmarkConfig::<f64>::levy_default().unwrap(), 40, 10),
        small(BenchmarkConfig::<f64>::subgaussian_default().unwrap(), 40, 10),
    ] {
        let report = run_benchmark(&config).unwrap();
        let lsl = abs_median(&report.result(Method::Lsl).unwrap().deviations);
        let mcl = abs_median(&report.result(Method::Mcl).unwrap().deviations);
        assert!(lsl <= mcl * 1.05, "{}: LSL {lsl} vs MCL {mcl}", report.model);
    }
}

#[test]
fn outputs_and_panels() {
    let config = small(BenchmarkConfig::<f64>::levy_default().unwrap(), 3, 6);
    let report = run_benchmark(&config).unwrap();

    let mut buf = Vec::new();
    report.write_deviations_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "realization,x,y,lsl,col,mcl");
    assert_eq!(text.lines().count(), 1 + 3 * 36);

    let table = report.summary_table();
    assert!(table.contains("5%-Quantile") && table.contains("LSL"));

    let dir = tempfile::tempdir().unwrap();
    let written = report.export_panels(dir.path(), "panels").unwrap();
    assert_eq!(written.len(), 5);
    let script = fs::read_to_string(dir.path().join("panels.gp")).unwrap();
    assert!(script.contains("set multiplot layout 1,4"));
    for name in ["realization", "lsl", "col", "mcl"] {
        assert!(script.contains(&format!("panels_{name}.csv")));
        let (p, v): (Vec<Point<f64>>, Vec<f64>) =
            read_surface_csv(fs::File::open(dir.path().join(format!("panels_{name}.csv"))).unwrap()).unwrap();
        assert_eq!((p.len(), v.len()), (36, 36));
    }
}
