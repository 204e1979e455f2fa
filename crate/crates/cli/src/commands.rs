use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use rayon::prelude::*;
use stablefield::covariation::{covariation_matrix, full_dimensionality_check};
use stablefield::experiments::{paper_sites, plot_script, run_benchmark, write_surface_csv};
use stablefield::field::{
    read_observations_csv, write_realization_csv, GaussianFieldSimulator, KernelFieldSimulator,
    SubGaussianFieldSimulator,
};
use stablefield::predictors::{write_weights_csv, ConditionalSimulator};
use stablefield::{
    BenchmarkConfig, Extrapolator, FieldModel, FieldRealization, Method, ModelKind, Point,
    RngStream, SiteSystem, SolverOptions,
};

use crate::model::{
    build_grid, build_model, dimension, is_subgaussian, parse_methods, parse_points, read_points,
    regular_sites,
};
use crate::{
    BenchmarkArgs, CovariationArgs, Failure, ModelName, OutputArgs, PredictArgs, SimulateArgs,
    SolverArgs,
};

/// Output paths, all checked before any computation starts.
struct Outputs<'a> {
    args: &'a OutputArgs,
}

impl<'a> Outputs<'a> {
    fn prepare(args: &'a OutputArgs, names: &[String]) -> Result<Self, Failure> {
        std::fs::create_dir_all(&args.output_dir)?;
        if !args.overwrite {
            for n in names {
                let p = args.output_dir.join(n);
                if p.exists() {
                    return Err(Failure::Config(format!(
                        "{} already exists (pass --overwrite to replace it)",
                        p.display()
                    )));
                }
            }
        }
        Ok(Self { args })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.args.output_dir.join(name)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.path(name);
        let mut opts = OpenOptions::new();
        opts.write(true);
        if self.args.overwrite {
            opts.create(true).truncate(true);
        } else {
            opts.create_new(true);
        }
        let file = opts
            .open(&path)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        Ok(BufWriter::new(file))
    }
}

fn one_source(
    inline: &Option<String>,
    file: &Option<PathBuf>,
    what: &str,
) -> Result<Option<Vec<Point<f64>>>, Failure> {
    match (inline, file) {
        (Some(s), None) => Ok(Some(parse_points(s)?)),
        (None, Some(p)) => Ok(Some(read_points(p)?)),
        (None, None) => Ok(None),
        _ => Err(Failure::Config(format!("give either --{what} or --{what}-file, not both"))),
    }
}

fn solver_options(s: &SolverArgs) -> SolverOptions<f64> {
    SolverOptions {
        gradient_tol: s.gradient_tol,
        max_iterations: s.max_iterations,
        warm_start: true,
        snap_tol: s.snap_tol,
        min_rcond: s.min_rcond,
        jitter: s.jitter,
    }
}

enum Simulator {
    Kernel(KernelFieldSimulator<f64>),
    Gaussian(GaussianFieldSimulator<f64>),
    SubGaussian(SubGaussianFieldSimulator<f64>),
}

impl Simulator {
    fn simulate(&self, rng: &mut RngStream) -> stablefield::Result<FieldRealization<f64>> {
        match self {
            Simulator::Kernel(s) => s.simulate(rng),
            Simulator::Gaussian(s) => Ok(s.simulate(rng)),
            Simulator::SubGaussian(s) => s.simulate(rng),
        }
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let model = build_model(&a.model, None)?;
    let dim = dimension(&a.model, &model)?;
    let sites = match one_source(&a.sites, &a.sites_file, "sites")? {
        Some(s) => s,
        None => regular_sites(a.grid, dim)?,
    };
    if a.count < 1 {
        return Err(Failure::Config("--count must be at least 1".into()));
    }
    let grid = build_grid(&a.model, &model, &sites, a.grid)?;
    let names: Vec<String> = if a.count == 1 {
        vec![format!("{}.csv", a.prefix)]
    } else {
        (0..a.count).map(|k| format!("{}_{k}.csv", a.prefix)).collect()
    };
    let plot = a.plot.then(|| format!("{}.gp", a.prefix));
    let mut all_names = names.clone();
    all_names.extend(plot.clone());
    let out = Outputs::prepare(&a.output, &all_names)?;

    let sim = match (model.kind(), grid) {
        (ModelKind::SubGaussian(cov), _) if model.alpha() == 2.0 => {
            Simulator::Gaussian(GaussianFieldSimulator::new(cov, &sites, a.jitter)?)
        }
        (ModelKind::SubGaussian(cov), _) => {
            Simulator::SubGaussian(SubGaussianFieldSimulator::new(cov, model.alpha(), &sites, a.jitter)?)
        }
        (_, Some(g)) => Simulator::Kernel(KernelFieldSimulator::new(&model, &g, &sites)?),
        (_, None) => unreachable!("kernel models always get a grid"),
    };
    let realizations = (0..a.count as u64)
        .into_par_iter()
        .map(|k| sim.simulate(&mut RngStream::new(a.seed, k)))
        .collect::<stablefield::Result<Vec<_>>>()?;
    for (r, name) in realizations.iter().zip(&names) {
        let mut w = out.create(name)?;
        write_realization_csv(r, &mut w)?;
        w.flush()?;
        println!("wrote {}", out.path(name).display());
    }
    if let Some(script) = plot {
        let body = if dim == 2 {
            plot_script(&[(model.name(), names[0].clone())], &format!("{}.png", a.prefix))
        } else {
            format!(
                "set terminal pngcairo size 800,420\nset output '{}.png'\nset datafile separator ','\n\
                 unset key\nset title '{}'\nplot '{}' every ::1 using 1:2 with lines\n",
                a.prefix,
                model.name(),
                names[0]
            )
        };
        let mut w = out.create(&script)?;
        w.write_all(body.as_bytes())?;
        w.flush()?;
        println!("wrote {}", out.path(&script).display());
    }
    Ok(())
}

fn write_values(points: &[Point<f64>], values: &[f64], w: impl Write) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| Failure::Config(e.to_string());
    let header: &[&str] = if points.first().is_some_and(|p| p.dim() == 1) {
        &["x", "value"]
    } else {
        &["x", "y", "value"]
    };
    w.write_record(header).map_err(csv_err)?;
    for (p, v) in points.iter().zip(values) {
        let mut rec: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
        rec.push(v.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn check_methods(methods: &[Method], model: &FieldModel<f64>) -> Result<(), Failure> {
    for m in methods {
        if m.needs_subgaussian() && !is_subgaussian(model) {
            return Err(Failure::Config(format!(
                "method {m} is only available for sub-Gaussian models, not {}",
                model.name()
            )));
        }
    }
    Ok(())
}

pub fn predict(a: &PredictArgs) -> Result<(), Failure> {
    let model = build_model(&a.model, None)?;
    let obs_path = a
        .observations
        .as_deref()
        .ok_or_else(|| Failure::Config("--observations is required".into()))?;
    let file = File::open(obs_path).map_err(|e| Failure::Config(format!("{}: {e}", obs_path.display())))?;
    let obs = read_observations_csv::<f64, _>(file)?;
    let Some(dim) = obs.dim() else {
        return Err(Failure::Config(format!("{} has no observations", obs_path.display())));
    };
    let targets = match (one_source(&a.targets, &a.targets_file, "targets")?, a.target_grid) {
        (Some(t), None) => t,
        (None, Some(n)) => regular_sites(n, dim)?,
        (None, None) => return Err(Failure::Config("give --targets, --targets-file or --target-grid".into())),
        (Some(_), Some(_)) => return Err(Failure::Config("--target-grid cannot be combined with explicit targets".into())),
    };
    if targets[0].dim() != dim {
        return Err(Failure::Config(format!(
            "targets are {}-dimensional but observations are {dim}-dimensional",
            targets[0].dim()
        )));
    }
    let methods = if a.methods.is_empty() {
        if is_subgaussian(&model) {
            vec![Method::Lsl, Method::Col, Method::Mcl, Method::Ml]
        } else {
            vec![Method::Lsl, Method::Col, Method::Mcl]
        }
    } else {
        parse_methods(&a.methods)?
    };
    check_methods(&methods, &model)?;
    let mut names = Vec::new();
    for m in &methods {
        if *m != Method::Cs {
            names.push(format!("weights_{m}.csv"));
        }
        names.push(format!("predictions_{m}.csv"));
    }
    let out = Outputs::prepare(&a.output, &names)?;

    let mut all_sites = obs.sites.clone();
    all_sites.extend_from_slice(&targets);
    let grid = build_grid(&a.model, &model, &all_sites, if dim == 1 { 200 } else { 50 })?;
    let options = solver_options(&a.solver);
    let ex = Extrapolator::new(&model, grid.as_ref(), &obs.sites, options)?;
    for m in methods {
        let tagged = |e: stablefield::Error| match Failure::from(e) {
            Failure::Config(s) => Failure::Config(format!("{m}: {s}")),
            Failure::Numerical(s) => Failure::Numerical(format!("{m}: {s}")),
        };
        let values = if m == Method::Cs {
            let sim = ConditionalSimulator::new(&model, &obs.sites, &targets, a.solver.jitter).map_err(tagged)?;
            sim.simulate(&obs.values, None, &mut RngStream::new(a.seed, 0))
                .map_err(tagged)?
                .values
        } else {
            let weights = ex.weight_field(&targets, m).map_err(tagged)?;
            let name = format!("weights_{m}.csv");
            let mut w = out.create(&name)?;
            write_weights_csv(&weights, &mut w)?;
            w.flush()?;
            println!("wrote {}", out.path(&name).display());
            weights
                .iter()
                .map(|pw| pw.predict(&obs.values))
                .collect::<stablefield::Result<Vec<_>>>()?
        };
        let name = format!("predictions_{m}.csv");
        write_values(&targets, &values, out.create(&name)?)?;
        println!("wrote {}", out.path(&name).display());
    }
    Ok(())
}

pub fn covariation(a: &CovariationArgs) -> Result<(), Failure> {
    let model = build_model(&a.model, None)?;
    let sites = one_source(&a.sites, &a.sites_file, "sites")?
        .ok_or_else(|| Failure::Config("give --sites or --sites-file".into()))?;
    let name = "covariation.csv".to_string();
    let out = Outputs::prepare(&a.output, std::slice::from_ref(&name))?;
    let default_cells = if sites[0].dim() == 1 { 200 } else { 50 };
    let grid = build_grid(&a.model, &model, &sites, default_cells)?;
    let sys = SiteSystem::new(&model, grid.as_ref(), &sites, sites[0])?;
    let k = covariation_matrix(&sys);
    let n = sites.len();
    let mut w = csv::Writer::from_writer(out.create(&name)?);
    let csv_err = |e: csv::Error| Failure::Config(e.to_string());
    let mut header: Vec<String> = if sites[0].dim() == 1 {
        vec!["x".into()]
    } else {
        vec!["x".into(), "y".into()]
    };
    header.extend((1..=n).map(|j| format!("c_{j}")));
    w.write_record(&header).map_err(csv_err)?;
    for (i, s) in sites.iter().enumerate() {
        let mut rec: Vec<String> = s.coords().iter().map(|c| c.to_string()).collect();
        // Row i holds [X(s_i), X(s_j)]_alpha for j = 1..n.
        rec.extend((0..n).map(|j| k[(j, i)].to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    let dims = full_dimensionality_check(&sys);
    println!(
        "full_dimensional={} singular_value_ratio={:e} threshold={:e}",
        dims.full, dims.ratio, dims.threshold
    );
    println!("wrote {}", out.path(&name).display());
    Ok(())
}

pub fn benchmark(a: &BenchmarkArgs) -> Result<(), Failure> {
    let model = build_model(&a.model, Some(ModelName::SubGaussian))?;
    let methods = if a.methods.is_empty() {
        if is_subgaussian(&model) {
            vec![Method::Lsl, Method::Mcl, Method::Cs]
        } else {
            vec![Method::Lsl, Method::Col, Method::Mcl]
        }
    } else {
        parse_methods(&a.methods)?
    };
    let sites = match &a.sites {
        Some(s) => parse_points(s)?,
        None => paper_sites(),
    };
    let config = BenchmarkConfig {
        model,
        realizations: a.realizations,
        grid: a.grid,
        integration_cells: a.model.cells,
        sites,
        methods,
        seed: a.seed,
        jitter: a.solver.jitter,
        options: solver_options(&a.solver),
    };
    config.validate()?;
    let mut names: Vec<String> = ["summary.csv", "summary.txt", "deviations.csv"]
        .map(String::from)
        .to_vec();
    if a.panels {
        names.push("panels_realization.csv".into());
        names.extend(config.methods.iter().map(|m| format!("panels_{m}.csv")));
        names.push("panels.gp".into());
    }
    let out = Outputs::prepare(&a.output, &names)?;
    let report = run_benchmark(&config)?;

    let mut w = out.create("summary.csv")?;
    report.write_summary_csv(&mut w)?;
    w.flush()?;
    let table = report.summary_table();
    let mut w = out.create("summary.txt")?;
    w.write_all(table.as_bytes())?;
    w.flush()?;
    let mut w = out.create("deviations.csv")?;
    report.write_deviations_csv(&mut w)?;
    w.flush()?;
    if a.panels {
        export_panels(&out, &report)?;
    }
    println!("{table}");
    for r in &report.results {
        if let Some(d) = r.max_site_deviation {
            println!("{}: largest deviation at observation sites {d:e}", r.method);
        }
    }
    println!(
        "{} realizations of {} in {:.1} s; outputs in {}",
        report.realizations,
        report.model,
        report.elapsed.as_secs_f64(),
        out.path("").display()
    );
    Ok(())
}

fn export_panels(out: &Outputs<'_>, report: &stablefield::BenchmarkReport<f64>) -> Result<(), Failure> {
    let mut entries = Vec::new();
    let mut surfaces = vec![("realization".to_string(), &report.panels.truth)];
    surfaces.extend(report.panels.predictions.iter().map(|(m, v)| (m.name().to_string(), v)));
    for (name, values) in surfaces {
        let file = format!("panels_{name}.csv");
        let mut w = out.create(&file)?;
        write_surface_csv(&report.points, values, &mut w)?;
        w.flush()?;
        let title = if name == "realization" {
            format!("{} realization", report.model)
        } else {
            format!("{} extrapolation", name.to_uppercase())
        };
        entries.push((title, file));
    }
    let mut w = out.create("panels.gp")?;
    w.write_all(plot_script(&entries, "panels.png").as_bytes())?;
    w.flush()?;
    Ok(())
}
