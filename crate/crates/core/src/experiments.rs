//! Monte Carlo comparison of the predictors on a regular evaluation grid.
//!
//! Each realization is simulated on the grid plus the observation sites; the
//! predictor weights do not depend on the realization and are computed once
//! per method. Deviations `X(g) - X^(g)` are pooled over grid points and
//! realizations.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::field::{
    read_observations_csv, CovarianceModel, DiscreteMeasureGrid, FieldModel,
    GaussianFieldSimulator, KernelFieldSimulator, ModelKind,
};
use crate::linalg::Matrix;
use crate::point::{find_coincident, Point};
use crate::predictors::{ConditionalSimulator, Extrapolator, Method, SolverOptions};
use crate::rng::RngStream;
use crate::scalar::{dot, Scalar};
use crate::stable::sample_subgaussian_a;

const SITE_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct BenchmarkConfig<T> {
    pub model: FieldModel<T>,
    pub realizations: usize,
    /// Evaluation grid `(i/N, j/N)` for `i, j = 1..N`.
    pub grid: usize,
    /// Cells per axis of the integration grid on `[0, 1]^2` for kernel
    /// models; defaults to `grid`.
    pub integration_cells: Option<usize>,
    pub sites: Vec<Point<T>>,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// Covariance jitter relative to `C(0)`.
    pub jitter: T,
    pub options: SolverOptions<T>,
}

/// The nine sites `(0.2, 0.2), (0.2, 0.5), ..., (0.8, 0.8)`.
pub fn paper_sites<T: Scalar>() -> Vec<Point<T>> {
    let coords = [T::lit(0.2), T::lit(0.5), T::lit(0.8)];
    coords
        .iter()
        .flat_map(|&x| coords.iter().map(move |&y| Point::new2(x, y)))
        .collect()
}

impl<T: Scalar> BenchmarkConfig<T> {
    /// Sub-Gaussian field with `C(h) = 7 exp(-(h/0.1)^2)` at `alpha = 1.5`,
    /// compared through LSL, MCL and conditional simulation.
    pub fn subgaussian_default() -> Result<Self> {
        let cov = CovarianceModel::gaussian(T::lit(7.0), T::lit(0.1))?;
        Ok(Self::with_model(
            FieldModel::sub_gaussian(T::lit(1.5), cov)?,
            vec![Method::Lsl, Method::Mcl, Method::Cs],
        ))
    }

    /// Lévy sheet on the unit square at `alpha = 1.5`, compared through LSL,
    /// COL and MCL.
    pub fn levy_default() -> Result<Self> {
        Ok(Self::with_model(
            FieldModel::levy_sheet(T::lit(1.5))?,
            vec![Method::Lsl, Method::Col, Method::Mcl],
        ))
    }

    fn with_model(model: FieldModel<T>, methods: Vec<Method>) -> Self {
        Self {
            model,
            realizations: 200,
            grid: 50,
            integration_cells: None,
            sites: paper_sites(),
            methods,
            seed: 2024,
            jitter: T::lit(crate::field::DEFAULT_JITTER),
            options: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations < 1 {
            return Err(invalid("realizations", self.realizations as f64, "at least 1"));
        }
        if self.grid < 2 {
            return Err(invalid("grid", self.grid as f64, "at least 2"));
        }
        if let Some(c) = self.integration_cells {
            if c < 1 {
                return Err(invalid("integration_cells", c as f64, "at least 1"));
            }
        }
        if self.sites.is_empty() {
            return Err(Error::Domain("at least one observation site is needed".into()));
        }
        if self.sites.iter().any(|s| s.dim() != 2) {
            return Err(Error::Domain("benchmark sites must be two-dimensional".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Domain("no methods selected".into()));
        }
        let subgaussian = matches!(self.model.kind(), ModelKind::SubGaussian(_));
        if let ModelKind::OrnsteinUhlenbeck { .. } = self.model.kind() {
            return Err(Error::UnsupportedModel(
                "the benchmark runs on the unit square; the Ornstein-Uhlenbeck process is one-dimensional"
                    .into(),
            ));
        }
        for m in &self.methods {
            if m.needs_subgaussian() && !subgaussian {
                return Err(Error::UnsupportedModel(format!(
                    "{m} needs a sub-Gaussian model, got {}",
                    self.model.name()
                )));
            }
        }
        Ok(())
    }

    pub fn evaluation_points(&self) -> Vec<Point<T>> {
        evaluation_grid(self.grid)
    }
}

/// `(i/N, j/N)` for `i, j = 1..N`, `j` varying fastest.
pub fn evaluation_grid<T: Scalar>(n: usize) -> Vec<Point<T>> {
    let nn = T::from_usize(n).unwrap();
    (1..=n)
        .flat_map(|i| {
            (1..=n).map(move |j| {
                Point::new2(T::from_usize(i).unwrap() / nn, T::from_usize(j).unwrap() / nn)
            })
        })
        .collect()
}

/// The six statistics of the deviation tables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeviationSummary<T> {
    pub q05: T,
    pub q25: T,
    pub median: T,
    pub mean: T,
    pub q75: T,
    pub q95: T,
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (n - 1) p`, the "type 7" convention) on sorted data.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], p: T) -> T {
    let n = sorted.len();
    let h = p * T::from_usize(n - 1).unwrap();
    let lo = h.floor().to_usize().unwrap_or(0).min(n - 1);
    let hi = (lo + 1).min(n - 1);
    let frac = h - T::from_usize(lo).unwrap();
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn summary_stats<T: Scalar>(values: &[T]) -> Result<DeviationSummary<T>> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("deviations contain NaN".into()));
    }
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = values.iter().copied().sum::<T>() / T::from_usize(values.len()).unwrap();
    Ok(DeviationSummary {
        q05: quantile_sorted(&s, T::lit(0.05)),
        q25: quantile_sorted(&s, T::lit(0.25)),
        median: quantile_sorted(&s, T::lit(0.5)),
        mean,
        q75: quantile_sorted(&s, T::lit(0.75)),
        q95: quantile_sorted(&s, T::lit(0.95)),
    })
}

#[derive(Clone, Debug)]
pub struct MethodResult<T> {
    pub method: Method,
    pub summary: DeviationSummary<T>,
    /// Deviations, realization-major, grid points in evaluation order.
    pub deviations: Vec<T>,
    /// Largest `|deviation|` at grid points that coincide with a site.
    pub max_site_deviation: Option<T>,
}

/// Surfaces of the first realization, for plotting.
#[derive(Clone, Debug)]
pub struct Panels<T> {
    pub truth: Vec<T>,
    pub predictions: Vec<(Method, Vec<T>)>,
}

#[derive(Clone, Debug)]
pub struct BenchmarkReport<T> {
    pub model: String,
    pub grid: usize,
    pub realizations: usize,
    pub points: Vec<Point<T>>,
    pub results: Vec<MethodResult<T>>,
    pub panels: Panels<T>,
    pub elapsed: Duration,
}

enum FieldSource<T> {
    Kernel(KernelFieldSimulator<T>),
    Gaussian {
        alpha: T,
        sim: Arc<GaussianFieldSimulator<T>>,
    },
}

impl<T: Scalar> FieldSource<T> {
    fn draw(&self, rng: &mut RngStream) -> Result<Vec<T>> {
        match self {
            FieldSource::Kernel(k) => Ok(k.simulate(rng)?.values),
            FieldSource::Gaussian { alpha, sim } => {
                let root = if *alpha < T::lit(2.0) {
                    sample_subgaussian_a(*alpha, rng)?.sqrt()
                } else {
                    T::one()
                };
                Ok(sim.draw(rng).into_iter().map(|g| root * g).collect())
            }
        }
    }
}

enum Predictor<T> {
    Linear(Matrix<T>),
    Conditional(ConditionalSimulator<T>),
}

pub fn run_benchmark<T: Scalar>(config: &BenchmarkConfig<T>) -> Result<BenchmarkReport<T>> {
    config.validate()?;
    let started = Instant::now();
    let points = config.evaluation_points();
    let m = points.len();
    // Simulated sites: the evaluation grid, then sites not on it.
    let mut all = points.clone();
    for s in &config.sites {
        if find_coincident(&all, s, T::lit(SITE_TOL)).is_none() {
            all.push(*s);
        }
    }
    let site_index: Vec<usize> = config
        .sites
        .iter()
        .map(|s| find_coincident(&all, s, T::lit(SITE_TOL)).expect("sites were added"))
        .collect();
    let alpha = config.model.alpha();
    let (source, integration) = match config.model.kind() {
        ModelKind::SubGaussian(cov) => {
            let sim = Arc::new(GaussianFieldSimulator::new(cov, &all, config.jitter)?);
            (FieldSource::Gaussian { alpha, sim }, None)
        }
        _ => {
            let cells = config.integration_cells.unwrap_or(config.grid);
            let grid = DiscreteMeasureGrid::unit(2, cells)?;
            let sim = KernelFieldSimulator::new(&config.model, &grid, &all)?;
            (FieldSource::Kernel(sim), Some(grid))
        }
    };
    let extrapolator = Extrapolator::new(
        &config.model,
        integration.as_ref(),
        &config.sites,
        config.options,
    )?;
    let mut predictors = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let p = match method {
            Method::Cs => {
                let FieldSource::Gaussian { sim, .. } = &source else {
                    unreachable!("validated: cs needs a sub-Gaussian model")
                };
                Predictor::Conditional(ConditionalSimulator::with_simulator(
                    Arc::clone(sim),
                    m,
                    alpha,
                    &config.sites,
                    config.jitter,
                )?)
            }
            _ => {
                let w = extrapolator.weight_field(&points, method)?;
                let n = config.sites.len();
                Predictor::Linear(Matrix::from_fn(m, n, |g, i| w[g].lambda[i]))
            }
        };
        predictors.push(p);
    }
    let on_site: Vec<usize> = (0..m)
        .filter(|&g| find_coincident(&config.sites, &points[g], T::lit(SITE_TOL)).is_some())
        .collect();

    // Per realization: truth on the grid and one prediction surface per method.
    let per_realization: Vec<Result<(Vec<T>, Vec<Vec<T>>)>> = (0..config.realizations)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::new(config.seed, 2 * r as u64);
            let values = source.draw(&mut rng)?;
            let observed: Vec<T> = site_index.iter().map(|&i| values[i]).collect();
            let truth = values[..m].to_vec();
            let mut surfaces = Vec::with_capacity(predictors.len());
            for p in &predictors {
                let surface = match p {
                    Predictor::Linear(w) => (0..m).map(|g| dot(w.row(g), &observed)).collect(),
                    Predictor::Conditional(cs) => {
                        let mut crng = RngStream::new(config.seed, 2 * r as u64 + 1);
                        cs.simulate(&observed, None, &mut crng)?.values
                    }
                };
                surfaces.push(surface);
            }
            Ok((truth, surfaces))
        })
        .collect();
    let mut deviations: Vec<Vec<T>> = vec![Vec::with_capacity(m * config.realizations); predictors.len()];
    let mut panels = None;
    for (r, res) in per_realization.into_iter().enumerate() {
        let (truth, surfaces) = res.map_err(|e| realization_error(r, e))?;
        for (d, s) in deviations.iter_mut().zip(&surfaces) {
            d.extend(truth.iter().zip(s).map(|(&x, &p)| x - p));
        }
        if panels.is_none() {
            panels = Some(Panels {
                truth,
                predictions: config.methods.iter().copied().zip(surfaces).collect(),
            });
        }
    }
    let mut results = Vec::with_capacity(predictors.len());
    for (&method, dev) in config.methods.iter().zip(deviations) {
        let max_site_deviation = (!on_site.is_empty()).then(|| {
            (0..config.realizations)
                .flat_map(|r| on_site.iter().map(move |&g| r * m + g))
                .fold(T::zero(), |acc, i| acc.max(dev[i].abs()))
        });
        results.push(MethodResult {
            method,
            summary: summary_stats(&dev)?,
            deviations: dev,
            max_site_deviation,
        });
    }
    Ok(BenchmarkReport {
        model: config.model.name(),
        grid: config.grid,
        realizations: config.realizations,
        points,
        results,
        panels: panels.expect("at least one realization"),
        elapsed: started.elapsed(),
    })
}

fn realization_error(index: usize, e: Error) -> Error {
    Error::Realization {
        index,
        source: Box::new(e),
    }
}

const SUMMARY_COLUMNS: [&str; 6] = ["q05", "q25", "median", "mean", "q75", "q95"];

fn summary_values<T: Scalar>(s: &DeviationSummary<T>) -> [T; 6] {
    [s.q05, s.q25, s.median, s.mean, s.q75, s.q95]
}

impl<T: Scalar> BenchmarkReport<T> {
    pub fn result(&self, method: Method) -> Option<&MethodResult<T>> {
        self.results.iter().find(|r| r.method == method)
    }

    /// `method,q05,q25,median,mean,q75,q95`.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["method"];
        header.extend(SUMMARY_COLUMNS);
        w.write_record(&header)?;
        for r in &self.results {
            let mut rec = vec![r.method.to_string()];
            rec.extend(summary_values(&r.summary).iter().map(|v| format!("{:.6}", v.as_f64())));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Aligned text table with the same content as the summary CSV.
    pub fn summary_table(&self) -> String {
        let labels = ["5%-Quantile", "1st Quartile", "Median", "Mean", "3rd Quartile", "95%-Quantile"];
        let mut s = format!("{:<8}", "Method");
        for l in labels {
            let _ = write!(s, "{l:>14}");
        }
        s.push('\n');
        for r in &self.results {
            let _ = write!(s, "{:<8}", r.method.name().to_uppercase());
            for v in summary_values(&r.summary) {
                let _ = write!(s, "{:>14.4}", v.as_f64());
            }
            s.push('\n');
        }
        s
    }

    /// `realization,x,y,<method>...`, one row per realization and grid point.
    pub fn write_deviations_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["realization".to_string(), "x".into(), "y".into()];
        header.extend(self.results.iter().map(|r| r.method.to_string()));
        w.write_record(&header)?;
        let m = self.points.len();
        for r in 0..self.realizations {
            for (g, p) in self.points.iter().enumerate() {
                let mut rec = vec![r.to_string(), p.x().to_string(), p.y().to_string()];
                rec.extend(self.results.iter().map(|res| res.deviations[r * m + g].to_string()));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Surface CSVs for the first realization and its predictions plus a
    /// gnuplot script laying them out side by side.
    pub fn export_panels(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        let mut panels = vec![("realization".to_string(), &self.panels.truth)];
        for (m, s) in &self.panels.predictions {
            panels.push((m.name().to_string(), s));
        }
        let mut written = Vec::new();
        let mut entries = Vec::new();
        for (name, values) in panels {
            let file = format!("{stem}_{name}.csv");
            let path = dir.join(&file);
            write_surface_csv(&self.points, values, std::fs::File::create(&path)?)?;
            written.push(path);
            let title = if name == "realization" {
                format!("{} realization", self.model)
            } else {
                format!("{} extrapolation", name.to_uppercase())
            };
            entries.push((title, file));
        }
        let script = dir.join(format!("{stem}.gp"));
        std::fs::write(&script, plot_script(&entries, &format!("{stem}.png")))?;
        written.push(script);
        Ok(written)
    }
}

/// `x,y,value` rows with full round-trip precision.
pub fn write_surface_csv<T: Scalar, W: Write>(points: &[Point<T>], values: &[T], out: W) -> Result<()> {
    if points.len() != values.len() {
        return Err(Error::LengthMismatch {
            expected: points.len(),
            found: values.len(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "value"])?;
    for (p, v) in points.iter().zip(values) {
        w.write_record([p.x().to_string(), p.y().to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_surface_csv<T: Scalar, R: Read>(input: R) -> Result<(Vec<Point<T>>, Vec<T>)> {
    let obs = read_observations_csv(input)?;
    Ok((obs.sites, obs.values))
}

/// gnuplot commands drawing one heatmap per `(title, csv file)` in a single
/// row, written to `output`.
pub fn plot_script(panels: &[(String, String)], output: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set terminal pngcairo size {},420", 420 * panels.len().max(1));
    let _ = writeln!(s, "set output '{output}'");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set size ratio -1");
    let _ = writeln!(s, "set xrange [0:1]\nset yrange [0:1]");
    let _ = writeln!(s, "set palette rgbformulae 33,13,10");
    let _ = writeln!(s, "unset key");
    let _ = writeln!(s, "set multiplot layout 1,{}", panels.len().max(1));
    for (title, file) in panels {
        let _ = writeln!(s, "set title '{title}'");
        let _ = writeln!(s, "plot '{file}' every ::1 using 1:2:3 with image");
    }
    let _ = writeln!(s, "unset multiplot");
    s
}
