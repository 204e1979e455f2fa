//! Building models, integration grids and site lists from arguments.

use std::path::Path;

use stablefield::{CovarianceFamily, CovarianceModel, DiscreteMeasureGrid, FieldModel, MaKernel, Method, Point};

use crate::{CovarianceName, Failure, KernelName, ModelArgs, ModelName};

/// Ornstein-Uhlenbeck kernels are truncated `10 / rate` below the sites.
const OU_TAIL: f64 = 10.0;

pub fn build_model(args: &ModelArgs, default: Option<ModelName>) -> Result<FieldModel<f64>, Failure> {
    let name = args
        .model
        .or(default)
        .ok_or_else(|| Failure::Config("--model is required".into()))?;
    let model = match name {
        ModelName::LevySheet => FieldModel::levy_sheet(args.alpha)?,
        ModelName::MovingAverage => {
            let kernel = match args.kernel {
                KernelName::Triangle => MaKernel::triangle(args.radius)?,
                KernelName::Epanechnikov => MaKernel::epanechnikov(args.radius)?,
                KernelName::Box => MaKernel::boxcar(args.radius)?,
            };
            FieldModel::moving_average(args.alpha, kernel)?
        }
        ModelName::OrnsteinUhlenbeck => FieldModel::ornstein_uhlenbeck(args.alpha, args.rate)?,
        ModelName::SubGaussian => {
            let family = match args.covariance {
                CovarianceName::Gaussian => CovarianceFamily::Gaussian,
                CovarianceName::Exponential => CovarianceFamily::Exponential,
            };
            FieldModel::sub_gaussian(args.alpha, CovarianceModel::new(family, args.sill, args.range)?)?
        }
    };
    Ok(model)
}

pub fn is_subgaussian(model: &FieldModel<f64>) -> bool {
    model.covariance().is_some()
}

/// Spatial dimension requested for kernel fields or implied by the model.
pub fn dimension(args: &ModelArgs, model: &FieldModel<f64>) -> Result<usize, Failure> {
    let ou = !is_subgaussian(model) && args.model == Some(ModelName::OrnsteinUhlenbeck);
    match (args.dim, ou) {
        (Some(1), _) | (None, true) => Ok(1),
        (Some(2), false) | (None, false) => Ok(2),
        (Some(2), true) => Err(Failure::Config("the Ornstein-Uhlenbeck process is one-dimensional".into())),
        (Some(d), _) => Err(Failure::Config(format!("--dim must be 1 or 2, got {d}"))),
    }
}

/// Integration grid covering the kernels of all `sites`; `None` for
/// sub-Gaussian models.
pub fn build_grid(
    args: &ModelArgs,
    model: &FieldModel<f64>,
    sites: &[Point<f64>],
    default_cells: usize,
) -> Result<Option<DiscreteMeasureGrid<f64>>, Failure> {
    if is_subgaussian(model) {
        return Ok(None);
    }
    let dim = sites.first().map_or(1, |p| p.dim());
    let lo = sites.iter().flat_map(|p| p.coords().to_vec()).fold(0.0, f64::min);
    let hi = sites.iter().flat_map(|p| p.coords().to_vec()).fold(1.0, f64::max);
    let (lower, upper) = match args.model {
        Some(ModelName::MovingAverage) => (lo - args.radius, hi + args.radius),
        Some(ModelName::OrnsteinUhlenbeck) => (lo - OU_TAIL / args.rate, hi),
        _ => (lo, hi),
    };
    let lower = args.domain_lower.unwrap_or(lower);
    let upper = args.domain_upper.unwrap_or(upper);
    let cells = args.cells.unwrap_or(default_cells);
    let corner = |v: f64| Point::from_slice(&vec![v; dim]);
    Ok(Some(DiscreteMeasureGrid::regular(
        corner(lower)?,
        corner(upper)?,
        &vec![cells; dim],
    )?))
}

/// `i/N` per axis for `i = 1..N`.
pub fn regular_sites(n: usize, dim: usize) -> Result<Vec<Point<f64>>, Failure> {
    if n < 1 {
        return Err(Failure::Config("grid size must be at least 1".into()));
    }
    Ok(match dim {
        1 => (1..=n).map(|i| Point::new1(i as f64 / n as f64)).collect(),
        _ => stablefield::experiments::evaluation_grid(n),
    })
}

/// `x[,y];x[,y];...`
pub fn parse_points(text: &str) -> Result<Vec<Point<f64>>, Failure> {
    let points = text
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let coords = s
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| Failure::Config(format!("`{c}` is not a number in `{s}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Point::from_slice(&coords)?)
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    check_points(points)
}

/// CSV with header `x` or `x,y`; a trailing `value` column is ignored.
pub fn read_points(path: &Path) -> Result<Vec<Point<f64>>, Failure> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Failure::Config(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let dim = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["x"] | ["x", "value"] => 1,
        ["x", "y"] | ["x", "y", "value"] => 2,
        _ => {
            return Err(Failure::Config(format!(
                "{}: expected header `x` or `x,y`, found `{}`",
                path.display(),
                header.join(",")
            )))
        }
    };
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Failure::Config(e.to_string()))?;
        let coords = rec
            .iter()
            .take(dim)
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| Failure::Config(format!("{}: `{c}` is not a number", path.display())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        points.push(Point::from_slice(&coords)?);
    }
    check_points(points)
}

fn check_points(points: Vec<Point<f64>>) -> Result<Vec<Point<f64>>, Failure> {
    let Some(first) = points.first() else {
        return Err(Failure::Config("no points given".into()));
    };
    if points.iter().any(|p| p.dim() != first.dim()) {
        return Err(Failure::Config("points mix dimensions".into()));
    }
    Ok(points)
}

pub fn parse_methods(names: &[String]) -> Result<Vec<Method>, Failure> {
    let mut out: Vec<Method> = Vec::new();
    for n in names {
        let m: Method = n
            .trim()
            .parse()
            .map_err(|e: stablefield::Error| Failure::Config(e.to_string()))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_points() {
        let p = parse_points("0.2,0.3; 0.5,0.5;").ok().unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[1].coords(), &[0.5, 0.5]);
        assert!(parse_points("0.2,0.3;0.5").is_err());
        assert!(parse_points("a").is_err());
        assert!(parse_points("").is_err());
    }
}
