use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::field::simulate::FieldRealization;
use crate::point::Point;
use crate::scalar::Scalar;

/// Observed values at sites, as read from a realization-style CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct Observations<T> {
    pub sites: Vec<Point<T>>,
    pub values: Vec<T>,
}

impl<T: Scalar> Observations<T> {
    pub fn new(sites: Vec<Point<T>>, values: Vec<T>) -> Result<Self> {
        if sites.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: sites.len(),
                found: values.len(),
            });
        }
        Ok(Self { sites, values })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.sites.first().map(|s| s.dim())
    }
}

/// Writes `# key=value` metadata lines, then `x[,y],value` rows.
pub fn write_realization_csv<T: Scalar, W: Write>(
    realization: &FieldRealization<T>,
    mut out: W,
) -> Result<()> {
    let p = &realization.provenance;
    writeln!(out, "# model={}", p.model)?;
    writeln!(out, "# alpha={}", p.alpha)?;
    writeln!(out, "# seed={}", p.seed)?;
    writeln!(out, "# stream={}", p.stream)?;
    if let Some(g) = &p.grid {
        writeln!(out, "# grid={g}")?;
    }
    if let Some(a) = realization.mixing {
        writeln!(out, "# mixing={a}")?;
    }
    let dim = realization.sites.first().map_or(2, |s| s.dim());
    let mut w = csv::Writer::from_writer(out);
    if dim == 1 {
        w.write_record(["x", "value"])?;
    } else {
        w.write_record(["x", "y", "value"])?;
    }
    for (s, v) in realization.sites.iter().zip(&realization.values) {
        let mut rec: Vec<String> = s.coords().iter().map(|c| c.to_string()).collect();
        rec.push(v.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `x[,y],value` rows, skipping `#` lines. The header decides the
/// dimension.
pub fn read_observations_csv<T: Scalar, R: Read>(input: R) -> Result<Observations<T>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = r.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    let dim = match names.as_slice() {
        ["x", "value"] => 1,
        ["x", "y", "value"] => 2,
        _ => {
            return Err(Error::Parse(format!(
                "expected header `x,value` or `x,y,value`, found `{}`",
                names.join(",")
            )))
        }
    };
    let mut sites = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let nums: Vec<T> = rec
            .iter()
            .map(|f| {
                f.parse::<T>()
                    .map_err(|_| Error::Parse(format!("row {}: `{f}` is not a number", line + 1)))
            })
            .collect::<Result<_>>()?;
        if nums.len() != dim + 1 {
            return Err(Error::Parse(format!(
                "row {}: expected {} fields, found {}",
                line + 1,
                dim + 1,
                nums.len()
            )));
        }
        sites.push(Point::from_slice(&nums[..dim])?);
        values.push(nums[dim]);
    }
    Observations::new(sites, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::simulate::Provenance;

    #[test]
    fn round_trip_is_bit_exact() {
        let r = FieldRealization {
            sites: vec![Point::new2(0.1, 0.2), Point::new2(1.0 / 3.0, 0.7)],
            values: vec![-1.234567890123e-7, std::f64::consts::PI],
            provenance: Provenance {
                model: "levy-sheet".into(),
                alpha: 1.5,
                seed: 7,
                stream: 0,
                grid: None,
            },
            measure: None,
            mixing: None,
            coverage_deficit: None,
        };
        let mut buf = Vec::new();
        write_realization_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# model=levy-sheet\n"));
        assert!(text.contains("x,y,value\n"));
        let obs: Observations<f64> = read_observations_csv(buf.as_slice()).unwrap();
        assert_eq!(obs.sites, r.sites);
        assert_eq!(obs.values, r.values);
    }

    #[test]
    fn one_dimensional_and_bad_headers() {
        let obs: Observations<f64> = read_observations_csv("x,value\n1,2.5\n".as_bytes()).unwrap();
        assert_eq!(obs.dim(), Some(1));
        assert_eq!(obs.values, vec![2.5]);
        assert!(read_observations_csv::<f64, _>("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_observations_csv::<f64, _>("x,value\n1,zz\n".as_bytes()).is_err());
    }
}
