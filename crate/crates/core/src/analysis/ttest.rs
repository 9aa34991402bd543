use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub dof: f64,
    /// Two-tailed p-value.
    pub p: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample (n − 1) variance; zero for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn sample_std(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

fn two_tailed(t: f64, dof: f64) -> Result<f64> {
    if t.is_infinite() {
        return Ok(0.0);
    }
    let dist = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Numerical(format!("t distribution: {e}")))?;
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

/// Student statistic for `diff / se`, with the degenerate zero-spread cases
/// resolved as t = 0, p = 1 (no difference) or |t| = ∞, p = 0.
fn statistic(diff: f64, se: f64, dof: f64) -> Result<TTest> {
    if se == 0.0 {
        if diff == 0.0 {
            return Ok(TTest {
                t: 0.0,
                dof,
                p: 1.0,
            });
        }
        return Ok(TTest {
            t: diff.signum() * f64::INFINITY,
            dof,
            p: 0.0,
        });
    }
    let t = diff / se;
    Ok(TTest {
        t,
        dof,
        p: two_tailed(t, dof)?,
    })
}

fn require(xs: &[f64], what: &str) -> Result<()> {
    if xs.len() < 2 {
        return Err(Error::Validation(format!(
            "{what} needs at least two values, got {}",
            xs.len()
        )));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation(format!(
            "{what} contains a non-finite value"
        )));
    }
    Ok(())
}

/// Welch's unequal-variance two-sample t-test.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TTest> {
    require(a, "first sample")?;
    require(b, "second sample")?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let se2 = va + vb;
    let dof = if se2 == 0.0 {
        na + nb - 2.0
    } else {
        se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0))
    };
    statistic(mean(a) - mean(b), se2.sqrt(), dof)
}

/// Paired t-test on per-index differences `a − b`.
pub fn paired_t(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    require(a, "first sample")?;
    require(b, "second sample")?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    statistic(mean(&d), sample_std(&d) / n.sqrt(), n - 1.0)
}
