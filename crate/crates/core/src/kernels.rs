//! Distance metric and the kernel functions used for neighbor weighting.
//!
//! Gaussian and Matérn kernels are functions of Euclidean distance in
//! bandwidth-scaled units. Linear and polynomial kernels are functions of
//! the inner product and can come out non-positive; weighted averages need
//! strictly positive weights, so [`normalized_weights`] shifts those two
//! families by the minimum value over the neighborhood plus a floor of
//! 1e-12 before normalizing. The shift preserves the ordering the kernel
//! induces within the neighborhood.

use crate::error::{Error, Result};

/// Matérn smoothness parameter. Only the three half-integer orders with
/// closed forms are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaternNu {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl MaternNu {
    pub fn value(self) -> f64 {
        match self {
            MaternNu::Half => 0.5,
            MaternNu::ThreeHalves => 1.5,
            MaternNu::FiveHalves => 2.5,
        }
    }

    pub fn from_value(nu: f64) -> Result<Self> {
        if nu == 0.5 {
            Ok(MaternNu::Half)
        } else if nu == 1.5 {
            Ok(MaternNu::ThreeHalves)
        } else if nu == 2.5 {
            Ok(MaternNu::FiveHalves)
        } else {
            Err(Error::invalid(format!(
                "matern nu must be one of 0.5, 1.5, 2.5; got {nu}"
            )))
        }
    }
}

/// Kernel family. `Matern` defaults to ν = 1.5 elsewhere in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Gaussian,
    Matern { nu: MaternNu },
    Linear,
    Polynomial { degree: u32 },
}

impl KernelFamily {
    /// Whether weights of this family need the shift-to-positive treatment.
    pub fn needs_shift(self) -> bool {
        matches!(self, KernelFamily::Linear | KernelFamily::Polynomial { .. })
    }

    /// Whether this family reads the bandwidth at all.
    pub fn uses_bandwidth(self) -> bool {
        matches!(self, KernelFamily::Gaussian | KernelFamily::Matern { .. })
    }
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelFamily::Gaussian => write!(f, "gaussian"),
            KernelFamily::Matern { nu } => write!(f, "matern({})", nu.value()),
            KernelFamily::Linear => write!(f, "linear"),
            KernelFamily::Polynomial { degree } => write!(f, "polynomial({degree})"),
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    /// Accepts the same syntax `Display` produces: `gaussian`, `linear`,
    /// `matern(0.5|1.5|2.5)`, `polynomial(<degree>)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "gaussian" => return Ok(KernelFamily::Gaussian),
            "linear" => return Ok(KernelFamily::Linear),
            _ => {}
        }
        if let Some(inner) = s.strip_prefix("matern(").and_then(|r| r.strip_suffix(')')) {
            let nu: f64 = inner.trim().parse().map_err(|_| {
                Error::invalid(format!("matern parameter '{inner}' is not a number"))
            })?;
            return Ok(KernelFamily::Matern {
                nu: MaternNu::from_value(nu)?,
            });
        }
        if let Some(inner) = s
            .strip_prefix("polynomial(")
            .and_then(|r| r.strip_suffix(')'))
        {
            let degree: u32 = inner.trim().parse().map_err(|_| {
                Error::invalid(format!(
                    "polynomial degree '{inner}' is not a positive integer"
                ))
            })?;
            if degree < 1 {
                return Err(Error::invalid("polynomial degree must be at least 1"));
            }
            return Ok(KernelFamily::Polynomial { degree });
        }
        Err(Error::invalid(format!(
            "unknown kernel '{s}'; expected gaussian, linear, matern(0.5|1.5|2.5), or polynomial(<degree>)"
        )))
    }
}

/// How the bandwidth is chosen when a neighborhood is resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthPolicy {
    /// Median of the strictly positive neighborhood distances,
    /// recomputed per query.
    MedianHeuristic,
    Fixed(f64),
}

/// A kernel family plus its bandwidth policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: BandwidthPolicy,
}

impl KernelSpec {
    pub fn gaussian_median() -> Self {
        KernelSpec {
            family: KernelFamily::Gaussian,
            bandwidth: BandwidthPolicy::MedianHeuristic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let BandwidthPolicy::Fixed(v) = self.bandwidth {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!(
                    "fixed bandwidth must be positive, got {v}"
                )));
            }
        }
        if let KernelFamily::Polynomial { degree } = self.family {
            if degree < 1 {
                return Err(Error::invalid("polynomial degree must be at least 1"));
            }
        }
        Ok(())
    }
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::invalid("vectors must be non-empty"));
    }
    for &x in a.iter().chain(b) {
        if !x.is_finite() {
            return Err(Error::invalid(format!("non-finite entry: {x}")));
        }
    }
    Ok(())
}

/// Euclidean distance between two equal-dimensional vectors.
///
/// # Errors
///
/// Rejects dimension mismatches, empty vectors, and non-finite entries.
pub fn distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sq.sqrt())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Raw kernel value for one pair of points.
///
/// Gaussian and Matérn values are strictly positive (floored at 1e-300 so
/// extreme distances cannot underflow a later normalization). Linear and
/// polynomial values are the raw inner-product forms; the neighborhood
/// shift that makes them positive is applied in [`normalized_weights`].
///
/// # Errors
///
/// Rejects a non-positive bandwidth for the distance-based families and
/// any invalid vector pair.
pub fn kernel_value(family: KernelFamily, a: &[f64], b: &[f64], bandwidth: f64) -> Result<f64> {
    check_pair(a, b)?;
    if family.uses_bandwidth() && !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::invalid(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let value = match family {
        KernelFamily::Gaussian => {
            let d = distance(a, b)?;
            (-d * d / (2.0 * bandwidth * bandwidth)).exp().max(1e-300)
        }
        KernelFamily::Matern { nu } => {
            let t = distance(a, b)? / bandwidth;
            let v = match nu {
                MaternNu::Half => (-t).exp(),
                MaternNu::ThreeHalves => {
                    let s = 3.0f64.sqrt() * t;
                    (1.0 + s) * (-s).exp()
                }
                MaternNu::FiveHalves => {
                    let s = 5.0f64.sqrt() * t;
                    (1.0 + s + 5.0 * t * t / 3.0) * (-s).exp()
                }
            };
            v.max(1e-300)
        }
        KernelFamily::Linear => dot(a, b),
        KernelFamily::Polynomial { degree } => {
            if degree < 1 {
                return Err(Error::invalid("polynomial degree must be at least 1"));
            }
            (1.0 + dot(a, b)).powi(degree as i32)
        }
    };
    if !value.is_finite() {
        return Err(Error::invalid(format!(
            "kernel value is not finite: {value}"
        )));
    }
    Ok(value)
}

/// Median of the strictly positive entries, taking the lower median for
/// even counts. Zero distances (duplicate points) are excluded.
///
/// # Errors
///
/// Errors when no strictly positive distance exists.
pub fn median_bandwidth(distances: &[f64]) -> Result<f64> {
    let mut positive: Vec<f64> = distances
        .iter()
        .copied()
        .filter(|&d| d.is_finite() && d > 0.0)
        .collect();
    if positive.is_empty() {
        return Err(Error::DegenerateDistances);
    }
    positive.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = positive.len();
    let idx = if n % 2 == 1 { n / 2 } else { n / 2 - 1 };
    Ok(positive[idx])
}

/// Turns raw per-neighbor kernel values into strictly positive weights
/// normalized to sum 1. Linear/polynomial families are first shifted by
/// the neighborhood minimum plus a 1e-12 floor.
pub fn normalized_weights(family: KernelFamily, raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::invalid("cannot normalize an empty weight set"));
    }
    let mut w = raw.to_vec();
    if family.needs_shift() {
        let min = w.iter().copied().fold(f64::INFINITY, f64::min);
        for x in &mut w {
            *x = *x - min + 1e-12;
        }
    }
    let sum: f64 = w.iter().sum();
    if !(sum.is_finite() && sum > 0.0) {
        return Err(Error::invalid(format!(
            "weight normalizer is not positive: {sum}"
        )));
    }
    for x in &mut w {
        *x /= sum;
    }
    Ok(w)
}
