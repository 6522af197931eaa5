//! Learning-rate schedules for iterative re-routing.

use crate::error::{Error, Result};

/// Step-size rule evaluated per descent step.
///
/// `rate(step, step_count)` takes the zero-based step index and the total
/// number of steps in the run. The cosine schedule is anchored at both
/// ends: step 0 yields exactly `lr_max` and step `step_count - 1` yields
/// exactly `lr_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleSpec {
    Cosine {
        lr_max: f64,
        lr_min: f64,
    },
    StepDecay {
        lr_init: f64,
        factor: f64,
        every: usize,
    },
    Fixed {
        lr: f64,
    },
}

impl ScheduleSpec {
    /// Cosine from 1e-2 down to 1e-5, the default for gradient strategies.
    pub fn default_cosine() -> Self {
        ScheduleSpec::Cosine {
            lr_max: 1e-2,
            lr_min: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "{what} must be positive and finite, got {v}"
                )))
            }
        };
        match *self {
            ScheduleSpec::Cosine { lr_max, lr_min } => {
                pos(lr_max, "lr_max")?;
                pos(lr_min, "lr_min")?;
                if lr_min > lr_max {
                    return Err(Error::invalid(format!(
                        "cosine schedule requires lr_min <= lr_max, got {lr_min} > {lr_max}"
                    )));
                }
            }
            ScheduleSpec::StepDecay {
                lr_init,
                factor,
                every,
            } => {
                pos(lr_init, "lr_init")?;
                if !(factor.is_finite() && factor > 0.0 && factor <= 1.0) {
                    return Err(Error::invalid(format!(
                        "step decay factor must lie in (0, 1], got {factor}"
                    )));
                }
                if every == 0 {
                    return Err(Error::invalid("step decay interval must be >= 1"));
                }
            }
            ScheduleSpec::Fixed { lr } => pos(lr, "lr")?,
        }
        Ok(())
    }

    /// Step size at `step` of a `step_count`-step run.
    ///
    /// # Panics
    ///
    /// Panics if `step >= step_count`; callers iterate `0..step_count`.
    pub fn rate(&self, step: usize, step_count: usize) -> f64 {
        assert!(
            step < step_count,
            "step {step} out of range for {step_count} steps"
        );
        match *self {
            ScheduleSpec::Cosine { lr_max, lr_min } => {
                if step_count == 1 {
                    return lr_max;
                }
                let t = step as f64 / (step_count - 1) as f64;
                lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (std::f64::consts::PI * t).cos())
            }
            ScheduleSpec::StepDecay {
                lr_init,
                factor,
                every,
            } => lr_init * factor.powi((step / every) as i32),
            ScheduleSpec::Fixed { lr } => lr,
        }
    }
}

impl std::fmt::Display for ScheduleSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            ScheduleSpec::Cosine { lr_max, lr_min } => write!(f, "cosine({lr_max},{lr_min})"),
            ScheduleSpec::StepDecay {
                lr_init,
                factor,
                every,
            } => {
                write!(f, "step_decay({lr_init},{factor},{every})")
            }
            ScheduleSpec::Fixed { lr } => write!(f, "fixed({lr})"),
        }
    }
}

impl std::str::FromStr for ScheduleSpec {
    type Err = Error;

    /// Accepts the same syntax `Display` produces: `cosine(lr_max,lr_min)`,
    /// `fixed(lr)`, `step_decay(lr_init,factor,every)`. The result is
    /// validated.
    fn from_str(s: &str) -> Result<Self> {
        fn args<'a>(s: &'a str, name: &str) -> Option<Vec<&'a str>> {
            s.strip_prefix(name)?
                .strip_prefix('(')?
                .strip_suffix(')')
                .map(|inner| inner.split(',').map(str::trim).collect())
        }
        fn num(tok: &str, what: &str) -> Result<f64> {
            tok.parse()
                .map_err(|_| Error::invalid(format!("{what} '{tok}' is not a number")))
        }
        let s = s.trim();
        let spec = if let Some(a) = args(s, "cosine") {
            match a.as_slice() {
                [max, min] => ScheduleSpec::Cosine {
                    lr_max: num(max, "lr_max")?,
                    lr_min: num(min, "lr_min")?,
                },
                _ => {
                    return Err(Error::invalid(
                        "cosine takes two arguments: cosine(lr_max,lr_min)",
                    ))
                }
            }
        } else if let Some(a) = args(s, "step_decay") {
            match a.as_slice() {
                [init, factor, every] => ScheduleSpec::StepDecay {
                    lr_init: num(init, "lr_init")?,
                    factor: num(factor, "factor")?,
                    every: every.parse().map_err(|_| {
                        Error::invalid(format!(
                            "decay interval '{every}' is not a positive integer"
                        ))
                    })?,
                },
                _ => {
                    return Err(Error::invalid(
                        "step_decay takes three arguments: step_decay(lr_init,factor,every)",
                    ))
                }
            }
        } else if let Some(a) = args(s, "fixed") {
            match a.as_slice() {
                [lr] => ScheduleSpec::Fixed { lr: num(lr, "lr")? },
                _ => return Err(Error::invalid("fixed takes one argument: fixed(lr)")),
            }
        } else {
            return Err(Error::invalid(format!(
                "unknown schedule '{s}'; expected cosine(..), fixed(..), or step_decay(..)"
            )));
        };
        spec.validate()?;
        Ok(spec)
    }
}
