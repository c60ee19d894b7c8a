use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scalar function of time on `[0, tau]`, used for ramp parameters and energy tracks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Schedule {
    /// `start + (end - start) t / tau`.
    Linear { start: f64, end: f64 },
    /// `start + (end - start) (1 - cos(pi t / tau)) / 2`.
    Cosine { start: f64, end: f64 },
    /// Values on a uniform grid over `[0, tau]`, interpolated linearly.
    /// Rates are central differences at the nodes, interpolated linearly (approximate).
    Sampled { values: Vec<f64> },
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            Schedule::Linear { start, end } | Schedule::Cosine { start, end } => {
                if !finite(&[*start, *end]) {
                    return Err(Error::config("schedule", None, "schedule endpoints must be finite"));
                }
            }
            Schedule::Sampled { values } => {
                if values.len() < 2 {
                    return Err(Error::config(
                        "schedule_samples",
                        None,
                        "a sampled schedule needs at least two samples to be differentiated",
                    ));
                }
                if !finite(values) {
                    return Err(Error::config("schedule_samples", None, "sampled schedule has non-finite values"));
                }
            }
        }
        Ok(())
    }

    pub fn start(&self) -> f64 {
        match self {
            Schedule::Linear { start, .. } | Schedule::Cosine { start, .. } => *start,
            Schedule::Sampled { values } => values[0],
        }
    }

    pub fn end(&self) -> f64 {
        match self {
            Schedule::Linear { end, .. } | Schedule::Cosine { end, .. } => *end,
            Schedule::Sampled { values } => *values.last().unwrap(),
        }
    }

    /// Grid spacing and the cell index / fractional position of `t` for sampled schedules.
    fn locate(n: usize, t: f64, tau: f64) -> (f64, usize, f64) {
        let h = tau / (n - 1) as f64;
        let u = (t / h).clamp(0.0, (n - 1) as f64);
        let i = (u.floor() as usize).min(n - 2);
        (h, i, u - i as f64)
    }

    pub fn value(&self, t: f64, tau: f64) -> f64 {
        match self {
            Schedule::Linear { start, end } => start + (end - start) * t / tau,
            Schedule::Cosine { start, end } => {
                start + (end - start) * 0.5 * (1.0 - (std::f64::consts::PI * t / tau).cos())
            }
            Schedule::Sampled { values } => {
                let (_, i, f) = Self::locate(values.len(), t, tau);
                values[i] * (1.0 - f) + values[i + 1] * f
            }
        }
    }

    pub fn rate(&self, t: f64, tau: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            Schedule::Linear { start, end } => (end - start) / tau,
            Schedule::Cosine { start, end } => (end - start) * 0.5 * PI / tau * (PI * t / tau).sin(),
            Schedule::Sampled { values } => {
                let n = values.len();
                let (h, i, f) = Self::locate(n, t, tau);
                let node_rate = |k: usize| {
                    if n == 2 || k == 0 {
                        (values[1] - values[0]) / h
                    } else if k == n - 1 {
                        (values[n - 1] - values[n - 2]) / h
                    } else {
                        (values[k + 1] - values[k - 1]) / (2.0 * h)
                    }
                };
                node_rate(i) * (1.0 - f) + node_rate(i + 1) * f
            }
        }
    }

    /// `int_0^t value(s) ds`.
    pub fn integral(&self, t: f64, tau: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            Schedule::Linear { start, end } => start * t + (end - start) * t * t / (2.0 * tau),
            Schedule::Cosine { start, end } => {
                start * t + (end - start) * 0.5 * (t - tau / PI * (PI * t / tau).sin())
            }
            Schedule::Sampled { values } => {
                let n = values.len();
                let (h, i, f) = Self::locate(n, t, tau);
                let whole: f64 = (0..i).map(|k| 0.5 * h * (values[k] + values[k + 1])).sum();
                let vt = values[i] * (1.0 - f) + values[i + 1] * f;
                whole + 0.5 * f * h * (values[i] + vt)
            }
        }
    }

    /// True when the rate is the same at every time (piecewise-linear with one piece).
    pub fn has_constant_rate(&self) -> bool {
        match self {
            Schedule::Linear { .. } => true,
            Schedule::Cosine { start, end } => start == end,
            Schedule::Sampled { values } => values.len() == 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_rate(s: &Schedule, t: f64, tau: f64) -> f64 {
        let h = 1e-6;
        (s.value(t + h, tau) - s.value(t - h, tau)) / (2.0 * h)
    }

    #[test]
    fn analytic_rates_match_finite_differences() {
        let tau = 2.0;
        for s in [
            Schedule::Linear { start: -0.5, end: 1.5 },
            Schedule::Cosine { start: 0.2, end: -1.0 },
        ] {
            for &t in &[0.3, 1.0, 1.7] {
                assert!((s.rate(t, tau) - numeric_rate(&s, t, tau)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn integrals_match_quadrature() {
        let tau = 1.5;
        for s in [
            Schedule::Linear { start: 0.1, end: 0.9 },
            Schedule::Cosine { start: 1.0, end: -2.0 },
            Schedule::Sampled { values: vec![0.0, 1.0, 0.5, 2.0] },
        ] {
            let t = 1.2;
            let n = 200_000;
            let h = t / n as f64;
            let quad: f64 = (0..n).map(|k| s.value((k as f64 + 0.5) * h, tau) * h).sum();
            assert!((s.integral(t, tau) - quad).abs() < 1e-8, "{s:?}");
        }
    }

    #[test]
    fn sampled_interpolates_and_differentiates() {
        let s = Schedule::Sampled { values: vec![0.0, 1.0, 4.0] };
        assert_eq!(s.value(0.5, 2.0), 0.5);
        assert_eq!(s.value(1.0, 2.0), 1.0);
        assert_eq!(s.value(1.5, 2.0), 2.5);
        // central difference at the middle node: (4 - 0) / 2
        assert_eq!(s.rate(1.0, 2.0), 2.0);
        assert!(Schedule::Sampled { values: vec![1.0] }.validate().is_err());
        assert!(Schedule::Sampled { values: vec![1.0, f64::NAN] }.validate().is_err());
    }
}
