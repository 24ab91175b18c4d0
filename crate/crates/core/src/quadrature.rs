//! Fixed-rule quadrature on uniform and sampled grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    #[default]
    Trapezoid,
    Simpson,
}

/// Weights for `points` equally spaced nodes with unit spacing.
pub fn uniform_weights(points: usize, rule: Quadrature) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::Grid(format!("quadrature needs at least 2 nodes, got {points}")));
    }
    let mut w = vec![1.0; points];
    match rule {
        Quadrature::Trapezoid => {
            w[0] = 0.5;
            w[points - 1] = 0.5;
        }
        Quadrature::Simpson => {
            if !(points - 1).is_multiple_of(2) {
                return Err(Error::Grid(format!(
                    "Simpson's rule needs an even number of intervals, got {}",
                    points - 1
                )));
            }
            for (i, x) in w.iter_mut().enumerate() {
                *x = if i == 0 || i == points - 1 {
                    1.0 / 3.0
                } else if i % 2 == 1 {
                    4.0 / 3.0
                } else {
                    2.0 / 3.0
                };
            }
        }
    }
    Ok(w)
}

/// Trapezoid integral of sampled `y(x)` over [a, b], interpolating linearly
/// at the window edges. The samples must cover the window.
pub fn trapezoid_window(x: &[f64], y: &[f64], a: f64, b: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 || !(a <= b) {
        return Err(Error::Grid(format!(
            "cannot integrate over [{a}, {b}] with {} samples",
            x.len()
        )));
    }
    let slack = 1e-9 * (b - a).abs().max(1.0);
    if x[0] > a + slack || x[x.len() - 1] < b - slack {
        return Err(Error::Grid(format!(
            "window [{a}, {b}] not covered by samples spanning [{}, {}]",
            x[0],
            x[x.len() - 1]
        )));
    }
    let lerp = |t: f64| -> f64 {
        let t = t.clamp(x[0], x[x.len() - 1]);
        let i = x.partition_point(|&v| v <= t).clamp(1, x.len() - 1);
        let (x0, x1) = (x[i - 1], x[i]);
        if x1 == x0 {
            y[i]
        } else {
            y[i - 1] + (y[i] - y[i - 1]) * (t - x0) / (x1 - x0)
        }
    };
    let mut pts: Vec<(f64, f64)> = vec![(a, lerp(a))];
    pts.extend(x.iter().zip(y).filter(|(&t, _)| t > a && t < b).map(|(&t, &v)| (t, v)));
    pts.push((b, lerp(b)));
    Ok(pts
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_exact_on_cubic() {
        let n = 9;
        let h = 0.25;
        let w = uniform_weights(n, Quadrature::Simpson).unwrap();
        let s: f64 = (0..n).map(|i| w[i] * (i as f64 * h).powi(3)).sum::<f64>() * h;
        assert!((s - 2.0f64.powi(4) / 4.0).abs() < 1e-12);
        assert!(uniform_weights(4, Quadrature::Simpson).is_err());
    }

    #[test]
    fn trapezoid_weights_sum_to_length() {
        let w = uniform_weights(5, Quadrature::Trapezoid).unwrap();
        assert_eq!(w.iter().sum::<f64>(), 4.0);
    }

    #[test]
    fn window_of_constant() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let y = vec![2.0; 20];
        let v = trapezoid_window(&x, &y, 1.05, 4.4).unwrap();
        assert!((v - 2.0 * 3.35).abs() < 1e-12);
        assert!(trapezoid_window(&x, &y, -1.0, 2.0).is_err());
    }
}
