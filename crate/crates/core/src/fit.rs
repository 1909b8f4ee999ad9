//! Least-squares slopes on log-log data.

use crate::error::{Error, Result};

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!(
            "{} abscissae but {} ordinates",
            xs.len(),
            ys.len()
        )));
    }
    if let Some(bad) = xs.iter().chain(ys).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::DegenerateFit(format!(
            "log-log fit needs positive finite data, got {bad}"
        )));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if lx.len() < 2 || sxx < 1e-24 {
        return Err(Error::DegenerateFit(
            "abscissae do not span a range".to_string(),
        ));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Ratio between the largest and smallest value, or 0 for empty input.
pub(crate) fn span_ratio(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    if xs.is_empty() || min <= 0.0 {
        0.0
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_law() {
        let xs = [1e-3, 1e-2, 1e-1, 1.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(2.5)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(loglog_slope(&[1.0, 1.0], &[2.0, 3.0]), Err(Error::DegenerateFit(_))));
        assert!(matches!(loglog_slope(&[1.0], &[2.0]), Err(Error::DegenerateFit(_))));
        assert!(matches!(loglog_slope(&[1.0, 2.0], &[0.0, 3.0]), Err(Error::DegenerateFit(_))));
        assert_eq!(span_ratio(&[1e-3, 1e-1]), 100.0);
    }
}
