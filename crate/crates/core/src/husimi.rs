//! Husimi densities `|⟨z|ψ⟩|²/π` of meter states on a phase-space grid,
//! with `z = (q + ip)/√2`.

use std::io::Write;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{canonical_operators, check_tail, expectation, FockConfig, Ket};

pub const DEFAULT_RESOLUTION: usize = 201;

/// Rectangular window `[q_min, q_max] × [p_min, p_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl Window {
    pub fn new(q_min: f64, q_max: f64, p_min: f64, p_max: f64) -> Result<Self> {
        let all = [q_min, q_max, p_min, p_max];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("window bounds must be finite".into()));
        }
        if q_min >= q_max || p_min >= p_max {
            return Err(Error::InvalidInput(format!(
                "window must have q_min < q_max and p_min < p_max, got {all:?}"
            )));
        }
        Ok(Self {
            q_min,
            q_max,
            p_min,
            p_max,
        })
    }

    /// Square window of half-width `max(6, |z| + 6)` around `(q, p)`.
    pub fn around(q: f64, p: f64, z_abs: f64) -> Result<Self> {
        let h = 6f64.max(z_abs + 6.0);
        Self::new(q - h, q + h, p - h, p + h)
    }

    /// Default window for `psi`: centred on its `(⟨Q⟩, ⟨P⟩)` centroid.
    pub fn for_state(psi: &Ket, cfg: &FockConfig) -> Result<Self> {
        let ops = canonical_operators(cfg);
        let q = expectation(&ops.q, psi)?.re;
        let p = expectation(&ops.p, psi)?.re;
        Self::around(q, p, q.hypot(p) / std::f64::consts::SQRT_2)
    }

    /// Largest `|z|` reached anywhere in the window.
    pub fn z_max(&self) -> f64 {
        let q = self.q_min.abs().max(self.q_max.abs());
        let p = self.p_min.abs().max(self.p_max.abs());
        q.hypot(p) / std::f64::consts::SQRT_2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HusimiGrid {
    pub q_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    /// `density[j][i]` is the value at `(q_axis[i], p_axis[j])`.
    pub density: Vec<Vec<f64>>,
    /// Cell sum times the cell area `Δq·Δp/2` of the z-plane.
    pub normalization: f64,
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|k| if k == n - 1 { hi } else { lo + step * k as f64 })
        .collect()
}

/// `|⟨z|ψ⟩|²/(π‖ψ‖²)` with the truncated `|z⟩` renormalized, as in [`crate::fock::coherent_ket`].
fn density_at(psi: &[C64], norm: f64, q: f64, p: f64) -> f64 {
    let z = C64::new(q, p) / std::f64::consts::SQRT_2;
    let mut c = C64::new((-0.5 * z.norm_sqr()).exp(), 0.0);
    let mut overlap = C64::new(0.0, 0.0);
    let mut weight = 0.0;
    for (n, amp) in psi.iter().enumerate() {
        if n > 0 {
            c = c * z / (n as f64).sqrt();
        }
        overlap += c.conj() * amp;
        weight += c.norm_sqr();
    }
    overlap.norm_sqr() / (weight * norm * std::f64::consts::PI)
}

/// Husimi density of `psi` at a single phase-space point.
pub fn husimi_at(psi: &Ket, q: f64, p: f64, cfg: &FockConfig) -> Result<f64> {
    if psi.dim() != cfg.dimension {
        return Err(Error::DimensionMismatch {
            expected: cfg.dimension,
            found: psi.dim(),
        });
    }
    let norm = psi.norm_sqr();
    if norm.is_nan() || norm <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    check_tail(q.hypot(p) / std::f64::consts::SQRT_2, cfg)?;
    Ok(density_at(psi.amplitudes().as_slice(), norm, q, p))
}

/// Density on a `resolution × resolution` grid covering `window`.
///
/// Returns [`Error::Truncation`] when the window reaches coherent states the
/// Fock space cannot hold.
pub fn husimi_grid(psi: &Ket, window: &Window, resolution: usize, cfg: &FockConfig) -> Result<HusimiGrid> {
    if resolution < 2 {
        return Err(Error::InvalidInput(format!("resolution must be >= 2, got {resolution}")));
    }
    if psi.dim() != cfg.dimension {
        return Err(Error::DimensionMismatch {
            expected: cfg.dimension,
            found: psi.dim(),
        });
    }
    let norm = psi.norm_sqr();
    if norm.is_nan() || norm <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    check_tail(window.z_max(), cfg)?;
    let q_axis = axis(window.q_min, window.q_max, resolution);
    let p_axis = axis(window.p_min, window.p_max, resolution);
    let amps = psi.amplitudes().as_slice();
    let density: Vec<Vec<f64>> = p_axis
        .par_iter()
        .map(|&p| q_axis.iter().map(|&q| density_at(amps, norm, q, p)).collect())
        .collect();
    let cell = (q_axis[1] - q_axis[0]) * (p_axis[1] - p_axis[0]) / 2.0;
    let normalization = density.iter().flatten().sum::<f64>() * cell;
    Ok(HusimiGrid {
        q_axis,
        p_axis,
        density,
        normalization,
    })
}

impl HusimiGrid {
    /// Density-weighted mean `(q, p)`.
    pub fn centroid(&self) -> (f64, f64) {
        let mut w = 0.0;
        let (mut q, mut p) = (0.0, 0.0);
        for (row, &pj) in self.density.iter().zip(&self.p_axis) {
            for (&d, &qi) in row.iter().zip(&self.q_axis) {
                w += d;
                q += d * qi;
                p += d * pj;
            }
        }
        (q / w, p / w)
    }

    /// Location and value of the largest density.
    pub fn peak(&self) -> (f64, f64, f64) {
        let mut best = (self.q_axis[0], self.p_axis[0], f64::NEG_INFINITY);
        for (row, &pj) in self.density.iter().zip(&self.p_axis) {
            for (&d, &qi) in row.iter().zip(&self.q_axis) {
                if d > best.2 {
                    best = (qi, pj, d);
                }
            }
        }
        best
    }

    /// CSV with header `q,p,density`, p-major then q, shortest round-trip floats.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["q", "p", "density"])?;
        for (row, &p) in self.density.iter().zip(&self.p_axis) {
            for (&d, &q) in row.iter().zip(&self.q_axis) {
                w.write_record([format!("{q:?}"), format!("{p:?}"), format!("{d:?}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::fractional_fourier;
    use crate::fock::coherent_ket;
    use std::f64::consts::{PI, SQRT_2};

    fn cfg_for(z: f64) -> FockConfig {
        FockConfig::auto(z, 1e-12).unwrap()
    }

    #[test]
    fn vacuum_peak() {
        let cfg = cfg_for(7.0);
        let vac = Ket::vacuum(&cfg);
        let w = Window::new(-4.0, 4.0, -4.0, 4.0).unwrap();
        let g = husimi_grid(&vac, &w, 41, &cfg).unwrap();
        let (q, p, d) = g.peak();
        assert_eq!((q, p), (0.0, 0.0));
        assert!((d - 1.0 / PI).abs() < 1e-12);
        // closed form e^{−|z|²}/π
        let v = husimi_at(&vac, 1.0, -2.0, &cfg).unwrap();
        assert!((v - (-2.5f64).exp() / PI).abs() < 1e-14);
    }

    #[test]
    fn coherent_peak_and_centroid() {
        let z0 = C64::new(1.0, 2.0);
        let w = Window::around(SQRT_2 * z0.re, SQRT_2 * z0.im, z0.norm()).unwrap();
        let cfg = cfg_for(w.z_max());
        let psi = coherent_ket(z0, &cfg).unwrap();
        let g = husimi_grid(&psi, &w, 101, &cfg).unwrap();
        let dq = g.q_axis[1] - g.q_axis[0];
        let (q, p, _) = g.peak();
        assert!((q - SQRT_2).abs() <= dq / 2.0 + 1e-12);
        assert!((p - 2.0 * SQRT_2).abs() <= dq / 2.0 + 1e-12);
        let (cq, cp) = g.centroid();
        assert!((cq - SQRT_2).abs() < dq);
        assert!((cp - 2.0 * SQRT_2).abs() < dq);
        assert!(g.normalization >= 0.999 && g.normalization <= 1.000001, "{}", g.normalization);
        assert!(g.density.iter().flatten().all(|d| *d >= 0.0));
    }

    #[test]
    fn overlap_closed_form() {
        let cfg = cfg_for(8.0);
        let z0 = C64::new(-0.5, 1.5);
        let psi = coherent_ket(z0, &cfg).unwrap();
        for (q, p) in [(0.0, 0.0), (1.0, 2.0), (-3.0, -1.0)] {
            let z = C64::new(q, p) / SQRT_2;
            let expected = (-(z - z0).norm_sqr()).exp() / PI;
            assert!((husimi_at(&psi, q, p, &cfg).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_covariance_pointwise() {
        let cfg = cfg_for(8.0);
        let psi = coherent_ket(C64::new(1.2, -0.3), &cfg).unwrap();
        let theta = 0.7;
        let rotated = fractional_fourier(theta, &cfg).apply(&psi).unwrap();
        for (q, p) in [(0.5, 0.5), (1.0, -1.0), (-2.0, 0.3)] {
            let back = C64::new(q, p) * C64::from_polar(1.0, -theta);
            let a = husimi_at(&rotated, q, p, &cfg).unwrap();
            let b = husimi_at(&psi, back.re, back.im, &cfg).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn quarter_turn_permutes_grid() {
        let cfg = cfg_for(8.0);
        let psi = coherent_ket(C64::new(1.5, 0.5), &cfg).unwrap();
        let rotated = fractional_fourier(PI / 2.0, &cfg).apply(&psi).unwrap();
        let w = Window::new(-5.0, 5.0, -5.0, 5.0).unwrap();
        let n = 21;
        let a = husimi_grid(&psi, &w, n, &cfg).unwrap();
        let b = husimi_grid(&rotated, &w, n, &cfg).unwrap();
        for j in 0..n {
            for i in 0..n {
                assert!((b.density[j][i] - a.density[n - 1 - i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn window_outside_tail_safe_region() {
        let cfg = FockConfig::new(40, 1e-12, 4).unwrap();
        let w = Window::new(-20.0, 20.0, -20.0, 20.0).unwrap();
        let err = husimi_grid(&Ket::vacuum(&cfg), &w, 5, &cfg).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }

    #[test]
    fn input_validation() {
        assert!(Window::new(1.0, 0.0, 0.0, 1.0).is_err());
        assert!(Window::new(0.0, f64::NAN, 0.0, 1.0).is_err());
        let cfg = cfg_for(6.0);
        let w = Window::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        assert!(husimi_grid(&Ket::vacuum(&cfg), &w, 1, &cfg).is_err());
    }

    #[test]
    fn default_window_follows_centroid() {
        let cfg = cfg_for(15.0);
        let psi = coherent_ket(C64::new(0.0, 3.0), &cfg).unwrap();
        let w = Window::for_state(&psi, &cfg).unwrap();
        assert!((w.q_min + 9.0).abs() < 1e-9 && (w.q_max - 9.0).abs() < 1e-9);
        assert!(((w.p_min + w.p_max) / 2.0 - 3.0 * SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn csv_layout() {
        let cfg = cfg_for(6.0);
        let w = Window::new(0.0, 1.0, -1.0, 0.0).unwrap();
        let g = husimi_grid(&Ket::vacuum(&cfg), &w, 2, &cfg).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "q,p,density");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0.0,-1.0,"));
        assert!(lines[2].starts_with("1.0,-1.0,"));
        assert!(lines[3].starts_with("0.0,0.0,"));
        assert!(!text.contains('\r'));
    }
}
