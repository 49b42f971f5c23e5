//! Conditional energy shifts and the entangling phases they accumulate.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::AdiabaticFrequencies;

/// Conditional shifts over a coupler-frequency grid, all in GHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftCurve {
    pub grid: Vec<f64>,
    pub chi_011: Vec<f64>,
    pub chi_101: Vec<f64>,
    pub chi_110: Vec<f64>,
    pub chi_ccp: Vec<f64>,
}

/// Entangling phases in radians, ordered (φ_011, φ_101, φ_110, φ_CCP).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseVector {
    pub phi_011: f64,
    pub phi_101: f64,
    pub phi_110: f64,
    pub phi_ccp: f64,
}

impl PhaseVector {
    pub fn new(phi_011: f64, phi_101: f64, phi_110: f64, phi_ccp: f64) -> Self {
        PhaseVector { phi_011, phi_101, phi_110, phi_ccp }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        PhaseVector::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.phi_011, self.phi_101, self.phi_110, self.phi_ccp]
    }

    pub fn zero() -> Self {
        PhaseVector::default()
    }

    pub fn add(self, o: PhaseVector) -> Self {
        let (a, b) = (self.to_array(), o.to_array());
        PhaseVector::from_array(std::array::from_fn(|i| a[i] + b[i]))
    }

    pub fn scale(self, s: f64) -> Self {
        PhaseVector::from_array(self.to_array().map(|x| x * s))
    }
}

/// Evaluates the shift definitions pointwise from the computational curves.
pub fn shift_curve(freqs: &AdiabaticFrequencies) -> Result<ShiftCurve> {
    let n = freqs.grid.len();
    if freqs.curves.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidSpec("computational curves do not cover the grid".into()));
    }
    let w = &freqs.curves;
    let mut out = ShiftCurve {
        grid: freqs.grid.clone(),
        chi_011: Vec::with_capacity(n),
        chi_101: Vec::with_capacity(n),
        chi_110: Vec::with_capacity(n),
        chi_ccp: Vec::with_capacity(n),
    };
    // Curve index is the bit pattern n1 n2 n3.
    for k in 0..n {
        let (w001, w010, w100) = (w[1][k], w[2][k], w[4][k]);
        let c011 = w[3][k] - (w001 + w010);
        let c101 = w[5][k] - (w100 + w001);
        let c110 = w[6][k] - (w100 + w010);
        let cccp = w[7][k] - (w100 + w010 + w001) - c011 - c101 - c110;
        out.chi_011.push(c011);
        out.chi_101.push(c101);
        out.chi_110.push(c110);
        out.chi_ccp.push(cccp);
    }
    Ok(out)
}

impl ShiftCurve {
    pub fn curves(&self) -> [&[f64]; 4] {
        [&self.chi_011, &self.chi_101, &self.chi_110, &self.chi_ccp]
    }

    /// Cubic-spline interpolant of the four curves.
    pub fn interpolant(&self) -> Result<ShiftInterpolant> {
        let [a, b, c, d] = self.curves().map(|c| CubicSpline::natural(&self.grid, c));
        Ok(ShiftInterpolant { splines: [a?, b?, c?, d?] })
    }
}

#[derive(Debug, Clone)]
pub struct ShiftInterpolant {
    splines: [CubicSpline; 4],
}

impl ShiftInterpolant {
    /// Shifts in GHz at one coupler frequency.
    pub fn eval(&self, w: f64) -> Result<[f64; 4]> {
        let mut out = [0.0; 4];
        for (o, s) in out.iter_mut().zip(&self.splines) {
            *o = s.eval(w)?;
        }
        Ok(out)
    }
}

/// Natural cubic spline on a strictly ascending grid.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n != y.len() || n == 0 {
            return Err(Error::InvalidSpec("spline needs matching non-empty arrays".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpec("spline grid must be strictly ascending".into()));
        }
        let mut m = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for second derivatives, Thomas algorithm.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            let mut upper = vec![0.0; k];
            for i in 0..k {
                let h0 = x[i + 1] - x[i];
                let h1 = x[i + 2] - x[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
            }
            for i in 1..k {
                let lower = x[i + 1] - x[i];
                let f = lower / diag[i - 1];
                diag[i] -= f * upper[i - 1];
                rhs[i] -= f * rhs[i - 1];
            }
            let mut sol = vec![0.0; k];
            for i in (0..k).rev() {
                let next = if i + 1 < k { upper[i] * sol[i + 1] } else { 0.0 };
                sol[i] = (rhs[i] - next) / diag[i];
            }
            m[1..n - 1].copy_from_slice(&sol);
        }
        Ok(CubicSpline { x: x.to_vec(), y: y.to_vec(), m })
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let n = self.x.len();
        let (lo, hi) = (self.x[0], self.x[n - 1]);
        let tol = 1e-9 * (1.0 + hi.abs());
        if !(t >= lo - tol && t <= hi + tol) {
            return Err(Error::OutsideGrid(t));
        }
        if n == 1 {
            return Ok(self.y[0]);
        }
        let t = t.clamp(lo, hi);
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        Ok(a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0)
    }
}

/// Composite Simpson quadrature on uniform samples; an odd interval count
/// closes with a 3/8 panel.
pub fn simpson(values: &[f64], dt: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * dt * (values[0] + values[1]),
        3 => dt / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ => {
            let intervals = n - 1;
            let (even_end, tail) = if intervals % 2 == 0 { (n - 1, false) } else { (n - 4, true) };
            let mut s = values[0] + values[even_end];
            for (i, v) in values.iter().enumerate().take(even_end).skip(1) {
                s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            let mut total = dt / 3.0 * s;
            if tail {
                let v = &values[n - 4..];
                total += 3.0 * dt / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
            }
            total
        }
    }
}

/// Phases φ_j = −∫ χ_j dt for a coupler trajectory sampled at t_k = k·dt (ns).
pub fn accumulated_phases(curve: &ShiftCurve, trajectory: &[f64], dt: f64) -> Result<PhaseVector> {
    let interp = curve.interpolant()?;
    phases_with(&interp, trajectory, dt)
}

/// Same as [`accumulated_phases`] with a prebuilt interpolant.
pub fn phases_with(interp: &ShiftInterpolant, trajectory: &[f64], dt: f64) -> Result<PhaseVector> {
    if trajectory.len() < 2 {
        return Ok(PhaseVector::zero());
    }
    let mut cols: [Vec<f64>; 4] = Default::default();
    for &w in trajectory {
        let c = interp.eval(w)?;
        for j in 0..4 {
            cols[j].push(c[j]);
        }
    }
    Ok(PhaseVector::from_array(cols.map(|c| -TAU * simpson(&c, dt))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_reproduces_cubic_interior_and_nodes() {
        let x: Vec<f64> = (0..21).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let s = CubicSpline::natural(&x, &y).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((s.eval(*a).unwrap() - b).abs() < 1e-14);
        }
        assert!((s.eval(1.05).unwrap() - 1.05f64.sin()).abs() < 1e-5);
        assert!(matches!(s.eval(2.5), Err(Error::OutsideGrid(_))));
    }

    #[test]
    fn simpson_exact_for_cubics() {
        let f = |t: f64| 1.0 + t - 2.0 * t * t + 0.5 * t * t * t;
        let exact = |t: f64| t + t * t / 2.0 - 2.0 * t * t * t / 3.0 + t.powi(4) / 8.0;
        for n in [5usize, 6, 7, 10] {
            let dt = 2.0 / (n - 1) as f64;
            let v: Vec<f64> = (0..n).map(|k| f(k as f64 * dt)).collect();
            assert!((simpson(&v, dt) - exact(2.0)).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn shift_definitions() {
        let mut curves: [Vec<f64>; 8] = Default::default();
        let w = [0.0, 4.5, 4.0, 8.4, 3.5, 7.9, 7.45, 11.8];
        for (c, v) in curves.iter_mut().zip(w) {
            c.push(v);
        }
        let s = shift_curve(&AdiabaticFrequencies { grid: vec![4.5], curves }).unwrap();
        assert!((s.chi_011[0] + 0.1).abs() < 1e-12);
        assert!((s.chi_101[0] + 0.1).abs() < 1e-12);
        assert!((s.chi_110[0] + 0.05).abs() < 1e-12);
        // 11.8 − 12.0 − (−0.25) = 0.05
        assert!((s.chi_ccp[0] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn zero_duration_is_zero_phase() {
        let c = ShiftCurve {
            grid: vec![4.0, 5.0, 6.0],
            chi_011: vec![1.0; 3],
            chi_101: vec![1.0; 3],
            chi_110: vec![1.0; 3],
            chi_ccp: vec![1.0; 3],
        };
        assert_eq!(accumulated_phases(&c, &[5.0], 0.1).unwrap(), PhaseVector::zero());
        let p = accumulated_phases(&c, &[5.0; 11], 0.1).unwrap();
        assert!((p.phi_ccp + TAU).abs() < 1e-12);
    }
}
