//! Gate figures of merit: phase extraction, fidelity with virtual-Z
//! optimization, and leakage.

use std::f64::consts::TAU;

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{CMatrix, QuantumChannel};
use crate::refocus::{wrap_symmetric, GatePlan};
use crate::shifts::PhaseVector;

/// Qubit bits (n1, n2, n3) of computational index k.
pub fn comp_bits(k: usize) -> [f64; 3] {
    [((k >> 2) & 1) as f64, ((k >> 1) & 1) as f64, (k & 1) as f64]
}

/// Diagonal phases of the ideal gate with the given entangling phases.
pub fn target_diagonal(phi: &PhaseVector) -> [f64; 8] {
    std::array::from_fn(|k| {
        let [b1, b2, b3] = comp_bits(k);
        phi.phi_011 * b2 * b3 + phi.phi_101 * b1 * b3 + phi.phi_110 * b1 * b2 + phi.phi_ccp * b1 * b2 * b3
    })
}

pub fn target_unitary(phi: &PhaseVector) -> DMatrix<Complex64> {
    let d = target_diagonal(phi);
    DMatrix::from_fn(8, 8, |i, j| if i == j { Complex64::from_polar(1.0, d[i]) } else { Complex64::new(0.0, 0.0) })
}

/// Entangling and single-qubit phases read from a diagonal-dominant block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractedPhases {
    /// Entangling phases in (−π, π].
    pub phases: PhaseVector,
    /// Single-qubit phases of Q1..Q3.
    pub single: [f64; 3],
}

/// Relative diagonal phases, index 0 fixed at zero.
fn relative_phases(diag: &[Complex64; 8]) -> [f64; 8] {
    let p0 = diag[0].arg();
    std::array::from_fn(|k| wrap_symmetric(diag[k].arg() - p0))
}

fn phases_from_diagonal(ph: &[f64; 8]) -> ExtractedPhases {
    let (t1, t2, t3) = (ph[4], ph[2], ph[1]);
    let p011 = ph[3] - t2 - t3;
    let p101 = ph[5] - t1 - t3;
    let p110 = ph[6] - t1 - t2;
    let pccp = ph[7] - t1 - t2 - t3 - p011 - p101 - p110;
    ExtractedPhases {
        phases: PhaseVector::from_array([p011, p101, p110, pccp].map(wrap_symmetric)),
        single: [t1, t2, t3],
    }
}

pub fn extract_phases(block: &DMatrix<Complex64>) -> Result<ExtractedPhases> {
    if block.nrows() != 8 || block.ncols() != 8 {
        return Err(Error::DimensionMismatch(block.nrows(), 8));
    }
    let diag: [Complex64; 8] = std::array::from_fn(|k| block[(k, k)]);
    let min = diag.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if min < 0.5 {
        return Err(Error::NotDiagonalDominant(min));
    }
    Ok(phases_from_diagonal(&relative_phases(&diag)))
}

/// Phases from the coherences ⟨k|Φ(|k⟩⟨0|)|0⟩ of a channel.
pub fn extract_channel_phases(ch: &QuantumChannel) -> Result<ExtractedPhases> {
    let d = ch.dim;
    if d != 8 {
        return Err(Error::DimensionMismatch(d, 8));
    }
    let coh: [Complex64; 8] = std::array::from_fn(|k| ch.superop[(k * d, k * d)]);
    let min = coh.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if min < 0.25 {
        return Err(Error::NotDiagonalDominant(min.sqrt()));
    }
    Ok(phases_from_diagonal(&relative_phases(&coh)))
}

/// Picks the 2π branch of each wrapped phase closest to the prediction.
pub fn unwrap_with(wrapped: &PhaseVector, predicted: &PhaseVector) -> PhaseVector {
    let (w, p) = (wrapped.to_array(), predicted.to_array());
    PhaseVector::from_array(std::array::from_fn(|j| w[j] + TAU * ((p[j] - w[j]) / TAU).round()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityResult {
    pub fidelity: f64,
    /// Optimal single-qubit Z corrections of Q1..Q3, rad.
    pub virtual_z: [f64; 3],
}

struct ZCost<'a, F: Fn(&[f64; 3]) -> f64> {
    f: &'a F,
}

impl<F: Fn(&[f64; 3]) -> f64> CostFunction for ZCost<'_, F> {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        Ok(-(self.f)(&[p[0], p[1], p[2]]))
    }
}

/// Maximizes `f` over the three Z angles from each start.
fn maximize_z<F: Fn(&[f64; 3]) -> f64>(f: F, starts: &[[f64; 3]]) -> Result<FidelityResult> {
    let mut best = FidelityResult { fidelity: f64::NEG_INFINITY, virtual_z: [0.0; 3] };
    for s in starts {
        let mut simplex = vec![s.to_vec()];
        for j in 0..3 {
            let mut v = s.to_vec();
            v[j] += 0.2;
            simplex.push(v);
        }
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-14)
            .map_err(|e| Error::Optimizer(e.to_string()))?;
        let res = Executor::new(ZCost { f: &f }, solver)
            .configure(|st| st.max_iters(2000))
            .run()
            .map_err(|e| Error::Optimizer(e.to_string()))?;
        let p = res.state.best_param.ok_or_else(|| Error::Optimizer("no parameter".into()))?;
        let z = [p[0], p[1], p[2]];
        let fz = f(&z);
        if fz > best.fidelity {
            best = FidelityResult { fidelity: fz, virtual_z: z.map(wrap_symmetric) };
        }
    }
    Ok(best)
}

fn correction_phases(target: &[f64; 8], z: &[f64; 3]) -> [f64; 8] {
    std::array::from_fn(|k| {
        let b = comp_bits(k);
        target[k] + z[0] * b[0] + z[1] * b[1] + z[2] * b[2]
    })
}

/// Extracted guess first, then the corners of a coarse grid.
fn start_points(guess: Option<[f64; 3]>) -> Vec<[f64; 3]> {
    let mut s: Vec<[f64; 3]> = guess.into_iter().collect();
    for k in 0..8 {
        s.push(comp_bits(k).map(|b| 2.0 * b));
    }
    s
}

/// Average gate fidelity of an 8×8 block to the target, maximized over
/// virtual Z rotations: F = (|Tr M|² + Tr MM†)/72, M = Z(z)·V†·U.
pub fn fidelity_unitary(block: &DMatrix<Complex64>, target: &PhaseVector) -> Result<FidelityResult> {
    if block.nrows() != 8 || block.ncols() != 8 {
        return Err(Error::DimensionMismatch(block.nrows(), 8));
    }
    let tgt = target_diagonal(target);
    let diag: [Complex64; 8] = std::array::from_fn(|k| block[(k, k)]);
    let frob: f64 = block.iter().map(|z| z.norm_sqr()).sum();
    let f = |z: &[f64; 3]| {
        let a = correction_phases(&tgt, z);
        let tr: Complex64 = (0..8).map(|k| Complex64::from_polar(1.0, -a[k]) * diag[k]).sum();
        (tr.norm_sqr() + frob) / 72.0
    };
    let guess = extract_phases(block).ok().map(|e| e.single);
    maximize_z(f, &start_points(guess))
}

/// Same figure of merit for a channel restricted to the computational space.
pub fn fidelity_channel(ch: &QuantumChannel, target: &PhaseVector) -> Result<FidelityResult> {
    let d = ch.dim;
    if d != 8 {
        return Err(Error::DimensionMismatch(d, 8));
    }
    let tgt = target_diagonal(target);
    let coh = DMatrix::from_fn(8, 8, |i, j| ch.superop[(i * d + j, i * d + j)]);
    let pops: f64 = (0..d).flat_map(|i| (0..d).map(move |a| (a, i))).map(|(a, i)| ch.superop[(a * d + a, i * d + i)].re).sum();
    let f = |z: &[f64; 3]| {
        let a = correction_phases(&tgt, z);
        let mut s = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                s += (Complex64::from_polar(1.0, a[j] - a[i]) * coh[(i, j)]).re;
            }
        }
        (s + pops) / 72.0
    };
    let guess = extract_channel_phases(ch).ok().map(|e| e.single);
    maximize_z(f, &start_points(guess))
}

/// Per-input leakage: Λ_out leaves the computational space, Λ_in stays in it
/// but lands on a different computational state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub out_of_space: [f64; 8],
    pub within_space: [f64; 8],
    pub total_out: f64,
    pub total_within: f64,
}

impl LeakageReport {
    fn from_populations(pop: &DMatrix<f64>, retained: [f64; 8]) -> Self {
        let out_of_space: [f64; 8] = std::array::from_fn(|i| (1.0 - retained[i]).max(0.0));
        let within_space: [f64; 8] = std::array::from_fn(|i| (0..8).filter(|&f| f != i).map(|f| pop[(f, i)]).sum());
        LeakageReport {
            total_out: out_of_space.iter().sum(),
            total_within: within_space.iter().sum(),
            out_of_space,
            within_space,
        }
    }

    /// Diagonal population |U_ii|² implied by the two leakage terms.
    pub fn retained(&self, i: usize) -> f64 {
        1.0 - self.out_of_space[i] - self.within_space[i]
    }
}

/// Leakage from evolved computational states; `block` = Cᵀ·columns.
pub fn leakage_report(block: &DMatrix<Complex64>) -> LeakageReport {
    let pop = block.map(|z| z.norm_sqr());
    let retained: [f64; 8] = std::array::from_fn(|i| pop.column(i).sum());
    LeakageReport::from_populations(&pop, retained)
}

pub fn leakage_from_channel(ch: &QuantumChannel) -> LeakageReport {
    let d = ch.dim;
    let pop = DMatrix::from_fn(8, 8, |f, i| ch.superop[(f * d + f, i * d + i)].re);
    let retained: [f64; 8] = std::array::from_fn(|i| pop.column(i).sum());
    LeakageReport::from_populations(&pop, retained)
}

/// Complex matrix stored as rows of (re, im) pairs.
pub fn matrix_rows(m: &DMatrix<Complex64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub open_system: bool,
    pub duration: f64,
    pub fidelity: f64,
    pub infidelity: f64,
    pub virtual_z: [f64; 3],
    /// Measured phases wrapped to (−π, π]; absent when the block is not
    /// diagonal dominant.
    pub phases_wrapped: Option<PhaseVector>,
    /// Measured phases on the branch closest to the plan's prediction.
    pub phases: Option<PhaseVector>,
    pub leakage: LeakageReport,
    /// Computational block in the rotating frame (unitary runs only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<Vec<Vec<[f64; 2]>>>,
    pub plan: GatePlan,
}

/// Computational block Cᵀψ of evolved columns.
pub fn computational_block(comp: &DMatrix<f64>, columns: &CMatrix) -> DMatrix<Complex64> {
    columns.left_real_transpose(comp).to_complex()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn with_single(phi: &PhaseVector, z: [f64; 3], global: f64) -> DMatrix<Complex64> {
        let t = target_diagonal(phi);
        DMatrix::from_fn(8, 8, |i, j| {
            if i != j {
                return Complex64::new(0.0, 0.0);
            }
            let b = comp_bits(i);
            Complex64::from_polar(1.0, global + t[i] + z[0] * b[0] + z[1] * b[1] + z[2] * b[2])
        })
    }

    #[test]
    fn extraction_inverts_construction() {
        let phi = PhaseVector::new(0.3, -1.1, 2.0, PI);
        let u = with_single(&phi, [0.7, -0.2, 1.9], 0.4);
        let e = extract_phases(&u).unwrap();
        for (a, b) in e.phases.to_array().iter().zip(phi.to_array()) {
            assert!((wrap_symmetric(a - b)).abs() < 1e-12);
        }
        assert!((e.single[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn rejects_swap_like_block() {
        let mut u = DMatrix::identity(8, 8).map(|x: f64| Complex64::new(x, 0.0));
        u.swap_columns(1, 2);
        assert!(matches!(extract_phases(&u), Err(Error::NotDiagonalDominant(_))));
    }

    #[test]
    fn unitary_fidelity_ignores_single_qubit_phases() {
        let phi = PhaseVector::new(0.0, 0.0, 0.0, PI);
        let u = with_single(&phi, [1.0, -2.0, 0.5], -0.3);
        let r = fidelity_unitary(&u, &phi).unwrap();
        assert!((r.fidelity - 1.0).abs() < 1e-12);
        let wrong = fidelity_unitary(&u, &PhaseVector::zero()).unwrap();
        assert!(wrong.fidelity < 0.9);
    }

    #[test]
    fn channel_fidelity_matches_unitary() {
        let phi = PhaseVector::new(0.1, 0.2, -0.3, 2.5);
        let u = with_single(&phi, [0.3, 0.0, -1.0], 0.0);
        let target = PhaseVector::new(0.1, 0.25, -0.3, 2.4);
        let a = fidelity_unitary(&u, &target).unwrap();
        let b = fidelity_channel(&QuantumChannel::from_unitary(&u), &target).unwrap();
        assert!((a.fidelity - b.fidelity).abs() < 1e-9);
    }

    #[test]
    fn unwrap_picks_nearest_branch() {
        let w = PhaseVector::new(0.1, -3.0, PI, 0.0);
        let p = PhaseVector::new(-6.2, 3.3, 3.0 * PI, 0.2);
        let u = unwrap_with(&w, &p);
        assert!((u.phi_011 - (0.1 - TAU)).abs() < 1e-12);
        assert!((u.phi_101 - (TAU - 3.0)).abs() < 1e-12);
        assert!((u.phi_110 - 3.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn leakage_budget_closes() {
        let mut u = DMatrix::identity(8, 8).map(|x: f64| Complex64::new(x, 0.0));
        u[(0, 0)] = Complex64::new(0.9, 0.0);
        u[(1, 0)] = Complex64::new(0.3, 0.0);
        let r = leakage_report(&u);
        assert!((r.out_of_space[0] - 0.1).abs() < 1e-12);
        assert!((r.within_space[0] - 0.09).abs() < 1e-12);
        assert!((r.retained(0) - 0.81).abs() < 1e-12);
    }
}
