//! System Hamiltonian, diagonalization and adiabatic-state tracking.
//!
//! Energies inside matrices are angular (rad/ns); reported spectra are in GHz.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{
    computational_labels, ladder_operator, number_operator, BareLabel, DeviceSpec, Ladder, Mode,
    Operator, TruncatedBasis,
};

#[derive(Debug, Clone)]
pub struct HamiltonianSet {
    /// Coupler-frequency-independent part of H_0 + H_int (rad/ns).
    pub h0_fixed: Operator,
    /// 2π·n_c, so that H(ω_c) = h0_fixed + ω_c·coupler_number with ω_c in GHz.
    pub coupler_number: Operator,
    /// a† + a for Q1, Q2, Q3.
    pub drive_ops: [Operator; 3],
    /// Even and odd total-excitation index sets.
    pub sectors: [Vec<usize>; 2],
}

pub fn assemble(spec: &DeviceSpec, basis: &TruncatedBasis) -> Result<HamiltonianSet> {
    spec.validate()?;
    if basis.level_counts() != spec.level_counts() {
        return Err(Error::InvalidSpec("basis was built from a different spec".into()));
    }
    let n = basis.dim();
    let lower: Vec<Operator> =
        Mode::ALL.iter().map(|&m| ladder_operator(basis, m, Ladder::Lower)).collect();
    let mut h = Operator::zeros(n, n);
    for &m in &Mode::ALL {
        let s = spec.mode(m);
        for (i, l) in basis.labels().iter().enumerate() {
            let k = l.occupation(m) as f64;
            let w = if m == Mode::Coupler { 0.0 } else { s.frequency };
            h[(i, i)] += TAU * (w * k + 0.5 * s.anharmonicity * k * (k - 1.0));
        }
    }
    let sign = spec.coupling_sign.factor();
    // Elements of (a†−a)(b†−b) are taken between basis labels directly, so the
    // projected operator stays symmetric when intermediate states are truncated.
    for c in &spec.couplings {
        let (ia, ib) = (c.a.index(), c.b.index());
        for (j, l) in basis.labels().iter().enumerate() {
            for da in [-1i64, 1] {
                for db in [-1i64, 1] {
                    let mut t = l.0;
                    let na = t[ia] as i64 + da;
                    let nb = t[ib] as i64 + db;
                    if na < 0 || nb < 0 {
                        continue;
                    }
                    t[ia] = na as usize;
                    t[ib] = nb as usize;
                    if let Some(i) = basis.index_of(&BareLabel(t)) {
                        let ea = if da > 0 { (na as f64).sqrt() } else { -(l.0[ia] as f64).sqrt() };
                        let eb = if db > 0 { (nb as f64).sqrt() } else { -(l.0[ib] as f64).sqrt() };
                        h[(i, j)] += sign * TAU * c.g * ea * eb;
                    }
                }
            }
        }
    }
    let coupler_number = number_operator(basis, Mode::Coupler) * TAU;
    let drive_ops = [1, 2, 3].map(|i| lower[i].transpose() + &lower[i]);
    let mut sectors = [Vec::new(), Vec::new()];
    for (i, l) in basis.labels().iter().enumerate() {
        sectors[l.parity()].push(i);
    }
    Ok(HamiltonianSet { h0_fixed: h, coupler_number, drive_ops, sectors })
}

impl HamiltonianSet {
    pub fn dim(&self) -> usize {
        self.h0_fixed.nrows()
    }

    pub fn at(&self, coupler_freq: f64) -> Operator {
        &self.h0_fixed + &self.coupler_number * coupler_freq
    }

    /// Hamiltonian restricted to one parity sector.
    pub fn sector_at(&self, sector: usize, coupler_freq: f64) -> Operator {
        let idx = &self.sectors[sector];
        let m = idx.len();
        DMatrix::from_fn(m, m, |i, j| {
            self.h0_fixed[(idx[i], idx[j])] + coupler_freq * self.coupler_number[(idx[i], idx[j])]
        })
    }
}

/// Eigenvalues in ascending order with matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn sorted_eigen(m: DMatrix<f64>) -> Option<Eigen> {
    #[cfg(feature = "lapack")]
    {
        lapack_eigen(m)
    }
    #[cfg(not(feature = "lapack"))]
    {
        nalgebra_eigen(m)
    }
}

/// Pure-Rust fallback; also the reference in tests.
pub fn nalgebra_eigen(m: DMatrix<f64>) -> Option<Eigen> {
    let e = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
    if e.eigenvalues.iter().any(|v| !v.is_finite()) {
        return None;
    }
    order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&k| e.eigenvalues[k]));
    let vectors = DMatrix::from_fn(e.eigenvectors.nrows(), order.len(), |i, j| {
        e.eigenvectors[(i, order[j])]
    });
    Some(Eigen { values, vectors })
}

#[cfg(feature = "lapack")]
#[link(name = "openblas")]
extern "C" {}

/// LAPACK relatively-robust-representation solver; eigenvalues ascending.
#[cfg(feature = "lapack")]
fn lapack_eigen(mut m: DMatrix<f64>) -> Option<Eigen> {
    use std::os::raw::{c_char, c_int};
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return None;
    }
    let ni = n as c_int;
    let mut w = vec![0.0; n];
    let mut z = DMatrix::<f64>::zeros(n, n);
    let mut support = vec![0 as c_int; 2 * n];
    let (jobz, range, uplo) = (b'V' as c_char, b'A' as c_char, b'L' as c_char);
    let (mut found, mut info): (c_int, c_int) = (0, 0);
    let mut call = |work: &mut [f64], lwork: c_int, iwork: &mut [c_int], liwork: c_int| {
        // SAFETY: every buffer is at least as large as the size passed with it;
        // a workspace query (lwork = −1) writes only work[0] and iwork[0].
        unsafe {
            lapack_sys::dsyevr_(
                &jobz,
                &range,
                &uplo,
                &ni,
                m.as_mut_ptr(),
                &ni,
                &0.0,
                &0.0,
                &0,
                &0,
                &0.0,
                &mut found,
                w.as_mut_ptr(),
                z.as_mut_ptr(),
                &ni,
                support.as_mut_ptr(),
                work.as_mut_ptr(),
                &lwork,
                iwork.as_mut_ptr(),
                &liwork,
                &mut info,
            );
        }
        info
    };
    let (mut wq, mut iq) = ([0.0], [0 as c_int]);
    if call(&mut wq, -1, &mut iq, -1) != 0 {
        return None;
    }
    let mut work = vec![0.0; wq[0] as usize];
    let mut iwork = vec![0 as c_int; iq[0] as usize];
    let (lw, li) = (work.len() as c_int, iwork.len() as c_int);
    if call(&mut work, lw, &mut iwork, li) != 0 || found != ni || w.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(Eigen { values: DVector::from_vec(w), vectors: z })
}

fn check_window(coupler_freq: f64) -> Result<()> {
    if !(3.0..=7.0).contains(&coupler_freq) {
        return Err(Error::FrequencyOutOfRange(coupler_freq));
    }
    Ok(())
}

/// Full diagonalization at one coupler frequency (angular eigenvalues).
pub fn eigensolve(h: &HamiltonianSet, coupler_freq: f64) -> Result<Eigen> {
    check_window(coupler_freq)?;
    sorted_eigen(h.at(coupler_freq)).ok_or(Error::EigenFailure(coupler_freq))
}

/// Per-parity-sector diagonalization.
pub fn eigensolve_sectors(h: &HamiltonianSet, coupler_freq: f64) -> Result<[Eigen; 2]> {
    check_window(coupler_freq)?;
    let e0 = sorted_eigen(h.sector_at(0, coupler_freq)).ok_or(Error::EigenFailure(coupler_freq))?;
    let e1 = sorted_eigen(h.sector_at(1, coupler_freq)).ok_or(Error::EigenFailure(coupler_freq))?;
    Ok([e0, e1])
}

#[derive(Debug, Clone, Copy)]
pub struct TrackOptions {
    /// Gap (GHz) below which an avoided crossing is passed diabatically.
    pub diabatic_gap_threshold: f64,
    /// Coupler frequency where labels are assigned.
    pub idle: f64,
    /// Fail on ambiguous continuation instead of recording it.
    pub strict: bool,
}

impl Default for TrackOptions {
    fn default() -> Self {
        TrackOptions { diabatic_gap_threshold: 0.010, idle: 5.8, strict: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiabaticEvent {
    /// Grid point closest to the gap minimum.
    pub freq: f64,
    /// Grid interval bracketing the minimum.
    pub interval: (f64, f64),
    pub label: BareLabel,
    /// Dominant bare component of the branch the label jumps onto.
    pub partner: BareLabel,
    /// Fitted minimum gap in GHz.
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct SpectrumTrack {
    pub grid: Vec<f64>,
    /// All eigenvalues per grid point, ascending, GHz.
    pub eigenvalues: Vec<Vec<f64>>,
    pub labels: Vec<BareLabel>,
    /// Per grid point, per tracked label: index into `eigenvalues[k]`.
    pub adiabatic_map: Vec<Vec<usize>>,
    pub diabatic_events: Vec<DiabaticEvent>,
    /// Grid indices where the continuation was ambiguous.
    pub ambiguities: Vec<usize>,
}

impl SpectrumTrack {
    pub fn label_position(&self, label: &BareLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Energy curve (GHz) of a tracked label.
    pub fn curve(&self, label: &BareLabel) -> Option<Vec<f64>> {
        let p = self.label_position(label)?;
        Some(
            self.adiabatic_map
                .iter()
                .zip(&self.eigenvalues)
                .map(|(map, ev)| ev[map[p]])
                .collect(),
        )
    }
}

/// Position and value of the minimum of the parabola through three samples;
/// falls back to the middle sample when the samples are not convex.
fn vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d2 - d1) / (x[2] - x[0]);
    if a <= 0.0 {
        return (x[1], y[1]);
    }
    let b = d1 - a * (x[0] + x[1]);
    let c = y[0] - a * x[0] * x[0] - b * x[0];
    let xv = (-b / (2.0 * a)).clamp(x[0].min(x[2]), x[0].max(x[2]));
    (xv, (c - b * b / (4.0 * a)).clamp(0.0, y[1]))
}

/// Tracks the given labels over an ascending grid.
///
/// Branches are followed by eigenvalue rank inside the label's parity sector.
/// At a local minimum of the gap to an adjacent branch whose fitted value is
/// below the threshold, the label moves to that branch and an event is logged.
pub fn track_adiabatic(
    h: &HamiltonianSet,
    basis: &TruncatedBasis,
    grid: &[f64],
    labels: &[BareLabel],
    opts: TrackOptions,
) -> Result<SpectrumTrack> {
    if grid.is_empty() {
        return Err(Error::InvalidSpec("empty grid".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSpec("grid must be strictly ascending".into()));
    }
    let eig: Vec<[Eigen; 2]> =
        grid.iter().map(|&w| eigensolve_sectors(h, w)).collect::<Result<_>>()?;
    let positions: Vec<(usize, usize)> = labels
        .iter()
        .map(|l| {
            let i = basis.index_of(l).ok_or(Error::MissingLabel(l.0))?;
            let p = l.parity();
            let pos = h.sectors[p].iter().position(|&x| x == i).expect("sector covers basis");
            Ok((p, pos))
        })
        .collect::<Result<_>>()?;

    let k0 = grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - opts.idle).abs().total_cmp(&(b.1 - opts.idle).abs()))
        .map(|(k, _)| k)
        .unwrap();
    let mut start = Vec::with_capacity(labels.len());
    for &(p, pos) in &positions {
        let v = &eig[k0][p].vectors;
        let j = (0..v.ncols())
            .max_by(|&a, &b| v[(pos, a)].abs().total_cmp(&v[(pos, b)].abs()))
            .unwrap();
        start.push(j);
    }

    let nl = labels.len();
    let mut branch = vec![vec![0usize; nl]; grid.len()];
    branch[k0] = start.clone();
    let thr = opts.diabatic_gap_threshold * TAU;
    let mut events = Vec::new();
    let mut ambiguities = Vec::new();

    for dir in [-1isize, 1] {
        let mut cur = start.clone();
        // Switches whose crossing lies past the next grid point.
        let mut deferred: Vec<Option<usize>> = vec![None; nl];
        let mut k = k0 as isize;
        loop {
            let kn = k + dir;
            if kn < 0 || kn >= grid.len() as isize {
                break;
            }
            let (ku, knu) = (k as usize, kn as usize);
            let kk = kn + dir;
            for (li, &(p, _)) in positions.iter().enumerate() {
                if let Some(nb) = deferred[li].take() {
                    cur[li] = nb;
                    continue;
                }
                let j = cur[li];
                let nev = eig[0][p].values.len();
                if kk >= 0 && (kk as usize) < grid.len() {
                    let kku = kk as usize;
                    let mut jump = None;
                    for nb in [j.wrapping_sub(1), j + 1] {
                        if nb >= nev {
                            continue;
                        }
                        let gap = |q: usize| (eig[q][p].values[nb] - eig[q][p].values[j]).abs();
                        let g = [gap(ku), gap(knu), gap(kku)];
                        if g[1] < g[0] && g[1] <= g[2] {
                            let (xv, gmin) = vertex([grid[ku], grid[knu], grid[kku]], g);
                            if gmin < thr {
                                jump = Some((nb, gmin, (xv - grid[knu]) * dir as f64 > 0.0));
                                break;
                            }
                        }
                    }
                    if let Some((nb, gmin, beyond)) = jump {
                        // Identify the partner before the branches mix.
                        let v = &eig[ku][p].vectors;
                        let dom = (0..v.nrows())
                            .max_by(|&a, &b| v[(a, nb)].abs().total_cmp(&v[(b, nb)].abs()))
                            .unwrap();
                        let (lo, hi) = if grid[ku] < grid[kku] {
                            (grid[ku], grid[kku])
                        } else {
                            (grid[kku], grid[ku])
                        };
                        events.push(DiabaticEvent {
                            freq: grid[knu],
                            interval: (lo, hi),
                            label: labels[li],
                            partner: basis.labels()[h.sectors[p][dom]],
                            gap: gmin / TAU,
                        });
                        // The label follows its bare state onto the partner branch
                        // at the first grid point past the fitted crossing.
                        if beyond {
                            deferred[li] = Some(nb);
                        } else {
                            cur[li] = nb;
                        }
                        continue;
                    }
                }
                // Overlap diagnostic for the rank continuation.
                let vp = eig[ku][p].vectors.column(j);
                let vn = &eig[knu][p].vectors;
                let chosen = vp.dot(&vn.column(j)).abs();
                let best_other = [j.wrapping_sub(1), j + 1]
                    .into_iter()
                    .filter(|&x| x < nev)
                    .map(|x| vp.dot(&vn.column(x)).abs())
                    .fold(0.0, f64::max);
                if (chosen - best_other).abs() < 1e-3 && chosen < 0.9 {
                    if opts.strict {
                        return Err(Error::AmbiguousContinuation { index: knu, freq: grid[knu] });
                    }
                    ambiguities.push(knu);
                }
            }
            for a in 0..nl {
                for b in a + 1..nl {
                    if positions[a].0 == positions[b].0 && cur[a] == cur[b] {
                        return Err(Error::AmbiguousContinuation { index: knu, freq: grid[knu] });
                    }
                }
            }
            branch[knu] = cur.clone();
            k = kn;
        }
    }

    // Merge sector spectra into one ascending list per grid point.
    let mut eigenvalues = Vec::with_capacity(grid.len());
    let mut adiabatic_map = Vec::with_capacity(grid.len());
    for (k, e) in eig.iter().enumerate() {
        let mut all: Vec<(f64, usize, usize)> = Vec::new();
        for (p, s) in e.iter().enumerate() {
            all.extend(s.values.iter().enumerate().map(|(j, &v)| (v / TAU, p, j)));
        }
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        let map: Vec<usize> = (0..nl)
            .map(|li| {
                let (p, _) = positions[li];
                all.iter().position(|&(_, q, j)| q == p && j == branch[k][li]).unwrap()
            })
            .collect();
        eigenvalues.push(all.iter().map(|x| x.0).collect());
        adiabatic_map.push(map);
    }
    events.sort_by(|a, b| a.freq.total_cmp(&b.freq));
    Ok(SpectrumTrack {
        grid: grid.to_vec(),
        eigenvalues,
        labels: labels.to_vec(),
        adiabatic_map,
        diabatic_events: events,
        ambiguities,
    })
}

/// Eigenfrequencies of the eight computational adiabatic states relative to
/// the tracked ground state (GHz).
#[derive(Debug, Clone)]
pub struct AdiabaticFrequencies {
    pub grid: Vec<f64>,
    /// Indexed by the computational bit pattern n1 n2 n3 read as a binary number.
    pub curves: [Vec<f64>; 8],
}

pub fn computational_frequencies(track: &SpectrumTrack) -> Result<AdiabaticFrequencies> {
    let comps = computational_labels();
    let ground = track.curve(&comps[0]).ok_or(Error::MissingLabel(comps[0].0))?;
    let mut curves: [Vec<f64>; 8] = Default::default();
    for (k, l) in comps.iter().enumerate() {
        let c = track.curve(l).ok_or(Error::MissingLabel(l.0))?;
        curves[k] = c.iter().zip(&ground).map(|(a, b)| a - b).collect();
    }
    Ok(AdiabaticFrequencies { grid: track.grid.clone(), curves })
}

/// Dressed computational states at a fixed coupler frequency.
#[derive(Debug, Clone)]
pub struct DressedBasis {
    /// n × 8 real eigenvectors, columns ordered like [`computational_labels`].
    pub vectors: DMatrix<f64>,
    /// Angular eigenenergies (rad/ns).
    pub energies: [f64; 8],
    pub coupler_freq: f64,
}

impl DressedBasis {
    /// Dressed 0→1 transition frequency (GHz) of qubit 0..3.
    pub fn qubit_frequency(&self, q: usize) -> f64 {
        let k = 1 << (2 - q);
        (self.energies[k] - self.energies[0]) / TAU
    }
}

pub fn dressed_computational(
    h: &HamiltonianSet,
    basis: &TruncatedBasis,
    coupler_freq: f64,
) -> Result<DressedBasis> {
    let e = eigensolve(h, coupler_freq)?;
    let n = h.dim();
    let mut vectors = DMatrix::zeros(n, 8);
    let mut energies = [0.0; 8];
    let mut used = Vec::new();
    for (k, l) in computational_labels().iter().enumerate() {
        let i = basis.index_of(l).ok_or(Error::MissingLabel(l.0))?;
        let j = (0..n)
            .max_by(|&a, &b| e.vectors[(i, a)].abs().total_cmp(&e.vectors[(i, b)].abs()))
            .unwrap();
        if used.contains(&j) {
            return Err(Error::AmbiguousContinuation { index: j, freq: coupler_freq });
        }
        used.push(j);
        let s = e.vectors[(i, j)].signum();
        vectors.set_column(k, &(e.vectors.column(j) * s));
        energies[k] = e.values[j];
    }
    Ok(DressedBasis { vectors, energies, coupler_freq })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{build_basis, Truncation};

    fn two_modes(g: f64) -> (DeviceSpec, TruncatedBasis) {
        let mut s = DeviceSpec::default();
        for m in &mut s.modes {
            m.level_count = 2;
        }
        s.couplings = vec![crate::hilbert::Coupling { a: Mode::Q1, b: Mode::Q2, g }];
        s.truncation = Truncation { energy_cutoff: 100.0, max_total_excitations: 2, cutoff_reference: 4.5 };
        let labels = vec![
            BareLabel::new(0, 0, 0, 0),
            BareLabel::new(0, 0, 1, 0),
            BareLabel::new(0, 1, 0, 0),
            BareLabel::new(0, 1, 1, 0),
        ];
        (s, TruncatedBasis::from_labels(labels, [2, 2, 2, 2]))
    }

    #[test]
    fn two_mode_coupling_elements() {
        let (mut s, b) = two_modes(0.1);
        s.coupling_sign = crate::hilbert::CouplingSign::Literal;
        let h = assemble(&s, &b).unwrap();
        let i10 = b.index_of(&BareLabel::new(0, 1, 0, 0)).unwrap();
        let i01 = b.index_of(&BareLabel::new(0, 0, 1, 0)).unwrap();
        let i00 = b.index_of(&BareLabel::new(0, 0, 0, 0)).unwrap();
        let i11 = b.index_of(&BareLabel::new(0, 1, 1, 0)).unwrap();
        // (a†−a)(b†−b): exchange terms −a†b − ab† and counter-rotating a†b† + ab.
        assert!((h.h0_fixed[(i10, i01)] + 0.1 * TAU).abs() < 1e-12);
        assert!((h.h0_fixed[(i00, i11)] - 0.1 * TAU).abs() < 1e-12);
        s.coupling_sign = crate::hilbert::CouplingSign::Charge;
        let h = assemble(&s, &b).unwrap();
        assert!((h.h0_fixed[(i10, i01)] - 0.1 * TAU).abs() < 1e-12);
        assert!((h.h0_fixed[(i00, i11)] + 0.1 * TAU).abs() < 1e-12);
    }

    #[test]
    fn decoupled_eigenvalues_are_kerr_energies() {
        let mut s = DeviceSpec::default();
        s.couplings.clear();
        let b = build_basis(&s).unwrap();
        let h = assemble(&s, &b).unwrap();
        let e = eigensolve(&h, 5.1).unwrap();
        let mut bare: Vec<f64> = b.labels().iter().map(|l| s.bare_energy(l, 5.1) * TAU).collect();
        bare.sort_by(f64::total_cmp);
        for (a, b) in e.values.iter().zip(&bare) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn hermitian_and_residuals() {
        let s = DeviceSpec::default();
        let b = build_basis(&s).unwrap();
        let h = assemble(&s, &b).unwrap();
        let m = h.at(4.7);
        assert!((&m - m.transpose()).abs().max() < 1e-12 * m.abs().max());
        let e = eigensolve(&h, 4.7).unwrap();
        let scale = m.norm();
        for j in 0..e.values.len() {
            let v = e.vectors.column(j);
            let r = (&m * v - v * e.values[j]).norm();
            assert!(r < 1e-9 * scale);
        }
        let g = e.vectors.transpose() * &e.vectors;
        assert!((g - DMatrix::identity(b.dim(), b.dim())).abs().max() < 1e-10);
        assert!(e.values.as_slice().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn frequency_window() {
        let s = DeviceSpec::default();
        let b = build_basis(&s).unwrap();
        let h = assemble(&s, &b).unwrap();
        assert!(matches!(eigensolve(&h, 2.0), Err(Error::FrequencyOutOfRange(_))));
    }

    #[test]
    fn sectors_reproduce_full_spectrum() {
        let s = DeviceSpec::default();
        let b = build_basis(&s).unwrap();
        let h = assemble(&s, &b).unwrap();
        let full = eigensolve(&h, 4.5).unwrap();
        let [e0, e1] = eigensolve_sectors(&h, 4.5).unwrap();
        let mut merged: Vec<f64> = e0.values.iter().chain(e1.values.iter()).copied().collect();
        merged.sort_by(f64::total_cmp);
        for (a, b) in full.values.iter().zip(&merged) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn single_point_grid_is_identity_tracking() {
        let s = DeviceSpec::default();
        let b = build_basis(&s).unwrap();
        let h = assemble(&s, &b).unwrap();
        let labels = computational_labels();
        let t = track_adiabatic(&h, &b, &[5.8], &labels, TrackOptions::default()).unwrap();
        assert!(t.diabatic_events.is_empty());
        let d = dressed_computational(&h, &b, 5.8).unwrap();
        for (k, _) in labels.iter().enumerate() {
            let e = t.eigenvalues[0][t.adiabatic_map[0][k]];
            assert!((e - d.energies[k] / TAU).abs() < 1e-12);
        }
    }

    #[test]
    fn dressed_qubit_frequencies_near_bare() {
        let s = DeviceSpec::default();
        let b = build_basis(&s).unwrap();
        let h = assemble(&s, &b).unwrap();
        let d = dressed_computational(&h, &b, 5.8).unwrap();
        for (q, f) in [3.5, 4.0, 4.5].into_iter().enumerate() {
            assert!((d.qubit_frequency(q) - f).abs() < 0.05);
        }
    }

    #[test]
    fn vertex_of_parabola() {
        let y = |x: f64| 2.0 * (x - 0.3) * (x - 0.3) + 0.05;
        let (x, v) = vertex([0.0, 0.25, 0.5], [y(0.0), y(0.25), y(0.5)]);
        assert!((x - 0.3).abs() < 1e-12);
        assert!((v - 0.05).abs() < 1e-12);
    }
}
