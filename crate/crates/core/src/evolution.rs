//! Closed and open system time evolution under a sampled control schedule.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::rc::Rc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{eigensolve_sectors, sorted_eigen, Eigen, HamiltonianSet};
use crate::hilbert::{DeviceSpec, Mode, TruncatedBasis};
use crate::pulses::ControlSchedule;

/// Complex matrix stored as separate real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

impl CMatrix {
    pub fn zeros(r: usize, c: usize) -> Self {
        CMatrix { re: DMatrix::zeros(r, c), im: DMatrix::zeros(r, c) }
    }

    pub fn identity(n: usize) -> Self {
        CMatrix::from_real(DMatrix::identity(n, n))
    }

    /// First `m` columns of the n×n identity.
    pub fn identity_columns(n: usize, m: usize) -> Self {
        CMatrix::from_real(DMatrix::identity(n, m))
    }

    pub fn from_real(re: DMatrix<f64>) -> Self {
        let im = DMatrix::zeros(re.nrows(), re.ncols());
        CMatrix { re, im }
    }

    pub fn from_complex(m: &DMatrix<Complex64>) -> Self {
        CMatrix { re: m.map(|z| z.re), im: m.map(|z| z.im) }
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        self.re.zip_map(&self.im, Complex64::new)
    }

    pub fn nrows(&self) -> usize {
        self.re.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.re.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re[(i, j)], self.im[(i, j)])
    }

    pub fn set(&mut self, i: usize, j: usize, z: Complex64) {
        self.re[(i, j)] = z.re;
        self.im[(i, j)] = z.im;
    }

    pub fn mul(&self, o: &CMatrix) -> CMatrix {
        CMatrix {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }

    /// `m · self` for a real matrix m.
    pub fn left_real(&self, m: &DMatrix<f64>) -> CMatrix {
        CMatrix { re: m * &self.re, im: m * &self.im }
    }

    /// `mᵀ · self` for a real matrix m.
    pub fn left_real_transpose(&self, m: &DMatrix<f64>) -> CMatrix {
        CMatrix { re: m.tr_mul(&self.re), im: m.tr_mul(&self.im) }
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix { re: self.re.transpose(), im: -self.im.transpose() }
    }

    pub fn add(&self, o: &CMatrix) -> CMatrix {
        CMatrix { re: &self.re + &o.re, im: &self.im + &o.im }
    }

    pub fn scale(&self, s: f64) -> CMatrix {
        CMatrix { re: &self.re * s, im: &self.im * s }
    }

    pub fn trace(&self) -> Complex64 {
        Complex64::new(self.re.trace(), self.im.trace())
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().chain(self.im.iter()).all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, o: &CMatrix) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.nrows() {
            for j in 0..self.ncols() {
                m = m.max((self.get(i, j) - o.get(i, j)).norm());
            }
        }
        m
    }

    fn rows(&self, idx: &[usize]) -> CMatrix {
        CMatrix { re: self.re.select_rows(idx), im: self.im.select_rows(idx) }
    }

    fn set_rows(&mut self, idx: &[usize], src: &CMatrix) {
        for (r, &i) in idx.iter().enumerate() {
            self.re.row_mut(i).copy_from(&src.re.row(r));
            self.im.row_mut(i).copy_from(&src.im.row(r));
        }
    }
}

/// exp(−iH dt)·ψ from an eigendecomposition of real symmetric H.
fn apply_eigen(e: &Eigen, dt: f64, psi: &CMatrix) -> CMatrix {
    let mut a = psi.left_real_transpose(&e.vectors);
    for (j, &ev) in e.values.iter().enumerate() {
        let (s, c) = (ev * dt).sin_cos();
        for col in 0..a.ncols() {
            let (x, y) = (a.re[(j, col)], a.im[(j, col)]);
            a.re[(j, col)] = x * c + y * s;
            a.im[(j, col)] = y * c - x * s;
        }
    }
    a.left_real(&e.vectors)
}

/// Diagonalization of one tick's Hamiltonian.
#[derive(Debug)]
enum Factor {
    Sectors([Eigen; 2]),
    Full(Eigen),
}

/// Per-tick propagator source with a cache for repeated undriven values.
pub struct Stepper<'a> {
    h: &'a HamiltonianSet,
    dt: f64,
    cache: HashMap<u64, Rc<Factor>>,
}

impl<'a> Stepper<'a> {
    pub fn new(h: &'a HamiltonianSet, dt: f64) -> Self {
        Stepper { h, dt, cache: HashMap::new() }
    }

    fn factor(&mut self, wc: f64, drive: [f64; 3]) -> Result<Rc<Factor>> {
        if drive.iter().all(|&d| d == 0.0) {
            let key = wc.to_bits();
            if let Some(f) = self.cache.get(&key) {
                return Ok(f.clone());
            }
            let f = Rc::new(Factor::Sectors(eigensolve_sectors(self.h, wc)?));
            if self.cache.len() > 256 {
                self.cache.clear();
            }
            self.cache.insert(key, f.clone());
            return Ok(f);
        }
        if !(3.0..=7.0).contains(&wc) {
            return Err(Error::FrequencyOutOfRange(wc));
        }
        let mut m = self.h.at(wc);
        for (q, &d) in drive.iter().enumerate() {
            if d != 0.0 {
                m += &self.h.drive_ops[q] * d;
            }
        }
        let e = sorted_eigen(m).ok_or(Error::EigenFailure(wc))?;
        Ok(Rc::new(Factor::Full(e)))
    }

    /// Advances the columns of ψ by one tick.
    pub fn step(&mut self, wc: f64, drive: [f64; 3], psi: &CMatrix) -> Result<CMatrix> {
        let f = self.factor(wc, drive)?;
        Ok(match &*f {
            Factor::Full(e) => apply_eigen(e, self.dt, psi),
            Factor::Sectors(es) => {
                let mut out = psi.clone();
                for (s, e) in es.iter().enumerate() {
                    let idx = &self.h.sectors[s];
                    let sub = apply_eigen(e, self.dt, &psi.rows(idx));
                    out.set_rows(idx, &sub);
                }
                out
            }
        })
    }
}

/// Full-space propagator over [start, end].
#[derive(Debug, Clone)]
pub struct Propagator {
    pub u: CMatrix,
    pub start: f64,
    pub end: f64,
}

/// Propagates the columns of `init` through the schedule.
pub fn evolve_columns(h: &HamiltonianSet, sched: &ControlSchedule, init: &CMatrix) -> Result<CMatrix> {
    evolve_range(h, sched, 0..sched.ticks(), init)
}

fn evolve_range(
    h: &HamiltonianSet,
    sched: &ControlSchedule,
    ticks: std::ops::Range<usize>,
    init: &CMatrix,
) -> Result<CMatrix> {
    if init.nrows() != h.dim() {
        return Err(Error::DimensionMismatch(init.nrows(), h.dim()));
    }
    let mut st = Stepper::new(h, sched.dt);
    let mut psi = init.clone();
    for k in ticks {
        psi = st.step(sched.coupler[k], sched.drive_at(k), &psi)?;
    }
    if !psi.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(psi)
}

pub fn unitary_evolve(h: &HamiltonianSet, sched: &ControlSchedule) -> Result<Propagator> {
    let u = evolve_columns(h, sched, &CMatrix::identity(h.dim()))?;
    Ok(Propagator { u, start: 0.0, end: sched.duration() })
}

/// Time-ordered product of exp(−iH_k dt) for arbitrary real symmetric H_k.
pub fn evolve_real<F>(init: &CMatrix, ticks: usize, dt: f64, mut hk: F) -> Result<CMatrix>
where
    F: FnMut(usize) -> DMatrix<f64>,
{
    let mut psi = init.clone();
    for k in 0..ticks {
        let e = sorted_eigen(hk(k)).ok_or(Error::NonFinite)?;
        psi = apply_eigen(&e, dt, &psi);
    }
    if !psi.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(psi)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeNoise {
    /// Relaxation time of the first excited level, µs.
    #[serde(default)]
    pub t1: Option<f64>,
    /// Pure dephasing time, µs.
    #[serde(default)]
    pub t_phi: Option<f64>,
    /// Include charge-noise dephasing for this mode.
    #[serde(default)]
    pub charge_noise: bool,
    /// E_J/E_C; derived from frequency and anharmonicity when absent.
    #[serde(default)]
    pub ej_ec_ratio: Option<f64>,
    /// Frequency (GHz) at which E_J is derived; defaults to the mode frequency.
    #[serde(default)]
    pub dispersion_freq: Option<f64>,
}

/// Per-mode noise, ordered coupler, Q1, Q2, Q3.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub modes: [ModeNoise; 4],
    /// Charge-noise amplitude A_n in units of e.
    #[serde(default)]
    pub charge_noise_amplitude: f64,
}

impl NoiseModel {
    /// Same T1 and T_φ on every mode, charge noise on the coupler evaluated
    /// at its operation frequency.
    pub fn uniform(t1_us: Option<f64>, t_phi_us: Option<f64>, a_n: f64, coupler_op: f64) -> Self {
        let base = ModeNoise { t1: t1_us, t_phi: t_phi_us, ..Default::default() };
        let mut modes = [base; 4];
        modes[0].charge_noise = a_n > 0.0;
        modes[0].dispersion_freq = Some(coupler_op);
        NoiseModel { modes, charge_noise_amplitude: a_n }
    }

    pub fn validate(&self) -> Result<()> {
        for m in &self.modes {
            for t in [m.t1, m.t_phi].into_iter().flatten() {
                if !(t > 0.0) {
                    return Err(Error::InvalidNoise(format!("time {t} µs must be positive")));
                }
            }
            if let Some(r) = m.ej_ec_ratio {
                if !(r > 0.0) {
                    return Err(Error::InvalidNoise("E_J/E_C must be positive".into()));
                }
            }
        }
        if !(self.charge_noise_amplitude >= 0.0) {
            return Err(Error::InvalidNoise("A_n must be non-negative".into()));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.modes.iter().all(|m| m.t1.is_none() && m.t_phi.is_none())
            && (self.charge_noise_amplitude == 0.0 || self.modes.iter().all(|m| !m.charge_noise))
    }
}

/// E_J from ω ≈ √(8 E_J E_C) − E_C with E_C = −α (GHz).
pub fn josephson_energy(frequency: f64, anharmonicity: f64) -> f64 {
    let ec = -anharmonicity;
    (frequency + ec).powi(2) / (8.0 * ec)
}

/// Charge dispersion ε_m (GHz) of transmon level m.
pub fn charge_dispersion(m: u32, ec: f64, ej: f64) -> f64 {
    let fact: f64 = (1..=m).map(f64::from).product();
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    let r = ej / ec;
    sign * ec * 2f64.powi(4 * m as i32 + 5) / fact
        * (2.0 / PI).sqrt()
        * (r / 2.0).powf(m as f64 / 2.0 + 0.75)
        * (-(8.0 * r).sqrt()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CollapseKind {
    /// √rate · a.
    Lowering,
    /// √(2·rate) |level⟩⟨level|.
    Dephasing { level: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollapseOp {
    pub mode: Mode,
    pub kind: CollapseKind,
    /// Rate in 1/ns.
    pub rate: f64,
}

impl CollapseOp {
    pub fn matrix(&self, basis: &TruncatedBasis) -> DMatrix<f64> {
        let n = basis.dim();
        let mut m = DMatrix::zeros(n, n);
        for (j, l) in basis.labels().iter().enumerate() {
            let k = l.occupation(self.mode);
            match self.kind {
                CollapseKind::Lowering => {
                    if k > 0 {
                        let mut t = *l;
                        t.0[self.mode.index()] -= 1;
                        if let Some(i) = basis.index_of(&t) {
                            m[(i, j)] = (self.rate * k as f64).sqrt();
                        }
                    }
                }
                CollapseKind::Dephasing { level } => {
                    if k == level {
                        m[(j, j)] = (2.0 * self.rate).sqrt();
                    }
                }
            }
        }
        m
    }
}

/// Collapse operators in the bare product basis.
pub fn collapse_operators(
    spec: &DeviceSpec,
    noise: &NoiseModel,
    basis: &TruncatedBasis,
) -> Result<Vec<CollapseOp>> {
    noise.validate()?;
    let mut ops = Vec::new();
    for (mi, &mode) in Mode::ALL.iter().enumerate() {
        let mn = &noise.modes[mi];
        let ms = spec.mode(mode);
        let top = basis.labels().iter().map(|l| l.occupation(mode)).max().unwrap_or(0);
        if let Some(t1) = mn.t1 {
            ops.push(CollapseOp { mode, kind: CollapseKind::Lowering, rate: 1.0 / (t1 * 1e3) });
        }
        let charge = mn.charge_noise && noise.charge_noise_amplitude > 0.0;
        if mn.t_phi.is_none() && !charge {
            continue;
        }
        let ec = -ms.anharmonicity;
        let ej = match mn.ej_ec_ratio {
            Some(r) => r * ec,
            None => josephson_energy(mn.dispersion_freq.unwrap_or(ms.frequency), ms.anharmonicity),
        };
        if charge && !(ec > 0.0 && ej > 0.0) {
            return Err(Error::InvalidNoise(format!("no valid E_J/E_C for mode {mode}")));
        }
        for level in 1..=top {
            let mut rate = mn.t_phi.map_or(0.0, |t| 1.0 / (t * 1e3));
            if charge {
                let eps = charge_dispersion(level as u32, ec, ej);
                rate += PI * noise.charge_noise_amplitude * (TAU * eps).abs();
            }
            if rate > 0.0 {
                ops.push(CollapseOp { mode, kind: CollapseKind::Dephasing { level }, rate });
            }
        }
    }
    Ok(ops)
}

/// Lindblad dissipator specialised to local lowering and diagonal operators.
#[derive(Debug, Clone)]
pub struct Dissipator {
    /// Elementwise weight for the diagonal and anticommutator terms.
    weights: DMatrix<f64>,
    /// Per lowering operator: (destination, source, coefficient).
    jumps: Vec<Vec<(usize, usize, f64)>>,
}

impl Dissipator {
    pub fn new(ops: &[CollapseOp], basis: &TruncatedBasis) -> Self {
        let n = basis.dim();
        let mut diag_sq = vec![0.0; n];
        let mut diag_ops: Vec<Vec<f64>> = Vec::new();
        let mut jumps = Vec::new();
        for op in ops {
            let m = op.matrix(basis);
            match op.kind {
                CollapseKind::Lowering => {
                    let mut list = Vec::new();
                    for j in 0..n {
                        for i in 0..n {
                            let c = m[(i, j)];
                            if c != 0.0 {
                                list.push((i, j, c));
                                diag_sq[j] += c * c;
                            }
                        }
                    }
                    jumps.push(list);
                }
                CollapseKind::Dephasing { .. } => diag_ops.push(m.diagonal().iter().copied().collect()),
            }
        }
        let weights = DMatrix::from_fn(n, n, |i, k| {
            let mut w = -0.5 * (diag_sq[i] + diag_sq[k]);
            for d in &diag_ops {
                w += d[i] * d[k] - 0.5 * (d[i] * d[i] + d[k] * d[k]);
            }
            w
        });
        Dissipator { weights, jumps }
    }

    pub fn is_zero(&self) -> bool {
        self.jumps.iter().all(|j| j.is_empty()) && self.weights.iter().all(|&w| w == 0.0)
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix {
            re: rho.re.component_mul(&self.weights),
            im: rho.im.component_mul(&self.weights),
        };
        for list in &self.jumps {
            for &(a, j, cj) in list {
                for &(b, l, cl) in list {
                    let c = cj * cl;
                    out.re[(a, b)] += c * rho.re[(j, l)];
                    out.im[(a, b)] += c * rho.im[(j, l)];
                }
            }
        }
        out
    }

    /// Second-order Runge–Kutta step of ρ̇ = D(ρ).
    fn step(&self, rho: &CMatrix, h: f64) -> CMatrix {
        let k1 = self.apply(rho);
        let mid = rho.add(&k1.scale(0.5 * h));
        rho.add(&self.apply(&mid).scale(h))
    }
}

/// Default dissipator interval in ticks (1 ns at 30 GS/s).
pub const DEFAULT_INTERVAL_TICKS: usize = 30;

fn check_density(rho: &CMatrix) -> Result<()> {
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
        return Err(Error::NonPhysicalState(format!("trace {tr}")));
    }
    if rho.max_abs_diff(&rho.adjoint()) > 1e-10 {
        return Err(Error::NonPhysicalState("not Hermitian".into()));
    }
    let ev = rho.to_complex().symmetric_eigenvalues();
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-9 {
        return Err(Error::NonPhysicalState(format!("negative eigenvalue {min}")));
    }
    Ok(())
}

/// Evolves one physical density matrix.
pub fn lindblad_evolve(
    h: &HamiltonianSet,
    sched: &ControlSchedule,
    diss: &Dissipator,
    rho0: &CMatrix,
) -> Result<CMatrix> {
    check_density(rho0)?;
    let mut out = lindblad_evolve_batch(h, sched, diss, std::slice::from_ref(rho0), DEFAULT_INTERVAL_TICKS)?;
    Ok(out.pop().unwrap())
}

/// Evolves a batch of (not necessarily physical) operators with a Strang
/// split: exact unitary per interval, dissipator half-steps around it.
pub fn lindblad_evolve_batch(
    h: &HamiltonianSet,
    sched: &ControlSchedule,
    diss: &Dissipator,
    rhos: &[CMatrix],
    interval_ticks: usize,
) -> Result<Vec<CMatrix>> {
    let steps = interval_propagators(h, sched, interval_ticks)?;
    lindblad_with_propagators(&steps, diss, rhos)
}

/// Unitary of one splitting interval and its length in ns.
#[derive(Debug, Clone)]
pub struct IntervalStep {
    pub u: CMatrix,
    pub length: f64,
}

/// Full-space propagators of consecutive groups of `interval_ticks` ticks.
pub fn interval_propagators(
    h: &HamiltonianSet,
    sched: &ControlSchedule,
    interval_ticks: usize,
) -> Result<Vec<IntervalStep>> {
    let n = h.dim();
    let m = interval_ticks.max(1);
    let ticks = sched.ticks();
    let mut st = Stepper::new(h, sched.dt);
    let mut out = Vec::with_capacity(ticks.div_ceil(m));
    let mut k = 0;
    while k < ticks {
        let end = (k + m).min(ticks);
        let mut u = CMatrix::identity(n);
        for t in k..end {
            u = st.step(sched.coupler[t], sched.drive_at(t), &u)?;
        }
        if !u.is_finite() {
            return Err(Error::NonFinite);
        }
        out.push(IntervalStep { u, length: (end - k) as f64 * sched.dt });
        k = end;
    }
    Ok(out)
}

/// Strang-split Lindblad evolution over precomputed interval unitaries.
pub fn lindblad_with_propagators(steps: &[IntervalStep], diss: &Dissipator, rhos: &[CMatrix]) -> Result<Vec<CMatrix>> {
    if let Some(s) = steps.first() {
        let n = s.u.nrows();
        if let Some(r) = rhos.iter().find(|r| r.nrows() != n || r.ncols() != n) {
            return Err(Error::DimensionMismatch(r.nrows(), n));
        }
    }
    let dissipative = !diss.is_zero();
    let mut cur: Vec<CMatrix> = rhos.to_vec();
    let mut pending = 0.0;
    for s in steps {
        if dissipative {
            let hstep = pending + 0.5 * s.length;
            cur = cur.iter().map(|r| diss.step(r, hstep)).collect();
        }
        cur = conjugate_batch(&s.u, &cur);
        pending = 0.5 * s.length;
    }
    if dissipative && pending > 0.0 {
        cur = cur.iter().map(|r| diss.step(r, pending)).collect();
    }
    if cur.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(cur)
}

/// U ρ_i U† for every ρ_i, using two stacked products: U·(U·ρ†)†.
fn conjugate_batch(u: &CMatrix, rhos: &[CMatrix]) -> Vec<CMatrix> {
    let n = u.nrows();
    let b = rhos.len();
    let mut stack = CMatrix::zeros(n, n * b);
    for (i, r) in rhos.iter().enumerate() {
        let a = r.adjoint();
        stack.re.columns_mut(i * n, n).copy_from(&a.re);
        stack.im.columns_mut(i * n, n).copy_from(&a.im);
    }
    let x = u.mul(&stack);
    let mut xa = CMatrix::zeros(n, n * b);
    for i in 0..b {
        let blk = CMatrix {
            re: x.re.columns(i * n, n).into_owned(),
            im: x.im.columns(i * n, n).into_owned(),
        }
        .adjoint();
        xa.re.columns_mut(i * n, n).copy_from(&blk.re);
        xa.im.columns_mut(i * n, n).copy_from(&blk.im);
    }
    let y = u.mul(&xa);
    (0..b)
        .map(|i| CMatrix {
            re: y.re.columns(i * n, n).into_owned(),
            im: y.im.columns(i * n, n).into_owned(),
        })
        .collect()
}

/// Superoperator of a map on a d-dimensional space:
/// `superop[(a·d + b, i·d + j)] = ⟨a|Φ(|i⟩⟨j|)|b⟩`.
#[derive(Debug, Clone)]
pub struct QuantumChannel {
    pub dim: usize,
    pub superop: DMatrix<Complex64>,
}

impl QuantumChannel {
    pub fn identity(d: usize) -> Self {
        QuantumChannel { dim: d, superop: DMatrix::identity(d * d, d * d) }
    }

    pub fn from_unitary(u: &DMatrix<Complex64>) -> Self {
        let d = u.nrows();
        let mut s = DMatrix::zeros(d * d, d * d);
        for a in 0..d {
            for b in 0..d {
                for i in 0..d {
                    for j in 0..d {
                        s[(a * d + b, i * d + j)] = u[(a, i)] * u[(b, j)].conj();
                    }
                }
            }
        }
        QuantumChannel { dim: d, superop: s }
    }

    /// Φ(|i⟩⟨j|) as a d×d matrix.
    pub fn output(&self, i: usize, j: usize) -> DMatrix<Complex64> {
        let d = self.dim;
        DMatrix::from_fn(d, d, |a, b| self.superop[(a * d + b, i * d + j)])
    }

    pub fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let d = self.dim;
        let v = DMatrix::from_fn(d * d, 1, |r, _| rho[(r / d, r % d)]);
        let o = &self.superop * v;
        DMatrix::from_fn(d, d, |a, b| o[(a * d + b, 0)])
    }

    /// Φ'(ρ) = R Φ(ρ) R† with R = diag(e^{iφ}).
    pub fn rotate_output(&mut self, phases: &[f64]) {
        let d = self.dim;
        for a in 0..d {
            for b in 0..d {
                let z = Complex64::from_polar(1.0, phases[a] - phases[b]);
                for c in 0..d * d {
                    self.superop[(a * d + b, c)] *= z;
                }
            }
        }
    }

    /// Largest |Tr Φ(|i⟩⟨j|) − δ_ij| over the basis.
    pub fn trace_defect(&self) -> f64 {
        let d = self.dim;
        let mut m: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let tr: Complex64 = (0..d).map(|a| self.superop[(a * d + a, i * d + j)]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                m = m.max((tr - want).norm());
            }
        }
        m
    }
}

/// Builds the channel restricted to span(columns of `comp`) by evaluating
/// the Hermitian-independent inputs |i⟩⟨j| (i ≤ j) and completing the rest by
/// Φ(|j⟩⟨i|) = Φ(|i⟩⟨j|)†.
pub fn process_tomography<F>(comp: &DMatrix<f64>, evaluate: F) -> Result<QuantumChannel>
where
    F: FnOnce(&[CMatrix]) -> Result<Vec<CMatrix>>,
{
    let d = comp.ncols();
    let mut pairs = Vec::new();
    let mut inputs = Vec::new();
    for i in 0..d {
        for j in i..d {
            let ci = comp.column(i);
            let cj = comp.column(j);
            inputs.push(CMatrix::from_real(ci * cj.transpose()));
            pairs.push((i, j));
        }
    }
    let outputs = evaluate(&inputs)?;
    if outputs.len() != inputs.len() {
        return Err(Error::DimensionMismatch(outputs.len(), inputs.len()));
    }
    let mut s = DMatrix::zeros(d * d, d * d);
    for (&(i, j), out) in pairs.iter().zip(&outputs) {
        let p = out.left_real_transpose(comp);
        let blk = CMatrix { re: &p.re * comp, im: &p.im * comp };
        for a in 0..d {
            for b in 0..d {
                let z = blk.get(a, b);
                s[(a * d + b, i * d + j)] = z;
                if i != j {
                    s[(b * d + a, j * d + i)] = z.conj();
                }
            }
        }
    }
    Ok(QuantumChannel { dim: d, superop: s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::assemble;
    use crate::hilbert::build_basis;
    use crate::pulses::{render, RenderConfig};

    fn small() -> (DeviceSpec, TruncatedBasis, HamiltonianSet) {
        let mut s = DeviceSpec::default();
        s.truncation.max_total_excitations = 2;
        let b = build_basis(&s).unwrap();
        let h = assemble(&s, &b).unwrap();
        (s, b, h)
    }

    #[test]
    fn constant_h_matches_single_exponential() {
        let (_, _, h) = small();
        let sched = render(&[], 3.0, &RenderConfig::default()).unwrap();
        let u = unitary_evolve(&h, &sched).unwrap().u;
        let e = sorted_eigen(h.at(5.8)).unwrap();
        let direct = apply_eigen(&e, 3.0, &CMatrix::identity(h.dim()));
        assert!(u.max_abs_diff(&direct) < 1e-9);
        let uu = u.adjoint().mul(&u);
        assert!(uu.max_abs_diff(&CMatrix::identity(h.dim())) < 1e-10);
    }

    #[test]
    fn zero_length_is_identity() {
        let (_, _, h) = small();
        let sched = render(&[], 0.0, &RenderConfig::default()).unwrap();
        let u = unitary_evolve(&h, &sched).unwrap().u;
        assert_eq!(u, CMatrix::identity(h.dim()));
    }

    #[test]
    fn dispersion_alternates_and_matches_formula() {
        let (ec, ej) = (0.25, 12.5);
        let e0 = charge_dispersion(0, ec, ej);
        let e1 = charge_dispersion(1, ec, ej);
        assert!(e0 > 0.0 && e1 < 0.0 && charge_dispersion(2, ec, ej) > 0.0);
        // Independent evaluation for E_J/E_C = 50.
        let x: f64 = 50.0;
        let base = ec * (2.0 / PI).sqrt() * (-(8.0 * x).sqrt()).exp();
        let want0 = base * 32.0 * (x / 2.0).powf(0.75);
        let want1 = -base * 512.0 * (x / 2.0).powf(1.25);
        assert!((e0 - want0).abs() < 1e-12 * want0.abs());
        assert!((e1 / e0 - want1 / want0).abs() < 1e-10);
    }

    #[test]
    fn zero_charge_noise_gives_uniform_dephasing() {
        let (s, b, _) = small();
        let n = NoiseModel::uniform(None, Some(124.0), 0.0, 4.5);
        let ops = collapse_operators(&s, &n, &b).unwrap();
        assert!(!ops.is_empty());
        for op in ops {
            assert!((op.rate - 1.0 / 124e3).abs() < 1e-18);
        }
    }

    #[test]
    fn dissipator_matches_dense_lindblad_form() {
        let (s, b, _) = small();
        let n = NoiseModel::uniform(Some(10.0), Some(7.0), 0.0, 4.5);
        let ops = collapse_operators(&s, &n, &b).unwrap();
        let d = Dissipator::new(&ops, &b);
        let dim = b.dim();
        let rho = CMatrix {
            re: DMatrix::from_fn(dim, dim, |i, j| ((i * 7 + j * 3) % 11) as f64 * 0.01),
            im: DMatrix::from_fn(dim, dim, |i, j| ((i * 5 + j) % 7) as f64 * 0.01 - 0.03),
        };
        let mut dense = CMatrix::zeros(dim, dim);
        for op in &ops {
            let l = op.matrix(&b);
            let ltl = l.transpose() * &l;
            let jump = rho.left_real(&l).mul(&CMatrix::from_real(l.transpose()));
            let anti = rho.left_real(&ltl).add(&rho.mul(&CMatrix::from_real(ltl.clone())));
            dense = dense.add(&jump).add(&anti.scale(-0.5));
        }
        assert!(d.apply(&rho).max_abs_diff(&dense) < 1e-15);
    }
}
