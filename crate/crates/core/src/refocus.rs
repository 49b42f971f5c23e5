//! Refocused gate synthesis: frame sign table, duration solve and sequence
//! assembly.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulses::{DragPulseSpec, FluxPulseSpec, Segment};
use crate::shifts::PhaseVector;

/// Which qubits are enclosed by π-pulses, ordered Q1, Q2, Q3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FrameLabel(pub [bool; 3]);

impl FrameLabel {
    pub const IDENTITY: FrameLabel = FrameLabel([false; 3]);

    pub fn all() -> [FrameLabel; 8] {
        std::array::from_fn(|k| FrameLabel([k & 4 != 0, k & 2 != 0, k & 1 != 0]))
    }

    /// Qubits flipped when moving from `self` to `next`.
    pub fn flips_to(&self, next: &FrameLabel) -> Vec<usize> {
        (0..3).filter(|&q| self.0[q] != next.0[q]).collect()
    }
}

impl fmt::Display for FrameLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &x in &self.0 {
            f.write_str(if x { "X" } else { "I" })?;
        }
        Ok(())
    }
}

impl FromStr for FrameLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut out = [false; 3];
        let mut n = 0;
        for c in s.chars() {
            if n == 3 {
                return Err(Error::InvalidSpec(format!("frame `{s}` has more than 3 symbols")));
            }
            out[n] = match c {
                'X' | 'x' => true,
                'I' | 'i' | '1' | '𝟙' => false,
                _ => return Err(Error::InvalidSpec(format!("bad frame symbol `{c}` in `{s}`"))),
            };
            n += 1;
        }
        if n != 3 {
            return Err(Error::InvalidSpec(format!("frame `{s}` needs 3 symbols")));
        }
        Ok(FrameLabel(out))
    }
}

impl TryFrom<String> for FrameLabel {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FrameLabel> for String {
    fn from(f: FrameLabel) -> String {
        f.to_string()
    }
}

/// Coefficients of (H_23, H_13, H_12, H_CCP) in terms of
/// (χ_011, χ_101, χ_110, χ_CCP); row = Hamiltonian term.
pub type SignRow = [[i32; 4]; 4];

/// Stored sign table, one entry per frame.
pub const SIGN_TABLE: [(&str, SignRow); 8] = [
    ("III", [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]),
    ("IIX", [[-1, 0, 0, 0], [0, -1, 0, 0], [0, 0, 1, 1], [0, 0, 0, -1]]),
    ("IXI", [[-1, 0, 0, 0], [0, 1, 0, 1], [0, 0, -1, 0], [0, 0, 0, -1]]),
    ("IXX", [[1, 0, 0, 0], [0, -1, 0, -1], [0, 0, -1, -1], [0, 0, 0, 1]]),
    ("XII", [[1, 0, 0, 1], [0, -1, 0, 0], [0, 0, -1, 0], [0, 0, 0, -1]]),
    ("XIX", [[-1, 0, 0, -1], [0, 1, 0, 0], [0, 0, -1, -1], [0, 0, 0, 1]]),
    ("XXI", [[-1, 0, 0, -1], [0, -1, 0, -1], [0, 0, 1, 0], [0, 0, 0, 1]]),
    ("XXX", [[1, 0, 0, 1], [0, 1, 0, 1], [0, 0, 1, 1], [0, 0, 0, -1]]),
];

pub fn stored_row(frame: FrameLabel) -> SignRow {
    let name = frame.to_string();
    SIGN_TABLE.iter().find(|(n, _)| *n == name).map(|(_, r)| *r).expect("table covers all frames")
}

/// Qubit subsets (bit q set for qubit q) of the four interaction terms.
const TERM_SETS: [u8; 4] = [0b110, 0b101, 0b011, 0b111];

/// X-conjugation of the interaction terms through their Z-Pauli expansion.
///
/// Each term is a product of number operators n_k = (1 − Z_k)/2. Conjugating
/// by X_k flips Z_k. Expanding back into number-operator products and keeping
/// the two- and three-body parts gives the effective coefficients.
pub fn conjugate_frame(frame: FrameLabel) -> SignRow {
    let mask: u8 = (0..3).filter(|&q| frame.0[q]).map(|q| 1u8 << q).sum();
    let mut out = [[0i32; 4]; 4];
    for (col, &set) in TERM_SETS.iter().enumerate() {
        // Pauli coefficients scaled by 8 to stay integral.
        let mut pauli = [0i32; 8];
        for t in 0u8..8 {
            if t & !set == 0 {
                let sign = if t.count_ones() % 2 == 0 { 1 } else { -1 };
                pauli[t as usize] = sign * (8 >> set.count_ones());
            }
        }
        for (t, p) in pauli.iter_mut().enumerate() {
            if (t as u8 & mask).count_ones() % 2 == 1 {
                *p = -*p;
            }
        }
        for (row, &u) in TERM_SETS.iter().enumerate() {
            let sum: i32 = (0u8..8).filter(|t| t & u == u).map(|t| pauli[t as usize]).sum();
            let scale = (-2i32).pow(u.count_ones());
            out[row][col] = sum * scale / 8;
        }
    }
    out
}

/// Sign table regenerated from [`conjugate_frame`].
pub fn sign_table() -> Vec<(FrameLabel, SignRow)> {
    FrameLabel::all().into_iter().map(|f| (f, conjugate_frame(f))).collect()
}

fn apply_row(m: &SignRow, v: [f64; 4]) -> [f64; 4] {
    std::array::from_fn(|r| (0..4).map(|c| m[r][c] as f64 * v[c]).sum())
}

/// Linear phase model of one flux pulse: φ(τ) = slope·τ + offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCalibration {
    /// rad/ns, ordered (φ_011, φ_101, φ_110, φ_CCP).
    pub slope: [f64; 4],
    /// rad, the ramp contribution.
    pub offset: [f64; 4],
    /// Fit residual RMS per component, rad.
    pub rms: [f64; 4],
    pub durations: Vec<f64>,
    /// Unwrapped measured phases per duration.
    pub phases: Vec<[f64; 4]>,
}

impl PhaseCalibration {
    /// Effective slope and offset inside a refocusing frame.
    pub fn in_frame(&self, frame: FrameLabel) -> ([f64; 4], [f64; 4]) {
        let m = conjugate_frame(frame);
        (apply_row(&m, self.slope), apply_row(&m, self.offset))
    }

    /// Phases predicted for flux pulses of the given widths in the given frames.
    pub fn predict(&self, frames: &[FrameLabel], durations: &[f64]) -> PhaseVector {
        let mut acc = [0.0; 4];
        for (f, &tau) in frames.iter().zip(durations) {
            if tau <= 0.0 {
                continue;
            }
            let (s, o) = self.in_frame(*f);
            for j in 0..4 {
                acc[j] += s[j] * tau + o[j];
            }
        }
        PhaseVector::from_array(acc)
    }
}

/// Removes 2π jumps between consecutive samples.
pub fn unwrap_sequence(values: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(values.len());
    let mut shift = 0.0;
    for (i, &v) in values.iter().enumerate() {
        if i > 0 {
            let d = v + shift - out[i - 1];
            shift -= TAU * (d / TAU).round();
        }
        out.push(v + shift);
    }
    out
}

/// Fits the linear phase model from phases measured at each duration.
/// `measure` may return wrapped phases; consecutive durations must be close
/// enough that the per-step change stays below π.
pub fn calibrate_chis<F>(durations: &[f64], rms_limit: f64, mut measure: F) -> Result<PhaseCalibration>
where
    F: FnMut(f64) -> Result<PhaseVector>,
{
    if durations.len() < 3 {
        return Err(Error::InvalidSpec("need at least three calibration durations".into()));
    }
    let raw: Vec<[f64; 4]> =
        durations.iter().map(|&t| measure(t).map(|p| p.to_array())).collect::<Result<_>>()?;
    let n = durations.len();
    let mut phases = vec![[0.0; 4]; n];
    let mut cal = PhaseCalibration {
        slope: [0.0; 4],
        offset: [0.0; 4],
        rms: [0.0; 4],
        durations: durations.to_vec(),
        phases: Vec::new(),
    };
    let a = DMatrix::from_fn(n, 2, |i, j| if j == 0 { durations[i] } else { 1.0 });
    let svd = a.clone().svd(true, true);
    for j in 0..4 {
        let col: Vec<f64> = raw.iter().map(|p| p[j]).collect();
        let un = unwrap_sequence(&col);
        for (i, v) in un.iter().enumerate() {
            phases[i][j] = *v;
        }
        let b = DVector::from_vec(un);
        let x = svd.solve(&b, 1e-14).map_err(|e| Error::Other(e.to_string()))?;
        let r = &a * &x - &b;
        cal.slope[j] = x[0];
        cal.offset[j] = x[1];
        cal.rms[j] = (r.norm_squared() / n as f64).sqrt();
    }
    cal.phases = phases;
    let worst = cal.rms.iter().copied().fold(0.0, f64::max);
    if worst > rms_limit {
        return Err(Error::CalibrationResidual { rms: worst, limit: rms_limit });
    }
    Ok(cal)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Winding search bound per component.
    pub kmax: i32,
    /// Minimum flux-pulse width, ns.
    pub duration_floor: f64,
    /// Return the empty plan when the target is the identity.
    pub allow_trivial: bool,
}

impl SolveOptions {
    /// Floor of four rise times, so each pulse settles on both sides.
    pub fn for_rise(rise: f64) -> Self {
        SolveOptions { kmax: 4, duration_floor: 4.0 * rise, allow_trivial: true }
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions::for_rise(5.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationSolution {
    pub durations: Vec<f64>,
    pub windings: [i32; 4],
    /// Unwrapped phases the durations realise.
    pub phases: PhaseVector,
}

/// Reduces to [0, 2π).
pub fn wrap_positive(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if TAU - r < 1e-12 {
        0.0
    } else {
        r
    }
}

fn is_identity_target(t: &PhaseVector) -> bool {
    t.to_array().iter().all(|&x| {
        let r = wrap_positive(x);
        r < 1e-12 || TAU - r < 1e-12
    })
}

/// Solves the four-frame linear system for segment durations, searching the
/// winding lattice for the shortest feasible total.
pub fn solve_durations(
    cal: &PhaseCalibration,
    frames: &[FrameLabel],
    target: PhaseVector,
    opts: &SolveOptions,
) -> Result<DurationSolution> {
    if frames.len() != 4 {
        return Err(Error::InvalidSpec(format!("{} frames given, 4 required", frames.len())));
    }
    let mut a = DMatrix::zeros(4, 4);
    let mut off = [0.0; 4];
    for (c, f) in frames.iter().enumerate() {
        let (s, o) = cal.in_frame(*f);
        for r in 0..4 {
            a[(r, c)] = s[r];
            off[r] += o[r];
        }
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond < 1e12) {
        return Err(Error::SingularFrames(cond));
    }
    let lu = a.clone().lu();
    let base = target.to_array().map(wrap_positive);
    let mut best: Option<(f64, i32, DurationSolution)> = None;
    let r = opts.kmax;
    for k0 in -r..=r {
        for k1 in -r..=r {
            for k2 in -r..=r {
                for k3 in -r..=r {
                    let k = [k0, k1, k2, k3];
                    let phases: [f64; 4] = std::array::from_fn(|j| base[j] + TAU * k[j] as f64);
                    let rhs = DVector::from_fn(4, |j, _| phases[j] - off[j]);
                    let Some(tau) = lu.solve(&rhs) else { continue };
                    if tau.iter().any(|&t| t < opts.duration_floor) {
                        continue;
                    }
                    let total: f64 = tau.iter().sum();
                    let kmag = k.iter().map(|x| x.abs()).max().unwrap();
                    let better = match &best {
                        None => true,
                        Some((bt, bk, _)) => total < bt - 1e-9 || ((total - bt).abs() <= 1e-9 && kmag < *bk),
                    };
                    if better {
                        best = Some((
                            total,
                            kmag,
                            DurationSolution {
                                durations: tau.iter().copied().collect(),
                                windings: k,
                                phases: PhaseVector::from_array(phases),
                            },
                        ));
                    }
                }
            }
        }
    }
    best.map(|b| b.2).ok_or(Error::Infeasible { kmax: opts.kmax, floor: opts.duration_floor })
}

/// Qubit pair of a two-qubit phase gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pair {
    #[serde(rename = "23")]
    P23,
    #[serde(rename = "13")]
    P13,
    #[serde(rename = "12")]
    P12,
}

impl Pair {
    /// Index of the pair's phase in a [`PhaseVector`].
    pub fn component(self) -> usize {
        match self {
            Pair::P23 => 0,
            Pair::P13 => 1,
            Pair::P12 => 2,
        }
    }

    /// The spectator qubit that receives the refocusing pulses.
    pub fn spectator(self) -> usize {
        match self {
            Pair::P23 => 0,
            Pair::P13 => 1,
            Pair::P12 => 2,
        }
    }
}

impl FromStr for Pair {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "23" | "32" => Ok(Pair::P23),
            "13" | "31" => Ok(Pair::P13),
            "12" | "21" => Ok(Pair::P12),
            _ => Err(Error::InvalidSpec(format!("unknown qubit pair `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum GateKind {
    /// Four-frame sequence realising an arbitrary phase vector.
    #[serde(alias = "generalized")]
    Ccphase,
    /// Two equal segments around π-pulses on the spectator qubit.
    Cphase { pair: Pair },
}

/// Simultaneous π-pulses following segment `after_segment`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiPlacement {
    pub after_segment: usize,
    pub qubits: Vec<usize>,
}

/// Timing constants of the sequence layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SequenceLayout {
    pub idle_freq: f64,
    pub op_freq: f64,
    pub rise: f64,
    pub pi_duration: f64,
    /// Idle time before the first and after the last pulse, ns.
    pub guard: f64,
}

impl Default for SequenceLayout {
    fn default() -> Self {
        SequenceLayout { idle_freq: 5.8, op_freq: 4.5, rise: 5.0, pi_duration: 20.0, guard: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatePlan {
    pub kind: GateKind,
    pub target: PhaseVector,
    pub frames: Vec<FrameLabel>,
    /// Flux-pulse widths per frame, ns.
    pub durations: Vec<f64>,
    pub windings: [i32; 4],
    pub pi_pulses: Vec<PiPlacement>,
    /// Phases expected from the calibration model, unwrapped.
    pub predicted: PhaseVector,
    pub layout: SequenceLayout,
}

/// Default frame set for the three-qubit sequence.
pub fn default_frames() -> [FrameLabel; 4] {
    ["III", "IXI", "XXI", "IXX"].map(|s| s.parse().unwrap())
}

fn pi_placements(frames: &[FrameLabel]) -> Vec<PiPlacement> {
    let mut out = Vec::new();
    for (i, f) in frames.iter().enumerate() {
        let next = frames.get(i + 1).copied().unwrap_or(FrameLabel::IDENTITY);
        let qubits = f.flips_to(&next);
        if !qubits.is_empty() {
            out.push(PiPlacement { after_segment: i, qubits });
        }
    }
    out
}

/// Plans a gate for the given target phases.
pub fn plan_gate(
    kind: GateKind,
    target: PhaseVector,
    cal: &PhaseCalibration,
    frames: &[FrameLabel],
    layout: SequenceLayout,
    opts: &SolveOptions,
) -> Result<GatePlan> {
    let empty = |target| GatePlan {
        kind,
        target,
        frames: Vec::new(),
        durations: Vec::new(),
        windings: [0; 4],
        pi_pulses: Vec::new(),
        predicted: PhaseVector::zero(),
        layout,
    };
    if opts.allow_trivial && is_identity_target(&target) {
        return Ok(empty(target));
    }
    let (frames, durations, windings) = match kind {
        GateKind::Ccphase => {
            let sol = solve_durations(cal, frames, target, opts)?;
            (frames.to_vec(), sol.durations, sol.windings)
        }
        GateKind::Cphase { pair } => {
            let j = pair.component();
            let mut spect = [false; 3];
            spect[pair.spectator()] = true;
            let fr = [FrameLabel::IDENTITY, FrameLabel(spect)];
            let (s0, o0) = cal.in_frame(fr[0]);
            let (s1, o1) = cal.in_frame(fr[1]);
            let rate = s0[j] + s1[j];
            let off = o0[j] + o1[j];
            if rate.abs() < 1e-12 {
                return Err(Error::SingularFrames(f64::INFINITY));
            }
            let want = wrap_positive(target.to_array()[j]);
            let mut best: Option<(f64, i32)> = None;
            for k in -opts.kmax..=opts.kmax {
                let tau = (want + TAU * k as f64 - off) / rate;
                if tau >= opts.duration_floor && best.map_or(true, |(b, _)| tau < b) {
                    best = Some((tau, k));
                }
            }
            let (tau, k) =
                best.ok_or(Error::Infeasible { kmax: opts.kmax, floor: opts.duration_floor })?;
            let mut w = [0; 4];
            w[j] = k;
            (fr.to_vec(), vec![tau, tau], w)
        }
    };
    let predicted = cal.predict(&frames, &durations);
    Ok(GatePlan {
        kind,
        target,
        pi_pulses: pi_placements(&frames),
        frames,
        durations,
        windings,
        predicted,
        layout,
    })
}

impl GatePlan {
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn pi_count(&self) -> usize {
        self.pi_pulses.iter().map(|p| p.qubits.len()).sum()
    }

    /// Total schedule length including π slots and guards.
    pub fn total_duration(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.durations.iter().sum::<f64>()
            + self.pi_pulses.len() as f64 * self.layout.pi_duration
            + 2.0 * self.layout.guard
    }

    /// Pulse segments of the plan; `pi` supplies the calibrated π-pulse per qubit.
    pub fn segments(&self, pi: &[DragPulseSpec; 3]) -> Vec<Segment> {
        let l = &self.layout;
        let mut out = Vec::new();
        if self.is_empty() {
            return out;
        }
        let mut t = l.guard;
        for (i, &tau) in self.durations.iter().enumerate() {
            if tau > 0.0 {
                out.push(Segment::flux(t, FluxPulseSpec::new(l.idle_freq, l.op_freq, tau, l.rise)));
                t += tau;
            }
            if let Some(p) = self.pi_pulses.iter().find(|p| p.after_segment == i) {
                for &q in &p.qubits {
                    let mut d = pi[q];
                    d.qubit = q;
                    d.duration = l.pi_duration;
                    out.push(Segment::drag(t, d));
                }
                t += l.pi_duration;
            }
        }
        out
    }

    /// Predicted phases modulo 2π, in (−π, π].
    pub fn predicted_wrapped(&self) -> PhaseVector {
        PhaseVector::from_array(self.predicted.to_array().map(wrap_symmetric))
    }
}

/// Reduces to (−π, π].
pub fn wrap_symmetric(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}
