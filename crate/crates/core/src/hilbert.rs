//! Truncated multi-mode bosonic bases and their ladder/number operators.
//!
//! Labels are occupation tuples `(n_c, n_1, n_2, n_3)` ordered lexicographically.
//! Operators are real matrices; every operator built here has real entries.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Operator = DMatrix<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Coupler,
    Q1,
    Q2,
    Q3,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Coupler, Mode::Q1, Mode::Q2, Mode::Q3];
    pub const QUBITS: [Mode; 3] = [Mode::Q1, Mode::Q2, Mode::Q3];

    /// Position of the mode inside a [`BareLabel`].
    pub fn index(self) -> usize {
        match self {
            Mode::Coupler => 0,
            Mode::Q1 => 1,
            Mode::Q2 => 2,
            Mode::Q3 => 3,
        }
    }

    /// Qubit number 0..3 for Q1..Q3.
    pub fn qubit_index(self) -> Option<usize> {
        match self {
            Mode::Coupler => None,
            q => Some(q.index() - 1),
        }
    }

    pub fn qubit(i: usize) -> Mode {
        Mode::QUBITS[i]
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Coupler => "coupler",
            Mode::Q1 => "q1",
            Mode::Q2 => "q2",
            Mode::Q3 => "q3",
        };
        f.write_str(s)
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "coupler" | "c" | "tc" => Ok(Mode::Coupler),
            "q1" => Ok(Mode::Q1),
            "q2" => Ok(Mode::Q2),
            "q3" => Ok(Mode::Q3),
            _ => Err(Error::UnknownMode(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub label: Mode,
    /// ω/2π in GHz. For the coupler this is the idle frequency.
    pub frequency: f64,
    /// α/2π in GHz.
    pub anharmonicity: f64,
    pub level_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub a: Mode,
    pub b: Mode,
    /// g/2π in GHz.
    pub g: f64,
}

/// Overall sign of the `(a†−a)(b†−b)` interaction.
///
/// `Charge` is the capacitive charge-charge coupling `g n_a n_b` with
/// `n ∝ i(a†−a)`, i.e. `−g (a†−a)(b†−b)`. `Literal` uses `+g (a†−a)(b†−b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CouplingSign {
    #[default]
    Charge,
    Literal,
}

impl CouplingSign {
    pub fn factor(self) -> f64 {
        match self {
            CouplingSign::Charge => -1.0,
            CouplingSign::Literal => 1.0,
        }
    }
}

/// Basis truncation limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// Bare-energy cutoff in GHz.
    pub energy_cutoff: f64,
    pub max_total_excitations: usize,
    /// Coupler frequency (GHz) at which bare energies are compared to the cutoff.
    pub cutoff_reference: f64,
}

impl Truncation {
    /// Four excitations below 16 GHz.
    pub fn compact() -> Self {
        Truncation { energy_cutoff: 16.0, max_total_excitations: 4, cutoff_reference: 4.5 }
    }

    /// Default for dynamics: six excitations, cutoff high enough to be inactive.
    pub fn converged() -> Self {
        Truncation { energy_cutoff: 30.0, max_total_excitations: 6, cutoff_reference: 4.5 }
    }
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::converged()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub modes: Vec<ModeSpec>,
    pub couplings: Vec<Coupling>,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default)]
    pub coupling_sign: CouplingSign,
}

impl Default for DeviceSpec {
    fn default() -> Self {
        let mode = |label, frequency, anharmonicity, level_count| ModeSpec {
            label,
            frequency,
            anharmonicity,
            level_count,
        };
        let c = |a, b, g| Coupling { a, b, g };
        DeviceSpec {
            modes: vec![
                mode(Mode::Coupler, 5.8, -0.3, 5),
                mode(Mode::Q1, 3.5, -0.2, 4),
                mode(Mode::Q2, 4.0, -0.23, 4),
                mode(Mode::Q3, 4.5, -0.2, 3),
            ],
            couplings: vec![
                c(Mode::Q1, Mode::Coupler, 0.150),
                c(Mode::Q2, Mode::Coupler, 0.150),
                c(Mode::Q3, Mode::Coupler, 0.120),
                c(Mode::Q1, Mode::Q2, 0.013),
                c(Mode::Q2, Mode::Q3, 0.014),
                c(Mode::Q1, Mode::Q3, 0.010),
            ],
            truncation: Truncation::default(),
            coupling_sign: CouplingSign::default(),
        }
    }
}

impl DeviceSpec {
    pub fn with_truncation(mut self, truncation: Truncation) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn mode(&self, m: Mode) -> &ModeSpec {
        self.modes.iter().find(|s| s.label == m).expect("validated spec has every mode")
    }

    pub fn mode_mut(&mut self, m: Mode) -> &mut ModeSpec {
        self.modes.iter_mut().find(|s| s.label == m).expect("validated spec has every mode")
    }

    pub fn level_counts(&self) -> [usize; 4] {
        let mut out = [0; 4];
        for m in Mode::ALL {
            out[m.index()] = self.mode(m).level_count;
        }
        out
    }

    /// Symmetric coupling lookup; zero when the pair is absent.
    pub fn coupling(&self, a: Mode, b: Mode) -> f64 {
        self.couplings
            .iter()
            .filter(|c| (c.a == a && c.b == b) || (c.a == b && c.b == a))
            .map(|c| c.g)
            .sum()
    }

    /// Sets every qubit–coupler coupling to `g`.
    pub fn set_qubit_coupler_coupling(&mut self, g: f64) {
        for c in &mut self.couplings {
            if (c.a == Mode::Coupler) != (c.b == Mode::Coupler) {
                c.g = g;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        for m in Mode::ALL {
            let n = self.modes.iter().filter(|s| s.label == m).count();
            if n != 1 {
                return Err(Error::InvalidSpec(format!("mode {m} appears {n} times")));
            }
        }
        for s in &self.modes {
            if s.level_count < 2 {
                return Err(Error::InvalidSpec(format!("mode {} has level_count < 2", s.label)));
            }
            if !s.frequency.is_finite() || s.frequency <= 0.0 || !s.anharmonicity.is_finite() {
                return Err(Error::InvalidSpec(format!("mode {} has invalid frequency", s.label)));
            }
        }
        for c in &self.couplings {
            if c.a == c.b {
                return Err(Error::InvalidSpec(format!("self-coupling on {}", c.a)));
            }
            if !c.g.is_finite() {
                return Err(Error::InvalidSpec("non-finite coupling".into()));
            }
        }
        for (i, c) in self.couplings.iter().enumerate() {
            for d in &self.couplings[i + 1..] {
                if (c.a == d.a && c.b == d.b) || (c.a == d.b && c.b == d.a) {
                    return Err(Error::InvalidSpec(format!("duplicate coupling {}-{}", c.a, c.b)));
                }
            }
        }
        let t = &self.truncation;
        if !(t.energy_cutoff > 0.0) || t.max_total_excitations == 0 {
            return Err(Error::InvalidSpec("cutoffs must be positive".into()));
        }
        Ok(())
    }

    /// Bare Kerr energy (GHz) of a label with the coupler at `coupler_freq`.
    pub fn bare_energy(&self, label: &BareLabel, coupler_freq: f64) -> f64 {
        Mode::ALL
            .iter()
            .map(|&m| {
                let s = self.mode(m);
                let n = label.0[m.index()] as f64;
                let w = if m == Mode::Coupler { coupler_freq } else { s.frequency };
                w * n + 0.5 * s.anharmonicity * n * (n - 1.0)
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BareLabel(pub [usize; 4]);

impl BareLabel {
    pub fn new(nc: usize, n1: usize, n2: usize, n3: usize) -> Self {
        BareLabel([nc, n1, n2, n3])
    }

    /// Computational label with the coupler empty; bits ordered (n1, n2, n3).
    pub fn computational(bits: [usize; 3]) -> Self {
        BareLabel([0, bits[0], bits[1], bits[2]])
    }

    pub fn excitations(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn parity(&self) -> usize {
        self.excitations() % 2
    }

    pub fn occupation(&self, m: Mode) -> usize {
        self.0[m.index()]
    }
}

impl fmt::Display for BareLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [c, a, b, d] = self.0;
        write!(f, "|{c},{a}{b}{d}>")
    }
}

/// The eight computational labels in the order 000, 001, …, 111 over (n1 n2 n3).
pub fn computational_labels() -> [BareLabel; 8] {
    std::array::from_fn(|k| BareLabel::computational([(k >> 2) & 1, (k >> 1) & 1, k & 1]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedBasis {
    labels: Vec<BareLabel>,
    index: HashMap<BareLabel, usize>,
    level_counts: [usize; 4],
}

impl TruncatedBasis {
    pub fn from_labels(mut labels: Vec<BareLabel>, level_counts: [usize; 4]) -> Self {
        labels.sort();
        labels.dedup();
        let index = labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
        TruncatedBasis { labels, index, level_counts }
    }

    pub fn labels(&self) -> &[BareLabel] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, label: &BareLabel) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn contains(&self, label: &BareLabel) -> bool {
        self.index.contains_key(label)
    }

    pub fn level_counts(&self) -> [usize; 4] {
        self.level_counts
    }
}

pub fn build_basis(spec: &DeviceSpec) -> Result<TruncatedBasis> {
    spec.validate()?;
    let lc = spec.level_counts();
    let t = spec.truncation;
    let mut labels = Vec::new();
    for nc in 0..lc[0] {
        for n1 in 0..lc[1] {
            for n2 in 0..lc[2] {
                for n3 in 0..lc[3] {
                    let l = BareLabel::new(nc, n1, n2, n3);
                    if l.excitations() <= t.max_total_excitations
                        && spec.bare_energy(&l, t.cutoff_reference) <= t.energy_cutoff + 1e-12
                    {
                        labels.push(l);
                    }
                }
            }
        }
    }
    Ok(TruncatedBasis::from_labels(labels, lc))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Raise,
    Lower,
}

pub fn ladder_operator(basis: &TruncatedBasis, mode: Mode, kind: Ladder) -> Operator {
    let n = basis.dim();
    let mi = mode.index();
    let mut lower = Operator::zeros(n, n);
    for (j, l) in basis.labels().iter().enumerate() {
        let k = l.0[mi];
        if k == 0 {
            continue;
        }
        let mut m = *l;
        m.0[mi] -= 1;
        if let Some(i) = basis.index_of(&m) {
            lower[(i, j)] = (k as f64).sqrt();
        }
    }
    match kind {
        Ladder::Lower => lower,
        Ladder::Raise => lower.transpose(),
    }
}

pub fn ladder_operator_named(basis: &TruncatedBasis, mode: &str, kind: Ladder) -> Result<Operator> {
    Ok(ladder_operator(basis, mode.parse()?, kind))
}

pub fn number_operator(basis: &TruncatedBasis, mode: Mode) -> Operator {
    let d = basis.labels().iter().map(|l| l.0[mode.index()] as f64);
    Operator::from_diagonal(&nalgebra::DVector::from_iterator(basis.dim(), d))
}

/// Diagonal of the number operator as a plain vector.
pub fn occupations(basis: &TruncatedBasis, mode: Mode) -> Vec<f64> {
    basis.labels().iter().map(|l| l.0[mode.index()] as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn compact_spec() -> DeviceSpec {
        DeviceSpec::default().with_truncation(Truncation::compact())
    }

    #[test]
    fn compact_basis_membership() {
        let b = build_basis(&compact_spec()).unwrap();
        for l in [
            BareLabel::new(0, 0, 0, 0),
            BareLabel::new(1, 0, 0, 0),
            BareLabel::new(0, 1, 1, 1),
            BareLabel::new(3, 0, 0, 0),
        ] {
            assert!(b.contains(&l), "{l} missing");
        }
        assert!(!b.contains(&BareLabel::new(4, 1, 0, 0)));
    }

    #[test]
    fn single_excitation_basis() {
        let mut s = DeviceSpec::default();
        for m in &mut s.modes {
            m.level_count = 2;
        }
        s.truncation.max_total_excitations = 1;
        let b = build_basis(&s).unwrap();
        let want: Vec<_> = [[0, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0], [1, 0, 0, 0]]
            .into_iter()
            .map(BareLabel)
            .collect();
        assert_eq!(b.labels(), want.as_slice());
    }

    #[test]
    fn rejects_bad_levels_and_cutoffs() {
        let mut s = DeviceSpec::default();
        s.modes[1].level_count = 1;
        assert!(build_basis(&s).is_err());
        let mut s = DeviceSpec::default();
        s.truncation.energy_cutoff = 0.0;
        assert!(build_basis(&s).is_err());
    }

    #[test]
    fn qubit_ladder() {
        let b = TruncatedBasis::from_labels(
            vec![BareLabel::new(0, 0, 0, 0), BareLabel::new(0, 0, 0, 1)],
            [1, 1, 1, 2],
        );
        let r = ladder_operator(&b, Mode::Q3, Ladder::Raise);
        assert_eq!(r, Operator::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn raise_at_boundary_is_zero_column() {
        let s = compact_spec();
        let b = build_basis(&s).unwrap();
        let r = ladder_operator(&b, Mode::Q1, Ladder::Raise);
        // Raising Q1 on |1,011> leaves the energy cutoff.
        let j = b.index_of(&BareLabel::new(1, 0, 1, 1)).unwrap();
        assert!(r.column(j).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn number_entries_and_trace() {
        let b = build_basis(&DeviceSpec::default()).unwrap();
        let n = number_operator(&b, Mode::Coupler);
        let i = b.index_of(&BareLabel::new(2, 0, 1, 0)).unwrap();
        assert_eq!(n[(i, i)], 2.0);
        let total: usize = b.labels().iter().map(|l| l.0[0]).sum();
        assert_eq!(n.trace(), total as f64);
    }

    #[test]
    fn number_is_raise_lower_in_interior() {
        let b = build_basis(&DeviceSpec::default()).unwrap();
        for m in Mode::ALL {
            let n = number_operator(&b, m);
            let rl = ladder_operator(&b, m, Ladder::Raise) * ladder_operator(&b, m, Ladder::Lower);
            for (i, l) in b.labels().iter().enumerate() {
                if l.0[m.index()] > 0 {
                    assert!((n[(i, i)] - rl[(i, i)]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn bare_energy_reference_matters() {
        let s = DeviceSpec::default();
        let l = BareLabel::new(3, 0, 0, 0);
        assert!((s.bare_energy(&l, 5.8) - 16.5).abs() < 1e-12);
        assert!((s.bare_energy(&l, 4.5) - 12.6).abs() < 1e-12);
    }

    #[test]
    fn mode_parsing_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.to_string().parse::<Mode>().unwrap(), m);
        }
        assert!("q4".parse::<Mode>().is_err());
    }

    #[test]
    fn default_dimension() {
        assert_eq!(build_basis(&DeviceSpec::default()).unwrap().dim(), 140);
    }
}
