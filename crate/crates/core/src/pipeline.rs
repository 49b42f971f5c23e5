//! End-to-end simulator: device model, calibrations, planning and gate runs.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evolution::{
    collapse_operators, evolve_columns, interval_propagators, lindblad_with_propagators, process_tomography, CMatrix, Dissipator,
    NoiseModel, QuantumChannel, DEFAULT_INTERVAL_TICKS,
};
use crate::hamiltonian::{
    assemble, computational_frequencies, dressed_computational, track_adiabatic, DressedBasis, HamiltonianSet,
    TrackOptions,
};
use crate::hilbert::{build_basis, computational_labels, DeviceSpec, Mode, TruncatedBasis};
use crate::metrics::{
    computational_block, extract_channel_phases, extract_phases, fidelity_channel, fidelity_unitary,
    leakage_from_channel, leakage_report, matrix_rows, unwrap_with, ExtractedPhases, GateReport, LeakageReport,
};
use crate::pulses::{
    calibrate_drag, render, ControlSchedule, DragCalibration, DragPulseSpec, FluxPulseSpec, IsolatedQubit,
    RenderConfig, Segment,
};
use crate::refocus::{
    calibrate_chis, default_frames, plan_gate, FrameLabel, GateKind, GatePlan, PhaseCalibration, SequenceLayout,
    SolveOptions,
};
use crate::shifts::{accumulated_phases, shift_curve, PhaseVector, ShiftCurve};

/// How the per-pulse phase model is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationRoute {
    /// Full unitary simulation of single flux pulses.
    Simulate,
    /// Integration of interpolated shift curves along the rendered trajectory.
    Integrate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub awg_rate: f64,
    pub sim_rate: f64,
    pub filter_sigma: f64,
    pub layout: SequenceLayout,
    pub frames: Vec<FrameLabel>,
    pub solve: SolveOptions,
    pub calibration_durations: Vec<f64>,
    /// Largest accepted RMS residual of the linear phase fit, rad.
    pub calibration_rms_limit: f64,
    /// Sim ticks per dissipator interval.
    pub interval_ticks: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        let layout = SequenceLayout::default();
        SimConfig {
            awg_rate: 2.4,
            sim_rate: 30.0,
            filter_sigma: 0.3,
            layout,
            frames: default_frames().to_vec(),
            solve: SolveOptions::for_rise(layout.rise),
            calibration_durations: (0..13).map(|k| 20.0 + 5.0 * k as f64).collect(),
            calibration_rms_limit: 1e-2,
            interval_ticks: DEFAULT_INTERVAL_TICKS,
        }
    }
}

/// Phases and leakage of a single flux pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseProbe {
    pub width: f64,
    pub phases: PhaseVector,
    pub single: [f64; 3],
    pub leakage: LeakageReport,
}

pub struct Simulator {
    pub spec: DeviceSpec,
    pub basis: TruncatedBasis,
    pub hamiltonian: HamiltonianSet,
    pub dressed: DressedBasis,
    pub config: SimConfig,
    drag: Option<[DragCalibration; 3]>,
    phase_cal: Option<PhaseCalibration>,
}

impl Simulator {
    pub fn new(spec: DeviceSpec, mut config: SimConfig) -> Result<Self> {
        spec.validate()?;
        let basis = build_basis(&spec)?;
        let hamiltonian = assemble(&spec, &basis)?;
        let idle = spec.mode(Mode::Coupler).frequency;
        config.layout.idle_freq = idle;
        let dressed = dressed_computational(&hamiltonian, &basis, idle)?;
        Ok(Simulator { spec, basis, hamiltonian, dressed, config, drag: None, phase_cal: None })
    }

    pub fn render_config(&self) -> RenderConfig {
        RenderConfig {
            awg_rate: self.config.awg_rate,
            sim_rate: self.config.sim_rate,
            filter_sigma: self.config.filter_sigma,
            idle_freq: self.config.layout.idle_freq,
            carriers: std::array::from_fn(|q| self.dressed.qubit_frequency(q)),
            anharmonicities: std::array::from_fn(|q| self.spec.mode(Mode::qubit(q)).anharmonicity),
        }
    }

    /// Calibrates (or returns cached) π-pulses on each isolated qubit.
    pub fn drag_calibrations(&mut self) -> Result<[DragCalibration; 3]> {
        if let Some(d) = self.drag {
            return Ok(d);
        }
        let cfg = self.render_config();
        let mut out = Vec::with_capacity(3);
        for q in 0..3 {
            let mode = self.spec.mode(Mode::qubit(q));
            let iq = IsolatedQubit {
                qubit: q,
                frequency: cfg.carriers[q],
                anharmonicity: mode.anharmonicity,
                levels: mode.level_count,
            };
            let mut start = DragPulseSpec::pi(q);
            start.duration = self.config.layout.pi_duration;
            out.push(calibrate_drag(&iq, start, &cfg)?);
        }
        let d = [out[0], out[1], out[2]];
        self.drag = Some(d);
        Ok(d)
    }

    pub fn set_drag_calibrations(&mut self, d: [DragCalibration; 3]) {
        self.drag = Some(d);
    }

    pub fn pi_pulses(&mut self) -> Result<[DragPulseSpec; 3]> {
        let cal = self.drag_calibrations()?;
        let dur = self.config.layout.pi_duration;
        Ok(std::array::from_fn(|q| DragPulseSpec {
            duration: dur,
            amplitude: cal[q].amplitude,
            drag_coefficient: cal[q].drag_coefficient,
            ..DragPulseSpec::pi(q)
        }))
    }

    fn flux(&self, width: f64) -> FluxPulseSpec {
        let l = &self.config.layout;
        FluxPulseSpec::new(l.idle_freq, l.op_freq, width, l.rise)
    }

    /// Evolves the dressed computational states and returns Cᵀψ in the
    /// frame rotating with the dressed idle energies.
    pub fn evolve_block(&self, sched: &ControlSchedule) -> Result<DMatrix<Complex64>> {
        let init = CMatrix::from_real(self.dressed.vectors.clone());
        let psi = evolve_columns(&self.hamiltonian, sched, &init)?;
        let mut block = computational_block(&self.dressed.vectors, &psi);
        let t = sched.duration();
        for (k, e) in self.dressed.energies.iter().enumerate() {
            let r = Complex64::from_polar(1.0, e * t);
            for j in 0..8 {
                block[(k, j)] *= r;
            }
        }
        Ok(block)
    }

    /// A lone flux pulse of the given width between two guards.
    pub fn probe_flux(&self, width: f64) -> Result<PulseProbe> {
        let g = self.config.layout.guard;
        let seg = [Segment::flux(g, self.flux(width))];
        let sched = render(&seg, width + 2.0 * g, &self.render_config())?;
        let block = self.evolve_block(&sched)?;
        let ExtractedPhases { phases, single } = extract_phases(&block)?;
        Ok(PulseProbe { width, phases, single, leakage: leakage_report(&block) })
    }

    /// Shift curves on a grid spanning the flux excursion.
    pub fn shift_curve(&self, points: usize) -> Result<ShiftCurve> {
        let l = &self.config.layout;
        let lo = l.op_freq.min(l.idle_freq) - 0.05;
        let hi = l.op_freq.max(l.idle_freq) + 0.05;
        let n = points.max(3);
        let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let opts = TrackOptions { idle: l.idle_freq, ..TrackOptions::default() };
        let track = track_adiabatic(&self.hamiltonian, &self.basis, &grid, &computational_labels(), opts)?;
        shift_curve(&computational_frequencies(&track)?)
    }

    /// Fits the linear phase model of one flux pulse.
    pub fn calibrate_phases(&mut self, route: CalibrationRoute) -> Result<PhaseCalibration> {
        let durations = self.config.calibration_durations.clone();
        let limit = self.config.calibration_rms_limit;
        let cal = match route {
            CalibrationRoute::Simulate => calibrate_chis(&durations, limit, |w| Ok(self.probe_flux(w)?.phases))?,
            CalibrationRoute::Integrate => {
                let curve = self.shift_curve(400)?;
                let idle = curve.interpolant()?.eval(self.config.layout.idle_freq)?;
                let g = self.config.layout.guard;
                let cfg = self.render_config();
                calibrate_chis(&durations, limit, |w| {
                    let sched = render(&[Segment::flux(g, self.flux(w))], w + 2.0 * g, &cfg)?;
                    let p = accumulated_phases(&curve, &sched.coupler_nodes, sched.dt)?.to_array();
                    // The dressed rotating frame already absorbs the idle shifts.
                    let t = sched.duration();
                    Ok(PhaseVector::from_array(std::array::from_fn(|j| {
                        p[j] + std::f64::consts::TAU * idle[j] * t
                    })))
                })?
            }
        };
        self.phase_cal = Some(cal.clone());
        Ok(cal)
    }

    pub fn set_phase_calibration(&mut self, cal: PhaseCalibration) {
        self.phase_cal = Some(cal);
    }

    pub fn phase_calibration(&mut self) -> Result<PhaseCalibration> {
        match &self.phase_cal {
            Some(c) => Ok(c.clone()),
            None => self.calibrate_phases(CalibrationRoute::Simulate),
        }
    }

    pub fn plan(&mut self, kind: GateKind, target: PhaseVector) -> Result<GatePlan> {
        let opts = self.config.solve;
        self.plan_with(kind, target, &opts)
    }

    pub fn plan_with(&mut self, kind: GateKind, target: PhaseVector, opts: &SolveOptions) -> Result<GatePlan> {
        let cal = self.phase_calibration()?;
        plan_gate(kind, target, &cal, &self.config.frames, self.config.layout, opts)
    }

    pub fn schedule(&mut self, plan: &GatePlan) -> Result<ControlSchedule> {
        let segs = if plan.is_empty() { Vec::new() } else { plan.segments(&self.pi_pulses()?) };
        render(&segs, plan.total_duration(), &self.render_config())
    }

    fn report(
        &self,
        plan: &GatePlan,
        open: bool,
        fid: crate::metrics::FidelityResult,
        extracted: Result<ExtractedPhases>,
        leakage: LeakageReport,
        block: Option<&DMatrix<Complex64>>,
    ) -> GateReport {
        let wrapped = extracted.ok().map(|e| e.phases);
        GateReport {
            open_system: open,
            duration: plan.total_duration(),
            fidelity: fid.fidelity,
            infidelity: 1.0 - fid.fidelity,
            virtual_z: fid.virtual_z,
            phases_wrapped: wrapped,
            phases: wrapped.map(|w| unwrap_with(&w, &plan.predicted)),
            leakage,
            block: block.map(matrix_rows),
            plan: plan.clone(),
        }
    }

    pub fn run_coherent(&mut self, plan: &GatePlan) -> Result<GateReport> {
        let sched = self.schedule(plan)?;
        let block = self.evolve_block(&sched)?;
        let fid = fidelity_unitary(&block, &plan.target)?;
        Ok(self.report(plan, false, fid, extract_phases(&block), leakage_report(&block), Some(&block)))
    }

    /// Channel on the computational space under the Lindblad model.
    pub fn channel(&mut self, plan: &GatePlan, noise: &NoiseModel) -> Result<QuantumChannel> {
        let mut v = self.channels(plan, std::slice::from_ref(noise))?;
        Ok(v.pop().unwrap())
    }

    /// Channels for several noise models sharing one set of interval unitaries.
    pub fn channels(&mut self, plan: &GatePlan, noises: &[NoiseModel]) -> Result<Vec<QuantumChannel>> {
        let sched = self.schedule(plan)?;
        let steps = interval_propagators(&self.hamiltonian, &sched, self.config.interval_ticks)?;
        let t = sched.duration();
        let phases: Vec<f64> = self.dressed.energies.iter().map(|e| e * t).collect();
        let mut out = Vec::with_capacity(noises.len());
        for noise in noises {
            let ops = collapse_operators(&self.spec, noise, &self.basis)?;
            let diss = Dissipator::new(&ops, &self.basis);
            let mut ch = process_tomography(&self.dressed.vectors, |inputs| {
                lindblad_with_propagators(&steps, &diss, inputs)
            })?;
            ch.rotate_output(&phases);
            out.push(ch);
        }
        Ok(out)
    }

    /// Open-system reports for several noise models of one plan.
    pub fn run_open_many(&mut self, plan: &GatePlan, noises: &[NoiseModel]) -> Result<Vec<GateReport>> {
        let chans = self.channels(plan, noises)?;
        chans
            .iter()
            .map(|ch| {
                let fid = fidelity_channel(ch, &plan.target)?;
                Ok(self.report(plan, true, fid, extract_channel_phases(ch), leakage_from_channel(ch), None))
            })
            .collect()
    }

    pub fn run_open(&mut self, plan: &GatePlan, noise: &NoiseModel) -> Result<GateReport> {
        Ok(self.run_open_many(plan, std::slice::from_ref(noise))?.pop().unwrap())
    }
}

/// Sets all three qubit-coupler couplings to `g` (GHz).
pub fn with_coupler_coupling(spec: &DeviceSpec, g: f64) -> DeviceSpec {
    let mut s = spec.clone();
    s.set_qubit_coupler_coupling(g);
    s
}
