//! Command implementations. Each writes into a fresh run directory.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use ccphase_core::{
    build_basis, computational_frequencies, computational_labels, evolve_columns, shift_curve, track_adiabatic,
    CMatrix, DragCalibration, GatePlan, GateReport, Mode, PhaseCalibration, PhaseVector, ShiftCurve,
    Simulator, TrackOptions,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::rundir::RunDir;
use crate::scenario::{Measure, Scenario};

/// Options shared by every command.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    pub overwrite: bool,
    pub dump_states: bool,
    /// Plan file used by `gate` instead of solving a new plan.
    pub plan: Option<PathBuf>,
}

/// Outcome of a command; `failures` lists sweep points that did not complete.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub failures: Vec<String>,
}

const CHI_HEADER: [&str; 4] = ["chi_011_ghz", "chi_101_ghz", "chi_110_ghz", "chi_ccp_ghz"];
const PHI_HEADER: [&str; 4] = ["phi_011", "phi_101", "phi_110", "phi_ccp"];

fn label_name(l: &ccphase_core::BareLabel) -> String {
    let [c, a, b, d] = l.0;
    format!("c{c}_{a}{b}{d}")
}

pub fn spectrum(sc: &Scenario, opts: &RunOptions) -> Result<Outcome> {
    let mut dir = RunDir::create(&opts.out, opts.overwrite)?;
    dir.snapshot(sc)?;
    let basis = build_basis(&sc.device)?;
    let h = ccphase_core::assemble(&sc.device, &basis)?;
    let grid = sc.spectrum.values();
    let labels = computational_labels();
    let idle = sc.device.mode(Mode::Coupler).frequency;
    let track = track_adiabatic(&h, &basis, &grid, &labels, TrackOptions { idle, ..TrackOptions::default() })?;
    let curve = shift_curve(&computational_frequencies(&track)?)?;

    let mut w = dir.csv("spectrum.csv")?;
    let mut header = vec!["coupler_ghz".to_string()];
    header.extend(labels.iter().map(label_name));
    w.write_record(&header)?;
    for (k, f) in grid.iter().enumerate() {
        let mut row = vec![f.to_string()];
        row.extend(track.adiabatic_map[k].iter().map(|&j| track.eigenvalues[k][j].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;

    write_shifts(&mut dir, &curve)?;

    let mut w = dir.csv("levels.csv")?;
    w.write_record(["coupler_ghz", "index", "energy_ghz"])?;
    for (f, ev) in grid.iter().zip(&track.eigenvalues) {
        for (i, e) in ev.iter().enumerate() {
            w.write_record([f.to_string(), i.to_string(), e.to_string()])?;
        }
    }
    w.flush()?;

    let mut w = dir.csv("events.csv")?;
    w.write_record(["coupler_ghz", "interval_lo", "interval_hi", "label", "partner", "gap_ghz"])?;
    for e in &track.diabatic_events {
        w.write_record([
            e.freq.to_string(),
            e.interval.0.to_string(),
            e.interval.1.to_string(),
            label_name(&e.label),
            label_name(&e.partner),
            e.gap.to_string(),
        ])?;
    }
    w.flush()?;
    dir.finish("spectrum", Vec::new())?;
    Ok(Outcome::default())
}

fn write_shifts(dir: &mut RunDir, curve: &ShiftCurve) -> Result<()> {
    let mut w = dir.csv("shifts.csv")?;
    let mut header = vec!["coupler_ghz"];
    header.extend(CHI_HEADER);
    w.write_record(&header)?;
    let c = curve.curves();
    for (k, f) in curve.grid.iter().enumerate() {
        let mut row = vec![f.to_string()];
        row.extend(c.iter().map(|v| v[k].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct CalibrationFile {
    phase: PhaseCalibration,
    #[serde(skip_serializing_if = "Option::is_none")]
    drag: Option<[DragCalibration; 3]>,
}

/// Builds a simulator with the scenario's calibrations applied or computed.
fn simulator(sc: &Scenario, need_drag: bool) -> Result<Simulator> {
    let mut sim = Simulator::new(sc.device.clone(), sc.sim.clone())?;
    match &sc.calibration.phase {
        Some(p) => sim.set_phase_calibration(p.clone()),
        None => {
            sim.calibrate_phases(sc.calibration.route).context("phase calibration")?;
        }
    }
    if let Some(d) = sc.calibration.drag {
        sim.set_drag_calibrations(d);
    } else if need_drag {
        sim.drag_calibrations().context("DRAG calibration")?;
    }
    Ok(sim)
}

fn write_calibration(dir: &mut RunDir, cal: &PhaseCalibration, drag: Option<[DragCalibration; 3]>) -> Result<()> {
    dir.write_json("calibration.json", &CalibrationFile { phase: cal.clone(), drag })?;
    let mut w = dir.csv("calibration.csv")?;
    let mut header = vec!["duration_ns".to_string()];
    header.extend(PHI_HEADER.iter().map(|s| s.to_string()));
    header.extend(PHI_HEADER.iter().map(|s| format!("{s}_fit")));
    w.write_record(&header)?;
    for (t, p) in cal.durations.iter().zip(&cal.phases) {
        let mut row = vec![t.to_string()];
        row.extend(p.iter().map(|v| v.to_string()));
        row.extend((0..4).map(|j| (cal.slope[j] * t + cal.offset[j]).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn calibrate(sc: &Scenario, opts: &RunOptions) -> Result<Outcome> {
    let mut dir = RunDir::create(&opts.out, opts.overwrite)?;
    dir.snapshot(sc)?;
    let mut sim = simulator(sc, true)?;
    let cal = sim.phase_calibration()?;
    let drag = sim.drag_calibrations()?;
    write_calibration(&mut dir, &cal, Some(drag))?;
    dir.finish("calibrate", Vec::new())?;
    Ok(Outcome::default())
}

pub fn plan(sc: &Scenario, opts: &RunOptions) -> Result<Outcome> {
    let mut dir = RunDir::create(&opts.out, opts.overwrite)?;
    dir.snapshot(sc)?;
    let mut sim = simulator(sc, false)?;
    let plan = sim.plan(sc.gate.kind, sc.gate.target).context("planning")?;
    let cal = sim.phase_calibration()?;
    write_calibration(&mut dir, &cal, sc.calibration.drag)?;
    dir.write_json("plan.json", &plan)?;
    if plan.pi_count() == 0 || sc.calibration.drag.is_some() {
        let sched = sim.schedule(&plan)?;
        sched.write_csv(dir.file("schedule.csv")?)?;
    }
    dir.finish("plan", Vec::new())?;
    Ok(Outcome::default())
}

fn run_plan(sim: &mut Simulator, sc: &Scenario, plan: &GatePlan) -> Result<GateReport> {
    match &sc.noise {
        Some(n) if !n.is_noiseless() => Ok(sim.run_open(plan, n)?),
        _ => Ok(sim.run_coherent(plan)?),
    }
}

pub fn gate(sc: &Scenario, opts: &RunOptions) -> Result<Outcome> {
    let mut dir = RunDir::create(&opts.out, opts.overwrite)?;
    dir.snapshot(sc)?;
    let (mut sim, plan) = match &opts.plan {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let plan: GatePlan = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            let mut sim = Simulator::new(sc.device.clone(), sc.sim.clone())?;
            if let Some(d) = sc.calibration.drag {
                sim.set_drag_calibrations(d);
            }
            (sim, plan)
        }
        None => {
            let mut sim = simulator(sc, false)?;
            let plan = sim.plan(sc.gate.kind, sc.gate.target).context("planning")?;
            let cal = sim.phase_calibration()?;
            write_calibration(&mut dir, &cal, sc.calibration.drag)?;
            (sim, plan)
        }
    };
    dir.write_json("plan.json", &plan)?;
    let sched = sim.schedule(&plan)?;
    sched.write_csv(dir.file("schedule.csv")?)?;
    let report = run_plan(&mut sim, sc, &plan)?;
    dir.write_json("report.json", &report)?;
    if opts.dump_states {
        let init = CMatrix::from_real(sim.dressed.vectors.clone());
        let psi = evolve_columns(&sim.hamiltonian, &sched, &init)?;
        let mut w = dir.csv("states.csv")?;
        w.write_record(["input", "basis_label", "re", "im"])?;
        let inputs = computational_labels();
        for (c, input) in inputs.iter().enumerate() {
            for (r, l) in sim.basis.labels().iter().enumerate() {
                let z = psi.get(r, c);
                w.write_record([label_name(input), label_name(l), z.re.to_string(), z.im.to_string()])?;
            }
        }
        w.flush()?;
    }
    dir.finish("gate", Vec::new())?;
    Ok(Outcome::default())
}

/// One sweep row; absent quantities stay empty in the CSV.
#[derive(Debug, Clone, Default)]
struct SweepRow {
    duration: Option<f64>,
    fidelity: Option<f64>,
    leakage_out: Option<f64>,
    leakage_within: Option<f64>,
    values: Option<[f64; 4]>,
    durations: Vec<f64>,
}

fn calibration_key(sc: &Scenario) -> String {
    serde_json::to_string(&(&sc.device, &sc.sim)).unwrap_or_default()
}

pub fn sweep(sc: &Scenario, opts: &RunOptions) -> Result<Outcome> {
    let Some(spec) = sc.sweep.clone() else { bail!("scenario has no sweep section") };
    sc.validate()?;
    let mut dir = RunDir::create(&opts.out, opts.overwrite)?;
    dir.snapshot(sc)?;
    let paths = spec.parameter.paths();
    let points: Vec<Result<Scenario>> = spec.values.iter().map(|&v| sc.with_parameter(&paths, v)).collect();

    // Calibrations depend only on device and sim settings; solve each once.
    let mut cals: BTreeMap<String, Result<(PhaseCalibration, [DragCalibration; 3]), String>> = BTreeMap::new();
    if spec.measure == Measure::Gate {
        let mut unique: BTreeMap<String, Scenario> = BTreeMap::new();
        for p in points.iter().flatten() {
            unique.entry(calibration_key(p)).or_insert_with(|| p.clone());
        }
        let solved: Vec<_> = unique
            .into_par_iter()
            .map(|(k, p)| {
                let r = (|| -> Result<_> {
                    let mut sim = simulator(&p, true)?;
                    Ok((sim.phase_calibration()?, sim.drag_calibrations()?))
                })();
                (k, r.map_err(|e| format!("{e:#}")))
            })
            .collect();
        cals.extend(solved);
    }

    let rows: Vec<Result<SweepRow, String>> = points
        .par_iter()
        .map(|p| {
            let p = p.as_ref().map_err(|e| format!("{e:#}"))?;
            match spec.measure {
                Measure::Gate => {
                    let (cal, drag) = cals[&calibration_key(p)].clone()?;
                    sweep_gate(p, cal, drag).map_err(|e| format!("{e:#}"))
                }
                Measure::Probe => sweep_probe(p, spec.probe_width).map_err(|e| format!("{e:#}")),
                Measure::Shifts => sweep_shifts(p).map_err(|e| format!("{e:#}")),
            }
        })
        .collect();

    let mut w = dir.csv("sweep.csv")?;
    let quantity = match spec.measure {
        Measure::Shifts => CHI_HEADER,
        _ => PHI_HEADER,
    };
    let mut header =
        vec!["value", "status", "error", "duration_ns", "fidelity", "leakage_out", "leakage_within"];
    header.extend(quantity);
    header.extend(["tau_1", "tau_2", "tau_3", "tau_4"]);
    w.write_record(&header)?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let mut failures = Vec::new();
    for (v, r) in spec.values.iter().zip(&rows) {
        let mut rec = vec![v.to_string()];
        match r {
            Ok(row) => {
                rec.extend(["ok".to_string(), String::new()]);
                rec.extend([opt(row.duration), opt(row.fidelity), opt(row.leakage_out), opt(row.leakage_within)]);
                match row.values {
                    Some(a) => rec.extend(a.iter().map(|x| x.to_string())),
                    None => rec.extend(std::iter::repeat(String::new()).take(4)),
                }
                rec.extend((0..4).map(|i| opt(row.durations.get(i).copied())));
            }
            Err(e) => {
                failures.push(format!("{v}: {e}"));
                rec.extend(["failed".to_string(), e.replace('\n', " ")]);
                rec.extend(std::iter::repeat(String::new()).take(header.len() - 3));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    dir.finish("sweep", failures.clone())?;
    Ok(Outcome { failures })
}

fn sweep_gate(p: &Scenario, cal: PhaseCalibration, drag: [DragCalibration; 3]) -> Result<SweepRow> {
    let mut sim = Simulator::new(p.device.clone(), p.sim.clone())?;
    sim.set_phase_calibration(cal);
    sim.set_drag_calibrations(drag);
    // A swept target passing through the identity still gets a real sequence.
    let solve = ccphase_core::SolveOptions { allow_trivial: false, ..p.sim.solve };
    let plan = sim.plan_with(p.gate.kind, p.gate.target, &solve)?;
    let r = run_plan(&mut sim, p, &plan)?;
    Ok(SweepRow {
        duration: Some(r.duration),
        fidelity: Some(r.fidelity),
        leakage_out: Some(r.leakage.total_out),
        leakage_within: Some(r.leakage.total_within),
        values: r.phases.map(PhaseVector::to_array),
        durations: plan.durations.clone(),
    })
}

fn sweep_probe(p: &Scenario, width: f64) -> Result<SweepRow> {
    let sim = Simulator::new(p.device.clone(), p.sim.clone())?;
    let probe = sim.probe_flux(width)?;
    Ok(SweepRow {
        duration: Some(width),
        leakage_out: Some(probe.leakage.total_out),
        leakage_within: Some(probe.leakage.total_within),
        values: Some(probe.phases.to_array()),
        ..SweepRow::default()
    })
}

fn sweep_shifts(p: &Scenario) -> Result<SweepRow> {
    let sim = Simulator::new(p.device.clone(), p.sim.clone())?;
    let chi = sim.shift_curve(200)?.interpolant()?.eval(sim.config.layout.op_freq)?;
    Ok(SweepRow { values: Some(chi), ..SweepRow::default() })
}

/// Writes a plain-text summary of a finished run to `w`.
pub fn summarize(w: &mut impl Write, command: &str, opts: &RunOptions, out: &Outcome) -> std::io::Result<()> {
    if out.failures.is_empty() {
        writeln!(w, "{command}: wrote {}", opts.out.display())
    } else {
        writeln!(w, "{command}: wrote {} with {} failed point(s)", opts.out.display(), out.failures.len())?;
        for f in &out.failures {
            writeln!(w, "  {f}")?;
        }
        Ok(())
    }
}
