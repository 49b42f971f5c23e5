//! Plans and simulates CCPHASE(π) on the default device.

use std::f64::consts::PI;

use ccphase_core::{DeviceSpec, GateKind, PhaseVector, Result, SimConfig, Simulator};

fn main() -> Result<()> {
    let mut sim = Simulator::new(DeviceSpec::default(), SimConfig::default())?;
    let plan = sim.plan(GateKind::Ccphase, PhaseVector::new(0.0, 0.0, 0.0, PI))?;
    println!("frames    {:?}", plan.frames.iter().map(ToString::to_string).collect::<Vec<_>>());
    println!("durations {:.2?} ns, total {:.1} ns", plan.durations, plan.total_duration());
    let report = sim.run_coherent(&plan)?;
    println!("fidelity  {:.3} %", 100.0 * report.fidelity);
    println!("leakage   {:.3} % per state", 100.0 * report.leakage.total_out / 8.0);
    if let Some(p) = report.phases {
        println!("phases    {:.3?}", p.to_array());
    }
    Ok(())
}
