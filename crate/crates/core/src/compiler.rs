//! Compilation of logical circuits on phonon-stored qubits into transmon
//! pulse schedules.
//!
//! Qubit `q` lives in its assigned mode and is swapped into the transmon for
//! every block of gates acting on it. Stored qubits pick up phases from the
//! rest frame, the swaps and the controlled-phase by-products; the ledger
//! tracks them so that the physical state equals
//! `prod_q diag(1, e^{i phase_q})` times the logical state, and every
//! rotation and readout is issued in the rotated frame.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::device::DeviceParams;
use crate::dynamics::{rotation_matrix, Axis};
use crate::error::{Error, Result};
use crate::gates::{
    cphi_segments, feedback_reset, hadamard, measure_segment,
    reset_swap_segment, rotation_segment, solve_cphi, swap_segment, swap_time, GateSegment,
};
use crate::linalg::{CMatrix, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum LogicalGate {
    Single { qubit: usize, axis: [f64; 3], angle: f64 },
    Hadamard { qubit: usize },
    ControlledPhase { control: usize, target: usize, phi: f64 },
    /// Controlled NOT; the target is processed in the transmon.
    Cnot { control: usize, target: usize },
    Measure { qubit: usize, axis: Axis },
    /// Parks the qubit in its mode, swapping even if it is still `|0>`.
    Store { qubit: usize },
    /// Period-finding oracle writing `f(x)` onto the circuit's ancilla.
    Oracle { period: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalCircuit {
    pub n_qubits: usize,
    pub gates: Vec<LogicalGate>,
    /// Qubits known to start in `|0>`; their first swap-in is skipped.
    #[serde(default)]
    pub fresh: Vec<bool>,
    #[serde(default)]
    pub ancilla: Option<usize>,
}

impl LogicalCircuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
            fresh: vec![false; n_qubits],
            ancilla: None,
        }
    }

    pub fn push(&mut self, gate: LogicalGate) -> &mut Self {
        self.gates.push(gate);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let check = |q: usize| {
            if q >= self.n_qubits {
                Err(Error::Compile(format!(
                    "qubit {q} out of range for {} qubits",
                    self.n_qubits
                )))
            } else {
                Ok(())
            }
        };
        if self.fresh.len() != self.n_qubits {
            return Err(Error::Compile("fresh flags must cover every qubit".into()));
        }
        for g in &self.gates {
            match g {
                LogicalGate::Single { qubit, .. }
                | LogicalGate::Hadamard { qubit }
                | LogicalGate::Measure { qubit, .. }
                | LogicalGate::Store { qubit } => check(*qubit)?,
                LogicalGate::ControlledPhase { control, target, .. }
                | LogicalGate::Cnot { control, target } => {
                    check(*control)?;
                    check(*target)?;
                    if control == target {
                        return Err(Error::Compile("two-qubit gate on a single qubit".into()));
                    }
                }
                LogicalGate::Oracle { period } => {
                    let anc = self
                        .ancilla
                        .ok_or_else(|| Error::Compile("oracle without an ancilla".into()))?;
                    check(anc)?;
                    oracle_control(*period)?;
                }
            }
        }
        Ok(())
    }

    /// Gate list with oracles expanded into CNOTs onto the ancilla.
    pub fn expanded(&self) -> Result<Vec<LogicalGate>> {
        self.validate()?;
        let mut out = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            match g {
                LogicalGate::Oracle { period } => {
                    if let Some(control) = oracle_control(*period)? {
                        out.push(LogicalGate::Cnot {
                            control,
                            target: self.ancilla.expect("validated"),
                        });
                    }
                }
                other => out.push(other.clone()),
            }
        }
        Ok(out)
    }
}

/// Data qubit whose value is the oracle output: `f(x) = bit k of x`.
fn oracle_control(period: u32) -> Result<Option<usize>> {
    match period {
        1 => Ok(None),
        2 => Ok(Some(0)),
        4 => Ok(Some(1)),
        other => Err(Error::Unsupported(format!("oracle period {other}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetStyle {
    /// Swap the projected transmon into the measured qubit's (now empty) mode.
    SwapIntoMode,
    /// Conditional pi pulse on the recorded outcome.
    Feedback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompileOptions {
    /// Logical qubit to device mode; default qubit `i` to mode `i`.
    pub assignment: Option<Vec<usize>>,
    pub pulse_time: f64,
    pub measure_idle: f64,
    pub reset: ResetStyle,
    /// Refuse to evict an occupying qubit automatically.
    pub strict: bool,
    /// Per-Hadamard reference phase overrides, in circuit order.
    pub hadamard_phases: Vec<Option<f64>>,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            assignment: None,
            pulse_time: 0.0,
            measure_idle: 0.0,
            reset: ResetStyle::SwapIntoMode,
            strict: false,
            hadamard_phases: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSlot {
    pub segment: usize,
    pub qubit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HadamardSlot {
    pub qubit: usize,
    /// Segment index range `[start, end)`.
    pub segments: (usize, usize),
    /// Reference phase predicted by the ledger.
    pub ledger_phase: f64,
    /// Reference phase actually used.
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledSchedule {
    pub segments: Vec<GateSegment>,
    pub mode_assignment: Vec<usize>,
    /// Final ledger phase per logical qubit.
    pub frame_phases: Vec<f64>,
    pub measurements: Vec<MeasurementSlot>,
    pub hadamards: Vec<HadamardSlot>,
    pub duration: f64,
}

impl CompiledSchedule {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    pub fn swap_count(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| matches!(s.kind, crate::gates::SegmentKind::ResonantSwap { .. }))
            .count()
    }

    /// Device modes ordered as executor subsystems so that qubit `n-1` is the
    /// most significant factor.
    pub fn executor_modes(&self) -> Vec<usize> {
        self.mode_assignment.iter().rev().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Location {
    Stored,
    Transmon,
    Retired,
}

struct Compiler<'a> {
    opts: &'a CompileOptions,
    assignment: Vec<usize>,
    offsets: Vec<f64>,
    loc: Vec<Location>,
    fresh: Vec<bool>,
    phase: Vec<f64>,
    segments: Vec<GateSegment>,
    measurements: Vec<MeasurementSlot>,
    hadamards: Vec<HadamardSlot>,
    time: f64,
    g: f64,
}

impl Compiler<'_> {
    fn in_transmon(&self) -> Option<usize> {
        self.loc.iter().position(|l| *l == Location::Transmon)
    }

    fn advance(&mut self, t: f64, skip: &[usize]) {
        for q in 0..self.loc.len() {
            if self.loc[q] == Location::Stored && !skip.contains(&q) {
                self.phase[q] -= self.offsets[q] * t;
            }
        }
        self.time += t;
    }

    fn swap_phase(&self, q: usize) -> f64 {
        -FRAC_PI_2 - self.offsets[q] * swap_time(self.g)
    }

    fn swap_out(&mut self, q: usize) {
        self.segments.push(swap_segment(self.assignment[q], self.g));
        self.advance(swap_time(self.g), &[q]);
        self.phase[q] += self.swap_phase(q);
        self.loc[q] = Location::Stored;
    }

    fn bring_in(&mut self, q: usize) -> Result<()> {
        match self.loc[q] {
            Location::Transmon => return Ok(()),
            Location::Retired => {
                return Err(Error::Compile(format!("qubit {q} used after its measurement")))
            }
            Location::Stored => {}
        }
        if let Some(p) = self.in_transmon() {
            if self.opts.strict {
                return Err(Error::Compile(format!(
                    "transmon occupied by qubit {p} while qubit {q} is needed"
                )));
            }
            self.swap_out(p);
        }
        if self.fresh[q] {
            self.phase[q] = 0.0;
        } else {
            self.segments.push(swap_segment(self.assignment[q], self.g));
            self.advance(swap_time(self.g), &[q]);
            self.phase[q] += self.swap_phase(q);
        }
        self.fresh[q] = false;
        self.loc[q] = Location::Transmon;
        Ok(())
    }

    fn rotate(&mut self, q: usize, axis: [f64; 3], angle: f64) -> Result<()> {
        let (s, c) = self.phase[q].sin_cos();
        let turned = [c * axis[0] - s * axis[1], s * axis[0] + c * axis[1], axis[2]];
        self.segments.push(rotation_segment(turned, angle, self.opts.pulse_time)?);
        self.advance(self.opts.pulse_time, &[]);
        Ok(())
    }

    fn controlled_phase(&mut self, a: usize, b: usize, phi: f64) -> Result<()> {
        let p = solve_cphi(phi, self.g)?;
        let mode = self.assignment[b];
        self.segments.extend(cphi_segments(mode, &p));
        // the stored partner must be swapped in from now on
        self.fresh[b] = false;
        let t = 2.0 * p.t_int;
        self.advance(t, &[b]);
        self.phase[a] += p.phi2 - self.offsets[b] * t;
        self.phase[b] += p.phi1 - self.offsets[b] * t;
        Ok(())
    }

    fn gate(&mut self, gate: &LogicalGate, last: bool) -> Result<()> {
        match gate {
            LogicalGate::Single { qubit, axis, angle } => {
                let q = *qubit;
                if axis[0] == 0.0 && axis[1] == 0.0 {
                    if self.loc[q] == Location::Retired {
                        return Err(Error::Compile(format!("qubit {q} used after its measurement")));
                    }
                    let norm = axis[2].abs();
                    if norm == 0.0 {
                        return Err(Error::InvalidRotation("zero axis".into()));
                    }
                    self.phase[q] -= axis[2].signum() * angle;
                    return Ok(());
                }
                self.bring_in(q)?;
                self.rotate(q, *axis, *angle)
            }
            LogicalGate::Hadamard { qubit } => {
                let q = *qubit;
                self.bring_in(q)?;
                let k = self.hadamards.len();
                let ledger_phase = self.phase[q].rem_euclid(TAU);
                let phase = self
                    .opts
                    .hadamard_phases
                    .get(k)
                    .copied()
                    .flatten()
                    .unwrap_or(ledger_phase);
                let start = self.segments.len();
                self.segments.extend(hadamard(phase, self.opts.pulse_time));
                self.advance(2.0 * self.opts.pulse_time, &[]);
                self.hadamards.push(HadamardSlot {
                    qubit: q,
                    segments: (start, self.segments.len()),
                    ledger_phase,
                    phase,
                });
                Ok(())
            }
            LogicalGate::ControlledPhase { control, target, phi } => {
                if *phi == 0.0 {
                    return Ok(());
                }
                let (c, t) = (*control, *target);
                let (a, b) = match self.in_transmon() {
                    Some(x) if x == t => (t, c),
                    Some(x) if x == c => (c, t),
                    _ => (c, t),
                };
                self.bring_in(a)?;
                if self.loc[b] != Location::Stored {
                    return Err(Error::Compile(format!("qubit {b} is not available in its mode")));
                }
                self.controlled_phase(a, b, *phi)
            }
            LogicalGate::Cnot { control, target } => {
                let (c, t) = (*control, *target);
                self.bring_in(t)?;
                if self.loc[c] != Location::Stored {
                    return Err(Error::Compile(format!("qubit {c} is not available in its mode")));
                }
                self.rotate(t, [0.0, 1.0, 0.0], FRAC_PI_2)?;
                self.controlled_phase(t, c, PI)?;
                self.rotate(t, [0.0, 1.0, 0.0], -FRAC_PI_2)?;
                self.phase[c] += PI;
                Ok(())
            }
            LogicalGate::Measure { qubit, axis } => {
                let q = *qubit;
                self.bring_in(q)?;
                self.measurements.push(MeasurementSlot {
                    segment: self.segments.len(),
                    qubit: q,
                });
                self.segments
                    .push(measure_segment(*axis, self.phase[q], self.opts.measure_idle));
                self.loc[q] = Location::Retired;
                self.advance(self.opts.measure_idle, &[]);
                if !last {
                    match self.opts.reset {
                        ResetStyle::SwapIntoMode => {
                            self.segments.push(reset_swap_segment(self.assignment[q], self.g));
                            self.advance(swap_time(self.g), &[]);
                        }
                        ResetStyle::Feedback => self.segments.push(feedback_reset()),
                    }
                }
                Ok(())
            }
            LogicalGate::Store { qubit } => {
                let q = *qubit;
                match self.loc[q] {
                    Location::Retired => {
                        Err(Error::Compile(format!("qubit {q} used after its measurement")))
                    }
                    Location::Stored if !self.fresh[q] => Ok(()),
                    _ => {
                        self.bring_in(q)?;
                        self.swap_out(q);
                        Ok(())
                    }
                }
            }
            LogicalGate::Oracle { .. } => unreachable!("oracles are expanded before compiling"),
        }
    }
}

/// Compiles a logical circuit for `device`.
pub fn compile(
    circuit: &LogicalCircuit,
    device: &DeviceParams,
    opts: &CompileOptions,
) -> Result<CompiledSchedule> {
    let gates = circuit.expanded()?;
    let n = circuit.n_qubits;
    let assignment = match &opts.assignment {
        Some(a) => a.clone(),
        None => (0..n).collect(),
    };
    if assignment.len() != n {
        return Err(Error::Compile(format!(
            "assignment covers {} qubits, circuit has {n}",
            assignment.len()
        )));
    }
    for (i, m) in assignment.iter().enumerate() {
        device.mode(*m)?;
        if assignment[..i].contains(m) {
            return Err(Error::Compile(format!("mode {m} assigned twice")));
        }
    }
    let offsets = assignment
        .iter()
        .map(|&m| device.mode_offset(m))
        .collect::<Result<Vec<_>>>()?;
    let mut c = Compiler {
        opts,
        assignment: assignment.clone(),
        offsets,
        loc: vec![Location::Stored; n],
        fresh: circuit.fresh.clone(),
        phase: vec![0.0; n],
        segments: Vec::new(),
        measurements: Vec::new(),
        hadamards: Vec::new(),
        time: 0.0,
        g: device.g_angular(),
    };
    for (i, g) in gates.iter().enumerate() {
        c.gate(g, i + 1 == gates.len())?;
    }
    if let Some(q) = c.in_transmon() {
        c.swap_out(q);
    }
    Ok(CompiledSchedule {
        segments: c.segments,
        mode_assignment: assignment,
        frame_phases: c.phase,
        measurements: c.measurements,
        hadamards: c.hadamards,
        duration: c.time,
    })
}

/// Standard QFT network without the final bit-reversal swaps. Qubit `n-1`
/// is the most significant bit of the input.
pub fn build_qft(n: usize) -> Result<LogicalCircuit> {
    if !(1..=3).contains(&n) {
        return Err(Error::Unsupported(format!("QFT on {n} qubits")));
    }
    let mut c = LogicalCircuit::new(n);
    for t in (0..n).rev() {
        c.push(LogicalGate::Hadamard { qubit: t });
        for k in (0..t).rev() {
            c.push(LogicalGate::ControlledPhase {
                control: k,
                target: t,
                phi: PI / f64::from(1u32 << (t - k)),
            });
        }
    }
    Ok(c)
}

/// QFT followed by a readout of each qubit as soon as it is final.
pub fn build_qft_measured(n: usize) -> Result<LogicalCircuit> {
    let base = build_qft(n)?;
    let mut c = LogicalCircuit::new(n);
    let mut current = None;
    for g in base.gates {
        if let LogicalGate::Hadamard { qubit } = g {
            if let Some(prev) = current.replace(qubit) {
                c.push(LogicalGate::Measure { qubit: prev, axis: Axis::Z });
            }
        }
        c.push(g);
    }
    if let Some(q) = current {
        c.push(LogicalGate::Measure { qubit: q, axis: Axis::Z });
    }
    Ok(c)
}

/// Three-qubit period finding: `|+>` preparation, oracle onto an ancilla
/// (qubit 3) that is then parked in its mode, QFT and readout.
pub fn build_qpf(period: u32) -> Result<LogicalCircuit> {
    oracle_control(period)?;
    let mut c = LogicalCircuit::new(4);
    c.fresh = vec![true; 4];
    c.ancilla = Some(3);
    for q in 0..3 {
        c.push(LogicalGate::Single {
            qubit: q,
            axis: [0.0, 1.0, 0.0],
            angle: FRAC_PI_2,
        });
    }
    c.push(LogicalGate::Oracle { period });
    c.gates.extend(build_qft_measured(3)?.gates);
    Ok(c)
}

fn bit(x: usize, q: usize) -> usize {
    (x >> q) & 1
}

/// Unitary of a measurement-free circuit on basis index `x = sum_q b_q 2^q`.
pub fn circuit_unitary(circuit: &LogicalCircuit) -> Result<CMatrix> {
    let gates = circuit.expanded()?;
    let n = circuit.n_qubits;
    let d = 1usize << n;
    let mut u = CMatrix::identity(d, d);
    let h = {
        let s = 0.5f64.sqrt();
        CMatrix::from_row_slice(2, 2, &[C64::new(s, 0.0), C64::new(s, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0)])
    };
    for g in &gates {
        let m = match g {
            LogicalGate::Single { qubit, axis, angle } => {
                let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
                let r = rotation_matrix([axis[0] / norm, axis[1] / norm, axis[2] / norm], *angle);
                single_qubit_op(&r, *qubit, n)
            }
            LogicalGate::Hadamard { qubit } => single_qubit_op(&h, *qubit, n),
            LogicalGate::ControlledPhase { control, target, phi } => CMatrix::from_fn(d, d, |i, j| {
                if i != j {
                    C64::new(0.0, 0.0)
                } else if bit(i, *control) == 1 && bit(i, *target) == 1 {
                    C64::from_polar(1.0, *phi)
                } else {
                    C64::new(1.0, 0.0)
                }
            }),
            LogicalGate::Cnot { control, target } => CMatrix::from_fn(d, d, |i, j| {
                let image = if bit(j, *control) == 1 { j ^ (1 << target) } else { j };
                if i == image {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }),
            LogicalGate::Measure { .. } => {
                return Err(Error::Unsupported("measurement in a unitary circuit".into()))
            }
            LogicalGate::Store { .. } => continue,
            LogicalGate::Oracle { .. } => unreachable!("expanded"),
        };
        u = m * u;
    }
    Ok(u)
}

/// `op` on qubit `q` of an `n`-qubit register (basis `x = sum b_q 2^q`).
pub fn single_qubit_op(op: &CMatrix, q: usize, n: usize) -> CMatrix {
    let d = 1usize << n;
    CMatrix::from_fn(d, d, |i, j| {
        if (i ^ j) & !(1 << q) != 0 {
            C64::new(0.0, 0.0)
        } else {
            op[(bit(i, q), bit(j, q))]
        }
    })
}

/// `diag(1, e^{i phase_q})` on every qubit.
pub fn frame_operator(phases: &[f64]) -> CMatrix {
    let d = 1usize << phases.len();
    CMatrix::from_fn(d, d, |i, j| {
        if i != j {
            return C64::new(0.0, 0.0);
        }
        let ph: f64 = phases
            .iter()
            .enumerate()
            .filter(|(q, _)| bit(i, *q) == 1)
            .map(|(_, p)| p)
            .sum();
        C64::from_polar(1.0, ph)
    })
}

/// Reverses the `n`-bit binary representation of `x`.
pub fn bit_reverse(x: usize, n: usize) -> usize {
    (0..n).fold(0, |acc, q| acc | (bit(x, q) << (n - 1 - q)))
}

/// `e^{2 pi i x y / N} / sqrt(N)` with the output bits reversed, which is the
/// map implemented by [`build_qft`].
pub fn qft_target(n: usize) -> CMatrix {
    let d = 1usize << n;
    let norm = (d as f64).sqrt();
    CMatrix::from_fn(d, d, |i, x| {
        let y = bit_reverse(i, n);
        C64::from_polar(1.0 / norm, TAU * (x * y) as f64 / d as f64)
    })
}

/// Sweeps each Hadamard's reference phase in turn on `|+>^n` input and keeps
/// the phase that leaves the transmon least excited right after that gate.
pub fn calibrate_hadamard_phases(
    circuit: &LogicalCircuit,
    device: &DeviceParams,
    opts: &CompileOptions,
    model: crate::device::DecoherenceModel,
    points: usize,
) -> Result<Vec<crate::gates::SweepCalibration>> {
    use crate::executor::Executor;
    use crate::gates::{sinusoid_extremum, sweep_grid, SweepCalibration, SweepPoint};
    use rayon::prelude::*;

    let base = compile(circuit, device, opts)?;
    let exec = Executor::new(device.clone(), base.executor_modes(), model)?;
    let s = 0.5f64.sqrt();
    let plus = crate::linalg::CVector::from_vec(vec![C64::new(s, 0.0), C64::new(s, 0.0), C64::new(0.0, 0.0)]);
    let ground = crate::linalg::CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let rho0 = exec.product_state(&ground, &vec![plus; circuit.n_qubits])?;
    let mut chosen: Vec<Option<f64>> = vec![None; base.hadamards.len()];
    let mut out = Vec::new();
    for k in 0..base.hadamards.len() {
        let sweep = sweep_grid(points)
            .into_par_iter()
            .map(|phase| {
                let mut o = opts.clone();
                let mut phases = chosen.clone();
                phases[k] = Some(phase);
                o.hadamard_phases = phases;
                let sched = compile(circuit, device, &o)?;
                let end = sched.hadamards[k].segments.1;
                let rho = exec.run_unconditional(&sched.segments[..end], rho0.clone())?;
                Ok(SweepPoint {
                    parameter: phase,
                    population: exec.transmon_excited(&rho),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let value = sinusoid_extremum(&sweep, false)?;
        chosen[k] = Some(value);
        out.push(SweepCalibration { value, sweep });
    }
    Ok(out)
}

/// Logical unitary realized by a measurement-free schedule in closed-system
/// evolution, read out in the ledger frame.
pub fn simulate_logical_unitary(schedule: &CompiledSchedule, device: &DeviceParams) -> Result<CMatrix> {
    use crate::executor::Executor;
    let n = schedule.mode_assignment.len();
    let exec = Executor::new(
        device.clone(),
        schedule.executor_modes(),
        crate::device::DecoherenceModel::ideal(),
    )?;
    let layout = exec.layout().clone();
    let digits = |x: usize| -> Vec<usize> {
        let mut d = vec![0];
        d.extend((0..n).rev().map(|q| bit(x, q)));
        d
    };
    let dim = 1usize << n;
    let frame = frame_operator(&schedule.frame_phases);
    let mut u = CMatrix::zeros(dim, dim);
    for x in 0..dim {
        let psi0 = crate::dynamics::basis_vector(layout.total_dim(), layout.index_of(&digits(x)));
        let psi = exec.evolve_pure(&schedule.segments, psi0)?;
        for y in 0..dim {
            u[(y, x)] = frame[(y, y)].conj() * psi[layout.index_of(&digits(y))];
        }
    }
    Ok(u)
}
