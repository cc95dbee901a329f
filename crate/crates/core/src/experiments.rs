//! Named experiment pipelines and their result bundles.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{classify_and_extract_period, qpf_theoretical_distribution};
use crate::analysis::period::periodic_truth_table;
use crate::benchmarking::{fit_rb, run_rb, survival_csv, swap_infidelity, RbConfig, RbFit, RbTarget};
use crate::compiler::{
    build_qft_measured, build_qpf, calibrate_hadamard_phases, compile, qft_target, CompileOptions,
    CompiledSchedule, LogicalCircuit, LogicalGate, ResetStyle,
};
use crate::device::{DecoherenceMode, DecoherenceModel, DephasingConvention, DeviceParams};
use crate::dynamics::Axis;
use crate::error::{Error, Result};
use crate::executor::{Branch, Executor};
use crate::gates::{
    calibrate_cnot_phase, calibrate_theta, cphi_segments, ramsey_trace, solve_cphi, sweep_csv,
    SegmentKind,
};
use crate::linalg::{cr, CMatrix, CVector, SuperOperator, C64};
use crate::tomography::{
    average_gate_fidelity, chi_export, input_settings, input_state, local_phase_operator,
    process_fidelity, process_tomography, records_csv, repeated_gate_fidelity, shot_estimate,
    state_tomography, MisassignmentModel, PrepLabel, ProcessEstimate, RepeatedGateFit,
    SettingRecord,
};

pub const SCHEMA_VERSION: u32 = 1;
/// Readout plus resonator ring-down, modelled as an idle after the projection.
pub const MEASURE_IDLE: f64 = 7e-6;
/// Single-qubit pulse length, seconds.
pub const PULSE_TIME: f64 = 50e-9;
pub const DEFAULT_SHOTS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Rb,
    CphiTomo,
    CphiRepeat,
    QftTomo,
    Qpf,
    Calibrate,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Rb,
        ExperimentKind::CphiTomo,
        ExperimentKind::CphiRepeat,
        ExperimentKind::QftTomo,
        ExperimentKind::Qpf,
        ExperimentKind::Calibrate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Rb => "rb",
            ExperimentKind::CphiTomo => "cphi-tomo",
            ExperimentKind::CphiRepeat => "cphi-repeat",
            ExperimentKind::QftTomo => "qft-tomo",
            ExperimentKind::Qpf => "qpf",
            ExperimentKind::Calibrate => "calibrate",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Unsupported(format!("unknown experiment '{s}'")))
    }
}

/// Which halves of state preparation and measurement are simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SpamMode {
    /// Ideal preparation and instantaneous readout.
    #[default]
    Ideal,
    Prep,
    Measure,
    Full,
}

impl SpamMode {
    pub fn prep_errors(self) -> bool {
        matches!(self, SpamMode::Prep | SpamMode::Full)
    }

    pub fn measure_errors(self) -> bool {
        matches!(self, SpamMode::Measure | SpamMode::Full)
    }
}

impl FromStr for SpamMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" | "none" => Ok(SpamMode::Ideal),
            "prep" => Ok(SpamMode::Prep),
            "measure" => Ok(SpamMode::Measure),
            "full" => Ok(SpamMode::Full),
            other => Err(Error::Unsupported(format!("unknown SPAM mode '{other}'"))),
        }
    }
}

pub fn parse_decoherence(s: &str) -> Result<DecoherenceMode> {
    match s {
        "none" => Ok(DecoherenceMode::None),
        "full" => Ok(DecoherenceMode::Full),
        "infinite-phonon" => Ok(DecoherenceMode::InfinitePhonon),
        "infinite-qubit" => Ok(DecoherenceMode::InfiniteQubit),
        other => Err(Error::Unsupported(format!("unknown decoherence mode '{other}'"))),
    }
}

pub fn parse_dephasing(s: &str) -> Result<DephasingConvention> {
    match s {
        "standard" => Ok(DephasingConvention::Standard),
        "sigma-z" => Ok(DephasingConvention::SigmaZ),
        other => Err(Error::Unsupported(format!("unknown dephasing convention '{other}'"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Shots {
    Exact,
    Count(u64),
}

impl From<Shots> for String {
    fn from(s: Shots) -> String {
        match s {
            Shots::Exact => "exact".into(),
            Shots::Count(n) => n.to_string(),
        }
    }
}

impl TryFrom<String> for Shots {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for Shots {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "exact" {
            return Ok(Shots::Exact);
        }
        match s.parse::<u64>() {
            Ok(n) if n > 0 => Ok(Shots::Count(n)),
            _ => Err(Error::Unsupported(format!("shots must be 'exact' or a positive count, got '{s}'"))),
        }
    }
}

impl Shots {
    pub fn count(self) -> Option<u64> {
        match self {
            Shots::Exact => None,
            Shots::Count(n) => Some(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub device_path: Option<PathBuf>,
    pub seed: u64,
    pub decoherence: DecoherenceMode,
    pub dephasing: DephasingConvention,
    pub spam: SpamMode,
    pub shots: Shots,
    /// Apply readout misassignment to sampled shots and invert it.
    pub readout_error: bool,
    pub out: Option<PathBuf>,
    pub period: Option<u32>,
    pub phi: Option<f64>,
    pub mode: usize,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            device_path: None,
            seed: 0,
            decoherence: DecoherenceMode::Full,
            dephasing: DephasingConvention::Standard,
            spam: SpamMode::Ideal,
            shots: Shots::Exact,
            readout_error: false,
            out: None,
            period: None,
            phi: None,
            mode: 0,
        }
    }

    pub fn model(&self) -> DecoherenceModel {
        DecoherenceModel {
            mode: self.decoherence,
            dephasing: self.dephasing,
        }
    }

    pub fn sampling(&self) -> Sampling {
        Sampling {
            shots: self.shots.count(),
            readout: self.readout_error.then(MisassignmentModel::measured),
            seed: self.seed,
        }
    }
}

/// The six QFT error-budget simulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorBudgetCase {
    NoSpam,
    PrepOnly,
    MeasureOnly,
    FullSpam,
    InfinitePhonon,
    InfiniteQubit,
}

impl ErrorBudgetCase {
    pub const ALL: [ErrorBudgetCase; 6] = [
        ErrorBudgetCase::NoSpam,
        ErrorBudgetCase::PrepOnly,
        ErrorBudgetCase::MeasureOnly,
        ErrorBudgetCase::FullSpam,
        ErrorBudgetCase::InfinitePhonon,
        ErrorBudgetCase::InfiniteQubit,
    ];

    pub fn settings(self) -> (DecoherenceMode, SpamMode) {
        match self {
            ErrorBudgetCase::NoSpam => (DecoherenceMode::Full, SpamMode::Ideal),
            ErrorBudgetCase::PrepOnly => (DecoherenceMode::Full, SpamMode::Prep),
            ErrorBudgetCase::MeasureOnly => (DecoherenceMode::Full, SpamMode::Measure),
            ErrorBudgetCase::FullSpam => (DecoherenceMode::Full, SpamMode::Full),
            ErrorBudgetCase::InfinitePhonon => (DecoherenceMode::InfinitePhonon, SpamMode::Full),
            ErrorBudgetCase::InfiniteQubit => (DecoherenceMode::InfiniteQubit, SpamMode::Full),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ErrorBudgetCase::NoSpam => "no-spam",
            ErrorBudgetCase::PrepOnly => "prep-only",
            ErrorBudgetCase::MeasureOnly => "measure-only",
            ErrorBudgetCase::FullSpam => "full-spam",
            ErrorBudgetCase::InfinitePhonon => "infinite-phonon",
            ErrorBudgetCase::InfiniteQubit => "infinite-qubit",
        }
    }
}

/// Finite-shot settings for tomography and period finding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    pub shots: Option<u64>,
    pub readout: Option<MisassignmentModel>,
    pub seed: u64,
}

impl Sampling {
    pub fn exact() -> Self {
        Self {
            shots: None,
            readout: None,
            seed: 0,
        }
    }

    fn rng(&self, a: u64, b: u64) -> ChaCha8Rng {
        let mix = self
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(a.wrapping_mul(0xBF58_476D_1CE4_E5B9))
            .wrapping_add(b.wrapping_mul(0x94D0_49BB_1331_11EB));
        ChaCha8Rng::seed_from_u64(mix)
    }

    fn apply(&self, probs: &[f64], a: u64, b: u64) -> Result<Vec<f64>> {
        match self.shots {
            None => Ok(probs.to_vec()),
            Some(n) => shot_estimate(probs, n, self.readout.as_ref(), &mut self.rng(a, b)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub device_sha256: String,
    pub summary: BTreeMap<String, Value>,
    /// Output file name to contents.
    #[serde(skip)]
    pub files: BTreeMap<String, String>,
}

impl ResultBundle {
    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.summary.get(key).and_then(Value::as_f64)
    }
}

/// Writes every table plus `summary.json` into `dir`.
pub fn emit(bundle: &ResultBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    let io = |p: &Path, e: std::io::Error| Error::Io {
        path: p.display().to_string(),
        message: e.to_string(),
    };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    for (name, body) in &bundle.files {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| io(&p, e))?;
        written.push(p);
    }
    let p = dir.join("summary.json");
    std::fs::write(&p, bundle.summary_json()).map_err(|e| io(&p, e))?;
    written.push(p);
    Ok(written)
}

/// Loads the configured device and the hash of its source bytes.
pub fn load_device(config: &ExperimentConfig) -> Result<(DeviceParams, String)> {
    use sha2::{Digest, Sha256};
    match &config.device_path {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| Error::Io {
                path: p.display().to_string(),
                message: e.to_string(),
            })?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|e| Error::InvalidDevice(format!("{}: {e}", p.display())))?;
            let device = DeviceParams::from_json(&text)?;
            Ok((device, hex::encode(Sha256::digest(&bytes))))
        }
        None => {
            let text = DeviceParams::default_json();
            Ok((
                DeviceParams::from_json(text)?,
                hex::encode(Sha256::digest(text.as_bytes())),
            ))
        }
    }
}

pub fn run(config: &ExperimentConfig) -> Result<ResultBundle> {
    let (device, hash) = load_device(config)?;
    let (summary, files) = match config.experiment {
        ExperimentKind::Rb => run_rb_experiment(&device, config)?,
        ExperimentKind::CphiTomo => run_cphi_tomo(&device, config)?,
        ExperimentKind::CphiRepeat => run_cphi_repeat(&device, config)?,
        ExperimentKind::QftTomo => run_qft_tomo(&device, config)?,
        ExperimentKind::Qpf => run_qpf(&device, config)?,
        ExperimentKind::Calibrate => run_calibrate(&device, config)?,
    };
    Ok(ResultBundle {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        device_sha256: hash,
        summary,
        files,
    })
}

type Outputs = (BTreeMap<String, Value>, BTreeMap<String, String>);

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

// ---------------------------------------------------------------------------
// tomography plumbing

/// Mode-state vector of a single-qubit label, padded to `dim` levels.
pub fn label_vector(label: PrepLabel, dim: usize) -> CVector {
    let s = label.state();
    CVector::from_fn(dim, |i, _| if i < 2 { s[i] } else { cr(0.0) })
}

/// Result of one simulated process tomography.
#[derive(Debug, Clone)]
pub struct TomographyRun {
    pub estimate: ProcessEstimate,
    pub process_fidelity: f64,
    pub records: Vec<(Vec<PrepLabel>, SettingRecord)>,
}

/// Runs `segments` from `rho0`, branching over all three readout axes at
/// every measurement. Returns one record per axis combination, with axes and
/// outcome bits ordered by tensor factor (qubit `n-1` first).
pub fn measurement_tree(
    exec: &Executor,
    schedule: &CompiledSchedule,
    rho0: CMatrix,
) -> Result<Vec<SettingRecord>> {
    let n = schedule.mode_assignment.len();
    let slots = &schedule.measurements;
    let mut leaves = Vec::new();
    let start = vec![Branch {
        outcomes: Vec::new(),
        rho: rho0,
    }];
    descend(exec, schedule, 0, 0, start, &mut Vec::new(), &mut leaves)?;
    let factors: Vec<usize> = slots.iter().map(|s| n - 1 - s.qubit).collect();
    let mut out = Vec::with_capacity(leaves.len());
    for (order, branches) in leaves {
        let mut axes = vec![Axis::Z; n];
        for (k, a) in order.iter().enumerate() {
            axes[factors[k]] = *a;
        }
        let mut probs = vec![0.0; 1 << n];
        for b in &branches {
            let idx: usize = b
                .outcomes
                .iter()
                .enumerate()
                .map(|(k, &o)| (o as usize) << (n - 1 - factors[k]))
                .sum();
            probs[idx] += b.probability();
        }
        out.push(SettingRecord {
            axes,
            probabilities: probs,
        });
    }
    Ok(out)
}

type Leaf = (Vec<Axis>, Vec<Branch>);

fn descend(
    exec: &Executor,
    schedule: &CompiledSchedule,
    k: usize,
    from: usize,
    branches: Vec<Branch>,
    axes: &mut Vec<Axis>,
    leaves: &mut Vec<Leaf>,
) -> Result<()> {
    let segs = &schedule.segments;
    if k == schedule.measurements.len() {
        let b = exec.run_branches(&segs[from..], branches)?;
        leaves.push((axes.clone(), b));
        return Ok(());
    }
    let at = schedule.measurements[k].segment;
    let before = exec.run_branches(&segs[from..at], branches)?;
    for axis in Axis::ALL {
        let mut seg = segs[at].clone();
        match &mut seg.kind {
            SegmentKind::Measure { axis: a, .. } => *a = axis,
            _ => return Err(Error::Compile(format!("segment {at} is not a measurement"))),
        }
        let after = exec.run_branches(std::slice::from_ref(&seg), before.clone())?;
        axes.push(axis);
        descend(exec, schedule, k + 1, at + 1, after, axes, leaves)?;
        axes.pop();
    }
    Ok(())
}

/// Full process tomography of a compiled protocol. `build` returns the
/// schedule and initial physical state for one input label set.
pub fn protocol_tomography<F>(
    exec: &Executor,
    n: usize,
    target: &CMatrix,
    sampling: &Sampling,
    build: F,
) -> Result<TomographyRun>
where
    F: Fn(&[PrepLabel]) -> Result<(CompiledSchedule, CMatrix)> + Sync,
{
    let inputs = input_settings(n);
    let per_input = inputs
        .par_iter()
        .enumerate()
        .map(|(i, labels)| {
            let (sched, rho0) = build(labels)?;
            let mut recs = measurement_tree(exec, &sched, rho0)?;
            for (j, r) in recs.iter_mut().enumerate() {
                r.probabilities = sampling.apply(&r.probabilities, i as u64, j as u64)?;
            }
            Ok(recs)
        })
        .collect::<Result<Vec<_>>>()?;
    let ins: Vec<CMatrix> = inputs.iter().map(|l| input_state(l)).collect();
    let outs = per_input
        .iter()
        .map(|r| state_tomography(r, n).map(|d| d.into_matrix()))
        .collect::<Result<Vec<_>>>()?;
    let superop = process_tomography(&ins, &outs)?;
    let estimate = ProcessEstimate::new(superop, target)?;
    let comp_target = local_phase_operator(&estimate.compensation_phases) * target;
    let pf = process_fidelity(&estimate.superop, &comp_target)?;
    let records = inputs
        .into_iter()
        .zip(per_input)
        .flat_map(|(l, recs)| recs.into_iter().map(move |r| (l.clone(), r)))
        .collect();
    Ok(TomographyRun {
        estimate,
        process_fidelity: pf,
        records,
    })
}

fn base_options(spam: SpamMode) -> CompileOptions {
    CompileOptions {
        pulse_time: PULSE_TIME,
        measure_idle: if spam.measure_errors() { MEASURE_IDLE } else { 0.0 },
        reset: ResetStyle::SwapIntoMode,
        ..CompileOptions::default()
    }
}

fn prep_gate(qubit: usize, label: PrepLabel) -> Option<LogicalGate> {
    label
        .rotation()
        .map(|(axis, angle)| LogicalGate::Single { qubit, axis, angle })
}

// ---------------------------------------------------------------------------
// controlled phase

/// `diag(1, 1, 1, e^{i phi})`.
pub fn cphi_target(phi: f64) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_vec(vec![
        cr(1.0),
        cr(1.0),
        cr(1.0),
        C64::from_polar(1.0, phi),
    ]))
}

/// Channel of `reps` back-to-back controlled-phase gates on the transmon
/// (factor 0) and `mode` (factor 1), restricted to the qubit subspace, with
/// ideal preparation and readout.
pub fn cphi_channel(
    device: &DeviceParams,
    mode: usize,
    phi: f64,
    reps: usize,
    model: DecoherenceModel,
) -> Result<SuperOperator> {
    let p = solve_cphi(phi, device.g_angular())?;
    let exec = Executor::new(device.clone(), vec![mode], model)?;
    let trunc = exec.layout().factors()[1];
    let segs: Vec<_> = (0..reps).flat_map(|_| cphi_segments(mode, &p)).collect();
    let inputs = input_settings(2);
    let outs = inputs
        .par_iter()
        .map(|labels| {
            let rho0 = exec.product_state(&labels[0].state(), &[label_vector(labels[1], trunc)])?;
            let rho = exec.run_unconditional(&segs, rho0)?;
            let idx = |k: usize| (k >> 1) * trunc + (k & 1);
            Ok(CMatrix::from_fn(4, 4, |i, j| rho[(idx(i), idx(j))]))
        })
        .collect::<Result<Vec<_>>>()?;
    let ins: Vec<CMatrix> = inputs.iter().map(|l| input_state(l)).collect();
    process_tomography(&ins, &outs)
}

/// No-SPAM fidelity of one controlled-phase gate after local phase
/// compensation.
pub fn cphi_no_spam(device: &DeviceParams, mode: usize, phi: f64, model: DecoherenceModel) -> Result<ProcessEstimate> {
    let e = cphi_channel(device, mode, phi, 1, model)?;
    ProcessEstimate::new(e, &cphi_target(phi))
}

/// Transmon-phonon tomography of `reps` controlled-phase gates including the
/// selected preparation and readout imperfections. Qubit 1 is the transmon
/// qubit (factor 0), qubit 0 is stored in `mode` (factor 1) and is swapped
/// back into the transmon for readout.
pub fn cphi_tomography(
    device: &DeviceParams,
    mode: usize,
    phi: f64,
    reps: usize,
    model: DecoherenceModel,
    spam: SpamMode,
    sampling: &Sampling,
) -> Result<TomographyRun> {
    let (dev, spectator) = device.with_spectator_mode();
    dev.mode(mode)?;
    let opts = CompileOptions {
        assignment: Some(vec![mode, spectator]),
        ..base_options(spam)
    };
    let exec = Executor::new(dev.clone(), vec![spectator, mode], model)?;
    let trunc = exec.layout().factors()[2];
    let target = cphi_target(phi * reps as f64);
    protocol_tomography(&exec, 2, &target, sampling, |labels| {
        let mut c = LogicalCircuit::new(2);
        let rho0 = if spam.prep_errors() {
            c.fresh = vec![true, true];
            c.gates.extend(prep_gate(0, labels[1]));
            c.push(LogicalGate::Store { qubit: 0 });
            c.gates.extend(prep_gate(1, labels[0]));
            exec.basis_state(&[0, 0, 0])?
        } else {
            c.fresh = vec![false, true];
            exec.product_state(
                &labels[0].state(),
                &[label_vector(PrepLabel::Zero, trunc), label_vector(labels[1], trunc)],
            )?
        };
        for _ in 0..reps {
            c.push(LogicalGate::ControlledPhase {
                control: 1,
                target: 0,
                phi,
            });
        }
        c.push(LogicalGate::Measure { qubit: 1, axis: Axis::Z });
        c.push(LogicalGate::Measure { qubit: 0, axis: Axis::Z });
        Ok((compile(&c, &dev, &opts)?, rho0))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub reps: Vec<usize>,
    pub fidelities: Vec<f64>,
    pub fit: RepeatedGateFit,
}

pub fn cphi_repetition(
    device: &DeviceParams,
    mode: usize,
    phi: f64,
    reps: &[usize],
    model: DecoherenceModel,
    spam: SpamMode,
    sampling: &Sampling,
) -> Result<RepetitionResult> {
    let fidelities = reps
        .iter()
        .map(|&n| {
            let s = Sampling {
                seed: sampling.seed.wrapping_add(n as u64),
                ..*sampling
            };
            cphi_tomography(device, mode, phi, n, model, spam, &s).map(|r| r.estimate.fidelity)
        })
        .collect::<Result<Vec<_>>>()?;
    let ns: Vec<f64> = reps.iter().map(|&n| n as f64).collect();
    let fit = repeated_gate_fidelity(&ns, &fidelities)?;
    Ok(RepetitionResult {
        reps: reps.to_vec(),
        fidelities,
        fit,
    })
}

// ---------------------------------------------------------------------------
// QFT

/// Three-qubit QFT tomography with each qubit read out as soon as it is
/// final. With preparation errors the inputs are made in the transmon and
/// swapped into their modes in the order q0, q1, q2.
pub fn qft_tomography(
    device: &DeviceParams,
    model: DecoherenceModel,
    spam: SpamMode,
    sampling: &Sampling,
) -> Result<TomographyRun> {
    let n = 3;
    let opts = base_options(spam);
    let probe = compile(&build_qft_measured(n)?, device, &opts)?;
    let exec = Executor::new(device.clone(), probe.executor_modes(), model)?;
    let factors = exec.layout().factors().to_vec();
    protocol_tomography(&exec, n, &qft_target(n), sampling, |labels| {
        let qft = build_qft_measured(n)?;
        let mut c = LogicalCircuit::new(n);
        let rho0 = if spam.prep_errors() {
            c.fresh = vec![true; n];
            for q in 0..n {
                c.gates.extend(prep_gate(q, labels[n - 1 - q]));
                c.push(LogicalGate::Store { qubit: q });
            }
            exec.basis_state(&vec![0; n + 1])?
        } else {
            let ground = PrepLabel::Zero.state();
            let modes: Vec<CVector> = (0..n).map(|f| label_vector(labels[f], factors[f + 1])).collect();
            exec.product_state(&ground, &modes)?
        };
        c.gates.extend(qft.gates);
        Ok((compile(&c, device, &opts)?, rho0))
    })
}

// ---------------------------------------------------------------------------
// period finding

/// Exact output distribution over `y = sum_q b_q 2^{n-1-q}`.
pub fn qpf_distribution(
    device: &DeviceParams,
    period: u32,
    model: DecoherenceModel,
    spam: SpamMode,
) -> Result<Vec<f64>> {
    let (dev, spectator) = device.with_spectator_mode();
    let circuit = build_qpf(period)?;
    let opts = CompileOptions {
        assignment: Some(vec![0, 1, 2, spectator]),
        ..base_options(spam)
    };
    let sched = compile(&circuit, &dev, &opts)?;
    let exec = Executor::new(dev, sched.executor_modes(), model)?;
    let rho0 = exec.basis_state(&vec![0; exec.layout().len()])?;
    let branches = exec.run(&sched.segments, rho0)?;
    let n = 3;
    let mut p = vec![0.0; 1 << n];
    for b in &branches {
        let y: usize = sched
            .measurements
            .iter()
            .zip(&b.outcomes)
            .map(|(slot, &o)| (o as usize) << (n - 1 - slot.qubit))
            .sum();
        p[y] += b.probability();
    }
    Ok(p)
}

/// Shot-sampled (and optionally readout-corrupted and corrected) copy of a
/// distribution.
pub fn sample_distribution(p: &[f64], sampling: &Sampling, run: u64) -> Result<Vec<f64>> {
    sampling.apply(p, run, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpfRun {
    pub populations: Vec<f64>,
    pub period: Option<usize>,
}

// ---------------------------------------------------------------------------
// experiment runners

fn run_rb_experiment(device: &DeviceParams, cfg: &ExperimentConfig) -> Result<Outputs> {
    let model = cfg.model();
    let mut targets = vec![RbTarget::Transmon];
    targets.extend((0..device.modes.len()).map(RbTarget::Phonon));
    let mut csv = String::from("target,length,mean,stderr\n");
    let mut fits: Vec<(String, RbFit)> = Vec::new();
    for t in &targets {
        let curve = run_rb(device, &RbConfig::new(*t, cfg.seed), model)?;
        let name = match t {
            RbTarget::Transmon => "transmon".to_string(),
            RbTarget::Phonon(m) => format!("mode{m}"),
        };
        for line in survival_csv(&curve).lines().skip(1) {
            csv.push_str(&format!("{name},{line}\n"));
        }
        fits.push((name, fit_rb(&curve)?));
    }
    let transmon = fits[0].1;
    let swaps: Vec<f64> = fits[1..].iter().map(|(_, f)| swap_infidelity(&transmon, f)).collect();
    let mean_swap = swaps.iter().sum::<f64>() / swaps.len().max(1) as f64;
    let mut summary = BTreeMap::new();
    for (name, f) in &fits {
        summary.insert(format!("fidelity_{name}"), json!(f.fidelity));
    }
    summary.insert("fidelity".into(), json!(fits[1.min(fits.len() - 1)].1.fidelity));
    summary.insert("swap_infidelity".into(), json!(mean_swap));
    let fit_json = json!({
        "fits": fits.iter().map(|(n, f)| json!({"target": n, "p": f.p, "a": f.a, "c": f.c, "p_sigma": f.p_sigma, "fidelity": f.fidelity})).collect::<Vec<_>>(),
        "swap_infidelity": mean_swap,
    });
    let mut files = BTreeMap::new();
    files.insert("survival.csv".into(), csv);
    files.insert("fit.json".into(), to_json(&fit_json));
    Ok((summary, files))
}

fn tomography_outputs(run: &TomographyRun, summary: &mut BTreeMap<String, Value>) -> Result<BTreeMap<String, String>> {
    summary.insert("fidelity".into(), json!(run.estimate.fidelity));
    summary.insert("process_fidelity".into(), json!(run.process_fidelity));
    summary.insert("compensation_phases".into(), json!(run.estimate.compensation_phases));
    let mut files = BTreeMap::new();
    files.insert("chi.json".into(), to_json(&chi_export(&run.estimate.chi)?));
    files.insert("records.csv".into(), records_csv(&run.records));
    Ok(files)
}

fn run_cphi_tomo(device: &DeviceParams, cfg: &ExperimentConfig) -> Result<Outputs> {
    let phi = cfg.phi.unwrap_or(PI);
    let run = cphi_tomography(device, cfg.mode, phi, 1, cfg.model(), cfg.spam, &cfg.sampling())?;
    let mut summary = BTreeMap::new();
    summary.insert("phi".into(), json!(phi));
    let files = tomography_outputs(&run, &mut summary)?;
    let ideal = cphi_no_spam(device, cfg.mode, phi, cfg.model())?;
    summary.insert("no_spam_fidelity".into(), json!(ideal.fidelity));
    Ok((summary, files))
}

fn run_cphi_repeat(device: &DeviceParams, cfg: &ExperimentConfig) -> Result<Outputs> {
    let phi = cfg.phi.unwrap_or(PI);
    let reps: Vec<usize> = (0..20).collect();
    let spam = if cfg.spam == SpamMode::Ideal { SpamMode::Full } else { cfg.spam };
    let r = cphi_repetition(device, cfg.mode, phi, &reps, cfg.model(), spam, &cfg.sampling())?;
    let mut csv = String::from("repetitions,fidelity\n");
    for (n, f) in r.reps.iter().zip(&r.fidelities) {
        csv.push_str(&format!("{n},{f:.12}\n"));
    }
    let mut summary = BTreeMap::new();
    summary.insert("phi".into(), json!(phi));
    summary.insert("fidelity".into(), json!(r.fit.fidelity));
    summary.insert("fidelity_sigma".into(), json!(r.fit.uncertainty));
    let grid: Vec<(f64, f64)> = (1..=8)
        .map(|k| {
            let p = k as f64 * PI / 8.0;
            cphi_no_spam(device, cfg.mode, p, cfg.model()).map(|e| (p, 1.0 - e.fidelity))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grid_csv = String::from("phi,infidelity\n");
    for (p, inf) in &grid {
        grid_csv.push_str(&format!("{p:.12},{inf:.12}\n"));
    }
    let mut files = BTreeMap::new();
    files.insert("repetition.csv".into(), csv);
    files.insert("fit.json".into(), to_json(&r.fit));
    files.insert("phase_grid.csv".into(), grid_csv);
    Ok((summary, files))
}

fn run_qft_tomo(device: &DeviceParams, cfg: &ExperimentConfig) -> Result<Outputs> {
    let run = qft_tomography(device, cfg.model(), cfg.spam, &cfg.sampling())?;
    let mut summary = BTreeMap::new();
    let files = tomography_outputs(&run, &mut summary)?;
    Ok((summary, files))
}

fn run_qpf(device: &DeviceParams, cfg: &ExperimentConfig) -> Result<Outputs> {
    let periods: Vec<u32> = match cfg.period {
        Some(r) => vec![r],
        None => vec![1, 2, 4],
    };
    let sampling = cfg.sampling();
    let mut summary = BTreeMap::new();
    let mut files = BTreeMap::new();
    let mut csv = String::from("period,y,theory,simulated,measured\n");
    for r in periods {
        let theory = qpf_theoretical_distribution(&periodic_truth_table(r as usize, 8)?);
        let sim = qpf_distribution(device, r, cfg.model(), cfg.spam)?;
        let measured = sample_distribution(&sim, &sampling, r as u64)?;
        for y in 0..8 {
            csv.push_str(&format!("{r},{y},{:.12},{:.12},{:.12}\n", theory[y], sim[y], measured[y]));
        }
        let report = classify_and_extract_period(&measured);
        match &report {
            Ok(rep) => {
                summary.insert(format!("period_r{r}"), json!(rep.period));
                files.insert(format!("classification_r{r}.json"), to_json(rep));
            }
            Err(e) => {
                summary.insert(format!("period_r{r}"), json!(null));
                summary.insert(format!("classification_error_r{r}"), json!(e.to_string()));
            }
        }
        if cfg.period.is_some() {
            summary.insert("distribution".into(), json!(measured));
        }
    }
    files.insert("distribution.csv".into(), csv);
    Ok((summary, files))
}

fn run_calibrate(device: &DeviceParams, cfg: &ExperimentConfig) -> Result<Outputs> {
    let phi = cfg.phi.unwrap_or(PI);
    let model = cfg.model();
    let predicted = solve_cphi(phi, device.g_angular())?;
    let theta = calibrate_theta(device, cfg.mode, phi, model, 41)?;
    let cnot = calibrate_cnot_phase(device, cfg.mode, model, 41, PULSE_TIME)?;
    let offset = device.mode_offset(cfg.mode)?;
    let period = 2.0 * PI / offset.abs();
    let waits: Vec<f64> = (0..80).map(|k| k as f64 * period / 16.0).collect();
    let trace = ramsey_trace(device, cfg.mode, &waits, model)?;
    let freq = crate::gates::fit_oscillation_frequency(&trace)?;
    let had = calibrate_hadamard_phases(&build_qft_measured(3)?, device, &base_options(cfg.spam), model, 41)?;
    let mut summary = BTreeMap::new();
    summary.insert("theta_predicted".into(), json!(predicted.theta));
    summary.insert("theta_calibrated".into(), json!(theta.value));
    summary.insert("cnot_phase".into(), json!(cnot.value));
    summary.insert("ramsey_frequency_hz".into(), json!(freq));
    summary.insert("mode_offset_hz".into(), json!(offset / (2.0 * PI)));
    summary.insert(
        "hadamard_phases".into(),
        json!(had.iter().map(|h| h.value).collect::<Vec<_>>()),
    );
    let mut ramsey = String::from("wait,population\n");
    for (t, p) in &trace {
        ramsey.push_str(&format!("{t:.12e},{p:.12}\n"));
    }
    let mut files = BTreeMap::new();
    files.insert("theta_sweep.csv".into(), sweep_csv(&theta.sweep));
    files.insert("cnot_phase_sweep.csv".into(), sweep_csv(&cnot.sweep));
    files.insert("ramsey.csv".into(), ramsey);
    files.insert("hadamard_phases.json".into(), to_json(&had));
    Ok((summary, files))
}

/// Average gate fidelity of the QFT process against its target, exposed for
/// callers holding a raw superoperator.
pub fn qft_fidelity(e: &SuperOperator) -> Result<f64> {
    average_gate_fidelity(e, &qft_target(3))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
        assert!("nope".parse::<ExperimentKind>().is_err());
        assert_eq!("exact".parse::<Shots>().unwrap(), Shots::Exact);
        assert_eq!("250".parse::<Shots>().unwrap(), Shots::Count(250));
        assert!("0".parse::<Shots>().is_err());
    }

    #[test]
    fn ideal_cphi_channel_is_the_gate() {
        let d = DeviceParams::default_device();
        for phi in [PI / 4.0, PI / 2.0, PI] {
            let e = cphi_no_spam(&d, 0, phi, DecoherenceModel::ideal()).unwrap();
            assert!(e.fidelity > 1.0 - 1e-9, "{phi}: {}", e.fidelity);
        }
    }

    #[test]
    fn ideal_cphi_protocol_tomography() {
        let d = DeviceParams::default_device();
        for spam in [SpamMode::Ideal, SpamMode::Full] {
            let r = cphi_tomography(&d, 0, PI, 1, DecoherenceModel::ideal(), spam, &Sampling::exact()).unwrap();
            assert!(r.estimate.fidelity > 1.0 - 1e-8, "{spam:?}: {}", r.estimate.fidelity);
        }
    }

    #[test]
    fn ideal_qpf_matches_theory() {
        let d = DeviceParams::default_device();
        for r in [1u32, 2, 4] {
            let p = qpf_distribution(&d, r, DecoherenceModel::ideal(), SpamMode::Ideal).unwrap();
            let t = qpf_theoretical_distribution(&periodic_truth_table(r as usize, 8).unwrap());
            for y in 0..8 {
                assert!((p[y] - t[y]).abs() < 1e-9, "r={r} y={y}: {} vs {}", p[y], t[y]);
            }
        }
    }
}
