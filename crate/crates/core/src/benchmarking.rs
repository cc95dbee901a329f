//! Single-qubit randomized benchmarking on the transmon or on a phonon mode.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::expfit::exp_fit;
use crate::device::{DecoherenceModel, DeviceParams};
use crate::dynamics::rotation_matrix;
use crate::error::{Error, Result};
use crate::executor::Executor;
use crate::gates::{rotation_segment, swap_segment, swap_time, GateSegment};
use crate::linalg::CMatrix;

pub const GROUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliffordGate {
    pub axis: [f64; 3],
    pub angle: f64,
    #[serde(skip)]
    pub matrix: CMatrix,
}

impl CliffordGate {
    fn new(axis: [f64; 3], angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let axis = [axis[0] / n, axis[1] / n, axis[2] / n];
        Self {
            axis,
            angle,
            matrix: rotation_matrix(axis, angle),
        }
    }
}

/// The 24 single-qubit Cliffords as axis-angle rotations.
pub fn clifford_table() -> Vec<CliffordGate> {
    let mut t = vec![CliffordGate::new([1.0, 0.0, 0.0], 0.0)];
    for a in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
        t.push(CliffordGate::new(a, PI));
    }
    for a in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
        t.push(CliffordGate::new(a, FRAC_PI_2));
        t.push(CliffordGate::new(a, -FRAC_PI_2));
    }
    for a in [
        [1.0, 0.0, 1.0],
        [-1.0, 0.0, 1.0],
        [0.0, 1.0, 1.0],
        [0.0, -1.0, 1.0],
        [1.0, 1.0, 0.0],
        [1.0, -1.0, 0.0],
    ] {
        t.push(CliffordGate::new(a, PI));
    }
    for angle in [2.0 * PI / 3.0, -2.0 * PI / 3.0] {
        for a in [[1.0, 1.0, 1.0], [-1.0, 1.0, 1.0], [1.0, -1.0, 1.0], [-1.0, -1.0, 1.0]] {
            t.push(CliffordGate::new(a, angle));
        }
    }
    t
}

/// Equality up to a global phase.
pub fn equal_up_to_phase(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
    let inner = (a.adjoint() * b).trace();
    let d = a.nrows() as f64;
    (inner.norm() - d).abs() < tol * d
}

/// Multiplication table and inverses of the Clifford group.
#[derive(Debug, Clone)]
pub struct CliffordGroup {
    pub gates: Vec<CliffordGate>,
    /// `product[a][b]` is the index of `gates[a] * gates[b]`.
    pub product: Vec<Vec<usize>>,
    pub inverse: Vec<usize>,
}

impl CliffordGroup {
    pub fn build() -> Result<Self> {
        let gates = clifford_table();
        let find = |m: &CMatrix| gates.iter().position(|g| equal_up_to_phase(&g.matrix, m, GROUP_TOL));
        let mut product = vec![vec![0; gates.len()]; gates.len()];
        for a in 0..gates.len() {
            for b in 0..gates.len() {
                let m = &gates[a].matrix * &gates[b].matrix;
                product[a][b] = find(&m)
                    .ok_or_else(|| Error::Unsupported(format!("Clifford set not closed at ({a}, {b})")))?;
            }
        }
        let inverse = (0..gates.len())
            .map(|a| {
                product[a]
                    .iter()
                    .position(|&p| p == 0)
                    .ok_or_else(|| Error::Unsupported(format!("no inverse for gate {a}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            gates,
            product,
            inverse,
        })
    }

    pub fn shared() -> &'static CliffordGroup {
        static GROUP: OnceLock<CliffordGroup> = OnceLock::new();
        GROUP.get_or_init(|| CliffordGroup::build().expect("Clifford table is a group"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RbSequence {
    pub gates: Vec<usize>,
    pub recovery: usize,
}

impl RbSequence {
    /// All gates including the recovery, in application order.
    pub fn all(&self) -> Vec<usize> {
        let mut v = self.gates.clone();
        v.push(self.recovery);
        v
    }

    pub fn ideal_product(&self) -> CMatrix {
        let g = &CliffordGroup::shared().gates;
        self.all()
            .iter()
            .fold(CMatrix::identity(2, 2), |acc, &k| &g[k].matrix * acc)
    }
}

/// `n` uniform random Cliffords followed by the inverting gate.
pub fn sample_rb_sequence<R: Rng>(n: usize, rng: &mut R) -> Result<RbSequence> {
    if n == 0 {
        return Err(Error::Unsupported("sequence length must be at least 1".into()));
    }
    let group = CliffordGroup::shared();
    let gates: Vec<usize> = (0..n).map(|_| rng.random_range(0..group.gates.len())).collect();
    let total = gates.iter().fold(0usize, |acc, &k| group.product[k][acc]);
    Ok(RbSequence {
        gates,
        recovery: group.inverse[total],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "target", content = "mode")]
pub enum RbTarget {
    Transmon,
    /// Device mode index; the qubit is swapped in and out after every gate.
    Phonon(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbConfig {
    pub target: RbTarget,
    pub lengths: Vec<usize>,
    pub seeds: usize,
    /// Single-qubit pulse length, seconds.
    pub pulse_time: f64,
    pub seed: u64,
}

impl RbConfig {
    pub fn new(target: RbTarget, seed: u64) -> Self {
        Self {
            target,
            lengths: vec![1, 2, 3, 5, 7, 10, 15, 20, 30, 40],
            seeds: 30,
            pulse_time: 50e-9,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub length: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub target: RbTarget,
    pub points: Vec<SurvivalPoint>,
}

/// Transmon segments for one sequence, with every gate turned into the
/// frame left by the preceding swap pairs.
pub fn rb_segments(seq: &RbSequence, target: RbTarget, device: &DeviceParams, pulse_time: f64) -> Result<Vec<GateSegment>> {
    let group = CliffordGroup::shared();
    let g = device.g_angular();
    let pair_phase = match target {
        RbTarget::Transmon => 0.0,
        RbTarget::Phonon(m) => -PI - 2.0 * device.mode_offset(m)? * swap_time(g),
    };
    let mut frame = 0.0f64;
    let mut out = Vec::new();
    for k in seq.all() {
        let gate = &group.gates[k];
        let (s, c) = frame.sin_cos();
        let a = gate.axis;
        let turned = [c * a[0] - s * a[1], s * a[0] + c * a[1], a[2]];
        out.push(rotation_segment(turned, gate.angle, pulse_time)?);
        if let RbTarget::Phonon(m) = target {
            out.push(swap_segment(m, g));
            out.push(swap_segment(m, g));
            frame += pair_phase;
        }
    }
    Ok(out)
}

fn sequence_seed(base: u64, length: usize, index: usize) -> u64 {
    base ^ ((length as u64) << 32).wrapping_add(index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Ground-state survival of one sequence.
pub fn run_sequence(exec: &Executor, seq: &RbSequence, target: RbTarget, pulse_time: f64) -> Result<f64> {
    let segs = rb_segments(seq, target, exec.device(), pulse_time)?;
    let rho = exec.basis_state(&vec![0; exec.layout().len()])?;
    let out = exec.run_unconditional(&segs, rho)?;
    Ok(1.0 - exec.transmon_excited(&out))
}

pub fn run_rb(device: &DeviceParams, config: &RbConfig, model: DecoherenceModel) -> Result<SurvivalCurve> {
    if config.seeds == 0 || config.lengths.is_empty() {
        return Err(Error::Unsupported("need at least one length and one seed".into()));
    }
    let modes = match config.target {
        RbTarget::Transmon => vec![],
        RbTarget::Phonon(m) => vec![m],
    };
    let exec = Executor::new(device.clone(), modes, model)?;
    let jobs: Vec<(usize, usize)> = config
        .lengths
        .iter()
        .flat_map(|&n| (0..config.seeds).map(move |s| (n, s)))
        .collect();
    let values = jobs
        .par_iter()
        .map(|&(n, s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(sequence_seed(config.seed, n, s));
            let seq = sample_rb_sequence(n, &mut rng)?;
            run_sequence(&exec, &seq, config.target, config.pulse_time)
        })
        .collect::<Result<Vec<f64>>>()?;
    let points = config
        .lengths
        .iter()
        .zip(values.chunks(config.seeds))
        .map(|(&length, v)| {
            let k = v.len() as f64;
            let mean = v.iter().sum::<f64>() / k;
            let var = if v.len() > 1 {
                v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            SurvivalPoint {
                length,
                mean,
                stderr: (var / k).sqrt(),
            }
        })
        .collect();
    Ok(SurvivalCurve {
        target: config.target,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbFit {
    pub p: f64,
    pub a: f64,
    pub c: f64,
    pub p_sigma: f64,
    /// Average Clifford fidelity `(p + 1) / 2`.
    pub fidelity: f64,
}

/// Fits `P(n) = A p^n + c`.
pub fn fit_rb(curve: &SurvivalCurve) -> Result<RbFit> {
    if curve.points.len() < 4 {
        return Err(Error::Fit("need at least four lengths".into()));
    }
    let x: Vec<f64> = curve.points.iter().map(|p| p.length as f64).collect();
    let y: Vec<f64> = curve.points.iter().map(|p| p.mean).collect();
    let spread = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - y.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread < 1e-10 {
        // no decay at all
        return Ok(RbFit {
            p: 1.0,
            a: 0.0,
            c: y[0],
            p_sigma: 0.0,
            fidelity: 1.0,
        });
    }
    let f = exp_fit(&x, &y)?;
    Ok(RbFit {
        p: f.p,
        a: f.a,
        c: f.c,
        p_sigma: f.p_sigma,
        fidelity: (f.p + 1.0) / 2.0,
    })
}

/// Per-swap infidelity from transmon and phonon RB: the Clifford infidelity
/// gap spread over the two swaps added to every gate.
pub fn swap_infidelity(transmon: &RbFit, phonon: &RbFit) -> f64 {
    (transmon.fidelity - phonon.fidelity) / 2.0
}

pub fn survival_csv(curve: &SurvivalCurve) -> String {
    let mut s = String::from("length,mean,stderr\n");
    for p in &curve.points {
        s.push_str(&format!("{},{:.12},{:.12}\n", p.length, p.mean, p.stderr));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cr, pauli};

    #[test]
    fn table_has_24_distinct_gates() {
        let g = CliffordGroup::shared();
        assert_eq!(g.gates.len(), 24);
        for a in 0..24 {
            for b in 0..a {
                assert!(!equal_up_to_phase(&g.gates[a].matrix, &g.gates[b].matrix, GROUP_TOL));
            }
        }
    }

    #[test]
    fn three_fold_rotation_cycles_paulis() {
        let u = CliffordGate::new([1.0, 1.0, 1.0], 2.0 * PI / 3.0).matrix;
        let conj = |p: CMatrix| &u * p * u.adjoint();
        assert!(equal_up_to_phase(&conj(pauli::x()), &pauli::y(), 1e-12));
        assert!(equal_up_to_phase(&conj(pauli::y()), &pauli::z(), 1e-12));
        assert!(equal_up_to_phase(&conj(pauli::z()), &pauli::x(), 1e-12));
    }

    #[test]
    fn hadamard_is_in_the_table() {
        let h = CMatrix::from_row_slice(2, 2, &[cr(1.0), cr(1.0), cr(1.0), cr(-1.0)]) * cr(0.5f64.sqrt());
        let u = CliffordGate::new([1.0, 0.0, 1.0], PI).matrix;
        assert!(equal_up_to_phase(&u, &h, 1e-12));
    }

    #[test]
    fn sequences_invert_and_repeat() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1, 2, 7, 40] {
            let s = sample_rb_sequence(n, &mut rng).unwrap();
            assert_eq!(s.gates.len(), n);
            assert!(equal_up_to_phase(&s.ideal_product(), &CMatrix::identity(2, 2), 1e-12));
        }
        let a = sample_rb_sequence(5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_rb_sequence(5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ideal_rb_survives() {
        let d = DeviceParams::default_device();
        for target in [RbTarget::Transmon, RbTarget::Phonon(0)] {
            let mut cfg = RbConfig::new(target, 4);
            cfg.lengths = vec![1, 2, 5, 10];
            cfg.seeds = 4;
            let curve = run_rb(&d, &cfg, DecoherenceModel::ideal()).unwrap();
            for p in &curve.points {
                assert!((p.mean - 1.0).abs() < 1e-9, "{target:?} {p:?}");
            }
            assert_eq!(fit_rb(&curve).unwrap().fidelity, 1.0);
        }
    }

    #[test]
    fn planted_decay_recovered() {
        let curve = SurvivalCurve {
            target: RbTarget::Transmon,
            points: [1usize, 2, 3, 5, 7, 10, 15, 20, 30, 40]
                .iter()
                .map(|&n| SurvivalPoint {
                    length: n,
                    mean: 0.5 * 0.95f64.powi(n as i32) + 0.5,
                    stderr: 0.0,
                })
                .collect(),
        };
        let f = fit_rb(&curve).unwrap();
        assert!((f.p - 0.95).abs() < 0.002);
        assert!((f.fidelity - 0.975).abs() < 0.001);
    }
}
