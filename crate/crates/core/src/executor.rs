//! Runs gate-segment schedules on the transmon plus a set of phonon modes.
//!
//! Every segment is propagated exactly. The transmon and the addressed mode
//! evolve under the exponential of their local Lindbladian, the other modes
//! under their own idle channels, and the common rest-frame offsets are
//! applied as diagonal phases (they commute with the excitation-conserving
//! coupling). Measurements split the state into unnormalized branches keyed
//! by the classical record.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::device::{
    annihilation, embed, local_jump_operators, sigma_minus, DecoherenceModel, DeviceParams,
    TRANSMON_DIM,
};
use crate::dynamics::{lindblad_channel, rotation_matrix, phase_gate};
use crate::error::{Error, Result};
use crate::gates::{z_phase, GateSegment, SegmentKind};
use crate::linalg::{
    apply_local_superop, apply_local_unitary, c, cr, CMatrix, CVector, SpaceLayout,
    SubsystemIndexer, C64,
};

/// One measurement-record branch: an unnormalized state whose trace is the
/// probability of `outcomes`.
#[derive(Debug, Clone)]
pub struct Branch {
    pub outcomes: Vec<u8>,
    pub rho: CMatrix,
}

impl Branch {
    pub fn probability(&self) -> f64 {
        self.rho.trace().re
    }
}

#[derive(Debug)]
enum LocalMap {
    Unitary(CMatrix),
    Channel(CMatrix),
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum MapKey {
    Pair { sub: usize, delta: u64, t: u64 },
    Drive { axis: [u64; 3], angle: u64, t: u64 },
    TransmonIdle { t: u64 },
    ModeIdle { sub: usize, t: u64 },
}

pub struct Executor {
    device: DeviceParams,
    modes: Vec<usize>,
    layout: SpaceLayout,
    model: DecoherenceModel,
    offsets: Vec<f64>,
    transmon_idx: SubsystemIndexer,
    pair_idx: Vec<SubsystemIndexer>,
    mode_idx: Vec<SubsystemIndexer>,
    occupation: Vec<Vec<f64>>,
    cache: Mutex<HashMap<MapKey, Arc<LocalMap>>>,
}

/// Prunes branches whose probability is below this.
const BRANCH_FLOOR: f64 = 1e-14;

impl Executor {
    /// `modes` lists device mode indices; subsystem `s + 1` holds `modes[s]`.
    pub fn new(device: DeviceParams, modes: Vec<usize>, model: DecoherenceModel) -> Result<Self> {
        device.validate()?;
        for (i, m) in modes.iter().enumerate() {
            device.mode(*m)?;
            if modes[..i].contains(m) {
                return Err(Error::InvalidDevice(format!("mode {m} listed twice")));
            }
        }
        let layout = crate::device::composite_layout(&device, &modes)?;
        let offsets = modes
            .iter()
            .map(|&m| device.mode_offset(m))
            .collect::<Result<Vec<_>>>()?;
        let transmon_idx = SubsystemIndexer::new(&layout, &[0])?;
        let pair_idx = (1..layout.len())
            .map(|s| SubsystemIndexer::new(&layout, &[0, s]))
            .collect::<Result<Vec<_>>>()?;
        let mode_idx = (1..layout.len())
            .map(|s| SubsystemIndexer::new(&layout, &[s]))
            .collect::<Result<Vec<_>>>()?;
        let occupation = (0..layout.len())
            .map(|s| {
                (0..layout.total_dim())
                    .map(|i| layout.digits(i)[s] as f64)
                    .collect()
            })
            .collect();
        Ok(Self {
            device,
            modes,
            layout,
            model,
            offsets,
            transmon_idx,
            pair_idx,
            mode_idx,
            occupation,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn device(&self) -> &DeviceParams {
        &self.device
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn model(&self) -> DecoherenceModel {
        self.model
    }

    /// Subsystem holding device mode `mode`.
    pub fn subsystem_of(&self, mode: usize) -> Result<usize> {
        self.modes
            .iter()
            .position(|&m| m == mode)
            .map(|p| p + 1)
            .ok_or(Error::UnknownMode(mode))
    }

    pub fn basis_state(&self, digits: &[usize]) -> Result<CMatrix> {
        Ok(crate::linalg::DensityMatrix::basis(self.layout.clone(), digits)?.into_matrix())
    }

    /// `|psi><psi|` for a product of a transmon state and mode states.
    pub fn product_state(&self, transmon: &CVector, modes: &[CVector]) -> Result<CMatrix> {
        let psi = self.product_vector(transmon, modes)?;
        Ok(&psi * psi.adjoint())
    }

    pub fn product_vector(&self, transmon: &CVector, modes: &[CVector]) -> Result<CVector> {
        if modes.len() != self.modes.len() || transmon.len() != TRANSMON_DIM {
            return Err(Error::DimensionMismatch("product state factors".into()));
        }
        let mut psi = transmon.clone();
        for (s, v) in modes.iter().enumerate() {
            if v.len() != self.layout.factors()[s + 1] {
                return Err(Error::DimensionMismatch(format!("mode factor {s}")));
            }
            psi = psi.kronecker(v);
        }
        Ok(psi)
    }

    /// Probability that the transmon is excited.
    pub fn transmon_excited(&self, rho: &CMatrix) -> f64 {
        (0..rho.nrows())
            .filter(|&i| self.occupation[0][i] > 0.5)
            .map(|i| rho[(i, i)].re)
            .sum()
    }

    /// Runs a schedule and returns every measurement branch.
    pub fn run(&self, segments: &[GateSegment], rho: CMatrix) -> Result<Vec<Branch>> {
        self.run_branches(
            segments,
            vec![Branch {
                outcomes: Vec::new(),
                rho,
            }],
        )
    }

    pub fn run_branches(&self, segments: &[GateSegment], mut branches: Vec<Branch>) -> Result<Vec<Branch>> {
        check_dim(&branches, self.layout.total_dim())?;
        for seg in segments {
            branches = self.apply(seg, branches)?;
        }
        Ok(branches)
    }

    /// Runs a schedule and sums over measurement records.
    pub fn run_unconditional(&self, segments: &[GateSegment], rho: CMatrix) -> Result<CMatrix> {
        let branches = self.run(segments, rho)?;
        let d = self.layout.total_dim();
        Ok(branches
            .into_iter()
            .fold(CMatrix::zeros(d, d), |acc, b| acc + b.rho))
    }

    fn apply(&self, seg: &GateSegment, branches: Vec<Branch>) -> Result<Vec<Branch>> {
        if !(seg.duration >= 0.0) {
            return Err(Error::Compile(format!("negative duration {}", seg.duration)));
        }
        match &seg.kind {
            SegmentKind::Measure { axis, frame_phase } => {
                let pre = axis.to_z_rotation() * phase_gate(-frame_phase);
                let mut out = Vec::with_capacity(2 * branches.len());
                for b in branches {
                    let rho = apply_local_unitary(&b.rho, &pre, &self.transmon_idx);
                    for outcome in 0..2u8 {
                        let keep = |i: usize| (self.occupation[0][i] > 0.5) == (outcome == 1);
                        let proj = CMatrix::from_fn(rho.nrows(), rho.ncols(), |i, j| {
                            if keep(i) && keep(j) {
                                rho[(i, j)]
                            } else {
                                C64::new(0.0, 0.0)
                            }
                        });
                        if proj.trace().re > BRANCH_FLOOR {
                            let mut outcomes = b.outcomes.clone();
                            outcomes.push(outcome);
                            out.push(Branch { outcomes, rho: proj });
                        }
                    }
                }
                self.evolve_all(out, None, seg.duration, &MapKind::Idle)
            }
            SegmentKind::FeedbackReset => {
                let x = crate::linalg::pauli::x();
                let out = branches
                    .into_iter()
                    .map(|mut b| {
                        if b.outcomes.last() == Some(&1) {
                            b.rho = apply_local_unitary(&b.rho, &x, &self.transmon_idx);
                        }
                        b
                    })
                    .collect();
                self.evolve_all(out, None, seg.duration, &MapKind::Idle)
            }
            SegmentKind::VirtualZ { theta } => {
                let u = z_phase(*theta);
                let out = branches
                    .into_iter()
                    .map(|mut b| {
                        b.rho = apply_local_unitary(&b.rho, &u, &self.transmon_idx);
                        b
                    })
                    .collect();
                self.evolve_all(out, None, seg.duration, &MapKind::Idle)
            }
            SegmentKind::Idle => self.evolve_all(branches, None, seg.duration, &MapKind::Idle),
            SegmentKind::Rotation { axis, angle } => {
                if seg.duration == 0.0 {
                    let u = rotation_matrix(*axis, *angle);
                    let out = branches
                        .into_iter()
                        .map(|mut b| {
                            b.rho = apply_local_unitary(&b.rho, &u, &self.transmon_idx);
                            b
                        })
                        .collect();
                    Ok(out)
                } else {
                    self.evolve_all(branches, None, seg.duration, &MapKind::Drive(*axis, *angle))
                }
            }
            SegmentKind::ResonantSwap { mode } | SegmentKind::ResetSwap { mode } => {
                let sub = self.subsystem_of(*mode)?;
                self.evolve_all(branches, Some(sub), seg.duration, &MapKind::Pair(0.0))
            }
            SegmentKind::OffresInteraction { mode, delta } => {
                let sub = self.subsystem_of(*mode)?;
                self.evolve_all(branches, Some(sub), seg.duration, &MapKind::Pair(*delta))
            }
        }
    }

    fn evolve_all(
        &self,
        branches: Vec<Branch>,
        target: Option<usize>,
        t: f64,
        kind: &MapKind,
    ) -> Result<Vec<Branch>> {
        if t == 0.0 {
            return Ok(branches);
        }
        let maps = self.segment_maps(target, t, kind)?;
        let phases = self.frame_phases(target, t);
        Ok(branches
            .into_iter()
            .map(|mut b| {
                for (idx, map) in &maps {
                    b.rho = match map.as_ref() {
                        LocalMap::Unitary(u) => apply_local_unitary(&b.rho, u, idx),
                        LocalMap::Channel(s) => apply_local_superop(&b.rho, s, idx),
                        LocalMap::Identity => continue,
                    };
                }
                apply_diagonal_phases(&mut b.rho, &phases);
                b
            })
            .filter(|b| b.probability() > BRANCH_FLOOR)
            .collect())
    }

    fn segment_maps(
        &self,
        target: Option<usize>,
        t: f64,
        kind: &MapKind,
    ) -> Result<Vec<(&SubsystemIndexer, Arc<LocalMap>)>> {
        let mut maps = Vec::new();
        match (target, kind) {
            (Some(sub), MapKind::Pair(delta)) => {
                maps.push((&self.pair_idx[sub - 1], self.pair_map(sub, *delta, t)?));
            }
            (None, MapKind::Drive(axis, angle)) => {
                maps.push((&self.transmon_idx, self.drive_map(*axis, *angle, t)?));
            }
            (None, MapKind::Idle) => {
                maps.push((&self.transmon_idx, self.transmon_idle(t)?));
            }
            _ => return Err(Error::Compile("inconsistent segment target".into())),
        }
        for sub in 1..self.layout.len() {
            if Some(sub) != target {
                maps.push((&self.mode_idx[sub - 1], self.mode_idle(sub, t)?));
            }
        }
        Ok(maps)
    }

    /// Rest-frame phase per basis state: every mode rotates at its offset,
    /// and a transmon tuned to a mode rotates with it.
    fn frame_phases(&self, target: Option<usize>, t: f64) -> Vec<f64> {
        let d = self.layout.total_dim();
        let mut out = vec![0.0; d];
        for (s, off) in self.offsets.iter().enumerate() {
            let occ = &self.occupation[s + 1];
            for i in 0..d {
                out[i] += off * t * occ[i];
            }
        }
        if let Some(sub) = target {
            let off = self.offsets[sub - 1];
            for i in 0..d {
                out[i] += off * t * self.occupation[0][i];
            }
        }
        out
    }

    fn cached(&self, key: MapKey, build: impl FnOnce() -> Result<LocalMap>) -> Result<Arc<LocalMap>> {
        if let Some(m) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(m.clone());
        }
        let m = Arc::new(build()?);
        self.cache.lock().expect("cache lock").insert(key, m.clone());
        Ok(m)
    }

    fn transmon_jumps(&self) -> Result<Vec<CMatrix>> {
        if self.model.mode.transmon_decoheres() {
            local_jump_operators(
                TRANSMON_DIM,
                self.device.transmon_t1,
                self.device.transmon_t2,
                self.model.dephasing,
            )
        } else {
            Ok(Vec::new())
        }
    }

    fn mode_jumps(&self, sub: usize) -> Result<Vec<CMatrix>> {
        if self.model.mode.phonons_decohere() {
            let spec = self.device.mode(self.modes[sub - 1])?;
            local_jump_operators(spec.truncation, spec.t1, spec.t2, self.model.dephasing)
        } else {
            Ok(Vec::new())
        }
    }

    fn finish(&self, h: CMatrix, jumps: Vec<CMatrix>, t: f64) -> LocalMap {
        if jumps.is_empty() {
            if h.iter().all(|z| z.norm() == 0.0) {
                LocalMap::Identity
            } else {
                LocalMap::Unitary((h * c(0.0, -t)).exp())
            }
        } else {
            LocalMap::Channel(lindblad_channel(&h, &jumps, t))
        }
    }

    fn pair_map(&self, sub: usize, delta: f64, t: f64) -> Result<Arc<LocalMap>> {
        let key = MapKey::Pair {
            sub,
            delta: delta.to_bits(),
            t: t.to_bits(),
        };
        self.cached(key, || {
            let trunc = self.layout.factors()[sub];
            let local = SpaceLayout::new(vec![TRANSMON_DIM, trunc])?;
            let sm = embed(&sigma_minus(), 0, &local);
            let a = embed(&annihilation(trunc), 1, &local);
            let sp = sm.adjoint();
            let g = self.device.g_angular();
            let h = &sp * &sm * cr(delta) + (&sp * &a + &sm * a.adjoint()) * cr(g);
            let mut jumps: Vec<CMatrix> = self
                .transmon_jumps()?
                .iter()
                .map(|j| embed(j, 0, &local))
                .collect();
            jumps.extend(self.mode_jumps(sub)?.iter().map(|j| embed(j, 1, &local)));
            Ok(self.finish(h, jumps, t))
        })
    }

    fn drive_map(&self, axis: [f64; 3], angle: f64, t: f64) -> Result<Arc<LocalMap>> {
        let key = MapKey::Drive {
            axis: axis.map(f64::to_bits),
            angle: angle.to_bits(),
            t: t.to_bits(),
        };
        self.cached(key, || {
            let rate = angle / t;
            let gen = crate::linalg::pauli::x() * cr(axis[0])
                + crate::linalg::pauli::y() * cr(axis[1])
                + crate::linalg::pauli::z() * cr(axis[2]);
            Ok(self.finish(gen * cr(0.5 * rate), self.transmon_jumps()?, t))
        })
    }

    fn transmon_idle(&self, t: f64) -> Result<Arc<LocalMap>> {
        self.cached(MapKey::TransmonIdle { t: t.to_bits() }, || {
            Ok(self.finish(CMatrix::zeros(2, 2), self.transmon_jumps()?, t))
        })
    }

    fn mode_idle(&self, sub: usize, t: f64) -> Result<Arc<LocalMap>> {
        self.cached(MapKey::ModeIdle { sub, t: t.to_bits() }, || {
            let d = self.layout.factors()[sub];
            Ok(self.finish(CMatrix::zeros(d, d), self.mode_jumps(sub)?, t))
        })
    }

    /// Closed-system propagation of a state vector through a schedule without
    /// measurements (decoherence settings are ignored).
    pub fn evolve_pure(&self, segments: &[GateSegment], psi: CVector) -> Result<CVector> {
        let mut psi = psi;
        if psi.len() != self.layout.total_dim() {
            return Err(Error::DimensionMismatch("state vector".into()));
        }
        let g = self.device.g_angular();
        for seg in segments {
            let t = seg.duration;
            let (local, idx, target): (Option<CMatrix>, &SubsystemIndexer, Option<usize>) = match &seg.kind {
                SegmentKind::Measure { .. } | SegmentKind::FeedbackReset => {
                    return Err(Error::Unsupported(
                        "measurements in closed-system propagation".into(),
                    ))
                }
                SegmentKind::VirtualZ { theta } => (Some(z_phase(*theta)), &self.transmon_idx, None),
                SegmentKind::Idle => (None, &self.transmon_idx, None),
                SegmentKind::Rotation { axis, angle } => {
                    (Some(rotation_matrix(*axis, *angle)), &self.transmon_idx, None)
                }
                SegmentKind::ResonantSwap { mode } | SegmentKind::ResetSwap { mode } => {
                    let sub = self.subsystem_of(*mode)?;
                    let h = crate::dynamics::offres_hamiltonian(self.layout.factors()[sub], 0.0, g)?;
                    (Some((h.into_matrix() * c(0.0, -t)).exp()), &self.pair_idx[sub - 1], Some(sub))
                }
                SegmentKind::OffresInteraction { mode, delta } => {
                    let sub = self.subsystem_of(*mode)?;
                    let h = crate::dynamics::offres_hamiltonian(self.layout.factors()[sub], *delta, g)?;
                    (Some((h.into_matrix() * c(0.0, -t)).exp()), &self.pair_idx[sub - 1], Some(sub))
                }
            };
            if let Some(u) = local {
                psi = apply_local_vec(&psi, &u, idx);
            }
            if t > 0.0 {
                for (i, ph) in self.frame_phases(target, t).into_iter().enumerate() {
                    psi[i] *= C64::from_polar(1.0, -ph);
                }
            }
        }
        Ok(psi)
    }
}

enum MapKind {
    Pair(f64),
    Drive([f64; 3], f64),
    Idle,
}

fn check_dim(branches: &[Branch], d: usize) -> Result<()> {
    for b in branches {
        if b.rho.nrows() != d || b.rho.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "state is {}x{}, executor space is {d}",
                b.rho.nrows(),
                b.rho.ncols()
            )));
        }
    }
    Ok(())
}

fn apply_diagonal_phases(rho: &mut CMatrix, phases: &[f64]) {
    if phases.iter().all(|p| *p == 0.0) {
        return;
    }
    let f: Vec<C64> = phases.iter().map(|p| C64::from_polar(1.0, -p)).collect();
    let n = rho.nrows();
    for j in 0..n {
        let fj = f[j].conj();
        for i in 0..n {
            rho[(i, j)] *= f[i] * fj;
        }
    }
}

pub fn apply_local_vec(psi: &CVector, u: &CMatrix, idx: &SubsystemIndexer) -> CVector {
    let mut out = CVector::zeros(psi.len());
    for r in 0..idx.rest_dim {
        for a in 0..idx.local_dim {
            let mut acc = C64::new(0.0, 0.0);
            for b in 0..idx.local_dim {
                acc += u[(a, b)] * psi[idx.full(b, r)];
            }
            out[idx.full(a, r)] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::DecoherenceMode;
    use crate::dynamics::{evolve_lindblad, HamiltonianSegment};
    use crate::gates::{cphi_segments, solve_cphi, swap_segment};
    use crate::linalg::{max_abs_diff, DensityMatrix};
    use std::f64::consts::PI;

    fn dev() -> DeviceParams {
        DeviceParams::default_device()
    }

    #[test]
    fn double_swap_restores_excitation() {
        let d = dev();
        let exec = Executor::new(d.clone(), vec![0], DecoherenceModel::ideal()).unwrap();
        let rho = exec.basis_state(&[1, 0]).unwrap();
        let g = d.g_angular();
        let one = exec.run_unconditional(&[swap_segment(0, g)], rho.clone()).unwrap();
        assert!((one[(1, 1)].re - 1.0).abs() < 1e-12);
        let two = exec
            .run_unconditional(&[swap_segment(0, g), swap_segment(0, g)], rho)
            .unwrap();
        assert!((exec.transmon_excited(&two) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_rk4_on_rest_frame_hamiltonian() {
        let d = dev();
        let model = DecoherenceModel::full();
        let exec = Executor::new(d.clone(), vec![0, 1], model).unwrap();
        let p = solve_cphi(PI / 2.0, d.g_angular()).unwrap();
        let s = 0.5f64.sqrt();
        let plus = CVector::from_vec(vec![cr(s), cr(s)]);
        let m0 = CVector::from_vec(vec![cr(s), cr(0.0), cr(s)]);
        let m1 = CVector::from_vec(vec![cr(0.6), cr(0.8), cr(0.0)]);
        let rho0 = exec.product_state(&plus, &[m0, m1]).unwrap();
        let t = 0.1e-6;
        let segs = vec![crate::gates::offres_segment(0, p.delta, t)];
        let fast = exec.run_unconditional(&segs, rho0.clone()).unwrap();

        let transmon_hz = d.modes[0].frequency + p.delta / (2.0 * PI);
        let h = crate::device::build_jc_hamiltonian(&d, &[0, 1], transmon_hz).unwrap();
        // only mode 0 couples during this segment
        let layout = exec.layout().clone();
        let sm = embed(&sigma_minus(), 0, &layout);
        let a1 = embed(&annihilation(3), 2, &layout);
        let g = d.g_angular();
        let hm = h.drift.matrix() - (&sm.adjoint() * &a1 + &sm * a1.adjoint()) * cr(g);
        let ops = crate::device::collapse_operators_with(&d, &[0, 1], model).unwrap();
        let rk = evolve_lindblad(
            &[HamiltonianSegment { hamiltonian: hm, duration: t }],
            &ops,
            &DensityMatrix::new(layout, rho0).unwrap(),
            2e-11,
            &[],
        )
        .unwrap();
        assert!(max_abs_diff(&fast, rk.final_state.matrix()) < 1e-7);
    }

    #[test]
    fn pure_and_density_paths_agree() {
        let d = dev();
        let exec = Executor::new(d.clone(), vec![0, 2], DecoherenceModel::ideal()).unwrap();
        let g = d.g_angular();
        let p = solve_cphi(PI, g).unwrap();
        let mut segs = vec![crate::gates::equatorial_rotation(0.3, 1.1, 0.0), swap_segment(2, g)];
        segs.push(crate::gates::equatorial_rotation(0.0, PI / 2.0, 0.0));
        segs.extend(cphi_segments(2, &p));
        segs.push(crate::gates::idle_segment(1e-6));
        let psi0 = exec
            .product_vector(
                &CVector::from_vec(vec![cr(1.0), cr(0.0)]),
                &[
                    CVector::from_vec(vec![cr(0.8), cr(0.6), cr(0.0)]),
                    CVector::from_vec(vec![cr(1.0), cr(0.0), cr(0.0)]),
                ],
            )
            .unwrap();
        let psi = exec.evolve_pure(&segs, psi0.clone()).unwrap();
        let rho = exec.run_unconditional(&segs, &psi0 * psi0.adjoint()).unwrap();
        assert!(max_abs_diff(&rho, &(&psi * psi.adjoint())) < 1e-10);
    }

    #[test]
    fn measurement_branches_sum_to_one() {
        let d = dev();
        let exec = Executor::new(d, vec![0], DecoherenceModel::full()).unwrap();
        let s = 0.5f64.sqrt();
        let rho = exec
            .product_state(
                &CVector::from_vec(vec![cr(s), cr(s)]),
                &[CVector::from_vec(vec![cr(1.0), cr(0.0), cr(0.0)])],
            )
            .unwrap();
        let segs = vec![
            crate::gates::measure_segment(crate::dynamics::Axis::X, 0.0, 0.0),
            crate::gates::measure_segment(crate::dynamics::Axis::Z, 0.0, 7e-6),
        ];
        let branches = exec.run(&segs, rho).unwrap();
        let total: f64 = branches.iter().map(Branch::probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let p0: f64 = branches
            .iter()
            .filter(|b| b.outcomes[0] == 0)
            .map(Branch::probability)
            .sum();
        assert!((p0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn idle_decay_on_transmon() {
        let d = dev();
        let mut model = DecoherenceModel::full();
        model.mode = DecoherenceMode::InfinitePhonon;
        let exec = Executor::new(d.clone(), vec![0], model).unwrap();
        let rho = exec.basis_state(&[1, 0]).unwrap();
        let out = exec
            .run_unconditional(&[crate::gates::idle_segment(d.transmon_t1)], rho)
            .unwrap();
        assert!((exec.transmon_excited(&out) - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_and_duplicate_modes() {
        assert!(Executor::new(dev(), vec![0, 0], DecoherenceModel::ideal()).is_err());
        assert!(Executor::new(dev(), vec![7], DecoherenceModel::ideal()).is_err());
        let exec = Executor::new(dev(), vec![0], DecoherenceModel::ideal()).unwrap();
        let rho = exec.basis_state(&[0, 0]).unwrap();
        assert!(exec.run(&[swap_segment(1, 1e6)], rho).is_err());
    }
}
