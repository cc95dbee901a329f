//! Closed-form Jaynes-Cummings propagators, numerical integrators and
//! projective measurement.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::device::{annihilation, embed, number, sigma_minus, CollapseOp, TRANSMON_DIM};
use crate::error::{Error, Result};
use crate::linalg::{
    c, cr, hermitian_deviation, hermitian_eigenvalues, pauli, trace, CMatrix, DensityMatrix,
    OperatorMatrix, SpaceLayout, C64,
};

/// `U_n(t)` on `(|e, n-1>, |g, n>)` including the `exp(-i delta t / 2)`
/// prefactor.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticBlockUnitary {
    pub n: usize,
    pub delta: f64,
    pub g: f64,
    pub t: f64,
    pub entries: [[C64; 2]; 2],
}

impl AnalyticBlockUnitary {
    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_row_slice(
            2,
            2,
            &[
                self.entries[0][0],
                self.entries[0][1],
                self.entries[1][0],
                self.entries[1][1],
            ],
        )
    }

    /// Rabi frequency `omega_n = sqrt(delta^2 + 4 g^2 n)`.
    pub fn omega(&self) -> f64 {
        block_frequency(self.n, self.delta, self.g)
    }
}

pub fn block_frequency(n: usize, delta: f64, g: f64) -> f64 {
    (delta * delta + 4.0 * g * g * n as f64).sqrt()
}

/// Off-resonant block unitary for excitation number `n >= 1`.
pub fn analytic_block(n: usize, delta: f64, g: f64, t: f64) -> AnalyticBlockUnitary {
    assert!(n >= 1, "excitation index starts at 1");
    let w = block_frequency(n, delta, g);
    let half = 0.5 * w * t;
    let (s, co) = half.sin_cos();
    let pref = C64::from_polar(1.0, -0.5 * delta * t);
    let (ratio_d, ratio_g) = if w > 0.0 {
        (delta / w, 2.0 * g * (n as f64).sqrt() / w)
    } else {
        (0.0, 0.0)
    };
    let x = c(co, -ratio_d * s);
    let y = c(0.0, -ratio_g * s);
    AnalyticBlockUnitary {
        n,
        delta,
        g,
        t,
        entries: [[pref * x, pref * y], [pref * y, pref * x.conj()]],
    }
}

/// `delta n_q + g (s+ a + s- a^dag)` on a transmon (x) single-mode layout.
pub fn offres_hamiltonian(truncation: usize, delta: f64, g: f64) -> Result<OperatorMatrix> {
    let layout = SpaceLayout::new(vec![TRANSMON_DIM, truncation])?;
    let sm = embed(&sigma_minus(), 0, &layout);
    let a = embed(&annihilation(truncation), 1, &layout);
    let sp = sm.adjoint();
    let h = &sp * &sm * cr(delta) + (&sp * &a + &sm * a.adjoint()) * cr(g);
    OperatorMatrix::new(layout, h)
}

/// Block-diagonal off-resonant propagator on a transmon (x) single-mode
/// layout. `|g0>` carries no phase; blocks `n = 1..=max_n` are the analytic
/// `U_n(t)`. The unpaired top state `|e, N-1>` evolves with `exp(-i delta t)`.
pub fn assemble_offres_unitary(
    layout: &SpaceLayout,
    delta: f64,
    g: f64,
    t: f64,
    max_n: usize,
) -> Result<OperatorMatrix> {
    if layout.len() != 2 || layout.factors()[0] != TRANSMON_DIM {
        return Err(Error::DimensionMismatch(
            "off-resonant propagator needs a transmon and exactly one mode".into(),
        ));
    }
    let trunc = layout.factors()[1];
    if max_n + 1 > trunc {
        return Err(Error::TruncationTooSmall {
            truncation: trunc,
            needed: max_n + 1,
        });
    }
    let d = layout.total_dim();
    let mut u = CMatrix::identity(d, d);
    for n in 1..=max_n {
        let b = analytic_block(n, delta, g, t);
        let e = layout.index_of(&[1, n - 1]);
        let gn = layout.index_of(&[0, n]);
        u[(e, e)] = b.entries[0][0];
        u[(e, gn)] = b.entries[0][1];
        u[(gn, e)] = b.entries[1][0];
        u[(gn, gn)] = b.entries[1][1];
    }
    if max_n == trunc - 1 {
        let top = layout.index_of(&[1, trunc - 1]);
        u[(top, top)] = C64::from_polar(1.0, -delta * t);
    }
    OperatorMatrix::new(layout.clone(), u)
}

/// A constant Hamiltonian applied for `duration` seconds.
#[derive(Debug, Clone)]
pub struct HamiltonianSegment {
    pub hamiltonian: CMatrix,
    pub duration: f64,
}

#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub final_state: DensityMatrix,
    /// `(time, expectation values)` sampled at every step.
    pub record: Vec<(f64, Vec<f64>)>,
}

fn expectations(rho: &CMatrix, observables: &[CMatrix]) -> Vec<f64> {
    observables.iter().map(|o| trace(&(o * rho)).re).collect()
}

fn step_count(duration: f64, dt: f64) -> (usize, f64) {
    if duration <= 0.0 {
        return (0, 0.0);
    }
    let n = (duration / dt - 1e-9).ceil().max(1.0) as usize;
    (n, duration / n as f64)
}

/// Exact unitary propagation of piecewise-constant Hamiltonians, sampled
/// every `dt` (each segment is split into equal steps no longer than `dt`).
pub fn evolve_unitary(
    segments: &[HamiltonianSegment],
    rho: &DensityMatrix,
    dt: f64,
    observables: &[CMatrix],
) -> Result<PropagationResult> {
    if !(dt > 0.0) {
        return Err(Error::StepGuard { dt, limit: 0.0 });
    }
    let d = rho.layout().total_dim();
    let mut state = rho.matrix().clone();
    let mut t = 0.0;
    let mut record = vec![(t, expectations(&state, observables))];
    for seg in segments {
        check_square(&seg.hamiltonian, d)?;
        let dev = hermitian_deviation(&seg.hamiltonian);
        let scale = seg.hamiltonian.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if dev > 1e-12 * scale {
            return Err(Error::NotHermitian(dev));
        }
        let (n, h) = step_count(seg.duration, dt);
        if n == 0 {
            continue;
        }
        let u = (&seg.hamiltonian * c(0.0, -h)).exp();
        let ud = u.adjoint();
        for _ in 0..n {
            state = &u * &state * &ud;
            t += h;
            record.push((t, expectations(&state, observables)));
        }
    }
    Ok(PropagationResult {
        final_state: DensityMatrix::new_unchecked(rho.layout().clone(), state)?,
        record,
    })
}

fn check_square(m: &CMatrix, d: usize) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{}, state is {d}x{d}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn lindblad_rhs(h: &CMatrix, jumps: &[(CMatrix, CMatrix)], rho: &CMatrix) -> CMatrix {
    let hr = h * rho;
    let mut out = (&hr - hr.adjoint()) * c(0.0, -1.0);
    for (l, ldl) in jumps {
        let lr = l * rho;
        out += &lr * l.adjoint();
        let anti = ldl * rho;
        out -= (&anti + anti.adjoint()) * cr(0.5);
    }
    out
}

/// Largest allowed RK4 step: one hundredth of the fastest period.
pub fn rk4_step_limit(h: &CMatrix, jumps: &[CMatrix]) -> f64 {
    let ev = hermitian_eigenvalues(h);
    let spread = ev.last().unwrap() - ev.first().unwrap();
    let decay: f64 = jumps
        .iter()
        .map(|l| (l.adjoint() * l).iter().map(|z| z.norm()).fold(0.0, f64::max))
        .sum();
    let fastest = spread.max(decay);
    if fastest == 0.0 {
        f64::INFINITY
    } else {
        0.01 * 2.0 * std::f64::consts::PI / fastest
    }
}

/// Fixed-step RK4 integration of the Lindblad master equation.
pub fn evolve_lindblad(
    segments: &[HamiltonianSegment],
    collapse: &[CollapseOp],
    rho: &DensityMatrix,
    dt: f64,
    observables: &[CMatrix],
) -> Result<PropagationResult> {
    let jumps: Vec<CMatrix> = collapse.iter().map(CollapseOp::jump).collect();
    evolve_lindblad_jumps(segments, &jumps, rho, dt, observables)
}

/// As [`evolve_lindblad`] with explicit (rate-scaled) jump operators.
pub fn evolve_lindblad_jumps(
    segments: &[HamiltonianSegment],
    jumps: &[CMatrix],
    rho: &DensityMatrix,
    dt: f64,
    observables: &[CMatrix],
) -> Result<PropagationResult> {
    let d = rho.layout().total_dim();
    if !(dt > 0.0) {
        return Err(Error::StepGuard { dt, limit: 0.0 });
    }
    for l in jumps {
        check_square(l, d)?;
    }
    let pairs: Vec<(CMatrix, CMatrix)> = jumps
        .iter()
        .map(|l| (l.clone(), l.adjoint() * l))
        .collect();
    let mut state = rho.matrix().clone();
    let mut t = 0.0;
    let mut record = vec![(t, expectations(&state, observables))];
    for seg in segments {
        check_square(&seg.hamiltonian, d)?;
        let limit = rk4_step_limit(&seg.hamiltonian, jumps);
        if dt > limit {
            return Err(Error::StepGuard { dt, limit });
        }
        let (n, h) = step_count(seg.duration, dt);
        let hh = &seg.hamiltonian;
        for _ in 0..n {
            let k1 = lindblad_rhs(hh, &pairs, &state);
            let k2 = lindblad_rhs(hh, &pairs, &(&state + &k1 * cr(0.5 * h)));
            let k3 = lindblad_rhs(hh, &pairs, &(&state + &k2 * cr(0.5 * h)));
            let k4 = lindblad_rhs(hh, &pairs, &(&state + &k3 * cr(h)));
            state += (k1 + k2 * cr(2.0) + k3 * cr(2.0) + k4) * cr(h / 6.0);
            t += h;
            record.push((t, expectations(&state, observables)));
        }
    }
    Ok(PropagationResult {
        final_state: DensityMatrix::new_unchecked(rho.layout().clone(), state)?,
        record,
    })
}

/// Generator of `rho -> -i[H, rho] + sum_k D[L_k] rho` in column-stacked form.
pub fn lindbladian(h: &CMatrix, jumps: &[CMatrix]) -> CMatrix {
    let d = h.nrows();
    let id = CMatrix::identity(d, d);
    let mut out = (id.kronecker(h) - h.transpose().kronecker(&id)) * c(0.0, -1.0);
    for l in jumps {
        let ldl = l.adjoint() * l;
        out += l.conjugate().kronecker(l);
        out -= (id.kronecker(&ldl) + ldl.transpose().kronecker(&id)) * cr(0.5);
    }
    out
}

/// Exact channel of a constant Lindbladian over `t`.
pub fn lindblad_channel(h: &CMatrix, jumps: &[CMatrix], t: f64) -> CMatrix {
    (lindbladian(h, jumps) * cr(t)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn pauli(self) -> CMatrix {
        match self {
            Axis::X => pauli::x(),
            Axis::Y => pauli::y(),
            Axis::Z => pauli::z(),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Result<Axis> {
        Axis::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::InvalidAxis(format!("axis index {i}")))
    }

    /// Rotation taking this axis' +1 eigenstate to `|0>`.
    pub fn to_z_rotation(self) -> CMatrix {
        use std::f64::consts::FRAC_PI_2;
        match self {
            Axis::X => rotation_matrix([0.0, 1.0, 0.0], -FRAC_PI_2),
            Axis::Y => rotation_matrix([1.0, 0.0, 0.0], FRAC_PI_2),
            Axis::Z => CMatrix::identity(2, 2),
        }
    }

    pub fn label(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::InvalidAxis(other.to_string())),
        }
    }
}

/// `exp(-i angle/2 n.sigma)` for a unit axis `n`.
pub fn rotation_matrix(axis: [f64; 3], angle: f64) -> CMatrix {
    let (s, co) = (0.5 * angle).sin_cos();
    let gen = pauli::x() * cr(axis[0]) + pauli::y() * cr(axis[1]) + pauli::z() * cr(axis[2]);
    CMatrix::identity(2, 2) * cr(co) - gen * c(0.0, s)
}

/// `diag(1, e^{i phi})`: the frame relation between stored and logical qubits.
pub fn phase_gate(phi: f64) -> CMatrix {
    let mut m = CMatrix::identity(2, 2);
    m[(1, 1)] = C64::from_polar(1.0, phi);
    m
}

#[derive(Debug, Clone)]
pub struct MeasurementResult {
    /// `[P(+1), P(-1)]` along the axis.
    pub probabilities: [f64; 2],
    /// Normalized conditional states; `None` for zero-probability outcomes.
    pub post_states: [Option<DensityMatrix>; 2],
}

/// Ideal projective measurement of the transmon (subsystem 0) along an axis.
pub fn projective_measure(
    rho: &DensityMatrix,
    subsystem: usize,
    axis: Axis,
) -> Result<MeasurementResult> {
    if subsystem != 0 || rho.layout().factors()[0] != TRANSMON_DIM {
        return Err(Error::Unsupported(format!(
            "only the transmon (subsystem 0) is read out, got subsystem {subsystem}"
        )));
    }
    let layout = rho.layout().clone();
    let sigma = axis.pauli();
    let id = CMatrix::identity(2, 2);
    let mut probabilities = [0.0; 2];
    let mut post_states: [Option<DensityMatrix>; 2] = [None, None];
    for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
        let proj = (&id + &sigma * cr(sign)) * cr(0.5);
        let p = embed(&proj, 0, &layout);
        let out = &p * rho.matrix() * &p;
        let prob = trace(&out).re.max(0.0);
        probabilities[k] = prob;
        if prob > 1e-15 {
            post_states[k] = Some(DensityMatrix::new_unchecked(layout.clone(), out / cr(prob))?);
        }
    }
    Ok(MeasurementResult {
        probabilities,
        post_states,
    })
}

/// Total excitation number operator on a layout.
pub fn excitation_number(layout: &SpaceLayout) -> CMatrix {
    let d = layout.total_dim();
    let mut n = CMatrix::zeros(d, d);
    for (s, &dim) in layout.factors().iter().enumerate() {
        n += embed(&number(dim), s, layout);
    }
    n
}

pub fn basis_vector(dim: usize, index: usize) -> DVector<C64> {
    let mut v = DVector::zeros(dim);
    v[index] = cr(1.0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{local_jump_operators, DephasingConvention};
    use crate::linalg::max_abs_diff;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const G: f64 = 2.0 * PI * 296e3;

    #[test]
    fn block_at_zero_time_is_identity() {
        let b = analytic_block(1, 0.3 * G, G, 0.0);
        assert!(max_abs_diff(&b.matrix(), &CMatrix::identity(2, 2)) < 1e-15);
    }

    #[test]
    fn resonant_block_swaps_at_quarter_period() {
        let b = analytic_block(1, 0.0, G, PI / (2.0 * G));
        assert!((b.entries[0][1].norm() - 1.0).abs() < 1e-12);
        assert!(b.entries[0][0].norm() < 1e-12);
    }

    #[test]
    fn second_block_returns_after_full_period() {
        let delta = -1.3 * G;
        let w2 = block_frequency(2, delta, G);
        let b = analytic_block(2, delta, G, 2.0 * PI / w2);
        assert!(b.entries[0][1].norm() < 1e-12);
        assert!((b.entries[0][0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn blocks_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let n = rng.random_range(1..4);
            let b = analytic_block(n, rng.random_range(-5.0..5.0) * G, G, rng.random_range(0.0..5.0) / G);
            let m = b.matrix();
            assert!(max_abs_diff(&(m.adjoint() * &m), &CMatrix::identity(2, 2)) < 1e-12);
        }
    }

    #[test]
    fn assembled_matches_blocks_and_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let layout = SpaceLayout::new(vec![2, 3]).unwrap();
        for _ in 0..10 {
            let delta = rng.random_range(-5.0..5.0) * G;
            let t = rng.random_range(0.0..5.0) / G;
            let u = assemble_offres_unitary(&layout, delta, G, t, 2).unwrap();
            for n in 1..=2 {
                let b = analytic_block(n, delta, G, t);
                let e = layout.index_of(&[1, n - 1]);
                let gn = layout.index_of(&[0, n]);
                assert_eq!(u.matrix()[(e, gn)], b.entries[0][1]);
                assert_eq!(u.matrix()[(gn, gn)], b.entries[1][1]);
            }
            let h = offres_hamiltonian(3, delta, G).unwrap();
            let direct = (h.matrix() * c(0.0, -t)).exp();
            assert!(max_abs_diff(u.matrix(), &direct) < 1e-9);
        }
        let t0 = assemble_offres_unitary(&layout, 0.4 * G, G, 0.0, 2).unwrap();
        assert!(max_abs_diff(t0.matrix(), &CMatrix::identity(6, 6)) < 1e-15);
        assert!(assemble_offres_unitary(&layout, G, G, 1e-6, 3).is_err());
    }

    fn ket(layout: &SpaceLayout, digits: &[usize]) -> DensityMatrix {
        DensityMatrix::basis(layout.clone(), digits).unwrap()
    }

    #[test]
    fn unitary_evolution_examples() {
        let layout = SpaceLayout::new(vec![2, 3]).unwrap();
        let rho = ket(&layout, &[1, 0]);
        let zero = HamiltonianSegment {
            hamiltonian: CMatrix::zeros(6, 6),
            duration: 1e-6,
        };
        let r = evolve_unitary(&[zero], &rho, 1e-8, &[]).unwrap();
        assert!(max_abs_diff(r.final_state.matrix(), rho.matrix()) < 1e-15);

        let h = offres_hamiltonian(3, 0.0, G).unwrap().into_matrix();
        let seg = HamiltonianSegment {
            hamiltonian: h.clone(),
            duration: PI / (2.0 * G),
        };
        let r = evolve_unitary(&[seg], &rho, 1e-9, &[]).unwrap();
        let g1 = layout.index_of(&[0, 1]);
        assert!((r.final_state.population(g1) - 1.0).abs() < 1e-10);

        let split = [
            HamiltonianSegment { hamiltonian: h.clone(), duration: 0.3e-6 },
            HamiltonianSegment { hamiltonian: h.clone(), duration: 0.5e-6 },
        ];
        let whole = [HamiltonianSegment { hamiltonian: h, duration: 0.8e-6 }];
        let a = evolve_unitary(&split, &rho, 1e-8, &[]).unwrap();
        let b = evolve_unitary(&whole, &rho, 1e-8, &[]).unwrap();
        assert!(max_abs_diff(a.final_state.matrix(), b.final_state.matrix()) < 1e-10);

        let bad = HamiltonianSegment {
            hamiltonian: CMatrix::from_fn(6, 6, |i, j| if i < j { cr(1.0) } else { cr(0.0) }),
            duration: 1e-7,
        };
        assert!(matches!(
            evolve_unitary(&[bad], &rho, 1e-8, &[]),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn lindblad_closed_limit_matches_unitary() {
        let layout = SpaceLayout::new(vec![2, 3]).unwrap();
        let rho = ket(&layout, &[1, 1]);
        let h = offres_hamiltonian(3, -1.6 * G, G).unwrap().into_matrix();
        let seg = [HamiltonianSegment { hamiltonian: h, duration: 1.0e-6 }];
        let u = evolve_unitary(&seg, &rho, 1e-9, &[]).unwrap();
        let l = evolve_lindblad_jumps(&seg, &[], &rho, 1e-9, &[]).unwrap();
        assert!(max_abs_diff(u.final_state.matrix(), l.final_state.matrix()) < 1e-8);
    }

    fn transmon_jumps(t1: f64, t2: f64) -> Vec<CMatrix> {
        local_jump_operators(2, t1, t2, DephasingConvention::Standard).unwrap()
    }

    #[test]
    fn lindblad_decay_and_dephasing() {
        let (t1, t2) = (30e-6, 23e-6);
        let layout = SpaceLayout::qubits(1);
        let jumps = transmon_jumps(t1, t2);
        let rho = ket(&layout, &[1]);
        let idle = [HamiltonianSegment { hamiltonian: CMatrix::zeros(2, 2), duration: t1 }];
        let r = evolve_lindblad_jumps(&idle, &jumps, &rho, 1e-8, &[]).unwrap();
        assert!((r.final_state.population(1) - (-1.0f64).exp()).abs() < 1e-4);

        let plus = DensityMatrix::from_pure(
            layout.clone(),
            &DVector::from_vec(vec![cr(1.0), cr(1.0)]),
        )
        .unwrap();
        let t = 10e-6;
        let idle = [HamiltonianSegment { hamiltonian: CMatrix::zeros(2, 2), duration: t }];
        let r = evolve_lindblad_jumps(&idle, &jumps, &plus, 1e-8, &[]).unwrap();
        let coh = r.final_state.matrix()[(0, 1)].norm();
        assert!((coh - 0.5 * (-t / t2).exp()).abs() < 1e-6);
        assert!((r.final_state.trace().re - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rk4_matches_exact_channel() {
        let layout = SpaceLayout::new(vec![2, 3]).unwrap();
        let rho = ket(&layout, &[1, 0]);
        let h = offres_hamiltonian(3, 0.8 * G, G).unwrap().into_matrix();
        let mut jumps: Vec<CMatrix> = transmon_jumps(30e-6, 23e-6)
            .iter()
            .map(|j| embed(j, 0, &layout))
            .collect();
        for j in local_jump_operators(3, 64e-6, 127e-6, DephasingConvention::Standard).unwrap() {
            jumps.push(embed(&j, 1, &layout));
        }
        let t = 1.3e-6;
        let seg = [HamiltonianSegment { hamiltonian: h.clone(), duration: t }];
        let rk = evolve_lindblad_jumps(&seg, &jumps, &rho, 2e-9, &[]).unwrap();
        let exact = crate::linalg::devectorize(
            &(lindblad_channel(&h, &jumps, t) * crate::linalg::vectorize(rho.matrix())),
        )
        .unwrap();
        assert!(max_abs_diff(rk.final_state.matrix(), &exact) < 1e-9);
        assert!((rk.final_state.trace().re - 1.0).abs() < 1e-8);
        assert!(hermitian_deviation(rk.final_state.matrix()) < 1e-10);
    }

    #[test]
    fn step_guard_rejects_coarse_steps() {
        let layout = SpaceLayout::new(vec![2, 3]).unwrap();
        let rho = ket(&layout, &[1, 0]);
        let h = offres_hamiltonian(3, 5.0 * G, G).unwrap().into_matrix();
        let seg = [HamiltonianSegment { hamiltonian: h, duration: 1e-6 }];
        assert!(matches!(
            evolve_lindblad_jumps(&seg, &[], &rho, 1e-7, &[]),
            Err(Error::StepGuard { .. })
        ));
    }

    #[test]
    fn measurement_examples() {
        let l1 = SpaceLayout::qubits(1);
        let zero = ket(&l1, &[0]);
        let m = projective_measure(&zero, 0, Axis::Z).unwrap();
        assert_eq!(m.probabilities, [1.0, 0.0]);
        assert!(m.post_states[1].is_none());

        let plus = DensityMatrix::from_pure(l1, &DVector::from_vec(vec![cr(1.0), cr(1.0)])).unwrap();
        let m = projective_measure(&plus, 0, Axis::Z).unwrap();
        assert!((m.probabilities[0] - 0.5).abs() < 1e-15);
        assert!((m.probabilities[1] - 0.5).abs() < 1e-15);
        assert!((m.post_states[0].as_ref().unwrap().population(0) - 1.0).abs() < 1e-15);
        assert!((m.post_states[1].as_ref().unwrap().population(1) - 1.0).abs() < 1e-15);

        let l2 = SpaceLayout::new(vec![2, 3]).unwrap();
        let mut psi = DVector::zeros(6);
        psi[l2.index_of(&[0, 0])] = cr(1.0);
        psi[l2.index_of(&[1, 1])] = cr(1.0);
        let bell = DensityMatrix::from_pure(l2, &psi).unwrap();
        let m = projective_measure(&bell, 0, Axis::Z).unwrap();
        let ph0 = crate::linalg::partial_trace(m.post_states[0].as_ref().unwrap(), &[1]).unwrap();
        let ph1 = crate::linalg::partial_trace(m.post_states[1].as_ref().unwrap(), &[1]).unwrap();
        assert!((ph0.population(0) - 1.0).abs() < 1e-15);
        assert!((ph1.population(1) - 1.0).abs() < 1e-15);
        assert!(projective_measure(&bell, 1, Axis::Z).is_err());
        assert!("w".parse::<Axis>().is_err());
    }

    #[test]
    fn to_z_rotations_map_eigenstates_to_ground() {
        let s = 0.5f64.sqrt();
        let plus = DVector::from_vec(vec![cr(s), cr(s)]);
        let plus_i = DVector::from_vec(vec![cr(s), c(0.0, s)]);
        for (axis, v) in [(Axis::X, plus), (Axis::Y, plus_i)] {
            let out = axis.to_z_rotation() * v;
            assert!((out[0].norm() - 1.0).abs() < 1e-12, "{axis:?}");
        }
    }

    #[test]
    fn unitary_evolution_conserves_excitations() {
        let layout = SpaceLayout::new(vec![2, 3]).unwrap();
        let mut psi = DVector::zeros(6);
        psi[layout.index_of(&[1, 0])] = cr(0.6);
        psi[layout.index_of(&[1, 1])] = cr(0.8);
        let rho = DensityMatrix::from_pure(layout.clone(), &psi).unwrap();
        let n = excitation_number(&layout);
        let h = offres_hamiltonian(3, -2.0 * G, G).unwrap().into_matrix();
        let seg = [HamiltonianSegment { hamiltonian: h, duration: 2e-6 }];
        let r = evolve_unitary(&seg, &rho, 1e-8, &[n.clone()]).unwrap();
        let n0 = r.record[0].1[0];
        for (_, v) in &r.record {
            assert!((v[0] - n0).abs() < 1e-10);
        }
    }
}
