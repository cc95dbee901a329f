//! Pauli-basis state tomography, superoperator process tomography, chi
//! matrices, gate fidelities and readout correction.
//!
//! Multi-qubit quantities are ordered by tensor factor: factor 0 is the most
//! significant bit of a basis index and the first character of a label.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::analysis::expfit::exp_fit;
use crate::dynamics::Axis;
use crate::error::{Error, Result};
use crate::linalg::{
    c, cr, devectorize, kron_all, vectorize, CMatrix, CVector, DensityMatrix, SpaceLayout,
    SuperOperator, C64,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrepLabel {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "i")]
    PlusI,
}

impl PrepLabel {
    pub const ALL: [PrepLabel; 4] = [PrepLabel::Zero, PrepLabel::One, PrepLabel::Plus, PrepLabel::PlusI];

    pub fn state(self) -> CVector {
        let s = 0.5f64.sqrt();
        match self {
            PrepLabel::Zero => CVector::from_vec(vec![cr(1.0), cr(0.0)]),
            PrepLabel::One => CVector::from_vec(vec![cr(0.0), cr(1.0)]),
            PrepLabel::Plus => CVector::from_vec(vec![cr(s), cr(s)]),
            PrepLabel::PlusI => CVector::from_vec(vec![cr(s), c(0.0, s)]),
        }
    }

    /// Rotation (axis, angle) taking `|0>` to this state up to global phase.
    pub fn rotation(self) -> Option<([f64; 3], f64)> {
        use std::f64::consts::{FRAC_PI_2, PI};
        match self {
            PrepLabel::Zero => None,
            PrepLabel::One => Some(([1.0, 0.0, 0.0], PI)),
            PrepLabel::Plus => Some(([0.0, 1.0, 0.0], FRAC_PI_2)),
            PrepLabel::PlusI => Some(([1.0, 0.0, 0.0], -FRAC_PI_2)),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            PrepLabel::Zero => '0',
            PrepLabel::One => '1',
            PrepLabel::Plus => '+',
            PrepLabel::PlusI => 'i',
        }
    }
}

/// All `4^n` input label combinations, factor 0 varying slowest.
pub fn input_settings(n: usize) -> Vec<Vec<PrepLabel>> {
    (0..4usize.pow(n as u32))
        .map(|k| {
            (0..n)
                .map(|f| PrepLabel::ALL[(k / 4usize.pow((n - 1 - f) as u32)) % 4])
                .collect()
        })
        .collect()
}

/// All `3^n` measurement-axis combinations, factor 0 varying slowest.
pub fn axis_settings(n: usize) -> Vec<Vec<Axis>> {
    (0..3usize.pow(n as u32))
        .map(|k| {
            (0..n)
                .map(|f| Axis::ALL[(k / 3usize.pow((n - 1 - f) as u32)) % 3])
                .collect()
        })
        .collect()
}

/// Product input density matrix.
pub fn input_state(labels: &[PrepLabel]) -> CMatrix {
    let psi = labels
        .iter()
        .fold(CVector::from_element(1, cr(1.0)), |acc, l| acc.kronecker(&l.state()));
    &psi * psi.adjoint()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomographySetting {
    pub input_labels: Vec<PrepLabel>,
    pub measure_axes: Vec<Axis>,
}

/// Outcome distribution for one axis setting. Outcome bit `1` of factor `k`
/// (bit `n-1-k` of the index) means eigenvalue `-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingRecord {
    pub axes: Vec<Axis>,
    pub probabilities: Vec<f64>,
}

/// Exact outcome probabilities of measuring `rho` along `axes`.
pub fn exact_probabilities(rho: &CMatrix, axes: &[Axis]) -> Vec<f64> {
    let u = kron_all(&axes.iter().map(|a| a.to_z_rotation()).collect::<Vec<_>>());
    let r = &u * rho * u.adjoint();
    (0..r.nrows()).map(|i| r[(i, i)].re).collect()
}

fn outcome_bit(outcome: usize, factor: usize, n: usize) -> usize {
    (outcome >> (n - 1 - factor)) & 1
}

fn base4_digits(label: usize, n: usize) -> Vec<usize> {
    (0..n).map(|f| (label / 4usize.pow((n - 1 - f) as u32)) % 4).collect()
}

/// `Tr(sigma rho)` for every Pauli string (base-4 label, factor 0 most
/// significant), averaging over every compatible setting.
pub fn pauli_expectations(records: &[SettingRecord], n: usize) -> Result<Vec<f64>> {
    for want in axis_settings(n) {
        if !records.iter().any(|r| r.axes == want) {
            let s: String = want.iter().map(|a| a.label()).collect();
            return Err(Error::Tomography(format!("missing measurement setting {s}")));
        }
    }
    let dim = 1usize << n;
    for r in records {
        if r.axes.len() != n || r.probabilities.len() != dim {
            return Err(Error::Tomography("record does not match register size".into()));
        }
    }
    let mut out = vec![0.0; 4usize.pow(n as u32)];
    for (label, value) in out.iter_mut().enumerate() {
        let digits = base4_digits(label, n);
        let mut sum = 0.0;
        let mut count = 0usize;
        for r in records {
            let compatible = digits
                .iter()
                .zip(&r.axes)
                .all(|(&d, a)| d == 0 || d == a.index() + 1);
            if !compatible {
                continue;
            }
            let e: f64 = r
                .probabilities
                .iter()
                .enumerate()
                .map(|(o, p)| {
                    let parity: usize = (0..n)
                        .filter(|&f| digits[f] != 0)
                        .map(|f| outcome_bit(o, f, n))
                        .sum();
                    if parity % 2 == 0 {
                        *p
                    } else {
                        -*p
                    }
                })
                .sum();
            sum += e;
            count += 1;
        }
        *value = sum / count as f64;
    }
    Ok(out)
}

/// Linear-inversion state reconstruction `rho = 2^-n sum_sigma c_sigma sigma`.
pub fn state_tomography(records: &[SettingRecord], n: usize) -> Result<DensityMatrix> {
    let coeffs = pauli_expectations(records, n)?;
    let dim = 1usize << n;
    let mut rho = CMatrix::zeros(dim, dim);
    for (label, cval) in coeffs.iter().enumerate() {
        if *cval == 0.0 {
            continue;
        }
        let p = PauliMonomial::new(label, n);
        for r in 0..dim {
            rho[(r, p.col[r])] += p.val[r] * cr(*cval);
        }
    }
    rho /= cr(dim as f64);
    let herm = (&rho + rho.adjoint()) * cr(0.5);
    DensityMatrix::new_unchecked(SpaceLayout::qubits(n), herm)
}

/// Pauli string stored as a monomial matrix: row `r` has its single nonzero
/// entry `val[r]` in column `col[r]`.
#[derive(Debug, Clone)]
struct PauliMonomial {
    col: Vec<usize>,
    val: Vec<C64>,
}

impl PauliMonomial {
    fn new(label: usize, n: usize) -> Self {
        let digits = base4_digits(label, n);
        let dim = 1usize << n;
        let mut col = vec![0; dim];
        let mut val = vec![cr(1.0); dim];
        for r in 0..dim {
            let mut cidx = 0usize;
            let mut v = cr(1.0);
            for (f, &d) in digits.iter().enumerate() {
                let b = outcome_bit(r, f, n);
                let (cb, fv) = match d {
                    0 => (b, cr(1.0)),
                    1 => (b ^ 1, cr(1.0)),
                    2 => (b ^ 1, if b == 0 { c(0.0, -1.0) } else { c(0.0, 1.0) }),
                    _ => (b, if b == 0 { cr(1.0) } else { cr(-1.0) }),
                };
                cidx |= cb << (n - 1 - f);
                v *= fv;
            }
            col[r] = cidx;
            val[r] = v;
        }
        Self { col, val }
    }
}

/// `E = Lambda_out Lambda_in^-1` from `d^2` input/output state pairs.
pub fn process_tomography(inputs: &[CMatrix], outputs: &[CMatrix]) -> Result<SuperOperator> {
    if inputs.is_empty() || inputs.len() != outputs.len() {
        return Err(Error::Tomography("input/output sets differ in size".into()));
    }
    let d = inputs[0].nrows();
    let k = inputs.len();
    if k != d * d {
        return Err(Error::Tomography(format!("need {} input states, got {k}", d * d)));
    }
    let mut lin = CMatrix::zeros(d * d, k);
    let mut lout = CMatrix::zeros(d * d, k);
    for (j, (a, b)) in inputs.iter().zip(outputs).enumerate() {
        if a.nrows() != d || b.nrows() != d {
            return Err(Error::DimensionMismatch("tomography state size".into()));
        }
        lin.set_column(j, &vectorize(a));
        lout.set_column(j, &vectorize(b));
    }
    let sv = lin.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > 1e8 {
        return Err(Error::IllConditioned(cond));
    }
    let inv = lin
        .try_inverse()
        .ok_or(Error::IllConditioned(f64::INFINITY))?;
    SuperOperator::new(lout * inv)
}

fn qubit_count(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!("dimension {dim} is not 2^n")));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Chi matrix in the Pauli basis: `E(rho) = sum_ij chi_ij P_i rho P_j^dag`.
pub fn superop_to_chi(e: &SuperOperator) -> Result<CMatrix> {
    let d = e.dim();
    let n = qubit_count(d)?;
    let m = d * d;
    let paulis: Vec<PauliMonomial> = (0..m).map(|l| PauliMonomial::new(l, n)).collect();
    let s = e.matrix();
    let mut chi = CMatrix::zeros(m, m);
    let norm = 1.0 / (d * d) as f64;
    for j in 0..m {
        let pj = &paulis[j];
        for i in 0..m {
            let pi = &paulis[i];
            let mut acc = C64::new(0.0, 0.0);
            for p in 0..d {
                let row0 = p * d;
                let col0 = pj.col[p] * d;
                let vj = pj.val[p];
                for q in 0..d {
                    acc += vj * pi.val[q].conj() * s[(row0 + q, col0 + pi.col[q])];
                }
            }
            chi[(i, j)] = acc * norm;
        }
    }
    Ok(chi)
}

pub fn chi_to_superop(chi: &CMatrix) -> Result<SuperOperator> {
    let m = chi.nrows();
    let d = (m as f64).sqrt().round() as usize;
    if d * d != m || chi.ncols() != m {
        return Err(Error::DimensionMismatch("chi must be 4^n x 4^n".into()));
    }
    let n = qubit_count(d)?;
    let paulis: Vec<PauliMonomial> = (0..m).map(|l| PauliMonomial::new(l, n)).collect();
    let mut s = CMatrix::zeros(m, m);
    for j in 0..m {
        let pj = &paulis[j];
        for i in 0..m {
            let x = chi[(i, j)];
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            let pi = &paulis[i];
            for p in 0..d {
                let vj = pj.val[p].conj() * x;
                for q in 0..d {
                    s[(p * d + q, pj.col[p] * d + pi.col[q])] += vj * pi.val[q];
                }
            }
        }
    }
    SuperOperator::new(s)
}

/// `(d + Tr(E_ideal^dag E)) / (d (d + 1))` with `E_ideal = conj(U) (x) U`.
pub fn average_gate_fidelity(e: &SuperOperator, target: &CMatrix) -> Result<f64> {
    let d = check_target(e, target)?;
    let ideal = SuperOperator::from_unitary(target);
    let tr = (ideal.matrix().adjoint() * e.matrix()).trace();
    Ok((d as f64 + tr.re) / (d * (d + 1)) as f64)
}

/// Variant with `Tr(E_ideal E)` (no adjoint).
pub fn average_gate_fidelity_daggerless(e: &SuperOperator, target: &CMatrix) -> Result<f64> {
    let d = check_target(e, target)?;
    let ideal = SuperOperator::from_unitary(target);
    let tr = (ideal.matrix() * e.matrix()).trace();
    Ok((d as f64 + tr.re) / (d * (d + 1)) as f64)
}

/// Entanglement (process) fidelity `Tr(E_ideal^dag E) / d^2`.
pub fn process_fidelity(e: &SuperOperator, target: &CMatrix) -> Result<f64> {
    let d = check_target(e, target)?;
    let ideal = SuperOperator::from_unitary(target);
    Ok((ideal.matrix().adjoint() * e.matrix()).trace().re / (d * d) as f64)
}

fn check_target(e: &SuperOperator, target: &CMatrix) -> Result<usize> {
    if target.nrows() != e.dim() || target.ncols() != e.dim() {
        return Err(Error::DimensionMismatch(format!(
            "target is {}x{}, channel acts on dimension {}",
            target.nrows(),
            target.ncols(),
            e.dim()
        )));
    }
    Ok(e.dim())
}

/// `prod_k diag(1, e^{i theta_k})` over tensor factors.
pub fn local_phase_operator(phases: &[f64]) -> CMatrix {
    let n = phases.len();
    let d = 1usize << n;
    CMatrix::from_fn(d, d, |i, j| {
        if i != j {
            return cr(0.0);
        }
        let ph: f64 = (0..n).filter(|&f| outcome_bit(i, f, n) == 1).map(|f| phases[f]).sum();
        C64::from_polar(1.0, ph)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCompensation {
    /// Per tensor factor, in `[0, 2pi)`.
    pub phases: Vec<f64>,
    pub fidelity: f64,
}

/// Maximizes the average gate fidelity against `D(theta) U` over local Z
/// phases with a `32^n` grid followed by exact coordinate ascent.
pub fn compensate_local_phases(e: &SuperOperator, target: &CMatrix) -> Result<PhaseCompensation> {
    let d = check_target(e, target)?;
    let n = qubit_count(d)?;
    let ideal = SuperOperator::from_unitary(target);
    let w = e.matrix() * ideal.matrix().adjoint();
    // bin diag(E E_U^dag) by the per-factor bit differences of (p, q)
    let bins = 3usize.pow(n as u32);
    let mut weights = vec![C64::new(0.0, 0.0); bins];
    let mut shifts: Vec<Vec<i32>> = vec![Vec::new(); bins];
    for (b, s) in shifts.iter_mut().enumerate() {
        *s = (0..n)
            .map(|f| ((b / 3usize.pow((n - 1 - f) as u32)) % 3) as i32 - 1)
            .collect();
    }
    for p in 0..d {
        for q in 0..d {
            let mut b = 0usize;
            for f in 0..n {
                let m = outcome_bit(p, f, n) as i32 - outcome_bit(q, f, n) as i32;
                b = b * 3 + (m + 1) as usize;
            }
            weights[b] += w[(p * d + q, p * d + q)];
        }
    }
    let score = |theta: &[f64]| -> f64 {
        weights
            .iter()
            .zip(&shifts)
            .map(|(wv, m)| {
                let ang: f64 = m.iter().zip(theta).map(|(mi, t)| *mi as f64 * t).sum();
                (wv * C64::from_polar(1.0, ang)).re
            })
            .sum()
    };
    let grid = 32usize;
    let mut best = vec![0.0; n];
    let mut best_score = f64::NEG_INFINITY;
    let mut theta = vec![0.0; n];
    for idx in 0..grid.pow(n as u32) {
        for (f, t) in theta.iter_mut().enumerate() {
            *t = TAU * ((idx / grid.pow((n - 1 - f) as u32)) % grid) as f64 / grid as f64;
        }
        let s = score(&theta);
        if s > best_score {
            best_score = s;
            best.clone_from(&theta);
        }
    }
    for _ in 0..1000 {
        let before = best_score;
        for k in 0..n {
            let mut a = C64::new(0.0, 0.0);
            for (wv, m) in weights.iter().zip(&shifts) {
                if m[k] == 0 {
                    continue;
                }
                let ang: f64 = m
                    .iter()
                    .zip(&best)
                    .enumerate()
                    .filter(|(f, _)| *f != k)
                    .map(|(_, (mi, t))| *mi as f64 * t)
                    .sum();
                let term = wv * C64::from_polar(1.0, ang);
                if m[k] == 1 {
                    a += term;
                } else {
                    a += term.conj();
                }
            }
            if a.norm() > 0.0 {
                best[k] = (-a.arg()).rem_euclid(TAU);
            }
            best_score = score(&best);
        }
        if (best_score - before).abs() < 1e-15 * best_score.abs().max(1.0) {
            break;
        }
    }
    let comp_target = local_phase_operator(&best) * target;
    let fidelity = average_gate_fidelity(e, &comp_target)?;
    Ok(PhaseCompensation {
        phases: best,
        fidelity,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessEstimate {
    pub superop: SuperOperator,
    pub chi: CMatrix,
    pub fidelity: f64,
    pub compensation_phases: Vec<f64>,
}

impl ProcessEstimate {
    pub fn new(superop: SuperOperator, target: &CMatrix) -> Result<Self> {
        let chi = superop_to_chi(&superop)?;
        let comp = compensate_local_phases(&superop, target)?;
        Ok(Self {
            superop,
            chi,
            fidelity: comp.fidelity,
            compensation_phases: comp.phases,
        })
    }
}

/// Readout assignment fidelities for `|g>` and `|e>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MisassignmentModel {
    pub f_g: f64,
    pub f_e: f64,
}

impl MisassignmentModel {
    pub fn new(f_g: f64, f_e: f64) -> Result<Self> {
        let ok = |f: f64| f > 0.5 && f <= 1.0;
        if !ok(f_g) || !ok(f_e) {
            return Err(Error::Tomography(format!(
                "assignment fidelities must lie in (0.5, 1], got {f_g}, {f_e}"
            )));
        }
        Ok(Self { f_g, f_e })
    }

    pub fn measured() -> Self {
        Self { f_g: 0.88, f_e: 0.85 }
    }

    /// Columns are true states, rows recorded outcomes.
    pub fn confusion(&self) -> [[f64; 2]; 2] {
        [[self.f_g, 1.0 - self.f_e], [1.0 - self.f_g, self.f_e]]
    }

    fn inverse(&self) -> [[f64; 2]; 2] {
        let det = self.f_g * self.f_e - (1.0 - self.f_e) * (1.0 - self.f_g);
        [
            [self.f_e / det, -(1.0 - self.f_e) / det],
            [-(1.0 - self.f_g) / det, self.f_g / det],
        ]
    }

    /// Recorded distribution for a true joint distribution over `n` qubits.
    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        apply_per_qubit(p, &self.confusion())
    }

    /// Inverts the confusion map; small negative excursions (below 0.05) are
    /// clipped and the result renormalized.
    pub fn correct(&self, raw: &[f64]) -> Result<Vec<f64>> {
        let mut p = apply_per_qubit(raw, &self.inverse())?;
        let violation = p
            .iter()
            .map(|x| (-x).max(x - 1.0).max(0.0))
            .fold(0.0, f64::max);
        if violation >= 0.05 {
            return Err(Error::InconsistentReadout(violation));
        }
        if violation > 0.0 {
            for x in p.iter_mut() {
                *x = x.clamp(0.0, 1.0);
            }
            let s: f64 = p.iter().sum();
            if s > 0.0 {
                for x in p.iter_mut() {
                    *x /= s;
                }
            }
        }
        Ok(p)
    }
}

fn apply_per_qubit(p: &[f64], m: &[[f64; 2]; 2]) -> Result<Vec<f64>> {
    let n = qubit_count(p.len())?;
    let mut cur = p.to_vec();
    for f in 0..n {
        let shift = n - 1 - f;
        let mut next = vec![0.0; cur.len()];
        for (i, v) in next.iter_mut().enumerate() {
            let b = (i >> shift) & 1;
            let i0 = i & !(1 << shift);
            let i1 = i0 | (1 << shift);
            *v = m[b][0] * cur[i0] + m[b][1] * cur[i1];
        }
        cur = next;
    }
    Ok(cur)
}

/// Multinomial shot counts.
pub fn sample_counts<R: Rng>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let total: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    let mut remaining = shots;
    let mut mass = total;
    let mut out = vec![0u64; probs.len()];
    for (i, p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let p = p.max(0.0);
        if i + 1 == probs.len() || mass <= 0.0 {
            out[i] = remaining;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, q).map(|b| b.sample(rng)).unwrap_or(0);
        out[i] = k;
        remaining -= k;
        mass -= p;
    }
    out
}

/// Readout-level error model and correction applied to one setting.
pub fn shot_estimate<R: Rng>(
    probs: &[f64],
    shots: u64,
    readout: Option<&MisassignmentModel>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let recorded = match readout {
        Some(m) => m.apply(probs)?,
        None => probs.to_vec(),
    };
    let counts = sample_counts(&recorded, shots, rng);
    let freq: Vec<f64> = counts.iter().map(|&k| k as f64 / shots as f64).collect();
    match readout {
        Some(m) => match m.correct(&freq) {
            Ok(p) => Ok(p),
            Err(Error::InconsistentReadout(_)) => {
                let mut p = apply_per_qubit(&freq, &m.inverse())?;
                for x in p.iter_mut() {
                    *x = x.clamp(0.0, 1.0);
                }
                let s: f64 = p.iter().sum();
                Ok(p.into_iter().map(|x| x / s).collect())
            }
            Err(e) => Err(e),
        },
        None => Ok(freq),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepeatedGateFit {
    pub fidelity: f64,
    pub uncertainty: f64,
    pub amplitude: f64,
    pub offset: f64,
}

/// Fits `F(N) = A f^N + B` and returns the per-gate fidelity `f`.
pub fn repeated_gate_fidelity(ns: &[f64], fidelities: &[f64]) -> Result<RepeatedGateFit> {
    let mut distinct = ns.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    distinct.dedup();
    if distinct.len() < 4 || ns.len() != fidelities.len() {
        return Err(Error::Fit("need at least four distinct repetition counts".into()));
    }
    let spread = fidelities.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - fidelities.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread < 1e-12 {
        return Ok(RepeatedGateFit {
            fidelity: 1.0,
            uncertainty: 0.0,
            amplitude: 0.0,
            offset: fidelities[0],
        });
    }
    let fit = exp_fit(ns, fidelities)?;
    Ok(RepeatedGateFit {
        fidelity: fit.p,
        uncertainty: fit.p_sigma,
        amplitude: fit.a,
        offset: fit.c,
    })
}

/// `setting,inputs,axes,p_0,...` rows.
pub fn records_csv(rows: &[(Vec<PrepLabel>, SettingRecord)]) -> String {
    let width = rows.first().map(|r| r.1.probabilities.len()).unwrap_or(0);
    let mut out = String::from("setting,inputs,axes");
    for k in 0..width {
        out.push_str(&format!(",p{k}"));
    }
    out.push('\n');
    for (i, (labels, rec)) in rows.iter().enumerate() {
        let inp: String = labels.iter().map(|l| l.symbol()).collect();
        let ax: String = rec.axes.iter().map(|a| a.label()).collect();
        out.push_str(&format!("{i},{inp},{ax}"));
        for p in &rec.probabilities {
            out.push_str(&format!(",{p:.12}"));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiExport {
    pub labels: Vec<usize>,
    pub pauli_labels: Vec<String>,
    pub real: Vec<Vec<f64>>,
    pub imag: Vec<Vec<f64>>,
}

pub fn chi_export(chi: &CMatrix) -> Result<ChiExport> {
    let m = chi.nrows();
    let n = qubit_count((m as f64).sqrt().round() as usize)?;
    let names = ['I', 'X', 'Y', 'Z'];
    Ok(ChiExport {
        labels: (0..m).collect(),
        pauli_labels: (0..m)
            .map(|l| base4_digits(l, n).into_iter().map(|d| names[d]).collect())
            .collect(),
        real: (0..m).map(|i| (0..m).map(|j| chi[(i, j)].re).collect()).collect(),
        imag: (0..m).map(|i| (0..m).map(|j| chi[(i, j)].im).collect()).collect(),
    })
}

/// Reconstructs every output state and the process from per-input records.
pub fn reconstruct_process(
    inputs: &[Vec<PrepLabel>],
    records: &[Vec<SettingRecord>],
    n: usize,
) -> Result<SuperOperator> {
    let ins: Vec<CMatrix> = inputs.iter().map(|l| input_state(l)).collect();
    let outs = records
        .iter()
        .map(|r| state_tomography(r, n).map(DensityMatrix::into_matrix))
        .collect::<Result<Vec<_>>>()?;
    process_tomography(&ins, &outs)
}

/// Applies a channel to a state given as a matrix.
pub fn apply_channel(e: &SuperOperator, rho: &CMatrix) -> Result<CMatrix> {
    devectorize(&(e.matrix() * vectorize(rho)))
}
