//! Controlled-phase synthesis, swap and single-qubit segments, and the
//! calibration sweeps that tune them.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{DecoherenceModel, DeviceParams};
use crate::dynamics::{assemble_offres_unitary, Axis};
use crate::error::{Error, Result};
use crate::executor::Executor;
use crate::linalg::{CMatrix, OperatorMatrix, SpaceLayout, C64};

/// Closed-form parameters of one controlled-phase gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CPhiParams {
    pub phi: f64,
    /// Transmon minus phonon frequency, rad/s.
    pub delta: f64,
    /// Duration of each of the two off-resonant interactions, s.
    pub t_int: f64,
    /// Z-rotation phase applied between the interactions, in `[0, 2pi)`.
    pub theta: f64,
    /// By-product phase on the stored (phonon) qubit.
    pub phi1: f64,
    /// By-product phase on the transmon qubit.
    pub phi2: f64,
}

pub fn swap_time(g: f64) -> f64 {
    PI / (2.0 * g)
}

/// Solves for detuning, interaction time and Z phase of `C_phi`.
pub fn solve_cphi(phi: f64, g: f64) -> Result<CPhiParams> {
    if !phi.is_finite() || phi == 0.0 || phi.abs() >= TAU {
        return Err(Error::PhaseDomain(phi));
    }
    let s = phi.signum();
    let ratio = TAU / (phi - s * TAU);
    let delta = -s * 2.0 * g * 2f64.sqrt() / (ratio * ratio - 1.0).sqrt();
    let w2 = (delta * delta + 8.0 * g * g).sqrt();
    let t_int = TAU / w2;
    let w1 = (delta * delta + 4.0 * g * g).sqrt();
    let theta = (PI - 2.0 * ((delta / w1) * (0.5 * w1 * t_int).tan()).atan()).rem_euclid(TAU);
    let phi_e0 = -delta * t_int + PI;
    let phi_g1 = -delta * t_int - theta + PI;
    Ok(CPhiParams {
        phi,
        delta,
        t_int,
        theta,
        phi1: phi_g1,
        phi2: phi_e0,
    })
}

/// `diag(1, e^{i phi1}, e^{i phi2}, e^{i(phi1 + phi2 + phi)})` on
/// `|g0>, |g1>, |e0>, |e1>`.
pub fn cphi_ideal_unitary(p: &CPhiParams) -> OperatorMatrix {
    let mut u = CMatrix::zeros(4, 4);
    u[(0, 0)] = C64::new(1.0, 0.0);
    u[(1, 1)] = C64::from_polar(1.0, p.phi1);
    u[(2, 2)] = C64::from_polar(1.0, p.phi2);
    u[(3, 3)] = C64::from_polar(1.0, p.phi1 + p.phi2 + p.phi);
    OperatorMatrix::new(SpaceLayout::qubits(2), u).expect("4x4 on two qubits")
}

/// `diag(1, e^{-i theta})` on the transmon.
pub fn z_phase(theta: f64) -> CMatrix {
    let mut m = CMatrix::identity(2, 2);
    m[(1, 1)] = C64::from_polar(1.0, -theta);
    m
}

/// `U(t_int) R(theta) U(t_int)` on a transmon (x) mode space in the frame
/// co-rotating with the mode.
pub fn assemble_cphi_sequence(p: &CPhiParams, g: f64, truncation: usize) -> Result<OperatorMatrix> {
    let layout = SpaceLayout::new(vec![2, truncation])?;
    let u = assemble_offres_unitary(&layout, p.delta, g, p.t_int, truncation - 1)?;
    let r = crate::device::embed(&z_phase(p.theta), 0, &layout);
    let seq = u.matrix() * r * u.matrix();
    OperatorMatrix::new(layout, seq)
}

/// Restriction of a transmon (x) mode operator to `|g0>, |g1>, |e0>, |e1>`.
pub fn computational_block(op: &OperatorMatrix) -> CMatrix {
    let layout = op.layout();
    let idx = [
        layout.index_of(&[0, 0]),
        layout.index_of(&[0, 1]),
        layout.index_of(&[1, 0]),
        layout.index_of(&[1, 1]),
    ];
    CMatrix::from_fn(4, 4, |i, j| op.matrix()[(idx[i], idx[j])])
}

/// `arg U_11 - arg U_01 - arg U_10 + arg U_00` of a diagonal two-qubit gate,
/// wrapped to `(-pi, pi]`.
pub fn controlled_phase_of(block: &CMatrix) -> f64 {
    let a = |i: usize| block[(i, i)].arg();
    wrap_phase(a(3) - a(2) - a(1) + a(0))
}

pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Segment kinds understood by the executor. Modes are device mode indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentKind {
    /// Resonant exchange with a mode (transmon tuned onto it).
    ResonantSwap { mode: usize },
    /// Transmon parked `delta` rad/s above the mode.
    OffresInteraction { mode: usize, delta: f64 },
    /// `exp(-i angle/2 n.sigma)` on the transmon at the rest frequency.
    Rotation { axis: [f64; 3], angle: f64 },
    /// Instantaneous `diag(1, e^{-i theta})` frame update on the transmon.
    VirtualZ { theta: f64 },
    Idle,
    /// Transmon readout along `axis` of the frame `diag(1, e^{i frame_phase})`,
    /// followed by an idle of the segment duration.
    Measure { axis: Axis, frame_phase: f64 },
    /// Resonant exchange that moves the projected transmon into a retired mode.
    ResetSwap { mode: usize },
    /// Conditional pi pulse on the last recorded outcome.
    FeedbackReset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSegment {
    #[serde(flatten)]
    pub kind: SegmentKind,
    pub duration: f64,
}

impl GateSegment {
    pub fn target_mode(&self) -> Option<usize> {
        match self.kind {
            SegmentKind::ResonantSwap { mode }
            | SegmentKind::OffresInteraction { mode, .. }
            | SegmentKind::ResetSwap { mode } => Some(mode),
            _ => None,
        }
    }

    pub fn is_measurement(&self) -> bool {
        matches!(self.kind, SegmentKind::Measure { .. })
    }
}

pub fn swap_segment(mode: usize, g: f64) -> GateSegment {
    GateSegment {
        kind: SegmentKind::ResonantSwap { mode },
        duration: swap_time(g),
    }
}

pub fn reset_swap_segment(mode: usize, g: f64) -> GateSegment {
    GateSegment {
        kind: SegmentKind::ResetSwap { mode },
        duration: swap_time(g),
    }
}

pub fn offres_segment(mode: usize, delta: f64, duration: f64) -> GateSegment {
    GateSegment {
        kind: SegmentKind::OffresInteraction { mode, delta },
        duration,
    }
}

pub fn idle_segment(duration: f64) -> GateSegment {
    GateSegment {
        kind: SegmentKind::Idle,
        duration,
    }
}

pub fn virtual_z(theta: f64) -> GateSegment {
    GateSegment {
        kind: SegmentKind::VirtualZ { theta },
        duration: 0.0,
    }
}

pub fn measure_segment(axis: Axis, frame_phase: f64, idle_after: f64) -> GateSegment {
    GateSegment {
        kind: SegmentKind::Measure { axis, frame_phase },
        duration: idle_after,
    }
}

pub fn feedback_reset() -> GateSegment {
    GateSegment {
        kind: SegmentKind::FeedbackReset,
        duration: 0.0,
    }
}

/// Axis-angle rotation on the transmon; the axis is normalized.
pub fn rotation_segment(axis: [f64; 3], angle: f64, duration: f64) -> Result<GateSegment> {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if !(norm > 1e-12) || !angle.is_finite() {
        return Err(Error::InvalidRotation(format!("axis {axis:?}, angle {angle}")));
    }
    if duration < 0.0 {
        return Err(Error::InvalidRotation(format!("negative duration {duration}")));
    }
    Ok(GateSegment {
        kind: SegmentKind::Rotation {
            axis: [axis[0] / norm, axis[1] / norm, axis[2] / norm],
            angle,
        },
        duration,
    })
}

/// Rotation by `angle` about the equatorial axis at azimuth `phase`.
pub fn equatorial_rotation(phase: f64, angle: f64, duration: f64) -> GateSegment {
    rotation_segment([phase.cos(), phase.sin(), 0.0], angle, duration).expect("unit axis")
}

/// `R_y(-pi/2) R_x(pi)` with both axes turned by the reference phase.
pub fn hadamard(phase: f64, pulse_time: f64) -> Vec<GateSegment> {
    vec![
        equatorial_rotation(phase, PI, pulse_time),
        equatorial_rotation(phase + FRAC_PI_2, -FRAC_PI_2, pulse_time),
    ]
}

/// Controlled phase between the transmon and `mode`, applied in the rest
/// frame (the interaction periods also carry the mode's frame offset).
pub fn cphi_segments(mode: usize, p: &CPhiParams) -> Vec<GateSegment> {
    vec![
        offres_segment(mode, p.delta, p.t_int),
        virtual_z(p.theta),
        offres_segment(mode, p.delta, p.t_int),
    ]
}

/// CNOT with the phonon mode as control and the transmon as target:
/// `R_y(pi/2)`, `C_pi`, then `R_y(-pi/2)` turned by `second_phase`.
pub fn cnot_sequence(mode: usize, g: f64, second_phase: f64, pulse_time: f64) -> Result<Vec<GateSegment>> {
    let p = solve_cphi(PI, g)?;
    let mut out = vec![equatorial_rotation(FRAC_PI_2, FRAC_PI_2, pulse_time)];
    out.extend(cphi_segments(mode, &p));
    out.push(equatorial_rotation(FRAC_PI_2 + second_phase, -FRAC_PI_2, pulse_time));
    Ok(out)
}

/// One point of a calibration sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub parameter: f64,
    pub population: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCalibration {
    pub value: f64,
    pub sweep: Vec<SweepPoint>,
}

/// Least-squares fit of `a + b cos x + c sin x`.
pub fn fit_sinusoid(points: &[SweepPoint]) -> Result<[f64; 3]> {
    if points.len() < 3 {
        return Err(Error::Fit("need at least three sweep points".into()));
    }
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for p in points {
        let row = nalgebra::Vector3::new(1.0, p.parameter.cos(), p.parameter.sin());
        ata += row * row.transpose();
        aty += row * p.population;
    }
    let sol = ata
        .lu()
        .solve(&aty)
        .ok_or_else(|| Error::Fit("singular sinusoid design".into()))?;
    Ok([sol[0], sol[1], sol[2]])
}

/// Angle where the fitted sinusoid peaks (or dips).
pub fn sinusoid_extremum(points: &[SweepPoint], maximum: bool) -> Result<f64> {
    let [_, b, c] = fit_sinusoid(points)?;
    let amp = b.hypot(c);
    let span = points
        .iter()
        .map(|p| p.population)
        .fold(f64::NEG_INFINITY, f64::max)
        - points.iter().map(|p| p.population).fold(f64::INFINITY, f64::min);
    if amp < 1e-9 || span < 1e-9 {
        return Err(Error::Calibration("flat sweep, no extremum".into()));
    }
    let peak = c.atan2(b);
    Ok(if maximum { peak } else { peak + PI }.rem_euclid(TAU))
}

pub fn sweep_grid(points: usize) -> Vec<f64> {
    (0..points).map(|i| TAU * i as f64 / points as f64).collect()
}

/// Sweeps the mid-sequence Z phase with `|e0>` prepared and returns the
/// phase that maximizes the final excited population.
pub fn calibrate_theta(
    device: &DeviceParams,
    mode: usize,
    phi: f64,
    model: DecoherenceModel,
    points: usize,
) -> Result<SweepCalibration> {
    let g = device.g_angular();
    let p = solve_cphi(phi, g)?;
    let exec = Executor::new(device.clone(), vec![mode], model)?;
    let rho0 = exec.basis_state(&[1, 0])?;
    let sweep = sweep_grid(points)
        .into_par_iter()
        .map(|theta| {
            let segs = cphi_segments(mode, &CPhiParams { theta, ..p });
            let rho = exec.run_unconditional(&segs, rho0.clone())?;
            Ok(SweepPoint {
                parameter: theta,
                population: exec.transmon_excited(&rho),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let value = sinusoid_extremum(&sweep, true)?;
    Ok(SweepCalibration { value, sweep })
}

/// Sweeps the phase of the second CNOT pulse with `|g0>` prepared and
/// returns the phase that brings the transmon back to `|g>`.
pub fn calibrate_cnot_phase(
    device: &DeviceParams,
    mode: usize,
    model: DecoherenceModel,
    points: usize,
    pulse_time: f64,
) -> Result<SweepCalibration> {
    let g = device.g_angular();
    let exec = Executor::new(device.clone(), vec![mode], model)?;
    let rho0 = exec.basis_state(&[0, 0])?;
    let sweep = sweep_grid(points)
        .into_par_iter()
        .map(|phase| {
            let segs = cnot_sequence(mode, g, phase, pulse_time)?;
            let rho = exec.run_unconditional(&segs, rho0.clone())?;
            Ok(SweepPoint {
                parameter: phase,
                population: exec.transmon_excited(&rho),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let value = sinusoid_extremum(&sweep, false)?;
    Ok(SweepCalibration { value, sweep })
}

/// Ramsey measurement of a phonon mode's offset from the rest frequency:
/// `pi/2`, swap in, wait, swap out, `pi/2`. Returns `|offset|` in Hz.
pub fn ramsey_phonon_frequency(
    device: &DeviceParams,
    mode: usize,
    waits: &[f64],
    model: DecoherenceModel,
) -> Result<f64> {
    let trace = ramsey_trace(device, mode, waits, model)?;
    fit_oscillation_frequency(&trace)
}

pub fn ramsey_trace(
    device: &DeviceParams,
    mode: usize,
    waits: &[f64],
    model: DecoherenceModel,
) -> Result<Vec<(f64, f64)>> {
    let g = device.g_angular();
    let exec = Executor::new(device.clone(), vec![mode], model)?;
    let rho0 = exec.basis_state(&[0, 0])?;
    waits
        .par_iter()
        .map(|&t| {
            let segs = vec![
                equatorial_rotation(0.0, FRAC_PI_2, 0.0),
                swap_segment(mode, g),
                idle_segment(t),
                swap_segment(mode, g),
                equatorial_rotation(0.0, FRAC_PI_2, 0.0),
            ];
            let rho = exec.run_unconditional(&segs, rho0.clone())?;
            Ok((t, exec.transmon_excited(&rho)))
        })
        .collect()
}

fn sinusoid_sse(trace: &[(f64, f64)], f: f64) -> f64 {
    let pts: Vec<SweepPoint> = trace
        .iter()
        .map(|&(t, y)| SweepPoint {
            parameter: TAU * f * t,
            population: y,
        })
        .collect();
    match fit_sinusoid(&pts) {
        Ok([a, b, c]) => pts
            .iter()
            .map(|p| {
                let r = p.population - (a + b * p.parameter.cos() + c * p.parameter.sin());
                r * r
            })
            .sum(),
        Err(_) => f64::INFINITY,
    }
}

/// Dominant oscillation frequency (Hz) of a sampled signal, by a grid scan
/// of sinusoid fits refined with a golden-section search.
pub fn fit_oscillation_frequency(trace: &[(f64, f64)]) -> Result<f64> {
    if trace.len() < 5 {
        return Err(Error::Fit("too few samples".into()));
    }
    let ys: Vec<f64> = trace.iter().map(|p| p.1).collect();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / ys.len() as f64;
    if var.sqrt() < 1e-6 {
        return Err(Error::Fit("flat signal, no oscillation".into()));
    }
    let t0 = trace.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let t1 = trace.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let span = t1 - t0;
    let mut dts: Vec<f64> = trace.windows(2).map(|w| (w[1].0 - w[0].0).abs()).collect();
    dts.retain(|d| *d > 0.0);
    let dt = dts.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(span > 0.0) || !dt.is_finite() {
        return Err(Error::Fit("degenerate time grid".into()));
    }
    let f_max = 0.5 / dt;
    let step = 0.1 / span;
    let n = (f_max / step).ceil() as usize;
    let (mut best_f, mut best) = (0.0, f64::INFINITY);
    for i in 1..=n {
        let f = i as f64 * step;
        let sse = sinusoid_sse(trace, f);
        if sse < best {
            best = sse;
            best_f = f;
        }
    }
    let (mut a, mut b) = ((best_f - step).max(0.0), best_f + step);
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let (mut fc, mut fd) = (sinusoid_sse(trace, c), sinusoid_sse(trace, d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = sinusoid_sse(trace, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = sinusoid_sse(trace, d);
        }
        if (b - a).abs() < 1e-9 * best_f.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// `parameter,population` rows.
pub fn sweep_csv(sweep: &[SweepPoint]) -> String {
    let mut out = String::from("parameter,population\n");
    for p in sweep {
        out.push_str(&format!("{:.12},{:.12}\n", p.parameter, p.population));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    const G: f64 = 2.0 * PI * 296e3;

    #[test]
    fn solver_pi_example() {
        let p = solve_cphi(PI, G).unwrap();
        assert!((p.delta / G + 2.0 * 2f64.sqrt() / 3f64.sqrt()).abs() < 1e-12);
        assert!((p.t_int - TAU / (G * (32.0f64 / 3.0).sqrt())).abs() < 1e-18);
        assert!((p.t_int / swap_time(G) * 2.0 - 2.449).abs() < 0.01);
        assert!(solve_cphi(0.0, G).is_err());
        assert!(solve_cphi(TAU, G).is_err());
    }

    #[test]
    fn solver_half_pi_example() {
        let p = solve_cphi(FRAC_PI_2, G).unwrap();
        let ratio = p.delta / (p.delta * p.delta + 8.0 * G * G).sqrt();
        assert!((ratio + 0.75).abs() < 1e-12);
        assert!((p.delta / G + 3.2071).abs() < 1e-4);
    }

    #[test]
    fn solver_is_odd() {
        for k in 1..16 {
            let phi = k as f64 * PI / 8.0;
            let a = solve_cphi(phi, G).unwrap();
            let b = solve_cphi(-phi, G).unwrap();
            assert!((a.delta + b.delta).abs() < 1e-9 * a.delta.abs());
            assert!((a.t_int - b.t_int).abs() < 1e-18);
            assert!(a.delta < 0.0 && b.delta > 0.0);
        }
    }

    #[test]
    fn small_phase_needs_large_detuning() {
        let a = solve_cphi(0.01, G).unwrap();
        let b = solve_cphi(1.0, G).unwrap();
        assert!(a.delta.abs() > 10.0 * b.delta.abs());
    }

    #[test]
    fn assembled_pi_gate_is_diagonal_with_closed_form_phases() {
        let p = solve_cphi(PI, G).unwrap();
        let op = assemble_cphi_sequence(&p, G, 3).unwrap();
        let block = computational_block(&op);
        let off: f64 = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| block[(i, j)].norm())
            .sum();
        assert!(off < 1e-9);
        assert!((wrap_phase(controlled_phase_of(&block) - PI)).abs() < 1e-9);
        assert_eq!(block[(0, 0)], C64::new(1.0, 0.0));
        assert!(max_abs_diff(&block, cphi_ideal_unitary(&p).matrix()) < 1e-9);
    }

    #[test]
    fn second_block_is_diagonal_at_t_int() {
        let layout = SpaceLayout::new(vec![2, 3]).unwrap();
        for k in [1, 3, 8, 13] {
            let p = solve_cphi(k as f64 * PI / 8.0, G).unwrap();
            let u = assemble_offres_unitary(&layout, p.delta, G, p.t_int, 2).unwrap();
            let e1 = layout.index_of(&[1, 1]);
            let g2 = layout.index_of(&[0, 2]);
            assert!(u.matrix()[(e1, g2)].norm() < 1e-12);
        }
    }

    #[test]
    fn rotation_validation() {
        assert!(rotation_segment([0.0; 3], PI, 0.0).is_err());
        let s = rotation_segment([2.0, 0.0, 0.0], PI, 0.0).unwrap();
        assert_eq!(
            s.kind,
            SegmentKind::Rotation {
                axis: [1.0, 0.0, 0.0],
                angle: PI
            }
        );
    }

    #[test]
    fn segment_json_round_trip() {
        let segs = vec![
            swap_segment(1, G),
            virtual_z(0.3),
            measure_segment(Axis::Y, 0.2, 7e-6),
        ];
        let text = serde_json::to_string(&segs).unwrap();
        assert!(text.contains("\"kind\":\"resonant_swap\""));
        let back: Vec<GateSegment> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, segs);
    }

    #[test]
    fn sinusoid_extremum_recovers_phase() {
        let pts: Vec<SweepPoint> = sweep_grid(16)
            .into_iter()
            .map(|x| SweepPoint {
                parameter: x,
                population: 0.4 + 0.3 * (x - 1.234).cos(),
            })
            .collect();
        assert!((sinusoid_extremum(&pts, true).unwrap() - 1.234).abs() < 1e-12);
        assert!((sinusoid_extremum(&pts, false).unwrap() - (1.234 + PI)).abs() < 1e-12);
        let flat: Vec<SweepPoint> = pts.iter().map(|p| SweepPoint { population: 0.5, ..*p }).collect();
        assert!(sinusoid_extremum(&flat, true).is_err());
    }

    #[test]
    fn oscillation_frequency_fit() {
        let trace: Vec<(f64, f64)> = (0..200)
            .map(|i| {
                let t = i as f64 * 5e-9;
                (t, 0.5 + 0.5 * (TAU * 7.3e6 * t + 0.4).cos())
            })
            .collect();
        let f = fit_oscillation_frequency(&trace).unwrap();
        assert!((f - 7.3e6).abs() < 10.0);
        let flat: Vec<(f64, f64)> = trace.iter().map(|&(t, _)| (t, 0.5)).collect();
        assert!(fit_oscillation_frequency(&flat).is_err());
    }
}
