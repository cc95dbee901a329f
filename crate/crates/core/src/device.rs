//! Device parameters and the Hamiltonian / dissipator builders.
//!
//! Files store frequencies in Hz and times in seconds. Everything returned by
//! the builders is angular (rad/s).
//!
//! The global frame rotates at the transmon rest-point frequency for every
//! subsystem, so a phonon mode `i` carries a static detuning
//! `2*pi*(f_i - f_rest)` and the transmon carries `2*pi*(f_q(t) - f_rest)`.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cr, CMatrix, OperatorMatrix, SpaceLayout};

pub const TRANSMON_DIM: usize = 2;
const DEFAULT_DEVICE_JSON: &str = include_str!("../data/default_device.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub label: u32,
    /// Hz
    pub frequency: f64,
    /// seconds
    pub t1: f64,
    /// seconds
    pub t2: f64,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
}

fn default_truncation() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Coupling g/2pi in Hz, shared by every mode.
    pub g: f64,
    /// Transmon rest-point frequency, Hz.
    pub rest_frequency: f64,
    /// Phonon free spectral range, Hz. Informational.
    #[serde(default)]
    pub fsr: f64,
    /// Readout resonator frequency, Hz. Informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout_frequency: Option<f64>,
    pub transmon_t1: f64,
    /// Echo coherence time.
    pub transmon_t2: f64,
    pub modes: Vec<ModeSpec>,
}

impl DeviceParams {
    /// The bundled three-mode device.
    pub fn default_device() -> Self {
        Self::from_json(DEFAULT_DEVICE_JSON).expect("bundled device file is valid")
    }

    pub fn default_json() -> &'static str {
        DEFAULT_DEVICE_JSON
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let params: DeviceParams =
            serde_json::from_str(text).map_err(|e| Error::InvalidDevice(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("device params serialize")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g > 0.0) {
            return Err(Error::InvalidDevice(format!("coupling must be positive, got {}", self.g)));
        }
        check_coherence(self.transmon_t1, self.transmon_t2)?;
        for m in &self.modes {
            check_coherence(m.t1, m.t2)?;
            if m.truncation < 3 {
                return Err(Error::TruncationTooSmall {
                    truncation: m.truncation,
                    needed: 3,
                });
            }
            if m.frequency <= self.rest_frequency {
                return Err(Error::InvalidDevice(format!(
                    "mode {} at {} Hz is not above the rest point {} Hz",
                    m.label, m.frequency, self.rest_frequency
                )));
            }
        }
        Ok(())
    }

    pub fn mode(&self, index: usize) -> Result<&ModeSpec> {
        self.modes.get(index).ok_or(Error::UnknownMode(index))
    }

    /// Angular coupling, rad/s.
    pub fn g_angular(&self) -> f64 {
        2.0 * PI * self.g
    }

    /// Angular detuning of mode `index` from the rest point, rad/s.
    pub fn mode_offset(&self, index: usize) -> Result<f64> {
        Ok(2.0 * PI * (self.mode(index)?.frequency - self.rest_frequency))
    }

    /// Adds a mode one free spectral range above the highest existing mode,
    /// copying that mode's coherence. Returns its index.
    pub fn with_spectator_mode(&self) -> (DeviceParams, usize) {
        let mut out = self.clone();
        let top = self
            .modes
            .iter()
            .max_by(|a, b| a.frequency.partial_cmp(&b.frequency).unwrap())
            .cloned()
            .expect("device has at least one mode");
        let spacing = if self.fsr > 0.0 { self.fsr } else { 12.6e6 };
        let label = self.modes.iter().map(|m| m.label).max().unwrap_or(0) + 1;
        out.modes.push(ModeSpec {
            label,
            frequency: top.frequency + spacing,
            ..top
        });
        let idx = out.modes.len() - 1;
        (out, idx)
    }

    /// Content hash of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.to_json().as_bytes());
        hex::encode(h.finalize())
    }
}

fn check_coherence(t1: f64, t2: f64) -> Result<()> {
    if !(t1 > 0.0) || !(t2 > 0.0) {
        return Err(Error::InvalidDevice(format!(
            "coherence times must be positive (T1 = {t1}, T2 = {t2})"
        )));
    }
    if t2 > 2.0 * t1 * (1.0 + 1e-12) {
        return Err(Error::NonPhysicalCoherence { t2, two_t1: 2.0 * t1 });
    }
    Ok(())
}

/// Pure-dephasing rate `1/T_phi = 1/T2 - 1/(2 T1)`, in 1/s.
pub fn pure_dephasing_rate(t1: f64, t2: f64) -> Result<f64> {
    check_coherence(t1, t2)?;
    Ok((1.0 / t2 - 1.0 / (2.0 * t1)).max(0.0))
}

pub fn annihilation(dim: usize) -> CMatrix {
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = cr((n as f64).sqrt());
    }
    a
}

pub fn number(dim: usize) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_fn(dim, |n, _| cr(n as f64)))
}

/// Lowering operator of the two-level transmon, `|g><e|` with `|g>` = index 0.
pub fn sigma_minus() -> CMatrix {
    annihilation(TRANSMON_DIM)
}

/// Embeds a single-subsystem operator into the full layout.
pub fn embed(op: &CMatrix, subsystem: usize, layout: &SpaceLayout) -> CMatrix {
    let mut out = CMatrix::identity(1, 1);
    for (s, &d) in layout.factors().iter().enumerate() {
        let factor = if s == subsystem {
            op.clone()
        } else {
            CMatrix::identity(d, d)
        };
        out = out.kronecker(&factor);
    }
    out
}

/// Layout of the transmon followed by the listed modes.
pub fn composite_layout(params: &DeviceParams, modes: &[usize]) -> Result<SpaceLayout> {
    let mut factors = vec![TRANSMON_DIM];
    for &m in modes {
        factors.push(params.mode(m)?.truncation);
    }
    SpaceLayout::new(factors)
}

/// Rest-frame Hamiltonian for one transmon frequency.
#[derive(Debug, Clone)]
pub struct FrameHamiltonian {
    pub layout: SpaceLayout,
    pub drift: OperatorMatrix,
    /// `Delta_i = w_q - w_i` per listed mode, rad/s.
    pub detuning_map: Vec<(usize, f64)>,
}

/// Jaynes-Cummings Hamiltonian (rotating-wave form) of the transmon and the
/// listed modes at the given transmon frequency (Hz).
///
/// `drift = dq n_q + sum_i d_i n_i + g sum_i (s+ a_i + s- a_i^dag)` where the
/// `d` are offsets from the rest point.
pub fn build_jc_hamiltonian(
    params: &DeviceParams,
    active_modes: &[usize],
    transmon_frequency: f64,
) -> Result<FrameHamiltonian> {
    if active_modes.is_empty() {
        return Err(Error::InvalidDevice("no active modes".into()));
    }
    let layout = composite_layout(params, active_modes)?;
    let g = params.g_angular();
    let dq = 2.0 * PI * (transmon_frequency - params.rest_frequency);
    let sm = embed(&sigma_minus(), 0, &layout);
    let sp = sm.adjoint();
    let mut h = &sp * &sm * cr(dq);
    let mut detuning_map = Vec::with_capacity(active_modes.len());
    for (pos, &m) in active_modes.iter().enumerate() {
        let spec = params.mode(m)?;
        let a = embed(&annihilation(spec.truncation), pos + 1, &layout);
        let offset = params.mode_offset(m)?;
        h += a.adjoint() * &a * cr(offset);
        h += (&sp * &a + &sm * a.adjoint()) * cr(g);
        detuning_map.push((m, 2.0 * PI * (transmon_frequency - spec.frequency)));
    }
    Ok(FrameHamiltonian {
        drift: OperatorMatrix::new(layout.clone(), h)?,
        layout,
        detuning_map,
    })
}

/// Which subsystems decohere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DecoherenceMode {
    None,
    #[default]
    Full,
    InfinitePhonon,
    InfiniteQubit,
}

impl DecoherenceMode {
    pub fn transmon_decoheres(self) -> bool {
        matches!(self, DecoherenceMode::Full | DecoherenceMode::InfinitePhonon)
    }

    pub fn phonons_decohere(self) -> bool {
        matches!(self, DecoherenceMode::Full | DecoherenceMode::InfiniteQubit)
    }

    pub fn is_ideal(self) -> bool {
        self == DecoherenceMode::None
    }
}

/// Normalization of the pure-dephasing jump operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DephasingConvention {
    /// `L = sqrt(2/T_phi) n`: the 0-1 coherence decays at `1/T_phi`, so the
    /// total coherence decay rate is `1/T2`.
    #[default]
    Standard,
    /// `L = sqrt(1/T_phi) sigma_z` (and `2 n` on oscillators): the 0-1
    /// coherence decays at `2/T_phi`.
    SigmaZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct DecoherenceModel {
    pub mode: DecoherenceMode,
    pub dephasing: DephasingConvention,
}

impl DecoherenceModel {
    pub fn ideal() -> Self {
        Self {
            mode: DecoherenceMode::None,
            dephasing: DephasingConvention::Standard,
        }
    }

    pub fn full() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    AmplitudeDamping,
    PureDephasing,
}

/// A jump operator `sqrt(rate) * operator` on one subsystem.
#[derive(Debug, Clone)]
pub struct CollapseOp {
    pub subsystem: usize,
    pub kind: ChannelKind,
    /// 1/s
    pub rate: f64,
    /// Full-space operator, without the rate.
    pub operator: OperatorMatrix,
}

impl CollapseOp {
    pub fn jump(&self) -> CMatrix {
        self.operator.matrix() * cr(self.rate.sqrt())
    }
}

/// Local (single-subsystem) jump operators already scaled by their rates.
pub fn local_jump_operators(
    dim: usize,
    t1: f64,
    t2: f64,
    convention: DephasingConvention,
) -> Result<Vec<CMatrix>> {
    let gamma_phi = pure_dephasing_rate(t1, t2)?;
    let mut ops = vec![annihilation(dim) * cr((1.0 / t1).sqrt())];
    if gamma_phi > 0.0 {
        let scale = match convention {
            DephasingConvention::Standard => 2.0f64.sqrt(),
            DephasingConvention::SigmaZ => 2.0,
        };
        ops.push(number(dim) * cr(scale * gamma_phi.sqrt()));
    }
    Ok(ops)
}

/// Amplitude damping (rate `1/T1`) and pure dephasing (rate `1/T_phi`) for
/// the transmon and each listed mode, on the layout of
/// [`build_jc_hamiltonian`].
pub fn collapse_operators(params: &DeviceParams, active_modes: &[usize]) -> Result<Vec<CollapseOp>> {
    collapse_operators_with(params, active_modes, DecoherenceModel::full())
}

pub fn collapse_operators_with(
    params: &DeviceParams,
    active_modes: &[usize],
    model: DecoherenceModel,
) -> Result<Vec<CollapseOp>> {
    let layout = composite_layout(params, active_modes)?;
    let scale = match model.dephasing {
        DephasingConvention::Standard => 2.0f64,
        DephasingConvention::SigmaZ => 4.0,
    };
    let mut out = Vec::new();
    let mut push = |subsystem: usize, dim: usize, t1: f64, t2: f64| -> Result<()> {
        let gamma_phi = pure_dephasing_rate(t1, t2)?;
        out.push(CollapseOp {
            subsystem,
            kind: ChannelKind::AmplitudeDamping,
            rate: 1.0 / t1,
            operator: OperatorMatrix::new(layout.clone(), embed(&annihilation(dim), subsystem, &layout))?,
        });
        out.push(CollapseOp {
            subsystem,
            kind: ChannelKind::PureDephasing,
            rate: gamma_phi,
            operator: OperatorMatrix::new(
                layout.clone(),
                embed(&(number(dim) * cr(scale.sqrt())), subsystem, &layout),
            )?,
        });
        Ok(())
    };
    if model.mode.transmon_decoheres() {
        push(0, TRANSMON_DIM, params.transmon_t1, params.transmon_t2)?;
    }
    if model.mode.phonons_decohere() {
        for (pos, &m) in active_modes.iter().enumerate() {
            let spec = params.mode(m)?;
            push(pos + 1, spec.truncation, spec.t1, spec.t2)?;
        }
    }
    Ok(out)
}

/// Intrinsic detuning from a spectroscopically measured one,
/// inverting `measured = sqrt(delta^2 + 4 g^2)`. Angular units.
pub fn dispersive_detuning(measured: f64, g: f64) -> Result<f64> {
    let disc = measured * measured - 4.0 * g * g;
    if disc < -1e-12 * measured * measured {
        return Err(Error::Calibration(format!(
            "measured detuning {measured:.6e} below the dispersive minimum 2g = {:.6e}",
            2.0 * g
        )));
    }
    Ok(measured.signum() * disc.max(0.0).sqrt())
}
