//! Experiment documents as read from JSON. Every struct rejects unknown keys;
//! omitted optional keys take the defaults listed on each field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{ChainParams, EXACT_DIM_CAP};
use crate::hbn::{LatticeSize, PhysicalConstants};

/// Largest state-vector dimension accepted by the sampled exact engine.
pub const SAMPLED_DIM_CAP: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Exact,
    Hpa,
    Both,
}

impl Engine {
    pub fn runs_exact(self) -> bool {
        matches!(self, Engine::Exact | Engine::Both)
    }

    pub fn runs_hpa(self) -> bool {
        matches!(self, Engine::Hpa | Engine::Both)
    }
}

/// How the exact engine represents the bath.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExactMethod {
    /// Dense density matrix.
    #[default]
    Density,
    /// Averaged pure-state trajectories.
    Sampled,
}

fn one_f64() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn default_samples() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub omega0: f64,
    pub h: f64,
    pub lambda: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub alpha: f64,
    #[serde(default = "one_f64")]
    pub zz_scale: f64,
    pub tau: f64,
    #[serde(rename = "R")]
    pub cycles: usize,
    pub engine: Engine,
    #[serde(default)]
    pub exact_method: ExactMethod,
    /// Trajectories for `exact_method = sampled`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "one_usize")]
    pub record_every: usize,
    #[serde(default)]
    pub seed: u64,
    /// Gaussian substep; `null` picks it from the couplings.
    #[serde(default)]
    pub dt: Option<f64>,
}

impl ChainConfig {
    /// Benchmark chain: `N = 9`, `omega0 = h = 100`, `lambda = 2`,
    /// `J = 10`, `alpha = 2`, `tau = 5/h`, `R = 800`.
    pub fn benchmark() -> Self {
        Self {
            n: 9,
            omega0: 100.0,
            h: 100.0,
            lambda: 2.0,
            j: 10.0,
            alpha: 2.0,
            zz_scale: 1.0,
            tau: 0.05,
            cycles: 800,
            engine: Engine::Both,
            exact_method: ExactMethod::Density,
            samples: default_samples(),
            record_every: 1,
            seed: 0,
            dt: None,
        }
    }

    pub fn params(&self) -> ChainParams {
        ChainParams { n: self.n, omega0: self.omega0, h: self.h, lambda: self.lambda, j: self.j, alpha: self.alpha, zz_scale: self.zz_scale }
    }

    pub fn validate(&self) -> Result<()> {
        self.params().validate()?;
        check_positive("tau", self.tau)?;
        check_common(self.record_every, self.samples, self.dt)?;
        if self.engine.runs_exact() {
            let dim = 1usize.checked_shl(self.n as u32 + 1).filter(|_| self.n < 62).unwrap_or(usize::MAX);
            let cap = match self.exact_method {
                ExactMethod::Density => EXACT_DIM_CAP,
                ExactMethod::Sampled => SAMPLED_DIM_CAP,
            };
            if dim > cap {
                return Err(Error::ExceedsExactCap { dim, cap });
            }
        }
        Ok(())
    }
}

/// Which lattice sites to simulate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum LatticeSpec {
    /// First `n` sites by ring, then azimuth.
    Sites(usize),
    /// Complete rings `1..=k`.
    Rings(usize),
}

impl From<LatticeSpec> for LatticeSize {
    fn from(s: LatticeSpec) -> Self {
        match s {
            LatticeSpec::Sites(n) => LatticeSize::Sites(n),
            LatticeSpec::Rings(k) => LatticeSize::Rings(k),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AzimuthMode {
    /// Pick the azimuth that polarizes the scan rings best.
    Scan,
}

/// Field azimuth in degrees, or `"scan"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Azimuth {
    Degrees(f64),
    Mode(AzimuthMode),
}

impl Default for Azimuth {
    fn default() -> Self {
        Azimuth::Mode(AzimuthMode::Scan)
    }
}

/// Frequency that sets the unit of the nitrogen segment duration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauReference {
    #[default]
    OmegaB,
    OmegaN,
}

/// Electron couplings kept switched on; all others are zeroed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMask {
    #[default]
    All,
    NitrogenOnly,
    BoronOnly,
    RingsUpTo(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSettings {
    pub cycles: usize,
    pub step_deg: f64,
    /// Upper end of the scanned interval `[0, span_deg)`.
    pub span_deg: f64,
    pub rings: Vec<usize>,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self { cycles: 70, step_deg: 1.0, span_deg: 120.0, rings: vec![1, 2] }
    }
}

fn default_theta() -> f64 {
    45.0
}

fn default_tau_n() -> f64 {
    25.0
}

fn default_tau_b() -> f64 {
    15.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HbnConfig {
    /// Field strength in tesla.
    #[serde(rename = "B")]
    pub field: f64,
    #[serde(default = "default_theta")]
    pub theta_deg: f64,
    #[serde(default)]
    pub phi: Azimuth,
    pub lattice: LatticeSpec,
    /// Optional subset of lattice indices, kept in the given order.
    #[serde(default)]
    pub keep_sites: Option<Vec<usize>>,
    pub engine: Engine,
    #[serde(rename = "R")]
    pub cycles: usize,
    #[serde(default = "default_tau_n")]
    pub tau_n_factor: f64,
    #[serde(default)]
    pub tau_n_reference: TauReference,
    /// `tau_B = tau_b_factor / omega_B`.
    #[serde(default = "default_tau_b")]
    pub tau_b_factor: f64,
    #[serde(default)]
    pub mask: CouplingMask,
    #[serde(default)]
    pub scan: ScanSettings,
    #[serde(default)]
    pub constants: PhysicalConstants,
    #[serde(default)]
    pub exact_method: ExactMethod,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "one_usize")]
    pub record_every: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dt: Option<f64>,
}

impl HbnConfig {
    /// Alternating-drive run on the first `sites` lattice sites at 1 T,
    /// `theta = 45 deg`, azimuth from the scan.
    pub fn lattice_run(sites: usize, cycles: usize, engine: Engine) -> Self {
        Self {
            field: 1.0,
            theta_deg: default_theta(),
            phi: Azimuth::default(),
            lattice: LatticeSpec::Sites(sites),
            keep_sites: None,
            engine,
            cycles,
            tau_n_factor: default_tau_n(),
            tau_n_reference: TauReference::OmegaB,
            tau_b_factor: default_tau_b(),
            mask: CouplingMask::All,
            scan: ScanSettings::default(),
            constants: PhysicalConstants::default(),
            exact_method: ExactMethod::Density,
            samples: default_samples(),
            record_every: 1,
            seed: 0,
            dt: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        check_positive("B", self.field)?;
        check_positive("tau_n_factor", self.tau_n_factor)?;
        check_positive("tau_b_factor", self.tau_b_factor)?;
        if !(0.0..=180.0).contains(&self.theta_deg) {
            return Err(Error::Config(format!("theta_deg must lie in [0, 180], got {}", self.theta_deg)));
        }
        if let Azimuth::Degrees(p) = self.phi {
            if !p.is_finite() {
                return Err(Error::Config("phi must be finite".into()));
            }
        }
        match self.lattice {
            LatticeSpec::Sites(0) | LatticeSpec::Rings(0) => return Err(Error::Config("lattice must contain at least one site".into())),
            _ => {}
        }
        if let Some(keep) = &self.keep_sites {
            if keep.is_empty() {
                return Err(Error::Config("keep_sites must not be empty".into()));
            }
            let mut seen = keep.clone();
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Config("keep_sites contains duplicates".into()));
            }
        }
        if self.scan.cycles == 0 || self.scan.rings.is_empty() {
            return Err(Error::Config("scan needs at least one cycle and one ring".into()));
        }
        check_positive("scan.step_deg", self.scan.step_deg)?;
        check_positive("scan.span_deg", self.scan.span_deg)?;
        check_common(self.record_every, self.samples, self.dt)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_common(record_every: usize, samples: usize, dt: Option<f64>) -> Result<()> {
    if record_every == 0 {
        return Err(Error::Config("record_every must be at least 1".into()));
    }
    if samples == 0 {
        return Err(Error::Config("samples must be at least 1".into()));
    }
    if let Some(dt) = dt {
        check_positive("dt", dt)?;
    }
    Ok(())
}

/// Chain parameter a sweep axis may vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "N")]
    N,
    #[serde(rename = "omega0")]
    Omega0,
    #[serde(rename = "h")]
    H,
    #[serde(rename = "lambda")]
    Lambda,
    #[serde(rename = "J")]
    J,
    #[serde(rename = "alpha")]
    Alpha,
    #[serde(rename = "zz_scale")]
    ZzScale,
    #[serde(rename = "tau")]
    Tau,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::N => "N",
            SweepParam::Omega0 => "omega0",
            SweepParam::H => "h",
            SweepParam::Lambda => "lambda",
            SweepParam::J => "J",
            SweepParam::Alpha => "alpha",
            SweepParam::ZzScale => "zz_scale",
            SweepParam::Tau => "tau",
        }
    }

    /// Writes `v` into the matching field of `cfg`.
    pub fn apply(self, cfg: &mut ChainConfig, v: f64) {
        match self {
            SweepParam::N => cfg.n = v as usize,
            SweepParam::Omega0 => cfg.omega0 = v,
            SweepParam::H => cfg.h = v,
            SweepParam::Lambda => cfg.lambda = v,
            SweepParam::J => cfg.j = v,
            SweepParam::Alpha => cfg.alpha = v,
            SweepParam::ZzScale => cfg.zz_scale = v,
            SweepParam::Tau => cfg.tau = v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub name: SweepParam,
    pub values: Vec<f64>,
}

/// A grid of chain runs. Rows are ordered with the first axis varying
/// slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: ChainConfig,
    pub axes: Vec<SweepAxis>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::Config("sweep needs at least one axis".into()));
        }
        for (k, axis) in self.axes.iter().enumerate() {
            if self.axes[..k].iter().any(|a| a.name == axis.name) {
                return Err(Error::Config(format!("axis {} appears twice", axis.name.name())));
            }
            if axis.values.is_empty() {
                return Err(Error::Config(format!("axis {} has no values", axis.name.name())));
            }
            if let Some(v) = axis.values.iter().find(|v| !v.is_finite()) {
                return Err(Error::Config(format!("axis {} has a non-finite value {v}", axis.name.name())));
            }
            if axis.name == SweepParam::N && axis.values.iter().any(|&v| v < 1.0 || v.fract() != 0.0) {
                return Err(Error::Config("axis N takes positive integers".into()));
            }
        }
        if self.base.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn point_count(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Grid coordinates of row `k`.
    pub fn point(&self, mut k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.axes.len()];
        for (slot, axis) in self.axes.iter().enumerate().rev() {
            out[slot] = axis.values[k % axis.values.len()];
            k /= axis.values.len();
        }
        out
    }

    pub fn config_at(&self, point: &[f64]) -> ChainConfig {
        let mut cfg = self.base.clone();
        for (axis, &v) in self.axes.iter().zip(point) {
            axis.name.apply(&mut cfg, v);
        }
        cfg
    }
}

/// Any document the tool accepts, keyed by `"system"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "lowercase")]
pub enum ConfigDocument {
    Chain(ChainConfig),
    Hbn(HbnConfig),
    Sweep(SweepSpec),
}

impl ConfigDocument {
    pub fn validate(&self) -> Result<()> {
        match self {
            ConfigDocument::Chain(c) => c.validate(),
            ConfigDocument::Hbn(c) => c.validate(),
            ConfigDocument::Sweep(s) => s.validate(),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ConfigDocument::Chain(c) => c.seed,
            ConfigDocument::Hbn(c) => c.seed,
            ConfigDocument::Sweep(s) => s.base.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ConfigDocument> {
        let doc: ConfigDocument = serde_json::from_str(s)?;
        doc.validate()?;
        Ok(doc)
    }

    const MINIMAL: &str =
        r#"{"system":"chain","N":9,"omega0":100,"h":100,"lambda":2,"J":10,"alpha":2,"tau":0.05,"R":800,"engine":"both"}"#;

    #[test]
    fn minimal_chain_matches_benchmark() {
        assert_eq!(parse(MINIMAL).unwrap(), ConfigDocument::Chain(ChainConfig::benchmark()));
    }

    #[test]
    fn misspelled_key_is_named() {
        let err = parse(&MINIMAL.replace("\"lambda\"", "\"lamda\"")).unwrap_err();
        assert!(err.to_string().contains("lamda"), "{err}");
        assert!(err.is_validation());
    }

    #[test]
    fn negative_tau_rejected() {
        let err = parse(&MINIMAL.replace("0.05", "-0.05")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn exact_cap_enforced() {
        let err = parse(&MINIMAL.replace("\"N\":9", "\"N\":12")).unwrap_err();
        assert!(matches!(err, Error::ExceedsExactCap { .. }));
        assert!(parse(&MINIMAL.replace("\"N\":9", "\"N\":12").replace("both", "hpa")).is_ok());
    }

    #[test]
    fn hbn_defaults() {
        let doc = parse(r#"{"system":"hbn","B":1.0,"lattice":{"sites":121},"engine":"hpa","R":500}"#).unwrap();
        let ConfigDocument::Hbn(c) = doc else { panic!() };
        assert_eq!(c, HbnConfig::lattice_run(121, 500, Engine::Hpa));
        let doc = parse(r#"{"system":"hbn","B":1.0,"phi":12.5,"lattice":{"rings":2},"engine":"exact","R":5,"mask":{"rings_up_to":1}}"#).unwrap();
        let ConfigDocument::Hbn(c) = doc else { panic!() };
        assert_eq!(c.phi, Azimuth::Degrees(12.5));
        assert_eq!(c.mask, CouplingMask::RingsUpTo(1));
        assert!(parse(r#"{"system":"hbn","B":1.0,"lattice":{"sites":9},"engine":"hpa","R":5,"constants":{"gama_e":1}}"#).is_err());
        assert!(parse(r#"{"system":"hbn","B":-1.0,"lattice":{"sites":9},"engine":"hpa","R":5}"#).is_err());
    }

    #[test]
    fn sweep_grid_order() {
        let base = serde_json::to_string(&ChainConfig::benchmark()).unwrap();
        let doc = parse(&format!(r#"{{"system":"sweep","base":{base},"axes":[{{"name":"J","values":[1,2]}},{{"name":"lambda","values":[0,1,2]}}]}}"#)).unwrap();
        let ConfigDocument::Sweep(s) = doc else { panic!() };
        assert_eq!(s.point_count(), 6);
        let pts: Vec<_> = (0..6).map(|k| s.point(k)).collect();
        assert_eq!(pts[0], vec![1.0, 0.0]);
        assert_eq!(pts[1], vec![1.0, 1.0]);
        assert_eq!(pts[5], vec![2.0, 2.0]);
        let cfg = s.config_at(&pts[4]);
        assert_eq!((cfg.j, cfg.lambda), (2.0, 1.0));
    }

    #[test]
    fn sweep_rejects_bad_axes() {
        let base = serde_json::to_string(&ChainConfig::benchmark()).unwrap();
        for axes in [r#"[]"#, r#"[{"name":"J","values":[]}]"#, r#"[{"name":"N","values":[2.5]}]"#, r#"[{"name":"J","values":[1]},{"name":"J","values":[2]}]"#] {
            let doc = format!(r#"{{"system":"sweep","base":{base},"axes":{axes}}}"#);
            assert!(parse(&doc).is_err(), "{axes}");
        }
    }
}
