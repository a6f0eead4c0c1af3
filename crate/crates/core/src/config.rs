//! Run configuration: a versioned JSON document plus its validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frequency::{DiophantineReport, Frequency, DEFAULT_QMAX, DEFAULT_RESONANCE_FLOOR};
use crate::symbol::{PotentialSpec, TruncationPolicy};
use crate::weyl::BasisWindow;

pub const SCHEMA_VERSION: u32 = 1;

/// Shown when the smallness constant of the frequency exceeds one half.
pub const SMALLNESS_BANNER: &str = "theoretical condition not met: proceeding is empirical";

const MAX_ORDER: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyConfig {
    pub omega: Vec<f64>,
    /// Declared constant; when absent the value implied by the scan is used.
    #[serde(default)]
    pub gamma: Option<f64>,
    pub tau: f64,
    #[serde(default = "default_qmax")]
    pub qmax_check: i32,
    #[serde(default = "default_floor")]
    pub resonance_floor: f64,
}

fn default_qmax() -> i32 {
    DEFAULT_QMAX
}

fn default_floor() -> f64 {
    DEFAULT_RESONANCE_FLOOR
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub ncut: i32,
    pub margin: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Quantum,
    Classical,
    #[default]
    Both,
}

impl RunMode {
    pub fn quantum(self) -> bool {
        matches!(self, RunMode::Quantum | RunMode::Both)
    }

    pub fn classical(self) -> bool {
        matches!(self, RunMode::Classical | RunMode::Both)
    }
}

impl std::str::FromStr for RunMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(RunMode::Quantum),
            "classical" => Ok(RunMode::Classical),
            "both" => Ok(RunMode::Both),
            _ => Err(Error::Parse(format!(
                "unknown mode `{s}` (quantum|classical|both)"
            ))),
        }
    }
}

/// `"all"`, `"none"` or an explicit list of check names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CheckSelection {
    Keyword(String),
    List(Vec<String>),
}

impl Default for CheckSelection {
    fn default() -> Self {
        CheckSelection::Keyword("all".into())
    }
}

impl CheckSelection {
    pub fn enabled(&self, name: &str) -> bool {
        match self {
            CheckSelection::Keyword(k) => k == "all",
            CheckSelection::List(l) => l.iter().any(|n| n == name),
        }
    }

    pub fn parse(s: &str) -> Self {
        match s {
            "all" | "none" => CheckSelection::Keyword(s.into()),
            _ => CheckSelection::List(
                s.split(',')
                    .map(|n| n.trim().to_string())
                    .filter(|n| !n.is_empty())
                    .collect(),
            ),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            CheckSelection::Keyword(k) if k == "all" || k == "none" => Ok(()),
            CheckSelection::Keyword(k) => Err(Error::Config {
                path: "checks".into(),
                message: format!("expected \"all\", \"none\" or a list, got \"{k}\""),
            }),
            CheckSelection::List(l) => {
                for (i, n) in l.iter().enumerate() {
                    if !crate::checks::CHECK_NAMES.contains(&n.as_str()) {
                        return Err(Error::Config {
                            path: format!("checks[{i}]"),
                            message: format!("unknown check `{n}`"),
                        });
                    }
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative mismatched mass for reality and parity classifications.
    pub symmetry: f64,
    /// Homological residual relative to `||V_k||_rho`.
    pub homological: f64,
    pub literal: f64,
    pub commutator: f64,
    pub linear_rule: f64,
    pub pt_matrix: f64,
    pub hermitian: f64,
    pub divisor: f64,
    pub qnf_imag: f64,
    pub oracle_imag: f64,
    pub pairing: f64,
    pub residual_floor: f64,
    pub eps_parity: f64,
    pub window_stability: f64,
    pub quadrature: f64,
    pub norm_bound: f64,
    /// Floor for the odd orders; the truncation ledger is used when larger.
    pub odd_floor: f64,
    /// Largest allowed `max_hbar ||B_k(hbar)|| / ||b_k||` over the sweep.
    pub sweep_growth: f64,
    pub exponent_low: f64,
    pub exponent_high: f64,
    pub poisson_ratio_low: f64,
    pub poisson_ratio_high: f64,
    pub radius_stability: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            symmetry: 1e-12,
            homological: 1e-12,
            literal: 1e-12,
            commutator: 1e-10,
            linear_rule: 1e-12,
            pt_matrix: 1e-12,
            hermitian: 1e-12,
            divisor: 1e-12,
            qnf_imag: 1e-10,
            oracle_imag: 1e-8,
            pairing: 1e-8,
            residual_floor: 1e-13,
            eps_parity: 1e-12,
            window_stability: 1e-8,
            quadrature: 1e-12,
            norm_bound: 1e-12,
            odd_floor: 1e-12,
            sweep_growth: 2.0,
            exponent_low: 1.7,
            exponent_high: 2.3,
            poisson_ratio_low: 3.5,
            poisson_ratio_high: 4.5,
            radius_stability: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub frequency: FrequencyConfig,
    pub potential: PotentialSpec,
    pub order: usize,
    pub hbar_list: Vec<f64>,
    pub epsilon_list: Vec<f64>,
    pub basis: BasisConfig,
    #[serde(default)]
    pub policy: TruncationPolicy,
    #[serde(default)]
    pub mode: RunMode,
    #[serde(default)]
    pub checks: CheckSelection,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Decreasing `hbar` values for the classical-limit sweep; empty skips it.
    #[serde(default)]
    pub hbar_sweep: Vec<f64>,
    /// Highest order compared against the literal composition sum.
    #[serde(default = "default_literal_order")]
    pub literal_max_order: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub matrix_dump: bool,
    /// Worker threads for the `(eps, hbar)` jobs; 0 uses the rayon default.
    #[serde(default)]
    pub jobs: usize,
}

fn default_literal_order() -> usize {
    4
}

fn default_output() -> PathBuf {
    PathBuf::from("qnf-out")
}

impl RunConfig {
    /// The canonical regression run: golden frequency, one generator
    /// `q = (1,0)`, `m = 1`, `a = 1`, `K = 6`, `N = 10`, margin 4.
    pub fn reference() -> Self {
        let golden = Frequency::golden();
        Self {
            schema_version: SCHEMA_VERSION,
            frequency: FrequencyConfig {
                omega: golden.omega().to_vec(),
                gamma: None,
                tau: golden.tau(),
                qmax_check: DEFAULT_QMAX,
                resonance_floor: DEFAULT_RESONANCE_FLOOR,
            },
            potential: PotentialSpec::new(
                2,
                1.0,
                vec![crate::symbol::Generator::new(vec![1, 0], 1, 1.0)],
            ),
            order: 6,
            hbar_list: vec![1.0],
            epsilon_list: vec![0.05],
            basis: BasisConfig {
                ncut: 10,
                margin: 4,
            },
            policy: TruncationPolicy::default(),
            mode: RunMode::Both,
            checks: CheckSelection::default(),
            tolerances: Tolerances::default(),
            hbar_sweep: vec![0.1, 0.05, 0.025],
            literal_max_order: default_literal_order(),
            output_dir: default_output(),
            matrix_dump: false,
            jobs: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Config {
                path,
                message: format!("{inner} (line {}, column {})", inner.line(), inner.column()),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn window(&self) -> Result<BasisWindow> {
        BasisWindow::new(self.potential.dim, self.basis.ncut, self.basis.margin)
    }

    /// Frequency with `gamma` filled in from the scan when not declared.
    pub fn frequency(&self) -> Result<Frequency> {
        let fc = &self.frequency;
        let wrap = |e: Error| Error::Config {
            path: "frequency".into(),
            message: e.to_string(),
        };
        let probe =
            Frequency::new(fc.omega.clone(), fc.gamma.unwrap_or(1.0), fc.tau).map_err(wrap)?;
        let gamma = match fc.gamma {
            Some(g) => g,
            None => {
                let implied = probe
                    .verify_diophantine(fc.qmax_check)
                    .map_err(wrap)?
                    .implied_gamma;
                if !implied.is_finite() {
                    return Err(Error::Config {
                        path: "frequency.omega".into(),
                        message: "resonant frequency: no finite gamma is implied".into(),
                    });
                }
                implied
            }
        };
        Ok(Frequency::new(fc.omega.clone(), gamma, fc.tau)
            .map_err(wrap)?
            .with_resonance_floor(fc.resonance_floor))
    }

    /// Schema and invariant checks; the smallness condition is reported by
    /// [`validate`], never enforced.
    pub fn check(&self) -> Result<()> {
        let err = |path: &str, message: String| {
            Err(Error::Config {
                path: path.into(),
                message,
            })
        };
        if self.schema_version != SCHEMA_VERSION {
            return err(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            );
        }
        if self.frequency.qmax_check < 1 {
            return err("frequency.qmax_check", "must be at least 1".into());
        }
        if !(self.frequency.resonance_floor >= 0.0) {
            return err("frequency.resonance_floor", "must be non-negative".into());
        }
        let f = self.frequency()?;
        if f.dim() != self.potential.dim {
            return err(
                "potential.dim",
                format!(
                    "potential dimension {} != frequency dimension {}",
                    self.potential.dim,
                    f.dim()
                ),
            );
        }
        self.potential.validate().map_err(|e| Error::Config {
            path: "potential".into(),
            message: e.to_string(),
        })?;
        if self.order == 0 || self.order > MAX_ORDER {
            return err(
                "order",
                format!("must lie in 1..={MAX_ORDER}, got {}", self.order),
            );
        }
        if self.hbar_list.is_empty() {
            return err("hbar_list", "must not be empty".into());
        }
        for (i, &h) in self.hbar_list.iter().enumerate() {
            if !(h > 0.0 && h <= 1.0) {
                return err(
                    &format!("hbar_list[{i}]"),
                    format!("hbar must lie in (0, 1], got {h}"),
                );
            }
        }
        if self.epsilon_list.is_empty() {
            return err("epsilon_list", "must not be empty".into());
        }
        for (i, &e) in self.epsilon_list.iter().enumerate() {
            if !(e.abs() <= 1.0) {
                return err(
                    &format!("epsilon_list[{i}]"),
                    format!("eps must lie in [-1, 1], got {e}"),
                );
            }
        }
        for (i, &h) in self.hbar_sweep.iter().enumerate() {
            if !(h > 0.0 && h <= 1.0) {
                return err(
                    &format!("hbar_sweep[{i}]"),
                    format!("hbar must lie in (0, 1], got {h}"),
                );
            }
            if i > 0 && h >= self.hbar_sweep[i - 1] {
                return err(
                    &format!("hbar_sweep[{i}]"),
                    "values must decrease strictly".into(),
                );
            }
        }
        self.window().map_err(|e| Error::Config {
            path: "basis".into(),
            message: e.to_string(),
        })?;
        self.policy.validate().map_err(|e| Error::Config {
            path: "policy".into(),
            message: e.to_string(),
        })?;
        self.checks.validate()?;
        let t = &self.tolerances;
        let named = [
            ("symmetry", t.symmetry),
            ("homological", t.homological),
            ("literal", t.literal),
            ("commutator", t.commutator),
            ("linear_rule", t.linear_rule),
            ("pt_matrix", t.pt_matrix),
            ("hermitian", t.hermitian),
            ("divisor", t.divisor),
            ("qnf_imag", t.qnf_imag),
            ("oracle_imag", t.oracle_imag),
            ("pairing", t.pairing),
            ("residual_floor", t.residual_floor),
            ("eps_parity", t.eps_parity),
            ("window_stability", t.window_stability),
            ("quadrature", t.quadrature),
            ("norm_bound", t.norm_bound),
            ("odd_floor", t.odd_floor),
            ("sweep_growth", t.sweep_growth),
            ("radius_stability", t.radius_stability),
        ];
        for (name, v) in named {
            if !(v >= 0.0) || !v.is_finite() {
                return err(
                    &format!("tolerances.{name}"),
                    format!("must be finite and non-negative, got {v}"),
                );
            }
        }
        if !(t.exponent_low < t.exponent_high) {
            return err(
                "tolerances.exponent_low",
                "must be below exponent_high".into(),
            );
        }
        if !(t.poisson_ratio_low < t.poisson_ratio_high) {
            return err(
                "tolerances.poisson_ratio_low",
                "must be below poisson_ratio_high".into(),
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub error: Option<String>,
    pub diophantine: Option<DiophantineReport>,
    pub banner: Option<String>,
}

impl ValidationReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(b) = &self.banner {
            let bar = "!".repeat(b.len() + 8);
            out.push_str(&format!("{bar}\n!!! {b} !!!\n{bar}\n"));
        }
        if let Some(d) = &self.diophantine {
            out.push_str(&format!(
                "diophantine scan |q| <= {}: worst q = {:?}, min product = {:e}, implied gamma = {:e}, declared gamma = {:e}, valid = {}\n",
                d.qmax, d.worst_q, d.min_product, d.implied_gamma, d.declared_gamma, d.gamma_valid
            ));
            out.push_str(&format!(
                "smallness constant = {:e}, ok = {}\n",
                d.smallness_value, d.smallness_ok
            ));
        }
        match &self.error {
            None => out.push_str("config valid\n"),
            Some(e) => out.push_str(&format!("config invalid: {e}\n")),
        }
        out
    }
}

pub fn validate(config: &RunConfig) -> ValidationReport {
    let mut report = ValidationReport {
        valid: false,
        error: None,
        diophantine: None,
        banner: None,
    };
    if let Ok(f) = config.frequency() {
        if let Ok(d) = f.verify_diophantine(config.frequency.qmax_check.max(1)) {
            if !d.smallness_ok {
                report.banner = Some(SMALLNESS_BANNER.into());
            }
            report.diophantine = Some(d);
        }
    }
    match config.check() {
        Ok(()) => report.valid = true,
        Err(e) => report.error = Some(e.to_string()),
    }
    report
}

/// Parses and validates a config file; parse failures become an invalid
/// report carrying the field path and position.
pub fn validate_path(path: &Path) -> ValidationReport {
    match RunConfig::load(path) {
        Ok(c) => validate(&c),
        Err(e) => ValidationReport {
            valid: false,
            error: Some(e.to_string()),
            diophantine: None,
            banner: None,
        },
    }
}
