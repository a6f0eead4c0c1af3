//! End-to-end run: normal forms, the check suite, spectral comparison,
//! scaling, sweep and diagnostics, persisted as flat files.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::checks::{self as ck, Check, Probes};
use crate::config::{RunConfig, Tolerances, SMALLNESS_BANNER};
use crate::error::{Error, Result};
use crate::frequency::{DiophantineReport, Frequency};
use crate::nf::{
    cnf, convergence_diagnostics, normal_form, qnf, ConvergenceDiagnostics, NormalFormResult,
    OrderRecord, NORMS_CSV_HEADER,
};
use crate::spectra::{
    match_spectra, oracle_interior_imag, scaling_with_floor, sweep_from_results, CheckStatus,
    ScalingRecord, SpectralSummary, SweepRecord,
};
use crate::symbol::{build_potential, Symbol, TruncationPolicy, MAX_INDEX};
use crate::weyl::{assemble_h, BasisWindow};

pub const REPORT_FILE: &str = "report.json";
pub const NORMS_FILE: &str = "norms.csv";

#[derive(Debug, Clone, Serialize)]
pub struct CheckCounts {
    pub pass: usize,
    pub fail: usize,
    pub vacuous: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalFormSummary {
    pub mode: &'static str,
    pub hbar: Option<f64>,
    pub records: Vec<OrderRecord>,
    pub cumulative_dropped: f64,
    pub file: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectraEntry {
    pub eps: f64,
    pub hbar: f64,
    pub file: Option<String>,
    pub summary: Option<SpectralSummary>,
    pub oracle_max_interior_imag: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingEntry {
    pub hbar: f64,
    #[serde(flatten)]
    pub record: ScalingRecord,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsEntry {
    pub scope: String,
    #[serde(flatten)]
    pub diagnostics: ConvergenceDiagnostics,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub status: CheckStatus,
    pub counts: CheckCounts,
    /// The config as run, without the output location and thread count.
    pub config: serde_json::Value,
    pub diophantine: DiophantineReport,
    pub smallness_banner: Option<String>,
    pub checks: Vec<Check>,
    pub normal_forms: Vec<NormalFormSummary>,
    pub spectra: Vec<SpectraEntry>,
    pub scaling: Vec<ScalingEntry>,
    pub sweep: Option<SweepRecord>,
    pub diagnostics: Vec<DiagnosticsEntry>,
    pub files: Vec<String>,
}

impl Report {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    pub fn failed(&self) -> bool {
        self.report.status == CheckStatus::Fail
    }
}

/// Collects checks that are enabled in the config, skipping the work for
/// the rest.
struct Suite<'a> {
    config: &'a RunConfig,
    checks: Vec<Check>,
}

impl Suite<'_> {
    fn on(&self, name: &str) -> bool {
        self.config.checks.enabled(name)
    }

    fn add(&mut self, name: &str, f: impl FnOnce() -> Result<Check>) -> Result<()> {
        if self.on(name) {
            self.checks.push(f()?);
        }
        Ok(())
    }
}

pub fn spectra_file(eps: f64, hbar: f64) -> String {
    format!("spectra_{eps}_{hbar}.csv")
}

pub fn nf_file(r: &NormalFormResult) -> String {
    match r.mode {
        crate::nf::Mode::Quantum => format!("nf_{}.txt", r.hbar),
        crate::nf::Mode::Classical => "nf_classical.txt".into(),
    }
}

pub fn matrix_file(eps: f64, hbar: f64) -> String {
    format!("matrix_{eps}_{hbar}.bin")
}

/// Runs the config and writes every artifact into `config.output_dir`.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.check()?;
    if config.jobs > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::Config {
                path: "jobs".into(),
                message: e.to_string(),
            })?;
        pool.install(|| run_inner(config))
    } else {
        run_inner(config)
    }
}

fn run_inner(config: &RunConfig) -> Result<RunOutcome> {
    let out = config.output_dir.clone();
    fs::create_dir_all(&out)?;
    let f = config.frequency()?;
    let w = config.window()?;
    let tol = &config.tolerances;
    let mut suite = Suite {
        config,
        checks: Vec::new(),
    };
    let mut files = Vec::new();

    let dioph = f.verify_diophantine(config.frequency.qmax_check)?;
    info!(
        "diophantine scan: implied gamma {:e}, smallness {:e}",
        dioph.implied_gamma, dioph.smallness_value
    );
    suite.add("diophantine_gamma", || Ok(ck::diophantine_gamma(&dioph)))?;
    suite.add("small_divisor_inverse", || {
        ck::small_divisor_inverse(&f, config.frequency.qmax_check.min(10), tol.divisor)
    })?;

    let v = build_potential(&config.potential)?;
    let probes = Probes::from_spec(&config.potential, &f)?;
    symbol_checks(&mut suite, &v, &probes, &f, tol)?;

    let quantum: Vec<NormalFormResult> = if config.mode.quantum() {
        config
            .hbar_list
            .iter()
            .map(|&h| {
                info!("quantum normal form at hbar = {h}");
                qnf(&v, &f, h, config.order, &config.policy)
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let classical = if config.mode.classical() {
        info!("classical normal form");
        Some(cnf(&v, &f, config.order, &config.policy)?)
    } else {
        None
    };

    for r in quantum.iter().chain(classical.iter()) {
        nf_checks(&mut suite, r, &v, config)?;
    }
    if let Some(c) = &classical {
        suite.add("classical_lie_transform", || {
            ck::classical_lie_transform(c, &v, config.order.min(8), tol.literal)
        })?;
    }
    for r in &quantum {
        weyl_checks(&mut suite, r, &v, &probes, &w, &f, tol)?;
    }
    if let Some(r) = quantum.first() {
        let eps = config
            .epsilon_list
            .iter()
            .copied()
            .find(|&e| e != 0.0)
            .unwrap_or(0.05);
        suite.add("x_independent_consistency", || {
            ck::x_independent_consistency(
                &probes.flat,
                &f,
                r.hbar,
                eps,
                &w,
                &config.policy,
                tol.symmetry,
            )
        })?;
    }

    let (spectra, scaling) = spectral_jobs(&mut suite, &quantum, &v, &w, &f, &out, &mut files)?;

    let sweep = match (&classical, config.hbar_sweep.is_empty()) {
        (Some(c), false) => {
            let runs = config
                .hbar_sweep
                .iter()
                .map(|&h| {
                    info!("sweep normal form at hbar = {h}");
                    qnf(&v, &f, h, config.order, &config.policy)
                })
                .collect::<Result<Vec<_>>>()?;
            let s = sweep_from_results(c, &runs)?;
            sweep_checks(&mut suite, &s, tol);
            Some(s)
        }
        _ => None,
    };

    let mut diagnostics = Vec::new();
    for r in quantum.iter().chain(classical.iter()) {
        diagnostics.push(DiagnosticsEntry {
            scope: scope_label(r),
            diagnostics: convergence_diagnostics(r, config.policy.rho),
        });
    }
    if let Some(r) = quantum.first().or(classical.as_ref()) {
        suite.add("radius_stability", || {
            radius_stability(r, &v, &config.policy, tol.radius_stability)
        })?;
    }

    let mut normal_forms = Vec::new();
    let mut norms = format!("{NORMS_CSV_HEADER}\n");
    for r in quantum.iter().chain(classical.iter()) {
        let name = nf_file(r);
        fs::write(out.join(&name), r.to_text())?;
        files.push(name.clone());
        norms.push_str(&r.norms_csv_rows());
        normal_forms.push(NormalFormSummary {
            mode: r.mode.as_str(),
            hbar: (r.mode == crate::nf::Mode::Quantum).then_some(r.hbar),
            records: r.records.clone(),
            cumulative_dropped: r.cumulative_dropped(),
            file: name,
        });
    }
    fs::write(out.join(NORMS_FILE), norms)?;
    files.push(NORMS_FILE.into());
    files.push(REPORT_FILE.into());
    files.sort();

    let checks = suite.checks;
    let counts = CheckCounts {
        pass: checks
            .iter()
            .filter(|c| c.status == CheckStatus::Pass)
            .count(),
        fail: checks
            .iter()
            .filter(|c| c.status == CheckStatus::Fail)
            .count(),
        vacuous: checks
            .iter()
            .filter(|c| c.status == CheckStatus::Vacuous)
            .count(),
    };
    let mut echo = serde_json::to_value(config)?;
    if let Some(map) = echo.as_object_mut() {
        map.remove("output_dir");
        map.remove("jobs");
    }
    let report = Report {
        schema_version: crate::config::SCHEMA_VERSION,
        status: if counts.fail > 0 {
            CheckStatus::Fail
        } else {
            CheckStatus::Pass
        },
        counts,
        config: echo,
        smallness_banner: (!dioph.smallness_ok).then(|| SMALLNESS_BANNER.to_string()),
        diophantine: dioph,
        checks,
        normal_forms,
        spectra,
        scaling,
        sweep,
        diagnostics,
        files,
    };
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    fs::write(out.join(REPORT_FILE), json)?;
    Ok(RunOutcome {
        report,
        out_dir: out,
    })
}

fn scope_label(r: &NormalFormResult) -> String {
    match r.mode {
        crate::nf::Mode::Quantum => ck::hbar_scope(r.hbar),
        crate::nf::Mode::Classical => "classical".into(),
    }
}

fn symbol_checks(
    suite: &mut Suite,
    v: &Symbol,
    p: &Probes,
    f: &Frequency,
    tol: &Tolerances,
) -> Result<()> {
    let config = suite.config;
    suite.add("potential_reality", || {
        Ok(ck::potential_reality(v, tol.symmetry))
    })?;
    suite.add("potential_parity", || {
        Ok(ck::potential_parity(v, tol.symmetry))
    })?;
    for &h in &config.hbar_list {
        suite.add("bracket_antisymmetry", || {
            ck::bracket_antisymmetry(p, h, f, 0.0)
        })?;
        suite.add("bracket_bilinearity", || {
            ck::bracket_bilinearity(p, h, f, tol.symmetry)
        })?;
        suite.add("bracket_zero_x_independent", || {
            ck::bracket_zero_x_independent(p, h, f)
        })?;
        suite.add("bracket_imaginary_closure", || {
            ck::bracket_imaginary_closure(p, h, f, tol.symmetry)
        })?;
        suite.add("bracket_parity_rule", || {
            ck::bracket_parity_rule(p, h, f, tol.symmetry)
        })?;
    }
    suite.add("poisson_limit", || {
        ck::poisson_limit(
            p,
            f,
            config.policy.rho,
            tol.poisson_ratio_low,
            tol.poisson_ratio_high,
        )
    })?;
    suite.add("multiplicative_reduction", || {
        ck::multiplicative_reduction(v, f, tol.quadrature)
    })?;
    Ok(())
}

fn nf_checks(
    suite: &mut Suite,
    r: &NormalFormResult,
    v: &Symbol,
    config: &RunConfig,
) -> Result<()> {
    let tol = &config.tolerances;
    suite.add("reality_B", || Ok(ck::reality_b(r, tol.symmetry)))?;
    suite.add("imaginary_W", || Ok(ck::imaginary_w(r, tol.symmetry)))?;
    suite.add("odd_vanishing", || Ok(ck::odd_vanishing(r, tol.odd_floor)))?;
    suite.add("parity_ladder", || Ok(ck::parity_ladder(r, tol.symmetry)))?;
    suite.add("homological_residual", || {
        ck::homological_residual(r, tol.homological)
    })?;
    suite.add("literal_vs_graded", || {
        ck::literal_vs_graded(r, v, config.literal_max_order, tol.literal)
    })?;
    Ok(())
}

fn weyl_checks(
    suite: &mut Suite,
    r: &NormalFormResult,
    v: &Symbol,
    p: &Probes,
    w: &BasisWindow,
    f: &Frequency,
    tol: &Tolerances,
) -> Result<()> {
    let h = r.hbar;
    suite.add("l_bracket_oracle", || {
        ck::l_bracket_oracle(v, h, w, f, tol.linear_rule)
    })?;
    suite.add("commutator_oracle", || {
        ck::commutator_oracle(p, h, w, f, tol.commutator)
    })?;
    suite.add("pt_matrix", || ck::pt_matrix(v, h, w, f, tol.pt_matrix))?;
    suite.add("midpoint_rule", || {
        ck::midpoint_rule(&p.flat, h, w, f, tol.symmetry)
    })?;
    suite.add("operator_norm_bound", || {
        ck::operator_norm_bound(v, h, w, f, tol.norm_bound)
    })?;
    suite.add("real_even_hermitian", || {
        ck::real_even_hermitian(&p.even, h, w, f, tol.hermitian)
    })?;
    suite.add("qnf_reality", || Ok(ck::qnf_reality(r, w, tol.qnf_imag)))?;
    Ok(())
}

struct JobOutput {
    entry: SpectraEntry,
    checks: Vec<Check>,
    scaling: Option<ScalingEntry>,
    files: Vec<(String, Vec<u8>)>,
}

#[allow(clippy::too_many_arguments)]
fn spectral_job(
    config: &RunConfig,
    r: &NormalFormResult,
    v: &Symbol,
    eps: f64,
    w: &BasisWindow,
    f: &Frequency,
    stability: bool,
) -> Result<JobOutput> {
    let tol = &config.tolerances;
    let on = |name: &str| config.checks.enabled(name);
    let scope = ck::job_scope(eps, r.hbar);
    info!("spectral comparison at {scope}");
    let mut checks = Vec::new();
    let mut files = Vec::new();
    if config.matrix_dump {
        let mut bytes = Vec::new();
        assemble_h(v, eps, r.hbar, w, f)?.write_dump(&mut bytes, r.hbar, eps, f)?;
        files.push((matrix_file(eps, r.hbar), bytes));
    }
    let table = match match_spectra(r, v, eps, w, tol.pairing) {
        Ok(t) => t,
        Err(Error::ComplexEigenvalue { order, n, re, im }) => {
            let imag = oracle_interior_imag(v, eps, r.hbar, w, f)?;
            let note = format!("B_{order} is complex at n = {n:?} ({re:e} + {im:e}i)");
            if on("spectral_residual") {
                checks.push(Check::failed("spectral_residual", scope.clone(), note));
            }
            if on("oracle_reality") {
                checks.push(Check::at_most(
                    "oracle_reality",
                    scope.clone(),
                    imag,
                    tol.oracle_imag,
                ));
            }
            let entry = SpectraEntry {
                eps,
                hbar: r.hbar,
                file: None,
                summary: None,
                oracle_max_interior_imag: imag,
            };
            return Ok(JobOutput {
                entry,
                checks,
                scaling: None,
                files,
            });
        }
        Err(e) => return Err(e),
    };
    let s = &table.summary;
    if on("spectral_residual") {
        let status = if s.max_interior_residual.is_finite() {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        let mut c = Check::at_most(
            "spectral_residual",
            scope.clone(),
            s.max_interior_residual,
            f64::INFINITY,
        );
        c.tolerance = None;
        c.status = status;
        checks.push(c);
    }
    if on("oracle_reality") {
        checks.push(Check::at_most(
            "oracle_reality",
            scope.clone(),
            s.max_interior_imag,
            tol.oracle_imag,
        ));
    }
    if on("pairing") {
        checks.push(Check::at_most(
            "pairing",
            scope.clone(),
            s.flagged_rows as f64,
            0.0,
        ));
    }
    if on("eps_parity") {
        checks.push(ck::eps_parity(r, w, eps, tol.eps_parity));
    }
    let mut scaling = None;
    if eps != 0.0 && on("order_scaling") {
        let half = match_spectra(r, v, eps / 2.0, w, tol.pairing)?;
        let rec = scaling_with_floor(
            eps,
            r.order,
            s.max_interior_residual,
            half.summary.max_interior_residual,
            tol.residual_floor,
        );
        let mut c = Check::within(
            "order_scaling",
            scope.clone(),
            rec.ratio,
            rec.lower,
            rec.upper,
        );
        c.status = rec.status;
        if rec.status == CheckStatus::Vacuous {
            c.note = Some("both residuals below the floating-point floor".into());
        }
        checks.push(c);
        scaling = Some(ScalingEntry {
            hbar: r.hbar,
            record: rec,
        });
    }
    if stability && on("window_stability") {
        checks.push(ck::window_stability(
            r,
            v,
            eps,
            w,
            &table,
            tol.window_stability,
        )?);
    }
    let name = spectra_file(eps, r.hbar);
    files.push((name.clone(), table.to_csv().into_bytes()));
    let entry = SpectraEntry {
        eps,
        hbar: r.hbar,
        file: Some(name),
        oracle_max_interior_imag: s.max_interior_imag,
        summary: Some(table.summary),
    };
    Ok(JobOutput {
        entry,
        checks,
        scaling,
        files,
    })
}

/// Independent `(eps, hbar)` jobs in parallel, merged in config order.
fn spectral_jobs(
    suite: &mut Suite,
    quantum: &[NormalFormResult],
    v: &Symbol,
    w: &BasisWindow,
    f: &Frequency,
    out: &Path,
    files: &mut Vec<String>,
) -> Result<(Vec<SpectraEntry>, Vec<ScalingEntry>)> {
    let config = suite.config;
    let mut jobs = Vec::new();
    for &eps in &config.epsilon_list {
        for r in quantum {
            jobs.push((eps, r));
        }
    }
    let first_nonzero = jobs.iter().position(|(e, _)| *e != 0.0);
    let results: Vec<Result<JobOutput>> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(eps, r))| spectral_job(config, r, v, eps, w, f, Some(i) == first_nonzero))
        .collect();
    let (mut spectra, mut scaling) = (Vec::new(), Vec::new());
    for res in results {
        let job = res?;
        for (name, bytes) in job.files {
            fs::write(out.join(&name), bytes)?;
            files.push(name);
        }
        suite.checks.extend(job.checks);
        spectra.push(job.entry);
        scaling.extend(job.scaling);
    }
    Ok((spectra, scaling))
}

fn sweep_checks(suite: &mut Suite, s: &SweepRecord, tol: &Tolerances) {
    let scope = format!("hbar={:?}", s.hbars);
    let mut growth: f64 = 0.0;
    for o in s.orders.iter().filter(|o| o.classical_norm > 0.0) {
        if suite.on("classical_limit") {
            let c = match o.exponent {
                Some(e) => Check::within(
                    "classical_limit",
                    format!("k={},{scope}", o.k),
                    e,
                    tol.exponent_low,
                    tol.exponent_high,
                ),
                None => Check::vacuous(
                    "classical_limit",
                    format!("k={},{scope}", o.k),
                    o.deviations.iter().copied().fold(0.0, f64::max),
                    "deviation at the floating-point floor",
                ),
            };
            suite.checks.push(c);
        }
        growth = growth.max(o.norms.iter().copied().fold(0.0, f64::max) / o.classical_norm);
    }
    if suite.on("sweep_uniform_bound") {
        suite.checks.push(Check::at_most(
            "sweep_uniform_bound",
            scope,
            growth,
            tol.sweep_growth,
        ));
    }
}

/// Relative change of the radius estimate when both truncation caps double.
fn radius_stability(
    r: &NormalFormResult,
    v: &Symbol,
    policy: &TruncationPolicy,
    tol: f64,
) -> Result<Check> {
    let wide = TruncationPolicy {
        qmax: (2 * policy.qmax).min(MAX_INDEX),
        mmax: (2 * policy.mmax).min(MAX_INDEX),
        ..*policy
    };
    let again = normal_form(v, &r.frequency, r.bracket_kind(), r.order, &wide)?;
    let a = convergence_diagnostics(r, policy.rho).radius;
    let b = convergence_diagnostics(&again, policy.rho).radius;
    let scope = format!("{},caps {}->{}", scope_label(r), policy.qmax, wide.qmax);
    Ok(match (a, b) {
        (Some(a), Some(b)) => Check::at_most("radius_stability", scope, (b - a).abs() / a, tol),
        (None, None) => Check::vacuous("radius_stability", scope, 0.0, "every B_k vanishes"),
        _ => Check::failed("radius_stability", scope, "radius defined for only one cap"),
    })
}
