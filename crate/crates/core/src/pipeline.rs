//! End-to-end analysis: validation, homogeneity, Darboux points, spectra,
//! table verdicts and the final certificate.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::calculus::{detect_homogeneity, Calculus, Homogeneity, Route};
use crate::darboux::{solve_darboux, DarbouxOptions, DarbouxSearch, Gauge, RejectReason};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::mrtable::{certify, Certificate, PointEvidence, TableConfig};
use crate::setup::{AlgebraicSetup, SetupEcho};
use crate::tolerances::Tolerances;
use crate::variety::{validate, ValidationReport};

pub const TOOL_NAME: &str = "algpot";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_SEED: u64 = 20240229;

#[derive(Clone, Debug)]
pub struct AnalyzeOptions {
    pub seed: u64,
    pub n_random: usize,
    pub seeds: Vec<Vec<C64>>,
    pub tol: Tolerances,
    pub table: TableConfig,
    pub allow_numeric_certificate: bool,
    pub include_gauge_eigenvalues: bool,
    pub validation_trials: usize,
    /// Wall-clock timings make reports non-reproducible; off by default.
    pub timings: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            seed: DEFAULT_SEED,
            n_random: 16,
            seeds: Vec::new(),
            tol: Tolerances::default(),
            table: TableConfig::default(),
            allow_numeric_certificate: false,
            include_gauge_eigenvalues: false,
            validation_trials: 8,
            timings: false,
        }
    }
}

impl AnalyzeOptions {
    /// Sets every spectrum-related tolerance from one `--tol` value.
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol.spectrum = tol;
        self.table.tol = tol;
        self
    }

    pub fn darboux_options(&self) -> DarbouxOptions {
        DarbouxOptions {
            seeds: self.seeds.clone(),
            n_random: self.n_random,
            seed: self.seed,
            radius: 2.0,
            tol: self.tol.clone(),
            table: self.table.clone(),
            include_gauge_eigenvalues: self.include_gauge_eigenvalues,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct HomogeneitySection {
    pub weights: Option<Homogeneity>,
    /// Degree `d2/d1` when it is a nonzero integer.
    pub k: Option<i64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub tool: ToolInfo,
    pub setup: SetupEcho,
    pub seed: u64,
    pub random_starts: usize,
    pub user_seeds: usize,
    pub tolerances: Tolerances,
    pub table: TableConfig,
    pub allow_numeric_certificate: bool,
    pub validation: ValidationReport,
    pub calculus_route: Route,
    pub homogeneity: HomogeneitySection,
    pub darboux: DarbouxSearch,
    pub certificate: Certificate,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

impl AnalysisReport {
    /// 10 when an obstruction certificate was emitted, else 0.
    pub fn exit_code(&self) -> i32 {
        self.certificate.kind.exit_code()
    }
}

fn homogeneity_section(setup: &AlgebraicSetup, calc: &Calculus, seed: u64, warnings: &mut Vec<String>) -> HomogeneitySection {
    match detect_homogeneity(setup, &calc.jd, seed) {
        Ok(h) => {
            let k = h.integer_degree().filter(|k| *k != 0);
            if k.is_none() {
                warnings.push(format!(
                    "homogeneity degree {} is not a nonzero integer; the table criterion is not applicable",
                    h.degree
                ));
            }
            HomogeneitySection {
                weights: Some(h),
                k,
                error: None,
            }
        }
        Err(e @ (Error::NotHomogeneous(_) | Error::HomogeneityVerification(_))) => {
            warnings.push(format!("{e}; the table criterion is not applicable"));
            HomogeneitySection {
                weights: None,
                k: None,
                error: Some(e.to_string()),
            }
        }
        Err(e) => {
            warnings.push(format!("homogeneity: {e}"));
            HomogeneitySection {
                weights: None,
                k: None,
                error: Some(e.to_string()),
            }
        }
    }
}

pub fn analyze(setup: &AlgebraicSetup, opts: &AnalyzeOptions, gauge: Option<&dyn Gauge>) -> Result<AnalysisReport> {
    let mut timings = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut BTreeMap<String, f64>| {
        timings.insert(name.to_string(), clock.elapsed().as_secs_f64() * 1e3);
        clock = Instant::now();
    };
    let mut warnings = Vec::new();

    let calc = Calculus::new(setup)?;
    let validation = validate(setup, &calc.jd, opts.validation_trials, opts.seed, opts.tol.critical)?;
    warnings.extend(validation.warnings.iter().cloned());
    lap("validate", &mut timings);

    let homogeneity = homogeneity_section(setup, &calc, opts.seed, &mut warnings);
    lap("homogeneity", &mut timings);

    let darboux = solve_darboux(&calc, homogeneity.weights.as_ref(), &opts.darboux_options(), gauge)?;
    lap("darboux", &mut timings);

    let in_sigma = darboux.rejected.iter().filter(|r| r.reason == RejectReason::SigmaV).count();
    if in_sigma > 0 {
        warnings.push(format!("{in_sigma} Darboux candidate(s) in Sigma(V) rejected"));
        if darboux.accepted.is_empty() {
            warnings.push("all candidate Darboux points lie in Sigma(V); the table criterion is not applicable".into());
        }
    }
    if darboux.accepted.is_empty() {
        warnings.push("no Darboux points found".into());
    }
    for (i, r) in darboux.accepted.iter().enumerate() {
        for note in &r.notes {
            warnings.push(format!("point {i}: {note}"));
        }
    }

    let evidence: Vec<PointEvidence> = darboux
        .accepted
        .iter()
        .enumerate()
        .map(|(i, r)| PointEvidence {
            point_index: i,
            diagonalizable: r.spectrum.as_ref().is_some_and(|s| s.diagonalizable),
            diag_uncertain: r.spectrum.as_ref().is_some_and(|s| s.uncertain),
            in_sigma_v: r.sigma_flag,
            degenerate: r.degenerate,
            verdicts: r.verdicts.clone(),
        })
        .collect();
    let certificate = if homogeneity.k.is_some() && evidence.iter().all(|e| e.degenerate) {
        let mut c = certify(homogeneity.k, &[], opts.allow_numeric_certificate);
        c.reasons.push("no accepted non-degenerate Darboux point".into());
        c
    } else {
        certify(homogeneity.k, &evidence, opts.allow_numeric_certificate)
    };
    lap("spectrum_and_table", &mut timings);

    Ok(AnalysisReport {
        tool: ToolInfo {
            name: TOOL_NAME,
            version: TOOL_VERSION,
        },
        setup: setup.echo(),
        seed: opts.seed,
        random_starts: opts.n_random,
        user_seeds: opts.seeds.len(),
        tolerances: opts.tol.clone(),
        table: opts.table.clone(),
        allow_numeric_certificate: opts.allow_numeric_certificate,
        validation,
        calculus_route: calc.route(),
        homogeneity,
        darboux,
        certificate,
        warnings,
        timings_ms: opts.timings.then_some(timings),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mrtable::CertificateKind;
    use crate::parser::parse_setup;

    #[test]
    fn eq1_no_obstruction() {
        let s = parse_setup("vars q1 q2\next w1 : w1^2 - q1^2 - q2^2\npotential w1^3").unwrap();
        let r = analyze(&s, &AnalyzeOptions::default(), None).unwrap();
        assert_eq!(r.homogeneity.k, Some(3));
        assert!(!r.darboux.accepted.is_empty());
        assert_eq!(r.certificate.kind, CertificateKind::NoObstruction);
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn pathological_example_warns() {
        let s = parse_setup("vars q1 q2\next w1 : w1^2 - q1\npotential w1^5 + q2^2").unwrap();
        let r = analyze(&s, &AnalyzeOptions::default(), None).unwrap();
        assert!(r.darboux.rejected.iter().any(|x| x.reason == RejectReason::SigmaV), "{:#?}", r.darboux);
        assert!(r.warnings.iter().any(|w| w.contains("Sigma(V) rejected")));
        assert_eq!(r.certificate.kind, CertificateKind::NotApplicable);
    }
}
