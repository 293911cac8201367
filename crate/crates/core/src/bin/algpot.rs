use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use algpot::calculus::{detect_homogeneity, Calculus};
use algpot::darboux::solve_darboux;
use algpot::dynamics::{self, IntegrateOptions};
use algpot::mrtable::{check_pair_exact, check_pair_numeric, TableConfig};
use algpot::nbody::{self, NBodyConfig, NBodyGauge};
use algpot::parser::{parse_rational, parse_setup};
use algpot::pipeline::{analyze, AnalysisReport, AnalyzeOptions, DEFAULT_SEED};
use algpot::report::{fmt_c64, parse_complex, parse_vector_file};
use algpot::varode::{build_ve, monodromy_check, Lambda};
use algpot::AlgebraicSetup;

#[derive(Parser)]
#[command(name = "algpot", version, about = "Integrability obstructions for algebraic potentials")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Spectrum, reconstruction and table tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Write the JSON report to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the JSON report on stdout instead of a summary.
    #[arg(long, global = true)]
    json: bool,
    /// Let numeric-mode table mismatches produce a certificate.
    #[arg(long, global = true)]
    allow_numeric_certificate: bool,
    /// Coefficient B of the k = -4 special row.
    #[arg(long, global = true, value_name = "P/Q")]
    k4_coefficient: Option<String>,
    /// Largest denominator for rational reconstruction.
    #[arg(long, global = true)]
    max_den: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on a problem file.
    Analyze {
        /// Problem file.
        file: PathBuf,
        /// Extra Newton starts, one point per line (q, or q followed by w).
        #[arg(long, value_name = "FILE")]
        seeds: Option<PathBuf>,
        /// Number of random Newton starts.
        #[arg(long, default_value_t = 16)]
        random: usize,
        /// Include wall-clock timings (breaks byte-identical output).
        #[arg(long)]
        timings: bool,
    },
    /// Search for Darboux points only.
    Darboux {
        /// Problem file.
        file: PathBuf,
        /// Extra Newton starts, one point per line (q, or q followed by w).
        #[arg(long, value_name = "FILE")]
        seeds: Option<PathBuf>,
        /// Number of random Newton starts.
        #[arg(long, default_value_t = 16)]
        random: usize,
    },
    /// Check a (k, lambda) pair against the admissibility table.
    CheckTable {
        /// Homogeneity degree k.
        #[arg(long, allow_hyphen_values = true)]
        degree: i64,
        /// Rational eigenvalue such as -1/2, checked exactly.
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<String>,
        /// Floating or complex eigenvalue, checked in numeric mode.
        #[arg(long, allow_hyphen_values = true)]
        numeric: Option<String>,
    },
    /// Build the hypergeometric variational equation for (k, lambda).
    Ve {
        #[arg(long, allow_hyphen_values = true)]
        degree: i64,
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        /// Also integrate around the singular points and compare monodromy traces.
        #[arg(long)]
        monodromy: bool,
    },
    /// Integrate the constrained system; CSV samples, JSON summary.
    Simulate {
        /// Problem file.
        file: PathBuf,
        /// Initial state: lines `t`, `q`, `p`, `w` followed by values.
        #[arg(long, value_name = "STATE_FILE")]
        init: PathBuf,
        /// Final time.
        #[arg(long)]
        t_end: f64,
        /// Pull w back onto the fiber after every step.
        #[arg(long)]
        project: bool,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Generate the n-body problem on the variety of mutual distances.
    Nbody {
        /// Number of bodies.
        #[arg(long)]
        n: usize,
        /// Dimension of the ambient space, at least 2.
        #[arg(long)]
        dim: usize,
        /// Comma-separated masses; equal unit masses when omitted.
        #[arg(long)]
        masses: Option<String>,
        /// Problem file destination; stdout when omitted and not analyzing.
        #[arg(long, value_name = "FILE")]
        problem: Option<PathBuf>,
        /// Run the full pipeline, seeded with the known central configurations.
        #[arg(long)]
        analyze: bool,
        /// Keep eigenvalues of the translation and rotation directions in the table check.
        #[arg(long)]
        include_gauge_eigenvalues: bool,
        /// Random starts on top of the central-configuration seeds.
        #[arg(long, default_value_t = 0)]
        random: usize,
    },
}

fn table_config(g: &Global) -> Result<TableConfig> {
    let mut cfg = TableConfig::default();
    if let Some(t) = g.tol {
        cfg.tol = t;
    }
    if let Some(m) = g.max_den {
        cfg.max_den = m;
    }
    if let Some(b) = &g.k4_coefficient {
        cfg.k4_coefficient = parse_rational(b).context("--k4-coefficient")?;
    }
    Ok(cfg)
}

fn analyze_options(g: &Global, random: usize, seeds: Option<&Path>) -> Result<AnalyzeOptions> {
    let mut opts = AnalyzeOptions {
        seed: g.seed,
        n_random: random,
        allow_numeric_certificate: g.allow_numeric_certificate,
        table: table_config(g)?,
        ..AnalyzeOptions::default()
    };
    if let Some(t) = g.tol {
        opts.tol.spectrum = t;
    }
    if let Some(m) = g.max_den {
        opts.tol.max_den = m;
    }
    if let Some(path) = seeds {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        opts.seeds = parse_vector_file(&text).context("seed file")?;
    }
    Ok(opts)
}

fn load_setup(path: &Path) -> Result<AlgebraicSetup> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_setup(&text).with_context(|| format!("parser: {}", path.display()))
}

/// JSON goes to `--out` when given and to stdout with `--json`; otherwise
/// the summary is printed.
fn emit<T: Serialize>(g: &Global, value: &T, summary: impl FnOnce() -> String) -> Result<()> {
    let json = serde_json::to_string_pretty(value)? + "\n";
    if let Some(path) = &g.out {
        fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut stdout = std::io::stdout().lock();
    if g.json {
        stdout.write_all(json.as_bytes())?;
    } else {
        stdout.write_all(summary().as_bytes())?;
    }
    Ok(())
}

fn summarize(r: &AnalysisReport) -> String {
    let mut s = String::new();
    let h = &r.homogeneity;
    match (&h.weights, h.k) {
        (Some(w), Some(k)) => s += &format!("homogeneity: d1 = {}, d2 = {}, weights {:?}, k = {k}\n", w.d1, w.d2, w.kw),
        (Some(w), None) => s += &format!("homogeneity: degree {} (not a nonzero integer)\n", w.degree),
        (None, _) => s += "homogeneity: none\n",
    }
    s += &format!(
        "darboux: {} starts, {} accepted, {} rejected\n",
        r.darboux.starts,
        r.darboux.accepted.len(),
        r.darboux.rejected.len()
    );
    for (i, p) in r.darboux.accepted.iter().enumerate() {
        let coords: Vec<String> = p.point.coords.iter().map(|z| fmt_c64(*z)).collect();
        s += &format!("  point {i}: ({})\n", coords.join(", "));
        if let Some(spec) = &p.spectrum {
            for e in &spec.eigenvalues {
                let exact = e.rational.as_ref().map(|q| format!(" = {q}")).unwrap_or_default();
                let gauge = if e.gauge_multiplicity > 0 {
                    format!(" ({} gauge)", e.gauge_multiplicity)
                } else {
                    String::new()
                };
                s += &format!("    eigenvalue {}{exact} x{}{gauge}\n", fmt_c64(e.value.0), e.multiplicity);
            }
        }
        for v in &p.verdicts {
            let what = if v.matched {
                v.witnesses
                    .iter()
                    .map(|w| w.label.clone())
                    .collect::<Vec<_>>()
                    .join(", ")
            } else {
                "not in table".into()
            };
            s += &format!("    table k = {}: {} -> {what}\n", v.k, fmt_c64(v.eigenvalue.0));
        }
    }
    for rej in &r.darboux.rejected {
        let coords: Vec<String> = rej.point.coords.iter().map(|z| fmt_c64(*z)).collect();
        s += &format!("  {} ({})\n", rej.diagnostic, coords.join(", "));
    }
    for w in &r.warnings {
        s += &format!("warning: {w}\n");
    }
    s += &format!("certificate: {}\n", r.certificate.message);
    for w in &r.certificate.witnesses {
        let exact = w.rational.as_ref().map(|q| format!(" = {q}")).unwrap_or_default();
        s += &format!("  witness: point {} eigenvalue {}{exact}\n", w.point_index, fmt_c64(w.eigenvalue.0));
    }
    for reason in &r.certificate.reasons {
        s += &format!("  {reason}\n");
    }
    s
}

fn run_analysis(g: &Global, report: AnalysisReport) -> Result<u8> {
    let code = report.exit_code();
    emit(g, &report, || summarize(&report))?;
    Ok(code as u8)
}

#[derive(Serialize)]
struct DarbouxOutput {
    homogeneity: Option<algpot::calculus::Homogeneity>,
    homogeneity_error: Option<String>,
    search: algpot::darboux::DarbouxSearch,
}

#[derive(Serialize)]
struct VeOutput {
    ve: algpot::varode::HypergeomVE,
    monodromy: Option<algpot::varode::MonodromyReport>,
}

#[derive(Serialize)]
struct NbodyOutput {
    config: NBodyConfig,
    problem: String,
    seeds_notice: Option<String>,
}

fn run(cli: Cli) -> Result<u8> {
    let g = &cli.global;
    match cli.command {
        Command::Analyze {
            file,
            seeds,
            random,
            timings,
        } => {
            let setup = load_setup(&file)?;
            let mut opts = analyze_options(g, random, seeds.as_deref())?;
            opts.timings = timings;
            let report = analyze(&setup, &opts, None).context("analyze")?;
            run_analysis(g, report)
        }
        Command::Darboux { file, seeds, random } => {
            let setup = load_setup(&file)?;
            let opts = analyze_options(g, random, seeds.as_deref())?;
            let calc = Calculus::new(&setup).context("calculus")?;
            let (homogeneity, homogeneity_error) = match detect_homogeneity(&setup, &calc.jd, g.seed) {
                Ok(h) => (Some(h), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let search = solve_darboux(&calc, homogeneity.as_ref(), &opts.darboux_options(), None).context("darboux")?;
            let out = DarbouxOutput {
                homogeneity,
                homogeneity_error,
                search,
            };
            emit(g, &out, || {
                let mut s = format!("{} accepted, {} rejected\n", out.search.accepted.len(), out.search.rejected.len());
                for p in &out.search.accepted {
                    let coords: Vec<String> = p.point.coords.iter().map(|z| fmt_c64(*z)).collect();
                    s += &format!("  ({})\n", coords.join(", "));
                }
                for r in &out.search.rejected {
                    s += &format!("  {}\n", r.diagnostic);
                }
                s
            })?;
            Ok(0)
        }
        Command::CheckTable { degree, lambda, numeric } => {
            let cfg = table_config(g)?;
            let verdict = match (lambda, numeric) {
                (Some(l), None) => {
                    let l = parse_rational(&l).context("--lambda")?;
                    check_pair_exact(degree, &l, &cfg).context("mrtable")?
                }
                (None, Some(x)) => {
                    let z = parse_complex(&x).ok_or_else(|| anyhow!("--numeric: invalid number `{x}`"))?;
                    check_pair_numeric(degree, z, &cfg).context("mrtable")?
                }
                _ => return Err(anyhow!("give exactly one of --lambda and --numeric")),
            };
            emit(g, &verdict, || {
                if verdict.matched {
                    let labels: Vec<String> = verdict
                        .witnesses
                        .iter()
                        .map(|w| match &w.p {
                            Some(p) => format!("{} (p = {p})", w.label),
                            None => w.label.clone(),
                        })
                        .collect();
                    format!("matched: {}\n", labels.join(", "))
                } else {
                    format!("not matched{}\n", verdict.note.as_ref().map(|n| format!(" ({n})")).unwrap_or_default())
                }
            })?;
            Ok(0)
        }
        Command::Ve { degree, lambda, monodromy } => {
            let lambda = Lambda::parse(&lambda).context("--lambda")?;
            let ve = build_ve(degree, &lambda).context("varode")?;
            let monodromy = if monodromy {
                Some(monodromy_check(&ve, g.tol.unwrap_or(1e-6)).context("varode monodromy")?)
            } else {
                None
            };
            let out = VeOutput { ve, monodromy };
            emit(g, &out, || {
                let e = &out.ve.exponents;
                let inf = match &e.infinity_exact {
                    Some([a, b]) => format!("{a}, {b}"),
                    None => format!("{}, {}", fmt_c64(e.infinity[0].0), fmt_c64(e.infinity[1].0)),
                };
                let mut s = format!(
                    "alpha = {}, beta = {}, gamma = {}\nexponents: z=0 {{{}, {}}}, z=1 {{{}, {}}}, z=inf {{{inf}}}\nFuchs sum = {}\n",
                    out.ve.alpha(),
                    out.ve.beta(),
                    fmt_c64(out.ve.gamma.0),
                    e.zero[0],
                    e.zero[1],
                    e.one[0],
                    e.one[1],
                    e.fuchs_sum
                );
                if let Some(m) = &out.monodromy {
                    for l in &m.loops {
                        s += &format!("monodromy at {}: eigenvalue error {:.3e}\n", l.singularity, l.eigenvalue_error);
                    }
                    s += &format!("product error {:.3e}: {}\n", m.product_error, if m.ok { "ok" } else { "FAILED" });
                }
                s
            })?;
            Ok(0)
        }
        Command::Simulate {
            file,
            init,
            t_end,
            project,
            csv,
        } => {
            let setup = load_setup(&file)?;
            let calc = Calculus::new(&setup).context("calculus")?;
            let text = fs::read_to_string(&init).with_context(|| format!("reading {}", init.display()))?;
            let state = dynamics::parse_state(&calc, &text).context("state file")?;
            let opts = IntegrateOptions {
                project,
                ..IntegrateOptions::default()
            };
            let traj = dynamics::integrate(&calc, &state, t_end, &opts).context("dynamics")?;
            let csv_text = trajectory_csv(&setup, &traj);
            match &csv {
                Some(path) => fs::write(path, csv_text).with_context(|| format!("writing {}", path.display()))?,
                None => std::io::stdout().lock().write_all(csv_text.as_bytes())?,
            }
            let summary = SimulateSummary {
                samples: traj.samples.len(),
                steps: traj.steps,
                termination: traj.termination,
                diagnostic: traj.diagnostic.clone(),
                t_final: traj.last().t,
                energy_drift: traj.energy_drift,
                constraint_drift: traj.constraint_drift,
                projected: project,
            };
            let json = serde_json::to_string_pretty(&summary)? + "\n";
            if let Some(path) = &g.out {
                fs::write(path, &json)?;
            } else if csv.is_some() || g.json {
                std::io::stdout().lock().write_all(json.as_bytes())?;
            } else {
                std::io::stderr().lock().write_all(json.as_bytes())?;
            }
            Ok(0)
        }
        Command::Nbody {
            n,
            dim,
            masses,
            problem,
            analyze: run_pipeline,
            include_gauge_eigenvalues,
            random,
        } => {
            let masses = match masses {
                Some(m) => nbody::parse_masses(&m).context("--masses")?,
                None => vec![num_rational::BigRational::from_integer(1.into()); n],
            };
            let cfg = NBodyConfig::new(n, dim, masses)?;
            let setup = nbody::build(&cfg)?;
            let text = setup.to_problem_text();
            if let Some(path) = &problem {
                fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
            }
            let (seeds, notice) = nbody::central_config_seeds(&cfg);
            if !run_pipeline {
                if problem.is_none() {
                    let out = NbodyOutput {
                        config: cfg,
                        problem: text.clone(),
                        seeds_notice: notice,
                    };
                    emit(g, &out, || text.clone())?;
                }
                return Ok(0);
            }
            if let Some(msg) = &notice {
                eprintln!("notice: {msg}");
            }
            let mut opts = analyze_options(g, random, None)?;
            opts.seeds = seeds;
            opts.include_gauge_eigenvalues = include_gauge_eigenvalues;
            let gauge = NBodyGauge::new(&cfg);
            let report = analyze(&setup, &opts, Some(&gauge)).context("analyze")?;
            run_analysis(g, report)
        }
    }
}

#[derive(Serialize)]
struct SimulateSummary {
    samples: usize,
    steps: usize,
    termination: dynamics::Termination,
    diagnostic: Option<String>,
    t_final: f64,
    energy_drift: f64,
    constraint_drift: f64,
    projected: bool,
}

fn trajectory_csv(setup: &AlgebraicSetup, traj: &dynamics::Trajectory) -> String {
    let mut cols = vec!["t".to_string()];
    let parts = |prefix: &str, names: &[String], cols: &mut Vec<String>| {
        for name in names {
            cols.push(format!("{prefix}{name}_re"));
            cols.push(format!("{prefix}{name}_im"));
        }
    };
    parts("", &setup.q_names, &mut cols);
    parts("p_", &setup.q_names, &mut cols);
    parts("", &setup.w_names, &mut cols);
    cols.extend(["H_re", "H_im", "residual"].map(String::from));
    let mut out = cols.join(",") + "\n";
    for st in &traj.samples {
        let mut row = vec![format!("{}", st.t)];
        for z in st.q.iter().chain(&st.p).chain(&st.w) {
            row.push(format!("{}", z.re));
            row.push(format!("{}", z.im));
        }
        row.push(format!("{}", st.energy.0.re));
        row.push(format!("{}", st.energy.0.im));
        row.push(format!("{}", st.constraint_residual));
        out += &(row.join(",") + "\n");
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

