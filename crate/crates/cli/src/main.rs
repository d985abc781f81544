use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use modal_ofb::config::RunConfig;
use modal_ofb::design::{default_tail_count, design_for, scaling_sweep, ControllerDesign};
use modal_ofb::fit::{decay_fit, fit_loglog_slope};
use modal_ofb::io::{trajectory_table, write_state_dump, Cell, Table};
use modal_ofb::par::Execution;
use modal_ofb::sensors::{check_partition, minimal_sensor_lines, volume_threshold};
use modal_ofb::sim::{simulate_scenario, Kind, Trajectory};
use modal_ofb::spectral::{bly_lower_bound, SpectralBasis};
use modal_ofb::{verify, Error};

/// Environment variable overriding the output directory.
const OUT_ENV: &str = "MODAL_OFB_OUT";

#[derive(Parser, Debug)]
#[command(
    name = "modal-ofb",
    version,
    about = "Modal boundary control of a semilinear heat equation on a rectangle"
)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvalue table with bounds and trace norms.
    Spectrum,
    /// Gain, stability margin and conditioning for one (N, m), or a sweep.
    Design {
        /// Sweep N over A..=B and write the scaling table.
        #[arg(long, value_name = "A:B")]
        sweep: Option<String>,
        /// Exit 0 even when the margin is not positive.
        #[arg(long)]
        allow_uncertified: bool,
    },
    /// Volume threshold, minimal sensor lines and the configured partition.
    Sensors,
    /// Integrate a scenario and write its trajectory.
    Simulate {
        #[arg(long, value_enum, default_value_t = KindArg::Output)]
        kind: KindArg,
    },
    /// Run the acceptance suite.
    Verify,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Open,
    State,
    Output,
}

impl From<KindArg> for Kind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Open => Kind::OpenLoop,
            KindArg::State => Kind::StateFeedback,
            KindArg::Output => Kind::OutputFeedback,
        }
    }
}

enum Failure {
    /// Bad invocation or configuration: exit 2.
    Usage(String),
    /// A check or diagnostic failed: exit 1.
    Diagnostic(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Lipschitz(_) => Failure::Usage(e.to_string()),
            other => Failure::Diagnostic(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Diagnostic(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Diagnostic(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let cfg = match &cli.config {
        Some(path) if !path.exists() => {
            return Err(Failure::Usage(format!("config file {} does not exist", path.display())));
        }
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let out = output_dir(cli.out.as_deref(), &cfg);
    let seed = cli.seed.unwrap_or(if cfg.run.seed != 0 {
        cfg.run.seed
    } else {
        verify::DEFAULT_SEED
    });
    match cli.command {
        Command::Spectrum => spectrum(&cfg, &out),
        Command::Design { sweep: Some(range), .. } => sweep(&cfg, &out, &range),
        Command::Design {
            sweep: None,
            allow_uncertified,
        } => design(&cfg, &out, allow_uncertified),
        Command::Sensors => sensors(&cfg, &out),
        Command::Simulate { kind } => simulate(&cfg, &out, kind.into()),
        Command::Verify => run_verify(&out, seed),
    }
}

fn output_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_ENV) {
        return PathBuf::from(p);
    }
    PathBuf::from(cfg.run.out.clone().unwrap_or_else(|| "out".into()))
}

fn write_table(table: &Table, dir: &Path, name: &str) -> CmdResult {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    table.write_path(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_text(dir: &Path, name: &str, text: &str) -> CmdResult {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn spectrum(cfg: &RunConfig, out: &Path) -> CmdResult {
    let domain = cfg.domain()?;
    let basis = SpectralBasis::enumerate(domain, cfg.galerkin.spectrum_count)?;
    let mut table = Table::new(["n", "jx", "ky", "lambda", "bly_bound", "weyl_ratio", "trace_norm_sq"]);
    for m in basis.modes() {
        table
            .push(vec![
                m.rank.into(),
                m.jx.into(),
                m.ky.into(),
                m.lambda.into(),
                bly_lower_bound(m.rank, 2, domain.area())?.into(),
                basis.weyl_ratio(m.rank)?.into(),
                m.trace_norm_sq.into(),
            ])
            .map_err(Failure::from)?;
    }
    for row in table.rows.iter().take(10) {
        println!("{}", row.iter().map(Cell::to_string).collect::<Vec<_>>().join("  "));
    }
    write_table(&table, out, "spectrum.csv")
}

fn matrix_table(m: &nalgebra::DMatrix<f64>) -> Table {
    let mut t = Table::new((1..=m.ncols()).map(|j| format!("col_{j}")));
    for r in 0..m.nrows() {
        t.rows.push((0..m.ncols()).map(|c| Cell::Float(m[(r, c)])).collect());
    }
    t
}

fn design_report(d: &ControllerDesign, tail: usize) -> String {
    let g = &d.diagnostics;
    let mut s = String::new();
    s.push_str(&format!("n = {}\nm = {}\ntail_count = {tail}\n", d.n, d.m));
    s.push_str(&format!(
        "lambda_next = {:.16e}\nmargin = {:.16e}\ncertified = {}\n",
        d.lambda_next, d.margin, d.certified
    ));
    s.push_str(&format!("norm_k = {:.16e}\n", g.norm_k));
    s.push_str(&format!(
        "gain_residual = {:.6e}\ngain_relative_residual = {:.6e}\n",
        g.gain_residual, g.gain_relative_residual
    ));
    s.push_str(&format!("condition_mb_minus_c = {:.6e}\n", g.condition));
    s.push_str(&format!(
        "closed_loop_inverse_norm = {:.6e}\nclosed_loop_rank = {}\nfactored_inverse_bound = {:.6e}\n",
        g.closed_loop_inverse_norm, g.closed_loop_rank, g.factored_inverse_bound
    ));
    s.push_str(&format!(
        "zeta_sum = {:.16e}\nzeta_penalty = {:.16e}\nzeta_tail_share = {:.3e}\n",
        g.zeta_sum, g.zeta_penalty, g.tail_estimate
    ));
    s.push_str(&format!(
        "inverse_formula_mismatch = {:.3e}\ninverse_diagonally_dominant = {}\nmin_lifting_gap = {:.6e}\n",
        g.inverse_formula_mismatch, g.inverse_diagonally_dominant, g.min_lifting_gap
    ));
    s
}

fn design(cfg: &RunConfig, out: &Path, allow_uncertified: bool) -> CmdResult {
    let domain = cfg.domain()?;
    let n = cfg.controller.n;
    let tail = cfg.galerkin.tail_count.unwrap_or_else(|| default_tail_count(n));
    let d = design_for(domain, n, cfg.controller.m, Some(tail))?;
    println!("K =");
    for r in 0..d.k.nrows() {
        let row: Vec<String> = (0..d.k.ncols()).map(|c| format!("{:>12.4e}", d.k[(r, c)])).collect();
        println!("  {}", row.join(" "));
    }
    let report = design_report(&d, tail);
    print!("{report}");
    write_table(&matrix_table(&d.k), out, "gain.csv")?;
    write_text(out, "design.txt", &report)?;
    if d.certified || allow_uncertified {
        if !d.certified {
            log::warn!("design is not certified (margin {:.3e})", d.margin);
        }
        Ok(())
    } else {
        Err(Failure::Diagnostic(format!(
            "design not certified: margin {:.6e} (pass --allow-uncertified to accept)",
            d.margin
        )))
    }
}

fn parse_range(s: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::Usage(format!("--sweep expects A:B with 1 <= A <= B, got `{s}`"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || a > b {
        return Err(bad());
    }
    Ok((a, b))
}

fn sweep(cfg: &RunConfig, out: &Path, range: &str) -> CmdResult {
    let (a, b) = parse_range(range)?;
    let ns: Vec<usize> = (a..=b).collect();
    let m = cfg.controller.sweep_m;
    let rows = scaling_sweep(cfg.domain()?, &ns, m, cfg.galerkin.tail_count, Execution::Parallel);
    let mut table = Table::new([
        "n",
        "m",
        "norm_k",
        "zeta_sum",
        "zeta_penalty",
        "closed_loop_inverse_norm",
        "closed_loop_rank",
        "margin",
        "status",
    ]);
    for r in &rows {
        table.rows.push(vec![
            r.n.into(),
            r.m.into(),
            r.norm_k.into(),
            r.zeta_sum.into(),
            r.zeta_penalty.into(),
            r.closed_loop_inverse_norm.into(),
            r.closed_loop_rank.into(),
            r.margin.into(),
            r.status.as_str().into(),
        ]);
    }
    write_table(&table, out, "sweep.csv")?;
    let ok: Vec<_> = rows.iter().filter(|r| r.is_ok()).collect();
    let xs: Vec<f64> = ok.iter().map(|r| r.n as f64).collect();
    for (name, ys) in [
        ("norm_k", ok.iter().map(|r| r.norm_k).collect::<Vec<_>>()),
        ("zeta_sum", ok.iter().map(|r| r.zeta_sum).collect()),
        (
            "closed_loop_inverse_norm",
            ok.iter().map(|r| r.closed_loop_inverse_norm).collect(),
        ),
    ] {
        match fit_loglog_slope(&xs, &ys) {
            Ok(s) => println!("slope {name}: {:+.4} ± {:.4}", s.slope, s.stderr),
            Err(e) => println!("slope {name}: {e}"),
        }
    }
    let failed = rows.len() - ok.len();
    if failed > 0 {
        return Err(Failure::Diagnostic(format!(
            "{failed} sweep rows failed; see the status column"
        )));
    }
    Ok(())
}

fn sensors(cfg: &RunConfig, out: &Path) -> CmdResult {
    let lipschitz = cfg.nonlinearity.lipschitz;
    let domain = cfg.domain()?;
    let threshold = volume_threshold(2, lipschitz)?;
    let minimal = minimal_sensor_lines(lipschitz, domain)?;
    let configured = cfg.partition()?;
    let check = check_partition(&configured, lipschitz);
    let mut s = String::new();
    s.push_str(&format!(
        "lipschitz = {lipschitz}\nvolume_threshold_2d = {threshold:.16e}\n"
    ));
    s.push_str(&format!(
        "minimal_lines = {}\nminimal_vertical = {}\nminimal_horizontal = {}\n",
        minimal.total, minimal.vertical, minimal.horizontal
    ));
    s.push_str(&format!(
        "minimal_vertical_positions = {:?}\n",
        minimal.partition.vertical_lines()
    ));
    s.push_str(&format!(
        "minimal_horizontal_positions = {:?}\n",
        minimal.partition.horizontal_lines()
    ));
    s.push_str(&format!(
        "minimal_decay_margin = {:.16e}\n",
        minimal.partition.decay_margin(lipschitz)
    ));
    s.push_str(&format!("configured_vertical = {:?}\n", configured.vertical_lines()));
    s.push_str(&format!(
        "configured_horizontal = {:?}\n",
        configured.horizontal_lines()
    ));
    s.push_str(&format!(
        "configured_satisfied = {}\nconfigured_margin = {:.16e}\nconfigured_envelope_rate = {:.16e}\n",
        check.satisfied, check.margin, check.envelope_rate
    ));
    print!("{s}");
    write_text(out, "sensors.txt", &s)
}

/// Samples where a subdomain error exceeds `|eps_i(0)| e^{(L - lambda_i1) t}`.
fn envelope_violations(traj: &Trajectory, first_eigenvalues: &[f64], lipschitz: f64) -> usize {
    let Some(first) = traj.samples.first() else { return 0 };
    traj.samples
        .iter()
        .map(|s| {
            s.subdomain_eps
                .iter()
                .zip(&first.subdomain_eps)
                .zip(first_eigenvalues)
                .filter(|((now, start), lam)| **now > **start * ((lipschitz - **lam) * s.t).exp() * (1.0 + 1e-6))
                .count()
        })
        .sum()
}

fn simulate(cfg: &RunConfig, out: &Path, kind: Kind) -> CmdResult {
    let sc = cfg.scenario()?;
    let traj = simulate_scenario(kind, &sc)?;
    write_table(&trajectory_table(&traj), out, "trajectory.csv")?;
    if sc.keep_states {
        fs::create_dir_all(out)?;
        let f = fs::File::create(out.join("states.bin"))?;
        write_state_dump(&traj, std::io::BufWriter::new(f))?;
    }
    let t = traj.times();
    let rate = |v: Vec<f64>| match decay_fit(&t, &v, (0.0, f64::INFINITY)) {
        Ok(f) => format!("{:.6e}", f.rate),
        Err(e) => format!("\"{e}\""),
    };
    let mut s = String::new();
    s.push_str(&format!("kind = \"{kind:?}\"\nconfig_hash = {}\n", traj.config_hash));
    s.push_str(&format!("complete = {}\n", traj.is_complete()));
    if let Some(c) = traj.certified {
        s.push_str(&format!(
            "certified = {c}\nmargin = {:.6e}\n",
            traj.margin.unwrap_or(f64::NAN)
        ));
    }
    s.push_str(&format!(
        "decay_rate_z = {}\ndecay_rate_p = {}\n",
        rate(traj.norm_z()),
        rate(traj.norm_p())
    ));
    let mut violations = 0;
    let mut guaranteed = false;
    if kind == Kind::OutputFeedback {
        s.push_str(&format!("decay_rate_eps = {}\n", rate(traj.norm_eps())));
        let partition = sc.partition()?;
        guaranteed = check_partition(&partition, sc.lipschitz).satisfied;
        violations = envelope_violations(&traj, partition.first_eigenvalues(), sc.lipschitz);
        s.push_str(&format!(
            "partition_certified = {guaranteed}\nenvelope_violations = {violations}\n"
        ));
    }
    if let (Some(first), Some(last)) = (traj.samples.first(), traj.last()) {
        s.push_str(&format!(
            "t_final = {}\nnorm_z_ratio = {:.6e}\n",
            last.t,
            last.norm_z / first.norm_z
        ));
    }
    s.push_str(&format!(
        "steps_accepted = {}\nsteps_rejected = {}\nforcing_evals = {}\n",
        traj.stats.accepted, traj.stats.rejected, traj.stats.forcing_evals
    ));
    print!("{s}");
    write_text(out, "summary.txt", &s)?;
    if let Some(reason) = &traj.failure {
        return Err(Failure::Diagnostic(format!("integration stopped early: {reason}")));
    }
    if guaranteed && violations > 0 {
        return Err(Failure::Diagnostic(format!(
            "{violations} observer envelope violations"
        )));
    }
    Ok(())
}

fn run_verify(out: &Path, seed: u64) -> CmdResult {
    let results = verify::run_all(Execution::Parallel, seed);
    let mut table = Table::new(["id", "name", "passed", "elapsed_s", "budget_s", "detail"]);
    for r in &results {
        println!("{}", r.line());
        table.rows.push(vec![
            r.id.into(),
            r.name.into(),
            if r.passed { "true" } else { "false" }.into(),
            r.elapsed_s.into(),
            r.budget_s.into(),
            r.detail.as_str().into(),
        ]);
    }
    write_table(&table, out, "verify.csv")?;
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    if failed.is_empty() {
        println!("all {} checks passed", results.len());
        Ok(())
    } else {
        Err(Failure::Diagnostic(format!("failed checks: {}", failed.join(", "))))
    }
}
