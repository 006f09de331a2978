//! Command-line interface: config-driven runs and sweeps, closed-form
//! queries, phase-matching and materials reports.
//!
//! Exit codes: 0 success, 2 validation/configuration failure, 3 numerical
//! failure. Global flags can also be set through `PLM_ECHO_*` environment
//! variables.

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use plm_echo::config::{Resolved, SimConfig, SweepParameter, SweepSection};
use plm_echo::oracle;
use plm_echo::phasematch;
use plm_echo::propagation::run_timeline;
use plm_echo::protocols::{estimate_noise, validate_timescales};
use plm_echo::report::{envelope_csv, sweep_csv, write_text, RunReport, SweepRow};
use plm_echo::{materials, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "plm-echo", version, about = "Photon-echo quantum memory simulator")]
struct Cli {
    /// Path to the TOML run configuration.
    #[arg(long, global = true, env = "PLM_ECHO_CONFIG", default_value = "plm-echo.toml")]
    config: PathBuf,

    /// Output directory for reports and waveforms.
    #[arg(long, global = true, env = "PLM_ECHO_OUT", default_value = "plm-echo-out")]
    out: PathBuf,

    /// Worker threads for the propagation inner loops (0 = automatic).
    /// Results are identical for any thread count.
    #[arg(long, global = true, env = "PLM_ECHO_THREADS", default_value_t = 0)]
    threads: usize,

    /// Reserved for future stochastic features; accepted and ignored, all
    /// current paths are deterministic.
    #[arg(long, global = true, env = "PLM_ECHO_SEED")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute the configured protocol and write report.json plus echo.csv
    /// and transmitted.csv.
    Run,
    /// Run the configured parameter sweep and write sweep.csv.
    Sweep,
    /// Closed-form queries.
    Oracle {
        #[command(subcommand)]
        what: OracleCmd,
    },
    /// Wavevector bookkeeping report from the config's [geometry] section.
    Phasematch,
    /// Embedded material data.
    Materials {
        #[command(subcommand)]
        what: MaterialsCmd,
    },
    /// Timescale checks (and material feasibility when configured).
    Validate,
}

#[derive(Debug, Subcommand)]
enum OracleCmd {
    /// Retrieval efficiency [2x/(1+x²)]²(1 − e^{−(α_sL+α_eL)/2})².
    Efficiency(OracleArgs),
    /// Efficiency plus transmitted/echo amplitude ratios.
    Summary(OracleArgs),
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Symmetry parameter x; alternatively give --theta0 and
    /// --coupling-ratio.
    #[arg(long)]
    x: Option<f64>,
    #[arg(long)]
    theta0: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    coupling_ratio: f64,
    /// α_s·L.
    #[arg(long = "alpha-sl")]
    alpha_sl: f64,
    /// α_e·L.
    #[arg(long = "alpha-el")]
    alpha_el: f64,
}

#[derive(Debug, Subcommand)]
enum MaterialsCmd {
    /// Print every record.
    List,
    /// Print one record; isotope and site accept "-" for "unspecified".
    Lookup {
        ion: String,
        #[arg(default_value = "-")]
        isotope: String,
        #[arg(default_value = "-")]
        site: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) =
            rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()
        {
            eprintln!("plm-echo: cannot configure {} threads: {e}", cli.threads);
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("plm-echo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run => cmd_run(&cli.config, &cli.out),
        Command::Sweep => cmd_sweep(&cli.config, &cli.out),
        Command::Oracle { what } => cmd_oracle(what),
        Command::Phasematch => cmd_phasematch(&cli.config),
        Command::Materials { what } => cmd_materials(what),
        Command::Validate => cmd_validate(&cli.config),
    }
}

/// Enforce the configured timescale gate before spending time on a run.
fn gate_budget(resolved: &Resolved) -> Result<()> {
    if let Some((budget, margin)) = &resolved.budget {
        let report = validate_timescales(budget, *margin);
        if let Some(fail) = report.first_failure() {
            return Err(Error::InvalidConfig(format!(
                "timescale constraint failed: {} ({} {} {})",
                fail.name, fail.lhs, fail.relation, fail.rhs
            )));
        }
    }
    Ok(())
}

fn cmd_run(config: &Path, out: &Path) -> Result<()> {
    let cfg = SimConfig::from_path(config)?;
    let resolved = cfg.resolve()?;
    gate_budget(&resolved)?;
    let report = run_timeline(&resolved.timeline, &resolved.setup, &resolved.rates)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }

    let mut run_report = RunReport::new(resolved.variant.label(), &report);
    let mut doc = serde_json::to_value(&run_report).expect("report serializes");
    if let Some((noise, n_signal)) = &resolved.noise {
        let est = estimate_noise(noise, report.efficiency, *n_signal)?;
        doc["noise"] = json!({ "mu_noise": est.mu_noise, "snr": est.snr });
    }

    write_text(&out.join("report.json"), &serde_json::to_string_pretty(&doc).unwrap())?;
    write_text(&out.join("echo.csv"), &envelope_csv(&report.echo))?;
    write_text(&out.join("transmitted.csv"), &envelope_csv(&report.transmitted))?;
    write_text(&out.join("effective_config.toml"), &resolved.effective.to_toml())?;
    run_report.warnings.clear();
    println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    Ok(())
}

/// Run one sweep point, returning (simulated, closed-form) efficiencies.
fn sweep_point(base: &SimConfig, parameter: SweepParameter, value: f64) -> Result<(f64, f64)> {
    let mut cfg = base.clone();
    let eta_oracle = match parameter {
        SweepParameter::AlphaL => {
            // equal per-transition depths alpha_s L = alpha_e L = value
            let theta0 = cfg.protocol.theta0_rad;
            let l = cfg.grids.length_m;
            let s2 = (0.5 * theta0).sin().powi(2);
            let c2 = (0.5 * theta0).cos().powi(2);
            cfg.stage.alpha0_s_per_m = value / (l * s2);
            cfg.stage.alpha0_e_per_m = value / (l * c2);
            cfg.stage.coupling_ratio = Some((c2 / s2).sqrt());
            oracle::retrieval_efficiency(1.0, value, value)
        }
        SweepParameter::Theta0 => {
            cfg.protocol.theta0_rad = value;
            let resolved_probe = cfg.resolve()?;
            let stage = &resolved_probe.setup.stage;
            let l = cfg.grids.length_m;
            let x = oracle::symmetry_parameter(stage.coupling_ratio, value)?;
            oracle::retrieval_efficiency(x, stage.alpha_s() * l, stage.alpha_e() * l)
        }
    };
    let resolved = cfg.resolve()?;
    let report = run_timeline(&resolved.timeline, &resolved.setup, &resolved.rates)?;
    Ok((report.efficiency, eta_oracle))
}

fn cmd_sweep(config: &Path, out: &Path) -> Result<()> {
    let cfg = SimConfig::from_path(config)?;
    let sweep: SweepSection = cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::InvalidConfig("sweep command needs a [sweep] section".into()))?;
    if sweep.values.is_empty() {
        return Err(Error::InvalidConfig("sweep values list is empty".into()));
    }
    let resolved = cfg.resolve()?;
    gate_budget(&resolved)?;

    let mut rows = Vec::with_capacity(sweep.values.len());
    for &value in &sweep.values {
        let (sim, oracle_eta) = sweep_point(&cfg, sweep.parameter, value)?;
        rows.push(SweepRow {
            value,
            efficiency_sim: sim,
            efficiency_oracle: oracle_eta,
            abs_error: (sim - oracle_eta).abs(),
        });
    }
    let csv = sweep_csv(&rows);
    write_text(&out.join("sweep.csv"), &csv)?;
    write_text(&out.join("effective_config.toml"), &resolved.effective.to_toml())?;
    print!("{csv}");
    Ok(())
}

fn cmd_oracle(what: &OracleCmd) -> Result<()> {
    let (args, with_amplitudes) = match what {
        OracleCmd::Efficiency(a) => (a, false),
        OracleCmd::Summary(a) => (a, true),
    };
    let x = match (args.x, args.theta0) {
        (Some(x), _) => x,
        (None, Some(theta0)) => oracle::symmetry_parameter(args.coupling_ratio, theta0)?,
        (None, None) => {
            return Err(Error::InvalidArgument(
                "oracle needs either --x or --theta0 (with --coupling-ratio)".into(),
            ))
        }
    };
    let eta = oracle::retrieval_efficiency(x, args.alpha_sl, args.alpha_el);
    let mut doc = json!({
        "x": x,
        "alpha_s_l": args.alpha_sl,
        "alpha_e_l": args.alpha_el,
        "efficiency": eta,
    });
    if with_amplitudes {
        let depth = 0.5 * (args.alpha_sl + args.alpha_el);
        doc["transmitted_amplitude_at_l"] = json!((-0.5 * args.alpha_sl).exp());
        doc["echo_amplitude_at_entry"] =
            json!(2.0 * x / (1.0 + x * x) * (1.0 - (-depth).exp()));
    }
    println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    Ok(())
}

fn cmd_phasematch(config: &Path) -> Result<()> {
    let cfg = SimConfig::from_path(config)?;
    let resolved = cfg.resolve()?;
    let geometry = resolved.geometry.ok_or_else(|| {
        Error::InvalidConfig("phasematch command needs a [geometry] section".into())
    })?;
    let echo = phasematch::echo_wavevector(&geometry)?;
    let mut doc = json!({
        "delta_k_sc": geometry.delta_k_sc().as_array(),
        "k_e": echo.k_e.as_array(),
        "residual_rad": echo.residual,
        "matched": echo.matched,
        "backward": echo.backward,
        "matched_backward": echo.matched_backward,
    });
    if geometry.k_w.is_some() && geometry.k_r1.is_some() {
        let (o1, o2) = phasematch::raman_output_wavevectors(&geometry)?;
        doc["raman"] = json!({ "k_out1": o1.as_array(), "k_out2": o2.as_array() });
    }
    println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    Ok(())
}

fn cmd_materials(what: &MaterialsCmd) -> Result<()> {
    match what {
        MaterialsCmd::List => {
            println!("{}", serde_json::to_string_pretty(materials::records()).unwrap());
        }
        MaterialsCmd::Lookup { ion, isotope, site } => {
            let iso = if isotope == "-" {
                None
            } else {
                Some(isotope.parse::<u32>().map_err(|_| {
                    Error::InvalidArgument(format!("isotope must be a number or '-', got {isotope}"))
                })?)
            };
            let record = materials::lookup(ion, iso, site)?;
            println!("{}", serde_json::to_string_pretty(record).unwrap());
        }
    }
    Ok(())
}

fn cmd_validate(config: &Path) -> Result<()> {
    let cfg = SimConfig::from_path(config)?;
    let resolved = cfg.resolve()?;
    let (budget, margin) = resolved.budget.clone().ok_or_else(|| {
        Error::InvalidConfig("validate command needs a [budget] section".into())
    })?;
    let timescales = validate_timescales(&budget, margin);
    let mut doc = json!({
        "timescales": timescales,
        "all_pass": timescales.all_pass(),
    });
    if let Some(m) = &cfg.material {
        let record = materials::lookup(&m.ion, m.isotope, &m.site)?;
        let feas = materials::feasibility(record, &budget, m.b_tesla)?;
        doc["all_pass"] = json!(timescales.all_pass() && feas.all_pass());
        doc["feasibility"] = serde_json::to_value(&feas).expect("report serializes");
    }
    println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    Ok(())
}
