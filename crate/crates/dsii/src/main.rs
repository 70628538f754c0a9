use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dsii::diagnose::{
    compare_loglog, decay_slope, fit_blowup, fit_singularity, rescale_series, Axis, BlowupModel,
    FitQuantity,
};
use dsii::io::{
    read_series, read_snapshot, write_heatmap, write_report, write_series, write_snapshot,
    RunFileConfig,
};
use dsii::model::{
    gaussian_ic, line_soliton, lump, mass, ozawa, sung_check, DsParams, State,
};
use dsii::{Grid2D, C64};

/// Pseudospectral simulator and blow-up diagnostics for Davey-Stewartson II
/// type systems.
#[derive(Parser)]
#[command(name = "dsii", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configured run; writes series, snapshots and a manifest.
    Run {
        /// key=value configuration file
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit the blow-up model to a norm series.
    FitBlowup {
        #[arg(long)]
        series: PathBuf,
        /// fitted quantity: l2dx2 (ln |psi_x|_2^2, normalized) or linf
        #[arg(long, default_value = "l2dx2")]
        quantity: FitQuantity,
        /// plain or loglog
        #[arg(long, default_value = "plain")]
        model: BlowupModel,
        /// number of trailing records to fit
        #[arg(long, default_value_t = 500)]
        window: usize,
        /// also report the plain-vs-loglog fitting errors on this window
        #[arg(long)]
        compare_window: Option<usize>,
        /// report file
        #[arg(long, default_value = "blowup_fit.txt")]
        out: PathBuf,
        /// fitted-curve CSV (t, data, fit)
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Trace the nearest complex singularity from a snapshot's spectrum.
    TraceSingularity {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, default_value = "x")]
        axis: Axis,
        #[arg(long, default_value = "singularity.txt")]
        out: PathBuf,
    },
    /// Dynamical-rescaling post-processing over a directory of snapshots.
    Rescale {
        /// directory containing *.snap files of one run
        #[arg(long)]
        snapshot_dir: PathBuf,
        #[arg(long)]
        series: PathBuf,
        /// per-record CSV (t, L, tau, a_fd)
        #[arg(long, default_value = "rescale_records.csv")]
        out_records: PathBuf,
        /// per-snapshot CSV (t, L, tau, a_integral)
        #[arg(long, default_value = "rescale_snapshots.csv")]
        out_snapshots: PathBuf,
        /// optionally write the rescaled fields here
        #[arg(long)]
        fields_dir: Option<PathBuf>,
    },
    /// Sample an exact solution into a snapshot file.
    Exact(ExactArgs),
    /// Evaluate the global-existence smallness check on a snapshot.
    Sung {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, default_value = "sung.txt")]
        out: PathBuf,
    },
    /// Least-squares decay slope of ln |psi|_inf vs ln t.
    Decay {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        t_min: f64,
        #[arg(long)]
        t_max: f64,
        #[arg(long, default_value = "decay.txt")]
        out: PathBuf,
    },
    /// Export |psi| of a snapshot as a PGM image plus CSV.
    Heatmap {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, default_value = "heatmap.pgm")]
        out: PathBuf,
        #[arg(long, default_value = "heatmap.csv")]
        csv: PathBuf,
    },
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct ExactArgs {
    /// gaussian | lump | ozawa | line-soliton
    #[arg(long)]
    kind: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 256)]
    nx: usize,
    #[arg(long, default_value_t = 256)]
    ny: usize,
    #[arg(long, default_value_t = 2.0 * std::f64::consts::PI)]
    halfwidth_x: f64,
    #[arg(long, default_value_t = 2.0 * std::f64::consts::PI)]
    halfwidth_y: f64,
    /// parameters recorded in the snapshot header
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = -1.0)]
    rho: f64,
    /// evaluation time of the exact solution
    #[arg(long, default_value_t = 0.0)]
    t: f64,
    // gaussian
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    // lump: c and z0 as "re,im"
    #[arg(long, default_value = "1,0")]
    c: String,
    #[arg(long, default_value = "0,0")]
    z0: String,
    #[arg(long, default_value_t = 0.0)]
    v1: f64,
    #[arg(long, default_value_t = 0.0)]
    v2: f64,
    // ozawa
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = -1.0)]
    b: f64,
    // line soliton
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
}

fn parse_complex(s: &str) -> Result<C64> {
    let (re, im) = s
        .split_once(',')
        .with_context(|| format!("expected 're,im', got '{s}'"))?;
    Ok(C64::new(re.trim().parse()?, im.trim().parse()?))
}

fn main() {
    if let Err(e) = dispatch() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config } => cmd_run(&config),
        Command::FitBlowup {
            series,
            quantity,
            model,
            window,
            compare_window,
            out,
            curve,
        } => cmd_fit_blowup(&series, quantity, model, window, compare_window, &out, curve),
        Command::TraceSingularity {
            snapshot,
            axis,
            out,
        } => cmd_trace(&snapshot, axis, &out),
        Command::Rescale {
            snapshot_dir,
            series,
            out_records,
            out_snapshots,
            fields_dir,
        } => cmd_rescale(&snapshot_dir, &series, &out_records, &out_snapshots, fields_dir),
        Command::Exact(args) => cmd_exact(&args),
        Command::Sung { snapshot, out } => cmd_sung(&snapshot, &out),
        Command::Decay {
            series,
            t_min,
            t_max,
            out,
        } => cmd_decay(&series, t_min, t_max, &out),
        Command::Heatmap { snapshot, out, csv } => {
            let state = read_snapshot(&snapshot)?;
            write_heatmap(&out, &csv, &state.psi)?;
            println!("wrote {} and {}", out.display(), csv.display());
            Ok(())
        }
    }
}

fn cmd_run(config_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let file_cfg = RunFileConfig::parse(&text)?;
    let (run_cfg, stepper_cfg) = file_cfg.build()?;
    let out_dir = PathBuf::from(&file_cfg.output_dir);
    std::fs::create_dir_all(&out_dir)?;

    let started = Instant::now();
    let mut snap_index = 0usize;
    let snap_dir = out_dir.clone();
    let outcome = dsii::integrate::run(run_cfg, stepper_cfg, |state| {
        let path = snap_dir.join(format!("snap_{snap_index:05}.snap"));
        snap_index += 1;
        write_snapshot(&path, state).map_err(|e| std::io::Error::other(e.to_string()))
    })?;
    let wall = started.elapsed().as_secs_f64();

    write_series(&out_dir.join("series.csv"), &outcome.series)?;
    let mut entries = vec![("config_file", config_path.display().to_string())];
    for line in text.lines() {
        let line = line.trim();
        if !line.is_empty() && !line.starts_with('#') {
            entries.push(("config", line.to_string()));
        }
    }
    entries.push(("stop_reason", outcome.stop.kind.to_string()));
    entries.push(("t_stop", outcome.stop.t_stop.to_string()));
    entries.push(("stop_detail", outcome.stop.detail.clone()));
    entries.push(("steps_recorded", outcome.series.len().to_string()));
    entries.push(("snapshots_written", snap_index.to_string()));
    entries.push(("wall_time_s", format!("{wall:.3}")));
    for w in &outcome.warnings {
        entries.push(("warning", w.clone()));
    }
    write_report(&out_dir.join("manifest.txt"), &entries)?;
    println!(
        "run finished: {} at t = {} ({} records, {:.1}s)",
        outcome.stop.kind,
        outcome.stop.t_stop,
        outcome.series.len(),
        wall
    );
    Ok(())
}

fn cmd_fit_blowup(
    series_path: &Path,
    quantity: FitQuantity,
    model: BlowupModel,
    window: usize,
    compare_window: Option<usize>,
    out: &Path,
    curve: Option<PathBuf>,
) -> Result<()> {
    let series = read_series(series_path)?;
    let fit = fit_blowup(&series, quantity, model, window)?;
    let mut entries = vec![
        ("series", series_path.display().to_string()),
        ("model", fit.model.to_string()),
        ("window", fit.window.to_string()),
        ("t_star", fit.t_star.to_string()),
        ("kappa1", fit.kappa1.to_string()),
        ("kappa2", fit.kappa2.to_string()),
        ("delta2", fit.delta2.to_string()),
        ("converged", fit.converged.to_string()),
    ];
    if let Some(w) = compare_window {
        let (plain, loglog) = compare_loglog(&series, quantity, w)?;
        entries.push(("compare_window", w.to_string()));
        entries.push(("delta2_plain", plain.delta2.to_string()));
        entries.push(("delta2_loglog", loglog.delta2.to_string()));
    }
    write_report(out, &entries)?;

    if let Some(curve_path) = curve {
        let records = &series.records()[series.len() - window..];
        let norm0 = series.records()[0].l2_dx;
        let mut text = String::from("t,data,fit\n");
        for r in records {
            let y = match quantity {
                FitQuantity::LnL2DxSq => ((r.l2_dx / norm0).powi(2)).ln(),
                FitQuantity::LnLinf => r.linf.ln(),
            };
            let l = (fit.t_star - r.t).ln();
            let basis = match fit.model {
                BlowupModel::Plain => l,
                BlowupModel::LogLog => l - l.abs().ln().ln(),
            };
            let yf = fit.kappa1 * basis + fit.kappa2;
            text.push_str(&format!("{},{},{}\n", r.t, y, yf));
        }
        std::fs::write(&curve_path, text)?;
    }
    println!(
        "t* = {:.6}, kappa1 = {:.4}, kappa2 = {:.4}, delta2 = {:.3e}",
        fit.t_star, fit.kappa1, fit.kappa2, fit.delta2
    );
    Ok(())
}

fn cmd_trace(snapshot: &Path, axis: Axis, out: &Path) -> Result<()> {
    let state = read_snapshot(snapshot)?;
    let hat = match state.psi.repr() {
        dsii::Repr::Spectral => state.psi,
        dsii::Repr::Physical => state.psi.to_spectral()?,
    };
    let fit = fit_singularity(&hat, axis)?;
    write_report(
        out,
        &[
            ("snapshot", snapshot.display().to_string()),
            ("t", state.t.to_string()),
            ("delta", fit.delta.to_string()),
            ("mu", fit.mu.to_string()),
            ("c0", fit.c0.to_string()),
            ("k_lo", fit.k_window.0.to_string()),
            ("k_hi", fit.k_window.1.to_string()),
            ("modes_used", fit.modes_used.to_string()),
            ("residual", fit.residual.to_string()),
            ("m_x", hat.grid().m_x().to_string()),
        ],
    )?;
    println!("delta = {:.6e}, mu = {:.4}, residual = {:.3e}", fit.delta, fit.mu, fit.residual);
    Ok(())
}

fn cmd_rescale(
    snapshot_dir: &Path,
    series_path: &Path,
    out_records: &Path,
    out_snapshots: &Path,
    fields_dir: Option<PathBuf>,
) -> Result<()> {
    let series = read_series(series_path)?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(snapshot_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "snap"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no *.snap files in {}", snapshot_dir.display());
    }
    let mut params: Option<DsParams> = None;
    let mut snaps = Vec::new();
    for p in &paths {
        let s = read_snapshot(p)?;
        if let Some(q) = params {
            if q != s.params {
                bail!("snapshots in {} mix parameter sets", snapshot_dir.display());
            }
        }
        params = Some(s.params);
        snaps.push((s.t, s.psi));
    }
    let rs = rescale_series(&snaps, &series, params.unwrap())?;

    let mut text = String::from("t,l,tau,a_fd\n");
    for r in &rs.records {
        text.push_str(&format!("{},{},{},{}\n", r.t, r.l, r.tau, r.a_fd));
    }
    std::fs::write(out_records, text)?;

    let mut text = String::from("t,l,tau,a_integral\n");
    for s in &rs.snapshots {
        text.push_str(&format!("{},{},{},{}\n", s.t, s.l, s.tau, s.a_integral));
    }
    std::fs::write(out_snapshots, text)?;

    if let Some(dir) = fields_dir {
        std::fs::create_dir_all(&dir)?;
        for (i, s) in rs.snapshots.iter().enumerate() {
            let state = State::new(s.t, s.psi_rescaled.clone(), params.unwrap())?;
            write_snapshot(&dir.join(format!("rescaled_{i:05}.snap")), &state)?;
        }
    }
    println!(
        "rescaled {} records, {} snapshots",
        rs.records.len(),
        rs.snapshots.len()
    );
    Ok(())
}

fn cmd_exact(args: &ExactArgs) -> Result<()> {
    let grid = Grid2D::new(args.nx, args.ny, args.halfwidth_x, args.halfwidth_y)?;
    let params = DsParams::new(args.epsilon, args.beta, args.rho)?;
    let psi = match args.kind.as_str() {
        "gaussian" => gaussian_ic(grid, args.eta, args.amplitude)?,
        "lump" => lump(
            grid,
            parse_complex(&args.c)?,
            parse_complex(&args.z0)?,
            args.v1,
            args.v2,
            args.t,
        )?,
        "ozawa" => ozawa(grid, args.a, args.b, args.t)?,
        "line-soliton" => line_soliton(grid, args.alpha)?,
        other => bail!("unknown exact solution '{other}'"),
    };
    let m = mass(&psi);
    let state = State {
        t: args.t,
        psi,
        params,
    };
    write_snapshot(&args.out, &state)?;
    println!("wrote {} (mass = {m:.6})", args.out.display());
    Ok(())
}

fn cmd_sung(snapshot: &Path, out: &Path) -> Result<()> {
    let state = read_snapshot(snapshot)?;
    let check = sung_check(&state.psi)?;
    write_report(
        out,
        &[
            ("snapshot", snapshot.display().to_string()),
            ("product", check.product.to_string()),
            ("threshold", check.threshold.to_string()),
            ("satisfied", check.satisfied.to_string()),
        ],
    )?;
    println!(
        "product = {:.6}, threshold = {:.6}, satisfied = {}",
        check.product, check.threshold, check.satisfied
    );
    Ok(())
}

fn cmd_decay(series_path: &Path, t_min: f64, t_max: f64, out: &Path) -> Result<()> {
    let series = read_series(series_path)?;
    let slope = decay_slope(&series, t_min, t_max)?;
    write_report(
        out,
        &[
            ("series", series_path.display().to_string()),
            ("t_min", t_min.to_string()),
            ("t_max", t_max.to_string()),
            ("slope", slope.to_string()),
        ],
    )?;
    println!("slope = {slope:.4}");
    Ok(())
}
