use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use gfm_core::analysis::{critical_gain, linspace, steady_state_large_signal, sweep, OperatingInputs, ReducedState};
use gfm_core::config::{Config, SystemConfig, BUILTIN_SCENARIOS};
use gfm_core::model::{peak_to_rms, ControllerKind, ControllerParams};
use gfm_core::sim::{simulate_partial, summarize, Summary};
use gfm_core::tuning::{design as design_gains, design_with_stability, droop_curve, DesignReport};
use gfm_core::Error;
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{fmt_f64, write_json, write_table, write_timeseries};
use crate::plot::plot_timeseries;
use crate::{CurveArgs, DesignArgs, EigsweepArgs, SimulateArgs, SteadyArgs, SystemArgs};

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    Error::Config(msg.into()).into()
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))
}

pub fn load_system(args: &SystemArgs) -> Result<SystemConfig> {
    match &args.config {
        Some(path) => Ok(SystemConfig::parse(&read_text(path)?)?),
        None => Ok(SystemConfig::table1()),
    }
}

/// Built-in scenario by name, otherwise a TOML file.
pub fn load_scenario(name: &str) -> Result<Config> {
    if BUILTIN_SCENARIOS.contains(&name) {
        return Ok(Config::builtin(name)?);
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(config_error(format!(
            "`{name}` is neither a built-in scenario ({}) nor a file",
            BUILTIN_SCENARIOS.join(", ")
        )));
    }
    Config::parse(&read_text(path)?).with_context(|| format!("in {name}"))
}

fn parse_pair(s: &str) -> Result<Vec<ControllerKind>> {
    s.split('+').map(|k| k.parse::<ControllerKind>().map_err(Into::into)).collect()
}

fn prepare(name: &str, a: &SimulateArgs) -> Result<Config> {
    let mut cfg = load_scenario(name)?;
    if let Some(k) = a.controller {
        cfg = cfg.with_controllers(&[k])?;
    }
    if let Some(pair) = &a.pair {
        cfg = cfg.with_controllers(&parse_pair(pair)?)?;
    }
    if let Some(d) = a.decimation {
        if d == 0 {
            return Err(config_error("decimation must be at least 1"));
        }
        cfg.output.decimation = d;
    }
    if a.plot {
        cfg.output.plot = true;
    }
    Ok(cfg)
}

#[derive(Debug, Serialize)]
pub struct RunMetrics {
    pub scenario: Option<String>,
    pub controllers: Vec<ControllerKind>,
    pub duration: f64,
    pub step: f64,
    pub decimation: usize,
    pub samples: usize,
    /// Divergence message when the run stopped early.
    pub diverged: Option<String>,
    #[serde(flatten)]
    pub summary: Summary,
}

/// Runs one configuration into `dir`: `timeseries.csv`, `metrics.json` and,
/// if enabled, SVG plots. The CSV is kept when the run diverges.
pub fn run_config(cfg: &Config, dir: &Path) -> Result<RunMetrics> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let system = cfg.build()?;
    let (ts, failure) = simulate_partial(&system, &cfg.simulation())?;
    let csv = dir.join("timeseries.csv");
    write_timeseries(&ts, &csv)?;
    let metrics = RunMetrics {
        scenario: cfg.scenario.name.clone(),
        controllers: cfg.scenario.inverters.iter().map(|i| i.controller).collect(),
        duration: cfg.scenario.duration,
        step: cfg.scenario.step,
        decimation: cfg.output.decimation,
        samples: ts.len(),
        diverged: failure.as_ref().map(|e| e.to_string()),
        summary: summarize(&ts, cfg.omega_0()),
    };
    write_json(&metrics, &dir.join("metrics.json"))?;
    if cfg.output.plot {
        plot_timeseries(&csv, dir)?;
    }
    match failure {
        Some(err) => Err(anyhow::Error::from(err).context(format!("partial results kept in {}", csv.display()))),
        None => Ok(metrics),
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let names: Vec<String> = if a.scenarios.iter().any(|s| s == "all") {
        BUILTIN_SCENARIOS.iter().map(|s| s.to_string()).collect()
    } else {
        a.scenarios.clone()
    };
    let jobs: Vec<(String, Config)> =
        names.iter().map(|n| Ok((job_label(n), prepare(n, a)?))).collect::<Result<_>>()?;
    let nested = jobs.len() > 1;
    let results: Vec<(String, Result<RunMetrics>)> = jobs
        .par_iter()
        .map(|(label, cfg)| {
            let dir = if nested { a.out.join(label) } else { a.out.clone() };
            (label.clone(), run_config(cfg, &dir))
        })
        .collect();

    let mut worst: Option<anyhow::Error> = None;
    for (label, r) in results {
        match r {
            Ok(m) => {
                if let Some(last) = m.summary.last() {
                    let cells: Vec<String> =
                        last.p.iter().zip(&last.q).map(|(p, q)| format!("P = {p:.1} W, Q = {q:.1} var")).collect();
                    println!("{label}: {}", cells.join(" | "));
                }
            }
            Err(e) => {
                eprintln!("{label}: {e:#}");
                if worst.as_ref().is_none_or(|w| crate::exit_code(&e) > crate::exit_code(w)) {
                    worst = Some(e);
                }
            }
        }
    }
    worst.map_or(Ok(()), Err)
}

fn job_label(name: &str) -> String {
    Path::new(name).file_stem().map_or(name.to_string(), |s| s.to_string_lossy().into_owned())
}

fn resolve_bound(text: &str, base: f64) -> Result<f64> {
    let t = text.trim();
    let parsed = match t.strip_suffix(['x', 'X']) {
        Some(k) => k.parse::<f64>().map(|k| k * base),
        None => t.parse::<f64>(),
    };
    parsed.map_err(|_| config_error(format!("bad sweep bound `{text}` (use a number or a multiple like `0.5x`)")))
}

pub fn eigsweep(a: &EigsweepArgs) -> Result<()> {
    let sys = load_system(&a.system)?;
    let base = OperatingInputs {
        v_g: a.v_g,
        omega_g: sys.setpoints.omega_0,
        setpoints: sys.setpoints.with_power(a.p_ref, a.q_ref),
        circuit: sys.circuit,
        params: sys.params(a.controller),
    };
    let base_value = base
        .parameter(&a.param)
        .ok_or_else(|| config_error(format!("unknown parameter `{}` for {}", a.param, a.controller)))?;
    let (from, to) = (resolve_bound(&a.from, base_value)?, resolve_bound(&a.to, base_value)?);
    if a.points < 2 {
        return Err(config_error("a sweep needs at least 2 points"));
    }
    let points = sweep(&a.param, &linspace(from, to, a.points), &base)?;

    let n = ReducedState::dimension(a.controller);
    let mut header = vec![a.param.clone()];
    for k in 1..=n {
        header.push(format!("re_{k}"));
        header.push(format!("im_{k}"));
    }
    header.push("status".into());
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|pt| {
            let mut row = vec![fmt_f64(pt.value)];
            match &pt.eigenvalues {
                Ok(ev) => {
                    for z in ev {
                        row.push(fmt_f64(z.re));
                        row.push(fmt_f64(z.im));
                    }
                    row.push("ok".into());
                }
                Err(e) => {
                    row.extend(std::iter::repeat_n(String::new(), 2 * n));
                    row.push(e.to_string());
                }
            }
            row
        })
        .collect();
    write_table(&a.out, &header, &rows)?;

    let stable = |pt: &gfm_core::analysis::SweepPoint| pt.max_real_part().is_some_and(|m| m < 0.0);
    let first_unstable = points.iter().position(|pt| !stable(pt));
    println!("{} = {base_value:e} at the base point; {} points written to {}", a.param, points.len(), a.out.display());
    match first_unstable {
        None => println!("stable over the whole sweep"),
        Some(0) => println!("unstable from the first point"),
        Some(k) => {
            let last = points[k - 1].value;
            println!("last stable point: {} = {last:e} ({:.3}x base)", a.param, last / base_value);
            if let Ok(c) = critical_gain(&a.param, (last, points[k].value), &base) {
                println!("critical value: {} = {c:e} ({:.3}x base)", a.param, c / base_value);
            }
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum DesignOutput {
    Checked(DesignReport),
    Plain { params: ControllerParams },
}

pub fn design(a: &DesignArgs) -> Result<()> {
    let sys = load_system(&a.system)?;
    let out = match a.controller {
        ControllerKind::Eaho => {
            DesignOutput::Checked(design_with_stability(&sys.ratings, &sys.setpoints, &sys.circuit)?)
        }
        k => DesignOutput::Plain {
            params: design_gains(k, &sys.ratings, &sys.setpoints, sys.droop.omega_p, sys.droop.omega_q)?,
        },
    };
    if a.json {
        println!("{}", serde_json::to_string_pretty(&out)?);
        return Ok(());
    }
    let params = match &out {
        DesignOutput::Checked(r) => r.params,
        DesignOutput::Plain { params } => *params,
    };
    println!("controller: {}", params.kind());
    for name in ["eta", "mu", "eta_e", "mu_e", "m_p", "m_q", "omega_p", "omega_q"] {
        if let Some(v) = params.gain(name) {
            println!("  {name} = {v:.6e}");
        }
    }
    if let DesignOutput::Checked(r) = &out {
        println!("stability: {:?}, max Re(λ) = {:.4}", r.stability.status, r.stability.max_real_part);
        if let Some(c) = r.stability.critical {
            println!("  critical eta_e = {c:.6e}");
        }
        for note in &r.stability.notes {
            println!("  {note}");
        }
    }
    Ok(())
}

/// One row of the steady-state table.
#[derive(Debug, Clone, Serialize)]
pub struct SteadyRow {
    pub v_g_pu: f64,
    pub v_g: f64,
    pub controller: ControllerKind,
    /// `None` when no synchronized equilibrium exists.
    pub p: Option<f64>,
    pub q: Option<f64>,
}

pub fn steady_rows(
    sys: &SystemConfig,
    levels: &[f64],
    kinds: &[ControllerKind],
    p_ref: f64,
    q_ref: f64,
) -> Result<Vec<SteadyRow>> {
    let mut rows = Vec::new();
    for &level in levels {
        for &kind in kinds {
            let v_g = level * peak_to_rms(sys.setpoints.v_p0);
            let inputs = OperatingInputs {
                v_g,
                omega_g: sys.setpoints.omega_0,
                setpoints: sys.setpoints.with_power(p_ref, q_ref),
                circuit: sys.circuit,
                params: sys.params(kind),
            };
            let (p, q) = match steady_state_large_signal(&inputs) {
                Ok(s) => (Some(s.p), Some(s.q)),
                Err(Error::NoSynchronizedEquilibrium) => (None, None),
                Err(e) => return Err(e.into()),
            };
            rows.push(SteadyRow { v_g_pu: level, v_g, controller: kind, p, q });
        }
    }
    Ok(rows)
}

pub fn steady(a: &SteadyArgs) -> Result<()> {
    let sys = load_system(&a.system)?;
    let kinds: Vec<ControllerKind> = match (a.all_controllers, a.controller) {
        (true, _) => ControllerKind::ALL.to_vec(),
        (false, Some(k)) => vec![k],
        (false, None) => vec![ControllerKind::Eaho],
    };
    let rows = steady_rows(&sys, &a.levels, &kinds, a.p_ref, a.q_ref)?;
    let opt = |x: Option<f64>| x.map_or("none".to_string(), |v| format!("{v:.2}"));
    println!("{:>6} {:>9} {:>10} {:>10} {:>10}", "v_g_pu", "v_g", "controller", "p", "q");
    for r in &rows {
        println!("{:>6} {:>9.2} {:>10} {:>10} {:>10}", r.v_g_pu, r.v_g, r.controller.name(), opt(r.p), opt(r.q));
    }
    if let Some(path) = &a.out {
        let header: Vec<String> = ["v_g_pu", "v_g", "controller", "p", "q"].map(String::from).to_vec();
        let cell = |x: Option<f64>| x.map_or(String::new(), fmt_f64);
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|r| vec![fmt_f64(r.v_g_pu), fmt_f64(r.v_g), r.controller.name().into(), cell(r.p), cell(r.q)])
            .collect();
        write_table(path, &header, &body)?;
    }
    Ok(())
}

pub fn curve(a: &CurveArgs) -> Result<()> {
    let sys = load_system(&a.system)?;
    let v_p0 = sys.setpoints.v_p0;
    let range = (a.from * v_p0, a.to * v_p0);
    let curves = ControllerKind::ALL
        .iter()
        .map(|&k| droop_curve(&sys.params(k), range, a.points, &sys.setpoints))
        .collect::<gfm_core::Result<Vec<_>>>()
        .map_err(|e| match e {
            Error::Domain(m) => config_error(m),
            other => anyhow!(other),
        })?;

    let mut header = vec!["v_p".to_string()];
    for k in ControllerKind::ALL {
        header.push(format!("m_p_{k}"));
        header.push(format!("m_q_{k}"));
    }
    let rows: Vec<Vec<String>> = (0..a.points)
        .map(|i| {
            let mut row = vec![fmt_f64(curves[0][i].v_p)];
            for c in &curves {
                row.push(fmt_f64(c[i].m_p));
                row.push(c[i].m_q.map_or(String::new(), fmt_f64));
            }
            row
        })
        .collect();
    match &a.out {
        Some(path) => write_table(path, &header, &rows),
        None => {
            println!("{}", header.join(","));
            for r in rows {
                println!("{}", r.join(","));
            }
            Ok(())
        }
    }
}
