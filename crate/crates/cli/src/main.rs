//! `maryland`: verification suites, cocycles, renormalization chains and
//! function grids for the Maryland model.
//!
//! Exit codes: 0 success, 1 check failure, 2 invalid input, 3 numerical
//! failure.

mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maryland::minsol::MinSolContext;
use maryland::renorm::{cascade, cascade_within_budget, renormalize_once, CascadeOptions, RenormChain};
use maryland::sigma::SigmaContext;
use maryland::{cocycle_product_with, run_verification, Error, ScaledMat2C, SpectralParams, VerifyConfig};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

use config::{Format, RunConfig, ScanParam, Settings};

#[derive(Debug, Parser)]
#[command(name = "maryland", version, about = "Renormalization of the Maryland-model cocycle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Run every identity check and write a JSON report.
    Verify,
    /// The product P_N: entries and log scale.
    Cocycle,
    /// The renormalization chain, one row per level.
    Renorm,
    /// sigma on a grid.
    Sigma,
    /// The minimal solution on a grid.
    Minsol,
    /// Renormalization identity error while one parameter varies.
    Scan,
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

/// Inputs that no computation can repair map to 2, the rest to 3.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_)
        | Error::RationalFrequency { .. }
        | Error::PotentialPole { .. }
        | Error::SingularFundamental { .. } => 2,
        _ => 3,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn params_json(p: &SpectralParams) -> Value {
    json!({
        "omega": p.omega,
        "theta": p.theta,
        "eta": p.eta,
        "l": p.l,
        "energy": p.energy(),
        "lambda": p.coupling(),
    })
}

fn complex_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn matrix_json(m: &ScaledMat2C) -> Value {
    let [a, b, c, d] = m.mat.entries();
    json!({
        "entries": [[complex_json(a), complex_json(b)], [complex_json(c), complex_json(d)]],
        "log_scale": m.log_scale,
    })
}

/// Output text plus whether every check passed.
struct Output {
    text: String,
    passed: bool,
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn cmd_verify(cfg: &RunConfig) -> Result<Output, Failure> {
    let mut vc = VerifyConfig::new(cfg.params, cfg.n);
    vc.tol_scale = cfg.tol.unwrap_or(1.0);
    vc.precision = cfg.precision;
    vc.depth = cfg.depth;
    let report = run_verification(&vc)?;
    let text = match cfg.format {
        Format::Json => json_text(&serde_json::to_value(&report).expect("report serializes")),
        Format::Csv => {
            let mut s = String::from("anchor,residual,tolerance,passed\n");
            for c in &report.checks {
                let r = c.residual.map(num).unwrap_or_default();
                s += &format!("{},{},{},{}\n", c.anchor, r, num(c.tolerance), c.passed);
            }
            s
        }
    };
    Ok(Output {
        text,
        passed: report.all_passed,
    })
}

fn cmd_cocycle(cfg: &RunConfig) -> Result<Output, Failure> {
    let m = cocycle_product_with(&cfg.params, cfg.n, cfg.precision)?;
    let text = match cfg.format {
        Format::Json => json_text(&json!({
            "params": params_json(&cfg.params),
            "n": cfg.n,
            "product": matrix_json(&m),
        })),
        Format::Csv => {
            let mut s = String::from("n,log_scale,a11_re,a11_im,a12_re,a12_im,a21_re,a21_im,a22_re,a22_im\n");
            s += &format!("{},{}", cfg.n, num(m.log_scale));
            for z in m.mat.entries() {
                s += &format!(",{},{}", num(z.re), num(z.im));
            }
            s.push('\n');
            s
        }
    };
    Ok(Output { text, passed: true })
}

fn chain(cfg: &RunConfig) -> Result<RenormChain, Error> {
    let mut opts = CascadeOptions {
        precision: cfg.precision,
        ..CascadeOptions::default()
    };
    if let Some(d) = cfg.depth {
        opts.max_depth = d;
    }
    if let Some(t) = cfg.tol {
        opts.error_budget = t;
    }
    if cfg.strict {
        cascade(&cfg.params, cfg.n, &opts)
    } else {
        cascade_within_budget(&cfg.params, cfg.n, &opts)
    }
}

fn cmd_renorm(cfg: &RunConfig) -> Result<Output, Failure> {
    let c = chain(cfg)?;
    let rows: Vec<(SpectralParams, i64, Option<f64>)> = c
        .levels
        .iter()
        .zip(&c.conditions)
        .map(|(s, &k)| (s.params, s.n_steps, Some(k)))
        .chain(std::iter::once((c.terminal_params, c.terminal_n, None)))
        .collect();
    let text = match cfg.format {
        Format::Json => {
            let levels: Vec<Value> = rows
                .iter()
                .enumerate()
                .map(|(k, (p, n, cond))| {
                    json!({
                        "k": k,
                        "params": params_json(p),
                        "n": n,
                        "condition": cond,
                        "error_estimate": c.error_estimates.get(k),
                    })
                })
                .collect();
            json_text(&json!({
                "levels": levels,
                "predicted_error": c.predicted_error(),
                "terminal_product": matrix_json(&c.terminal_product),
            }))
        }
        Format::Csv => {
            let mut s = String::from("k,omega,theta,eta,l,n,condition\n");
            for (k, (p, n, cond)) in rows.iter().enumerate() {
                let cond = cond.map(num).unwrap_or_default();
                s += &format!(
                    "{k},{},{},{},{},{n},{cond}\n",
                    num(p.omega),
                    num(p.theta),
                    num(p.eta),
                    num(p.l)
                );
            }
            s
        }
    };
    Ok(Output { text, passed: true })
}

/// One grid value: `Some` unless the point is within tolerance of a
/// lattice or pole point.
type GridValue = Result<Option<Complex64>, Error>;

fn grid_output(cfg: &RunConfig, eval: impl Fn(Complex64) -> GridValue + Sync) -> Result<Output, Failure> {
    let pts = cfg.grid.points();
    let values: Vec<GridValue> = pts.par_iter().map(|&(x, y)| eval(Complex64::new(x, y))).collect();
    let mut rows = Vec::new();
    let mut skipped = 0;
    for (&(x, y), v) in pts.iter().zip(values) {
        match v? {
            Some(f) => rows.push((x, y, f)),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        eprintln!("skipped {skipped} grid points near lattice or pole points");
    }
    let text = match cfg.format {
        Format::Json => {
            let pts: Vec<Value> = rows
                .iter()
                .map(|&(x, y, f)| json!({"z": [x, y], "f": complex_json(f), "log_abs": f.norm().ln()}))
                .collect();
            json_text(&json!({"params": params_json(&cfg.params), "points": pts}))
        }
        Format::Csv => {
            let mut s = String::from("re_z,im_z,re_f,im_f,log_abs\n");
            for &(x, y, f) in &rows {
                s += &format!("{},{},{},{},{}\n", num(x), num(y), num(f.re), num(f.im), num(f.norm().ln()));
            }
            s
        }
    };
    Ok(Output { text, passed: true })
}

fn cmd_sigma(cfg: &RunConfig) -> Result<Output, Failure> {
    let ctx = SigmaContext::new(cfg.params.omega)?;
    grid_output(cfg, |z| {
        let v = ctx.log_sigma(z)?;
        Ok((!v.is_near_singular()).then(|| v.value()))
    })
}

fn cmd_minsol(cfg: &RunConfig) -> Result<Output, Failure> {
    let ctx = MinSolContext::new(cfg.params)?;
    grid_output(cfg, |z| match ctx.eval(z) {
        Ok(f) => Ok(Some(f)),
        Err(Error::MinSolPole { .. }) => Ok(None),
        Err(e) => Err(e),
    })
}

/// `‖L P_{N₁} R − P_N‖ / ‖P_N‖` for one renormalization step.
fn identity_error(p: &SpectralParams, n: i64, cfg: &RunConfig) -> Result<(f64, f64), Error> {
    let direct = cocycle_product_with(p, n, cfg.precision)?;
    let once = renormalize_once(p, n)?;
    let (inner, n1) = once.inner();
    let rebuilt = once.reconstruct(&cocycle_product_with(&inner, n1, cfg.precision)?);
    Ok((direct.log_scale, rebuilt.relative_distance(&direct)))
}

fn cmd_scan(cfg: &RunConfig) -> Result<Output, Failure> {
    let tol = cfg.tol.unwrap_or(1e-7);
    let (a, b) = cfg.range;
    let values: Vec<f64> = (0..cfg.steps)
        .map(|i| if cfg.steps == 1 { a } else { a + (b - a) * i as f64 / (cfg.steps - 1) as f64 })
        .collect();
    let results: Vec<Result<(f64, f64), Error>> = values
        .par_iter()
        .map(|&v| {
            let mut p = cfg.params;
            match cfg.scan {
                ScanParam::Omega => p.omega = v,
                ScanParam::Theta => p.theta = v,
                ScanParam::Eta => p.eta = v,
                ScanParam::L => p.l = v,
            }
            p.validate()?;
            identity_error(&p, cfg.n, cfg)
        })
        .collect();
    let status = |r: &Result<(f64, f64), Error>| match r {
        Ok((_, e)) if *e < tol => "pass".to_string(),
        Ok(_) => "fail".to_string(),
        Err(e) if exit_code(e) == 2 => "invalid".to_string(),
        Err(_) => "numerical".to_string(),
    };
    let passed = results.iter().all(|r| status(r) == "pass");
    let param = format!("{:?}", cfg.scan).to_lowercase();
    let text = match cfg.format {
        Format::Json => {
            let rows: Vec<Value> = values
                .iter()
                .zip(&results)
                .enumerate()
                .map(|(i, (v, r))| {
                    let (scale, err) = r.as_ref().map(|&(s, e)| (Some(s), Some(e))).unwrap_or((None, None));
                    json!({
                        "index": i,
                        "value": v,
                        "log_scale": scale,
                        "error": err,
                        "status": status(r),
                        "message": r.as_ref().err().map(|e| e.to_string()),
                    })
                })
                .collect();
            json_text(&json!({
                "param": param,
                "n": cfg.n,
                "tolerance": tol,
                "base": params_json(&cfg.params),
                "rows": rows,
            }))
        }
        Format::Csv => {
            let mut s = format!("index,{param},log_scale,error,status\n");
            for (i, (v, r)) in values.iter().zip(&results).enumerate() {
                let (scale, err) = match r {
                    Ok((sc, e)) => (num(*sc), num(*e)),
                    Err(_) => (String::new(), String::new()),
                };
                s += &format!("{i},{},{scale},{err},{}\n", num(*v), status(r));
            }
            s
        }
    };
    Ok(Output { text, passed })
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let default_format = match cli.command {
        Command::Verify => Format::Json,
        _ => Format::Csv,
    };
    let cfg = cli.settings.resolve(default_format).map_err(Failure::input)?;
    let out = match cli.command {
        Command::Verify => cmd_verify(&cfg),
        Command::Cocycle => cmd_cocycle(&cfg),
        Command::Renorm => cmd_renorm(&cfg),
        Command::Sigma => cmd_sigma(&cfg),
        Command::Minsol => cmd_minsol(&cfg),
        Command::Scan => cmd_scan(&cfg),
    }?;
    let written = match &cfg.out {
        Some(path) => std::fs::write(path, &out.text).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout().write_all(out.text.as_bytes()).map_err(|e| e.to_string()),
    };
    written.map_err(|message| Failure { code: 3, message })?;
    Ok(out.passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
