//! Command-line front end: model loading, per-point tensor queries,
//! divergence and Pythagoras evaluation, projection, wavefront/caustic
//! sampling, and the model property-check suite.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use quasihess::divergence::{contrast_derivatives, divergence_chart};
use quasihess::equivalence::{load_model, Atlas, ModelFile};
use quasihess::error::Result;
use quasihess::geodesy::{project_onto, pythagoras_check, CurveKind, Submanifold};
use quasihess::model::{lift, DomainBox, GeneratingChart};
use quasihess::tensors::{cubic, cubic_via_frames, degeneracy_test, frames, frobenius_compatibility_residual, metric, metric_via_pairing};
use quasihess::{fixtures, frontsampler};

#[derive(Parser)]
#[command(name = "quasihess", version, about = "numerical quasi-Hessian geometry engine")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    E,
    M,
}

impl From<Side> for CurveKind {
    fn from(s: Side) -> CurveKind {
        match s {
            Side::E => CurveKind::E,
            Side::M => CurveKind::M,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse an expression and print its normal form and variables.
    Parse { expr: String },
    /// Third-order jet of the generating function at a chart point.
    Jet {
        #[arg(long)]
        model: String,
        #[arg(long)]
        chart: Option<String>,
        #[arg(long)]
        at: String,
    },
    /// Quasi-Hessian metric at a chart point.
    Metric {
        #[arg(long)]
        model: String,
        #[arg(long)]
        chart: Option<String>,
        #[arg(long)]
        at: String,
    },
    /// Canonical cubic tensor at a chart point.
    Cubic {
        #[arg(long)]
        model: String,
        #[arg(long)]
        chart: Option<String>,
        #[arg(long)]
        at: String,
    },
    /// Degeneracy classification at a chart point.
    Classify {
        #[arg(long)]
        model: String,
        #[arg(long)]
        chart: Option<String>,
        #[arg(long)]
        at: String,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Canonical divergence between two chart points.
    Divergence {
        #[arg(long)]
        model: String,
        #[arg(long)]
        chart: Option<String>,
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: String,
    },
    /// Extended Pythagorean identity on a (p, q, r) triangle.
    Pythagoras {
        #[arg(long)]
        model: String,
        #[arg(long)]
        chart: Option<String>,
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: String,
        #[arg(long)]
        r: String,
        #[arg(long)]
        e_dir: String,
        #[arg(long)]
        m_dir: String,
    },
    /// Critical points of the divergence restricted to a parametrized
    /// submanifold.
    Project {
        #[arg(long)]
        model: String,
        #[arg(long)]
        chart: Option<String>,
        /// Parametrization expressions in t1..tk, one per chart coordinate.
        #[arg(long = "param", required = true)]
        params: Vec<String>,
        #[arg(long)]
        theta_min: String,
        #[arg(long)]
        theta_max: String,
        /// Chart coordinates of the point being projected.
        #[arg(long)]
        from: String,
        /// `auto` or semicolon-separated CSV seeds.
        #[arg(long, default_value = "auto")]
        seeds: String,
        #[arg(long, value_enum, default_value = "m")]
        side: Side,
    },
    /// Sample the e- or m-wavefront on a grid.
    Wavefront {
        #[arg(long)]
        model: String,
        #[arg(long)]
        chart: Option<String>,
        #[arg(long, value_enum)]
        side: Side,
        /// Per-axis node counts, e.g. `201x201`.
        #[arg(long, default_value = "201x201")]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Extract the e- or m-caustics.
    Caustics {
        #[arg(long)]
        model: String,
        #[arg(long)]
        chart: Option<String>,
        #[arg(long, value_enum)]
        side: Side,
        #[arg(long, default_value = "201x201")]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the property suite on a model; exits 1 on any failure.
    Check {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 20260401)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

fn load(model: &str) -> Result<Atlas<f64>> {
    for (name, json) in fixtures::ALL {
        if name == model {
            return ModelFile::from_json(json)?.build();
        }
    }
    load_model(std::path::Path::new(model))
}

fn pick_chart<'a>(atlas: &'a Atlas<f64>, name: &Option<String>) -> Result<&'a GeneratingChart> {
    match name {
        Some(n) => atlas.chart(n),
        None => Ok(&atlas.charts[0]),
    }
}

fn csv(values: &str) -> Result<Vec<f64>> {
    values
        .split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|_| {
                quasihess::Error::InvalidModel(format!("bad number in CSV `{t}`"))
            })
        })
        .collect()
}

fn grid_spec(spec: &str) -> Result<Vec<usize>> {
    spec.split('x')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| quasihess::Error::InvalidModel(format!("bad grid `{spec}`")))
        })
        .collect()
}

fn emit(out: &Option<PathBuf>, payload: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, payload)?,
        None => println!("{payload}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Parse { expr } => {
            let ast = quasihess::expr::parse(&expr)?;
            let vars: Vec<String> = ast.variables().iter().map(|v| v.to_string()).collect();
            println!("{}", json!({ "normal_form": ast.to_string(), "variables": vars }));
        }
        Cmd::Jet { model, chart, at } => {
            let atlas = load(&model)?;
            let chart = pick_chart(&atlas, &chart)?;
            let u = csv(&at)?;
            let jet = chart.jet(&u)?;
            let n = chart.n();
            let grad: Vec<f64> = (0..n).map(|i| jet.grad(i)).collect();
            let hess: Vec<Vec<f64>> = jet.hessian_rows();
            let third: Vec<Vec<Vec<f64>>> = (0..n)
                .map(|i| (0..n).map(|j| (0..n).map(|k| jet.t(i, j, k)).collect()).collect())
                .collect();
            println!(
                "{}",
                json!({ "at": u, "value": jet.v, "gradient": grad, "hessian": hess, "third": third })
            );
        }
        Cmd::Metric { model, chart, at } => {
            let atlas = load(&model)?;
            let chart = pick_chart(&atlas, &chart)?;
            let u = csv(&at)?;
            let cp = chart.point(u.clone());
            let h = metric(&cp)?;
            let rows: Vec<Vec<f64>> =
                (0..h.rows).map(|i| (0..h.cols).map(|j| h[(i, j)]).collect()).collect();
            let class = degeneracy_test(&cp, None)?.class;
            println!(
                "{}",
                json!({ "at": u, "h": rows, "classification": class.as_str() })
            );
        }
        Cmd::Cubic { model, chart, at } => {
            let atlas = load(&model)?;
            let chart = pick_chart(&atlas, &chart)?;
            let u = csv(&at)?;
            let c = cubic(&chart.point(u.clone()))?;
            let n = c.n();
            let arr: Vec<Vec<Vec<f64>>> = (0..n)
                .map(|i| (0..n).map(|j| (0..n).map(|k| c.get(i, j, k)).collect()).collect())
                .collect();
            println!("{}", json!({ "at": u, "C": arr }));
        }
        Cmd::Classify { model, chart, at, tol } => {
            let atlas = load(&model)?;
            let chart = pick_chart(&atlas, &chart)?;
            let u = csv(&at)?;
            let rep = degeneracy_test(&chart.point(u.clone()), tol)?;
            println!(
                "{}",
                json!({
                    "at": u,
                    "classification": rep.class.as_str(),
                    "phi_singular_values": rep.phi_singular_values,
                    "phi_prime_singular_values": rep.phi_prime_singular_values,
                })
            );
        }
        Cmd::Divergence { model, chart, p, q } => {
            let atlas = load(&model)?;
            let chart = pick_chart(&atlas, &chart)?;
            let (up, uq) = (csv(&p)?, csv(&q)?);
            let d = divergence_chart(chart, &up, &uq)?;
            let rev = divergence_chart(chart, &uq, &up)?;
            println!("{}", json!({ "D": d, "Dreverse": rev }));
        }
        Cmd::Pythagoras { model, chart, p, q, r, e_dir, m_dir } => {
            let atlas = load(&model)?;
            let chart = pick_chart(&atlas, &chart)?;
            let rep = pythagoras_check(
                chart,
                &csv(&p)?,
                &csv(&q)?,
                &csv(&r)?,
                &csv(&e_dir)?,
                &csv(&m_dir)?,
            )?;
            println!(
                "{}",
                json!({
                    "lhs": rep.lhs,
                    "rhs": rep.rhs,
                    "residual": rep.residual,
                    "proof_identity": rep.proof_identity,
                })
            );
        }
        Cmd::Project { model, chart, params, theta_min, theta_max, from, seeds, side } => {
            let atlas = load(&model)?;
            let chart = pick_chart(&atlas, &chart)?;
            let domain = DomainBox { min: csv(&theta_min)?, max: csv(&theta_max)? };
            let sources: Vec<&str> = params.iter().map(|s| s.as_str()).collect();
            let sub = Submanifold::parse(chart, &sources, domain)?;
            let p = lift(&chart.point(csv(&from)?))?;
            let seed_list: Vec<Vec<f64>> = if seeds == "auto" {
                let k = sub.dim;
                let per_axis = 5usize;
                let mut list = vec![vec![]];
                for d in 0..k {
                    let mut next = Vec::new();
                    for stem in &list {
                        for i in 0..per_axis {
                            let lo = sub.theta_domain.min[d];
                            let hi = sub.theta_domain.max[d];
                            let t = lo + (hi - lo) * (i as f64 + 0.5) / per_axis as f64;
                            let mut s: Vec<f64> = stem.clone();
                            s.push(t);
                            next.push(s);
                        }
                    }
                    list = next;
                }
                list
            } else {
                seeds.split(';').map(csv).collect::<Result<_>>()?
            };
            let crits = project_onto(&sub, &p, &seed_list, side.into())?;
            let records: Vec<serde_json::Value> = crits
                .iter()
                .map(|c| {
                    json!({
                        "theta": c.theta,
                        "u": chart_u(&sub, &c.theta),
                        "grad_norm": c.grad_norm,
                        "classification": c.kind.as_str(),
                        "degenerate": c.degenerate,
                        "direction": c.direction,
                        "orthogonality_residual": c.orthogonality_residual,
                    })
                })
                .collect();
            println!("{}", json!(records));
        }
        Cmd::Wavefront { model, chart, side, grid, out, format } => {
            let atlas = load(&model)?;
            let chart = pick_chart(&atlas, &chart)?;
            let wf = frontsampler::sample_wavefront::<f64>(chart, side.into(), &grid_spec(&grid)?)?;
            let payload = match format {
                Format::Csv => wf.to_csv(),
                Format::Json => {
                    let rows: Vec<serde_json::Value> = wf
                        .samples
                        .iter()
                        .map(|s| json!({ "u": s.u, "image": s.image, "branch": s.branch }))
                        .collect();
                    json!({ "skipped": wf.skipped, "samples": rows }).to_string()
                }
            };
            emit(&out, &payload)?;
        }
        Cmd::Caustics { model, chart, side, grid, out } => {
            let atlas = load(&model)?;
            let chart = pick_chart(&atlas, &chart)?;
            let c = frontsampler::extract_caustics::<f64>(chart, side.into(), &grid_spec(&grid)?)?;
            let payload =
                json!({ "polylines": c.polylines, "points": c.points }).to_string();
            emit(&out, &payload)?;
        }
        Cmd::Check { model, seed, tol } => {
            return check_model(&model, seed, tol);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn chart_u(sub: &Submanifold<'_>, theta: &[f64]) -> Vec<f64> {
    sub.u(theta).unwrap_or_default()
}

fn random_interior(rng: &mut ChaCha8Rng, chart: &GeneratingChart) -> Vec<f64> {
    (0..chart.n())
        .map(|d| {
            let lo = chart.domain.min[d];
            let hi = chart.domain.max[d];
            let pad = 0.05 * (hi - lo);
            rng.gen_range(lo + pad..hi - pad)
        })
        .collect()
}

fn check_model(model: &str, seed: u64, tol: f64) -> Result<ExitCode> {
    let atlas = load(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0usize;
    let mut report = |name: &str, residual: f64, bound: f64| {
        let ok = residual <= bound;
        if !ok {
            failures += 1;
        }
        println!(
            "{} {name}: residual {residual:.3e} (bound {bound:.1e})",
            if ok { "pass" } else { "FAIL" }
        );
    };
    println!("checking model `{}` with seed {seed}", atlas.name);
    for chart in &atlas.charts {
        let points: Vec<Vec<f64>> =
            (0..50).map(|_| random_interior(&mut rng, chart)).collect();
        let mut diag = 0.0f64;
        let mut metric_routes = 0.0f64;
        let mut cubic_routes = 0.0f64;
        let mut first_deriv = 0.0f64;
        let mut frob = 0.0f64;
        for u in &points {
            if let Ok(d) = divergence_chart(chart, u, u) {
                diag = diag.max(d.abs());
            }
            let cp = chart.point(u.clone());
            if let (Ok(h), Ok(fr)) = (metric(&cp), frames(&cp)) {
                metric_routes = metric_routes.max(h.sub(&metric_via_pairing(&fr)).max_abs());
            }
            if let (Ok(c), Ok(c2)) = (cubic(&cp), cubic_via_frames(&cp, 1e-4)) {
                cubic_routes = cubic_routes.max(c.max_abs_diff(&c2));
            }
            if let Ok(cd) = contrast_derivatives(chart, u, 0, 0, 0, 1e-3) {
                first_deriv = first_deriv.max(cd.d_k_minus.abs()).max(cd.d_minus_k.abs());
            }
            if let Ok(r) = frobenius_compatibility_residual(&cp) {
                frob = frob.max(r);
            }
        }
        let tag = format!("[{}]", chart.name);
        report(&format!("{tag} D(p,p) = 0"), diag, 0.0);
        report(&format!("{tag} metric two-route"), metric_routes, 1e-12);
        report(&format!("{tag} cubic two-route"), cubic_routes, 1e-5);
        report(&format!("{tag} diagonal first derivatives"), first_deriv, 1e-6);
        report(&format!("{tag} Frobenius compatibility"), frob, 1e-9);
    }
    if !atlas.transitions.is_empty() {
        report("cocycle condition", atlas.cocycle_residual(64), tol.max(1e-9));
    }
    if failures == 0 {
        println!("all checks passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("{failures} check(s) failed");
        Ok(ExitCode::FAILURE)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
