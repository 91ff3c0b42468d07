//! One function per subcommand. Each writes its artifacts into the output
//! directory and returns the summary lines to print.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use nscarleman::carleman::{
    bump_field, lemma1_sides, lemma2_sides, lemma3_sides, s_sweep, CarlemanReport, Lemma1Inputs, LemmaId,
};
use nscarleman::forward::{manufactured_problem, residual_check, solve_forward, space_time_error, StepResidual};
use nscarleman::grid::{build_grid, build_subdomains, write_cnsf, Boundary, BoxRegion, DomainSpec, Field, Stagger, TimeSeriesField};
use nscarleman::inverse_lab::{
    example_i_check, example_ii_check, obstruction_demo, obstruction_psi, sample_admissible, stability_experiment, AdmissibleCertificate,
    ExampleIIReport, ExampleIReport, ObservationWindow, ObstructionReport, ProblemTemplate, SourceParams, StabilitySummary, TimeFamily,
};
use nscarleman::operators::{l2_norm, SolverConfig};
use nscarleman::weights::{build_psi_phi0, build_weight_set, summarize, EtaMethod, WeightCertificate, WeightSummary};
use nscarleman::{Grid64, LabError};

use crate::config::{parse_list, RunConfig};
use crate::report::{read_csv_records, write_json, write_report, Format, PlotSpec};
use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Weights,
    Forward,
    Carleman(LemmaId),
    Stability,
    Obstruction,
    Examples,
    Report { input: PathBuf, x: String, y: Vec<String>, json: bool, linear: bool },
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::Weights => "weights".into(),
            Command::Forward => "forward".into(),
            Command::Carleman(l) => format!("carleman {}", l.name()),
            Command::Stability => "stability".into(),
            Command::Obstruction => "obstruction".into(),
            Command::Examples => "examples".into(),
            Command::Report { .. } => "report".into(),
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: String,
    version: &'static str,
    config: &'a RunConfig,
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

/// Runs `cmd` and, except for `report`, writes `manifest.json` next to its
/// artifacts.
pub fn run(cmd: &Command, cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::Io { path: cfg.out.clone(), source: e })?;
    let lines = match cmd {
        Command::Weights => weights(cfg)?,
        Command::Forward => forward(cfg)?,
        Command::Carleman(l) => carleman(*l, cfg)?,
        Command::Stability => stability(cfg)?,
        Command::Obstruction => obstruction(cfg)?,
        Command::Examples => examples(cfg)?,
        Command::Report { input, x, y, json, linear } => report(cfg, input, x, y, *json, *linear)?,
    };
    // a report reads another run's artifacts and keeps that run's manifest
    if !matches!(cmd, Command::Report { .. }) {
        let manifest = Manifest { command: cmd.name(), version: env!("CARGO_PKG_VERSION"), config: cfg };
        write_json(&manifest, &out_path(cfg, "manifest.json"))?;
    }
    Ok(lines)
}

/// The configured grid with ω and ω₀ installed.
pub fn grid(cfg: &RunConfig) -> Result<Grid64, CliError> {
    let d = &cfg.domain;
    let spec = DomainSpec { extent: vec![1.0; d.dim], cells: vec![d.grid; d.dim], horizon: d.horizon, time_steps: d.steps };
    let g = build_grid(&spec)?;
    let (lo, hi) = RunConfig::region(&d.omega, d.dim);
    let (lo0, hi0) = RunConfig::region(&d.omega0, d.dim);
    Ok(build_subdomains(&g, BoxRegion::new(&lo, &hi)?, BoxRegion::new(&lo0, &hi0)?)?)
}

fn solver(cfg: &RunConfig) -> SolverConfig {
    SolverConfig { tolerance: cfg.forward.tolerance, ..SolverConfig::default() }
}

fn write_cnsf_file(field: &Field<f64>, path: &Path) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
    write_cnsf(field, BufWriter::new(file))?;
    Ok(())
}

#[derive(Serialize)]
struct EllRow {
    t: f64,
    ell: f64,
    d_ell: f64,
}

#[derive(Serialize)]
struct WeightsOut {
    summary: WeightSummary,
    certificate: WeightCertificate,
}

fn weights(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let g = grid(cfg)?;
    let method = EtaMethod::parse(&cfg.weights.eta)?;
    let (ws, certificate) = build_weight_set(&g, method, cfg.weights.lambda, cfg.weights.peak)?;
    let summary = summarize(&ws)?;
    let rows: Vec<EllRow> = (0..g.time.nodes())
        .map(|k| {
            let t = g.time.time(k);
            let (ell, d_ell) = ws.ell().eval(t);
            EllRow { t, ell, d_ell }
        })
        .collect();
    write_report(&rows, Format::Csv, &out_path(cfg, "ell.csv"))?;
    write_cnsf_file(&ws.eta().node_field(), &out_path(cfg, "eta.cnsf"))?;
    let line = format!(
        "weights: eta_max={:.6} c_low={:.6e} c_high={:.6} dalpha/phi^2 max={:.4} critical points={}",
        summary.eta_max,
        summary.c_low,
        summary.c_high,
        summary.dalpha_bound,
        certificate.critical_points.len()
    );
    write_json(&WeightsOut { summary, certificate }, &out_path(cfg, "weights.json"))?;
    Ok(vec![line])
}

#[derive(Serialize)]
struct ForwardOut {
    problem: String,
    error_l2q: f64,
    exact_l2q: f64,
    relative_error: f64,
    max_relative_divergence: f64,
    max_momentum_residual: f64,
    stability_number: f64,
    helmholtz_iterations: usize,
    poisson_iterations: usize,
}

fn space_time_norm(v: &TimeSeriesField<f64>) -> f64 {
    let w = nscarleman::grid::time_weights(v.len(), v.dt);
    v.snapshots.iter().zip(&w).map(|(s, w)| w * l2_norm(s).powi(2)).sum::<f64>().sqrt()
}

fn forward(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let g = grid(cfg)?;
    let mut m = manufactured_problem(&cfg.forward.problem, &g)?;
    m.problem.solver = solver(cfg);
    let sol = solve_forward(&m.problem)?;
    let residuals: Vec<StepResidual> = residual_check(&sol, &m.problem)?;
    write_report(&residuals, Format::Csv, &out_path(cfg, "forward_residuals.csv"))?;
    write_cnsf_file(&sol.velocity.snapshots[g.time.t0_index], &out_path(cfg, "velocity_t0.cnsf"))?;
    let err = space_time_error(&sol.velocity, &m.exact.velocity)?;
    let exact = space_time_norm(&m.exact.velocity);
    let out = ForwardOut {
        problem: m.name.clone(),
        error_l2q: err,
        exact_l2q: exact,
        relative_error: if exact > 0.0 { err / exact } else { err },
        max_relative_divergence: sol.max_relative_divergence(),
        max_momentum_residual: residuals.iter().map(|r| r.momentum).fold(0.0, f64::max),
        stability_number: m.problem.stability_number(),
        helmholtz_iterations: sol.work.iter().map(|w| w.helmholtz).sum(),
        poisson_iterations: sol.work.iter().map(|w| w.poisson).sum(),
    };
    write_json(&out, &out_path(cfg, "forward.json"))?;
    Ok(vec![format!(
        "forward {}: L2(Q) error {:.4e} (relative {:.4e}), max |div v|/|v| {:.2e}",
        out.problem, out.error_l2q, out.relative_error, out.max_relative_divergence
    )])
}

/// `one`, or `box:` followed by the lower then upper corner.
fn lemma3_density(spec: &str, g: &Grid64) -> Result<Field<f64>, CliError> {
    let dim = g.dim();
    if spec == "one" {
        return Ok(Field::scalar_from_fn(g.geom, Stagger::center(), Boundary::Free, |_| 1.0));
    }
    let Some(rest) = spec.strip_prefix("box:") else {
        return Err(CliError::Config(format!("carleman g = '{spec}': expected 'one' or 'box:lo..,hi..'")));
    };
    let v = parse_list(rest).map_err(CliError::Config)?;
    if v.len() != 2 * dim {
        return Err(CliError::Config(format!("carleman g box needs {} numbers", 2 * dim)));
    }
    Ok(Field::scalar_from_fn(g.geom, Stagger::center(), Boundary::Free, |x| {
        let inside = (0..dim).all(|a| v[a] <= x[a] && x[a] <= v[dim + a]);
        if inside {
            1.0
        } else {
            0.0
        }
    }))
}

pub fn carleman_report(lemma: LemmaId, cfg: &RunConfig) -> Result<CarlemanReport, CliError> {
    let g = grid(cfg)?;
    let method = EtaMethod::parse(&cfg.weights.eta)?;
    let s = &cfg.carleman.s;
    let rep = match lemma {
        LemmaId::Lemma1 => {
            let (ws, cert) = build_weight_set(&g, method, cfg.weights.lambda, cfg.weights.peak)?;
            let mut m = manufactured_problem(&cfg.carleman.problem, &g)?;
            m.problem.solver = solver(cfg);
            let sol = solve_forward(&m.problem)?;
            let inputs = Lemma1Inputs::from_solution(&sol, &m.problem)?;
            let order = cfg.carleman.m;
            let mut rep = s_sweep(lemma, Some(order), s, |s| Ok(lemma1_sides(&inputs, &ws, s, order, &g)?.sides))?;
            rep.inputs.push(format!("{} (projection delta {:.4})", m.name, inputs.projection_delta));
            rep.certificates.push(cert);
            rep
        }
        LemmaId::Lemma2 => {
            let sw = build_psi_phi0(&g, cfg.weights.c0, cfg.weights.lambda, method)?;
            let bump = bump_field(&g, cfg.seed)?;
            let mut rep = s_sweep(lemma, None, s, |s| lemma2_sides(&bump.field, &sw, s, &g))?;
            rep.inputs.push(bump.describe());
            rep.certificates.push(sw.certificate.clone());
            rep
        }
        LemmaId::Lemma3 => {
            let (ws, cert) = build_weight_set(&g, method, cfg.weights.lambda, cfg.weights.peak)?;
            let density = lemma3_density(&cfg.carleman.g, &g)?;
            let mut rep = s_sweep(lemma, None, s, |s| Ok(lemma3_sides(&density, &ws, s)?.sides))?;
            rep.inputs.push(cfg.carleman.g.clone());
            rep.certificates.push(cert);
            rep
        }
    };
    Ok(rep)
}

fn carleman(lemma: LemmaId, cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let rep = carleman_report(lemma, cfg)?;
    let stem = format!("carleman_{}", lemma.name());
    write_report(&rep.rows, Format::Csv, &out_path(cfg, &format!("{stem}.csv")))?;
    write_json(&rep, &out_path(cfg, &format!("{stem}.json")))?;
    if cfg.plots {
        let spec = PlotSpec::log_log(&format!("{} sides and ratio", lemma.name()), "s", &["lhs", "rhs", "ratio"]);
        write_report(&rep.rows, Format::Svg(&spec), &out_path(cfg, &format!("{stem}.svg")))?;
    }
    let fmt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:.4e}"));
    Ok(vec![format!("carleman {}: {} values of s, C_hat={} from s_hat={}", lemma.name(), rep.rows.len(), fmt(rep.c_hat), fmt(rep.s_hat))])
}

#[derive(Serialize)]
struct SourceInfo {
    id: String,
    seed: u64,
    support_lo: [f64; 3],
    support_hi: [f64; 3],
    sigma: f64,
    certificate: AdmissibleCertificate,
}

#[derive(Serialize)]
struct StabilityOut {
    summary: StabilitySummary,
    window: ObservationWindow,
    params: SourceParams,
    coefficients: f64,
    sources: Vec<SourceInfo>,
}

fn stability(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let g = grid(cfg)?;
    let st = &cfg.stability;
    let params = SourceParams {
        amplitude: st.amplitude,
        m_bound: st.m_bound,
        family: TimeFamily::parse(&st.family)?,
        bumps: st.bumps,
        ..SourceParams::default()
    };
    let sources = (0..st.sources as u64).map(|i| sample_admissible(cfg.seed + i, &params, &g)).collect::<Result<Vec<_>, LabError>>()?;
    let mut template = ProblemTemplate::new(g.clone()).with_default_coefficients(st.coefficients);
    template.solver = solver(cfg);
    let window = match st.window {
        None => ObservationWindow::Full,
        Some((start, end)) => ObservationWindow::Interior { start, end },
    };
    let rep = stability_experiment(&sources, &template, window)?;
    write_report(&rep.rows, Format::Csv, &out_path(cfg, "stability.csv"))?;
    let info = sources
        .iter()
        .map(|s| SourceInfo {
            id: s.id.clone(),
            seed: s.seed,
            support_lo: s.support.lo,
            support_hi: s.support.hi,
            sigma: s.sigma,
            certificate: s.certificate.clone(),
        })
        .collect();
    let out = StabilityOut { summary: rep.summary.clone(), window, params, coefficients: st.coefficients, sources: info };
    write_json(&out, &out_path(cfg, "stability.json"))?;
    if cfg.plots {
        let spec = PlotSpec { title: "stability ratio by source".into(), x: "seed".into(), y: vec!["ratio".into()], log_x: false, log_y: false };
        write_report(&rep.rows, Format::Svg(&spec), &out_path(cfg, "stability.svg"))?;
    }
    let s = &rep.summary;
    let fmt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:.4}"));
    let mut lines = vec![format!(
        "stability: {} sources, {} used, ratio min/median/max {}/{}/{}, spread {}",
        s.sources,
        s.used,
        fmt(s.min_ratio),
        fmt(s.median_ratio),
        fmt(s.max_ratio),
        fmt(s.spread)
    )];
    for r in rep.rows.iter().filter(|r| r.error.is_some()) {
        lines.push(format!("  {} failed: {}", r.source_id, r.error.as_deref().unwrap_or("")));
    }
    Ok(lines)
}

fn obstruction(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let g = grid(cfg)?;
    let psi = obstruction_psi(&g, cfg.obstruction.amplitude, cfg.obstruction.radius)?;
    let rep: ObstructionReport = obstruction_demo(&psi, &g, solver(cfg))?;
    write_json(&rep, &out_path(cfg, "obstruction.json"))?;
    Ok(vec![format!(
        "obstruction: D={:.3e} |F|={:.3e} D/|F|={} failed clauses: {}",
        rep.data_norm,
        rep.source_norm,
        rep.relative_data.map_or("none".into(), |r| format!("{r:.3e}")),
        rep.failed_clauses.join(", ")
    )])
}

#[derive(Serialize)]
struct ExamplesOut {
    example_ii: ExampleIIReport,
    example_i: ExampleIReport,
}

/// `r = ∇(z(2+t) + 0.1 sin x sin y)` and `f = ∇(sin x cos y)`, both with
/// vanishing rotation and `f₃ = 0`.
pub fn example_ii_default(n: usize, horizon: f64, steps: usize) -> Result<ExampleIIReport, CliError> {
    let g = build_grid(&DomainSpec::unit_cube(n, horizon, steps))?;
    let snaps = (0..g.time.nodes())
        .map(|k| {
            let t = g.time.time(k);
            Field::mac_from_fn(g.geom, Boundary::Free, |x| [0.1 * x[0].cos() * x[1].sin(), 0.1 * x[0].sin() * x[1].cos(), 2.0 + t])
        })
        .collect();
    let r = TimeSeriesField::new(snaps, g.time.dt, 0.0)?;
    let f = Field::mac_from_fn(g.geom, Boundary::Free, |x| [x[0].cos() * x[1].cos(), -x[0].sin() * x[1].sin(), 0.0]);
    Ok(example_ii_check(&r, &f, &g)?)
}

fn examples(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let e = &cfg.examples;
    let example_ii = example_ii_default(e.grid, cfg.domain.horizon, e.steps)?;
    let g = build_grid(&DomainSpec::unit_cube(8, cfg.domain.horizon, e.steps))?;
    // a rotation about the third axis applied to a fixed profile
    let example_i = example_i_check(
        &g,
        |_, t| {
            let (s, c) = t.sin_cos();
            [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
        },
        |x| [1.0 + x[0], 1.0, x[2]],
    )?;
    let lines = vec![
        format!(
            "example (ii): identity residual {:.3e}, min |r3(t0)| {:.3}, M {}, ratio {:.4}, passed {}",
            example_ii.identity_residual,
            example_ii.min_r3_t0,
            example_ii.m_bound.map_or("none".into(), |m| format!("{m:.4}")),
            example_ii.derivative_ratio,
            example_ii.passed
        ),
        format!(
            "example (i): min |det R(t0)| {:.3}, M {}, ratio {:.4}, passed {}",
            example_i.min_abs_det_t0,
            example_i.m_bound.map_or("none".into(), |m| format!("{m:.4}")),
            example_i.derivative_ratio,
            example_i.passed
        ),
    ];
    write_json(&ExamplesOut { example_ii, example_i }, &out_path(cfg, "examples.json"))?;
    Ok(lines)
}

fn report(cfg: &RunConfig, input: &Path, x: &str, y: &[String], json: bool, linear: bool) -> Result<Vec<String>, CliError> {
    let records: Vec<Value> = read_csv_records(input)?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let (path, format_name) = if json {
        let path = out_path(cfg, &format!("{stem}_report.json"));
        write_report(&records, Format::Json, &path)?;
        (path, "json")
    } else {
        let spec = PlotSpec { title: stem.to_string(), x: x.to_string(), y: y.to_vec(), log_x: !linear, log_y: !linear };
        let path = out_path(cfg, &format!("{stem}_report.svg"));
        write_report(&records, Format::Svg(&spec), &path)?;
        (path, "svg")
    };
    Ok(vec![format!("report: {} rows from {} -> {} ({format_name})", records.len(), input.display(), path.display())])
}
