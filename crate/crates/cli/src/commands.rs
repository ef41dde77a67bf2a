use std::path::PathBuf;

use serde::Serialize;

use solitons::analysis::{
    geomspace, profile_to_slice, shoot, sphere_match, sphere_params, symmetric_search, verify_asymptotics,
};
use solitons::config::preset_row;
use solitons::dynamics::{functionals, locus_residuals};
use solitons::integrator::{PolynomialSystem, ProfileSystem, DEFAULT_PROFILE_T0_FACTOR};
use solitons::{
    classify_cone_stability, cone_solutions, d_hat, integrate, omega_hat_roots, seed_profile, seed_unstable,
    ConeSolution, ConeStability, EventKind, IntegrationControls, Locus, OdeSystem, PhaseState, Preset, PresetName,
    ProfileState, ShootSpec, StabilityKind, Termination, Trajectory, TwoSummandsParams,
};

use crate::args::{CommonArgs, Format, SystemArg};
use crate::output::{csv_record, fmt17, json_line, write_json_file, Header, Sink};
use crate::CliError;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_BLOWUP: u8 = 2;
pub const EXIT_DOMAIN: u8 = 3;

fn analysis_error(e: solitons::AnalysisError) -> CliError {
    match e {
        solitons::AnalysisError::Seed(s) => CliError::Config(s.to_string()),
        solitons::AnalysisError::Config(c) => CliError::Config(c.to_string()),
        solitons::AnalysisError::Regime(r) => CliError::Config(r),
        other => CliError::Failed(other.to_string()),
    }
}

/// Presets do not depend on `C` or `eps`; the table uses the cone of the
/// Ricci-flat system.
#[derive(Serialize)]
struct PresetLine {
    name: &'static str,
    m: u32,
    d1: u32,
    d2: u32,
    a_norm2: u32,
    ric_q: u32,
    #[serde(rename = "A1")]
    a1: u64,
    #[serde(rename = "A2")]
    a2: u64,
    #[serde(rename = "A3")]
    a3: u64,
    d_hat: f64,
    cones: Vec<ConeLine>,
    notes: Vec<&'static str>,
}

#[derive(Serialize)]
struct ConeLine {
    branch: solitons::Branch,
    c1: f64,
    c2: f64,
    c1_sq: f64,
    c2_sq: f64,
    ratio: f64,
    stability: ConeStability,
}

fn cone_line(p: &TwoSummandsParams, c: &ConeSolution) -> ConeLine {
    ConeLine {
        branch: c.branch,
        c1: c.c1,
        c2: c.c2,
        c1_sq: c.c1 * c.c1,
        c2_sq: c.c2 * c.c2,
        ratio: c.ratio(),
        stability: classify_cone_stability(p, c),
    }
}

fn preset_line(name: PresetName, m: u32) -> Result<PresetLine, CliError> {
    let row = preset_row(Preset { name, m }).map_err(|e| CliError::Config(e.to_string()))?;
    let p = solitons::resolve_preset(Preset { name, m }).map_err(|e| CliError::Config(e.to_string()))?;
    let dh = d_hat(&p);
    let mut notes = Vec::new();
    if row.d1 == 1 {
        notes.push("non-hyperbolic critical point");
    }
    if dh == 0.0 {
        notes.push("boundary");
    } else if dh < 0.0 {
        notes.push("no trapping roots");
    }
    let cones = if p.a1 > 0.0 {
        cone_solutions(&p).map_err(|e| CliError::Failed(e.to_string()))?.iter().map(|c| cone_line(&p, c)).collect()
    } else {
        Vec::new()
    };
    Ok(PresetLine {
        name: name.as_str(),
        m,
        d1: row.d1,
        d2: row.d2,
        a_norm2: row.a_norm2,
        ric_q: row.ric_q,
        a1: row.a1(),
        a2: row.a2(),
        a3: row.a3(),
        d_hat: dh,
        cones,
        notes,
    })
}

pub fn presets(args: &CommonArgs) -> Result<u8, CliError> {
    let m = args.m.unwrap_or(1);
    let mut lines = Vec::new();
    for name in PresetName::ALL {
        // The Cayley plane has a single member.
        let mm = if name == PresetName::CaP { 1 } else { m };
        lines.push(preset_line(name, mm)?);
    }
    let mut sink = Sink::open(args.out.as_deref())?;
    match args.format {
        Some(Format::Jsonl) => {
            sink.line(&json_line(&Header::new("presets", &serde_json::json!({ "m": m }))))?;
            for l in &lines {
                sink.line(&json_line(l))?;
            }
        }
        Some(Format::Csv) => return Err(CliError::Config("presets prints a table or JSON lines, not CSV".into())),
        None => {
            sink.line(&format!(
                "{:<4} {:>2} {:>3} {:>3} {:>5} {:>5} {:>4} {:>5} {:>5} {:>10}  {:<42} {:<42} notes",
                "name", "m", "d1", "d2", "|A|^2", "RicQ", "A1", "A2", "A3", "D_hat", "first cone (c1^2, c2^2) stability",
                "second cone (c1^2, c2^2) stability"
            ))?;
            for l in &lines {
                let cone = |i: usize| {
                    l.cones.get(i).map_or_else(
                        || "-".to_string(),
                        |c| format!("({:.6}, {:.6}) {}", c.c1_sq, c.c2_sq, stability_name(c.stability.kind)),
                    )
                };
                sink.line(&format!(
                    "{:<4} {:>2} {:>3} {:>3} {:>5} {:>5} {:>4} {:>5} {:>5} {:>10.4}  {:<42} {:<42} {}",
                    l.name,
                    l.m,
                    l.d1,
                    l.d2,
                    l.a_norm2,
                    l.ric_q,
                    l.a1,
                    l.a2,
                    l.a3,
                    l.d_hat,
                    cone(0),
                    cone(1),
                    l.notes.join(", ")
                ))?;
            }
        }
    }
    sink.finish()?;
    Ok(EXIT_OK)
}

fn stability_name(kind: StabilityKind) -> &'static str {
    match kind {
        StabilityKind::Spiral => "spiral",
        StabilityKind::Node => "node",
    }
}

pub fn cone(args: &CommonArgs) -> Result<u8, CliError> {
    let p = args.params()?;
    let cones = cone_solutions(&p).map_err(|e| CliError::Config(e.to_string()))?;
    let roots = if p.a3 > 0.0 { omega_hat_roots(&p).map_err(|e| CliError::Config(e.to_string()))? } else { None };
    let mut sink = Sink::open(args.out.as_deref())?;
    sink.line(&json_line(&Header::new("cone", &p)))?;
    sink.line(&json_line(&serde_json::json!({ "d_hat": d_hat(&p), "omega_hat": roots.map(|(a, b)| [a, b]) })))?;
    for c in &cones {
        sink.line(&json_line(&cone_line(&p, c)))?;
    }
    sink.finish()?;
    Ok(EXIT_OK)
}

fn exit_for(termination: Termination) -> u8 {
    match termination {
        Termination::Horizon => EXIT_OK,
        Termination::Terminal(EventKind::BlowUp) => EXIT_BLOWUP,
        Termination::Terminal(EventKind::DomainExit) => EXIT_DOMAIN,
        Termination::Terminal(_) => EXIT_OK,
        Termination::StepLimit => {
            eprintln!("error: step limit reached before the horizon");
            EXIT_FAILED
        }
    }
}

fn run_integration(sys: &dyn OdeSystem, s0: f64, y0: &[f64], controls: &IntegrationControls) -> Result<Trajectory, u8> {
    integrate(sys, s0, y0, controls).map_err(|e| {
        eprintln!("error: {e}");
        match e {
            solitons::IntegrateError::StepUnderflow { .. } => EXIT_BLOWUP,
            solitons::IntegrateError::InitialState(_) => EXIT_DOMAIN,
        }
    })
}

#[derive(Serialize)]
struct RunHeader<'a> {
    params: &'a TwoSummandsParams,
    system: SystemArg,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<&'a ShootSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fbar: Option<f64>,
    controls: &'a IntegrationControls,
}

#[derive(Serialize)]
struct EventsFile<'a> {
    tool: &'static str,
    version: &'static str,
    termination: Termination,
    max_residual: f64,
    events: &'a [solitons::Event],
}

/// Row producer for one system: column names and a formatter per sample.
struct Table {
    columns: &'static [&'static str],
    rows: Vec<Vec<f64>>,
}

fn rescaled_table(p: &TwoSummandsParams, tr: &Trajectory) -> Table {
    let rows = tr
        .samples()
        .zip(&tr.residuals)
        .map(|((s, y), res)| {
            let st = PhaseState::from_slice(y);
            let (s1, s2) = locus_residuals(p, &st);
            let f = functionals(p, &st);
            vec![s, st.x1, st.x2, st.y1, st.y2, st.l, st.t, st.u, *res, s1, s2, f.k, f.f0, f.g, st.omega()]
        })
        .collect();
    Table {
        columns: &["s", "X1", "X2", "Y1", "Y2", "L", "t", "u", "cons_residual", "S1", "S2", "K", "F0", "G", "omega"],
        rows,
    }
}

fn polynomial_table(p: &TwoSummandsParams, tr: &Trajectory) -> Table {
    let rows = tr
        .samples()
        .zip(&tr.residuals)
        .map(|((s, y), res)| {
            let s2 = p.d1f() * y[0] + p.d2f() * y[1] - 1.0;
            vec![s, y[0], y[1], y[2], y[3], y[4], y[5], y[6], y[7], *res, s2]
        })
        .collect();
    Table { columns: &["s", "X1", "X2", "Y1", "Y2", "L", "t", "u", "W", "cons_residual", "S2"], rows }
}

fn profile_table(p: &TwoSummandsParams, tr: &Trajectory) -> Table {
    let rows = tr
        .samples()
        .zip(&tr.residuals)
        .map(|((t, y), res)| {
            let st = ProfileState::from_slice(y);
            vec![t, st.f1, st.df1, st.f2, st.df2, st.u, st.du, st.trace_l(p), st.omega_dot(), *res]
        })
        .collect();
    Table { columns: &["t", "f1", "df1", "f2", "df2", "u", "du", "trL", "omega_dot", "cons_residual"], rows }
}

fn json_row(columns: &[&str], values: &[f64]) -> String {
    let fields: Vec<String> = columns
        .iter()
        .zip(values)
        .map(|(c, v)| format!("\"{c}\":{}", if v.is_finite() { fmt17(*v) } else { "null".to_string() }))
        .collect();
    format!("{{{}}}", fields.join(","))
}

fn events_path(out: &std::path::Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".events.json");
    out.with_file_name(name)
}

pub fn integrate_cmd(args: &CommonArgs) -> Result<u8, CliError> {
    let p = args.params()?;
    let controls = args.controls()?;
    let system = args.system.unwrap_or(SystemArg::Rescaled);
    if p.epsilon < 0.0 && system != SystemArg::Profile {
        eprintln!("warning: eps < 0 has no trapping guarantees; the flow may leave every bounded set");
    }

    let (tr, table, spec) = match system {
        SystemArg::Rescaled | SystemArg::Polynomial => {
            let locus = args.locus(&p)?;
            let spec = args.shoot_spec(locus);
            let seed = seed_unstable(&p, &spec).map_err(|e| CliError::Config(e.to_string()))?;
            let result = if system == SystemArg::Rescaled {
                let sys = solitons::integrator::RescaledSystem::new(p, locus);
                run_integration(&sys, 0.0, &seed.to_array(), &controls).map(|tr| {
                    let t = rescaled_table(&p, &tr);
                    (tr, t)
                })
            } else {
                if locus != Locus::Unconstrained {
                    eprintln!("warning: the polynomial system is integrated without locus projection");
                }
                let mut y0 = seed.to_array().to_vec();
                y0.push(seed.y2 * seed.y2 / seed.y1);
                run_integration(&PolynomialSystem { params: p }, 0.0, &y0, &controls).map(|tr| {
                    let t = polynomial_table(&p, &tr);
                    (tr, t)
                })
            };
            match result {
                Ok((tr, table)) => (tr, table, Some(spec)),
                Err(code) => return Ok(code),
            }
        }
        SystemArg::Profile => {
            let fbar = args.fbar.ok_or_else(|| CliError::Config("profile runs need --fbar".into()))?;
            let t0 = DEFAULT_PROFILE_T0_FACTOR * fbar;
            let y0 = seed_profile(&p, fbar, t0).map_err(|e| CliError::Config(e.to_string()))?;
            match run_integration(&ProfileSystem::einstein(p), t0, &y0.to_array(), &controls) {
                Ok(tr) => {
                    let table = profile_table(&p, &tr);
                    (tr, table, None)
                }
                Err(code) => return Ok(code),
            }
        }
    };

    let run_header = RunHeader { params: &p, system, seed: spec.as_ref(), fbar: args.fbar, controls: &controls };
    let header = Header::new("integrate", &run_header);
    let mut sink = Sink::open(args.out.as_deref())?;
    match args.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            sink.line(&header.comment())?;
            sink.line(&table.columns.join(","))?;
            for row in &table.rows {
                let fields: Vec<String> = row.iter().map(|v| fmt17(*v)).collect();
                sink.line(&csv_record(&fields)?)?;
            }
        }
        Format::Jsonl => {
            sink.line(&json_line(&header))?;
            for row in &table.rows {
                sink.line(&json_row(table.columns, row))?;
            }
        }
    }
    sink.finish()?;
    if let Some(out) = &args.out {
        let events = EventsFile {
            tool: "solitons",
            version: crate::output::VERSION,
            termination: tr.termination,
            max_residual: tr.max_residual,
            events: &tr.events,
        };
        write_json_file(&events_path(out), &events)?;
    }
    Ok(exit_for(tr.termination))
}

pub fn verify_asymptotics_cmd(args: &CommonArgs) -> Result<u8, CliError> {
    let p = args.params()?;
    let regime = args.regime(&p)?;
    regime.check(&p).map_err(analysis_error)?;
    let locus = args.locus(&p)?;
    let controls = args.asymptotic_controls(regime)?;
    let spec = args.shoot_spec(locus);
    let tr = shoot(&p, &spec, &controls).map_err(analysis_error)?;
    let code = exit_for(tr.termination);
    if code != EXIT_OK {
        return Ok(code);
    }
    let report = verify_asymptotics(&p, &tr, regime, args.tol.unwrap_or(1e-3)).map_err(analysis_error)?;
    let mut sink = Sink::open(args.out.as_deref())?;
    let run_header = RunHeader { params: &p, system: SystemArg::Rescaled, seed: Some(&spec), fbar: None, controls: &controls };
    sink.line(&json_line(&Header::new("verify-asymptotics", &run_header)))?;
    sink.line(&json_line(&report))?;
    sink.finish()?;
    Ok(if report.all_pass() { EXIT_OK } else { EXIT_FAILED })
}

#[derive(Serialize)]
struct SearchHeader {
    d1: u32,
    d2: u32,
    params: TwoSummandsParams,
    fbar_range: (f64, f64),
    #[serde(rename = "Fbar_range", skip_serializing_if = "Option::is_none")]
    big_fbar_range: Option<(f64, f64)>,
    grid: usize,
}

pub fn search_symmetric(args: &CommonArgs) -> Result<u8, CliError> {
    let (d1, d2) = args.sphere_dims()?;
    let range = CommonArgs::range(args.fbar_min, args.fbar_max, (0.01, 1.0), "fbar")?;
    let grid = args.grid.unwrap_or(40);
    if grid < 2 {
        return Err(CliError::Config("--grid must be at least 2".into()));
    }
    let found = if range.0 == range.1 {
        Vec::new()
    } else {
        symmetric_search(d1, d2, range.0, range.1, grid).map_err(analysis_error)?
    };
    let mut sink = Sink::open(args.out.as_deref())?;
    let h = SearchHeader { d1, d2, params: sphere_params(d1, d2), fbar_range: range, big_fbar_range: None, grid };
    sink.line(&json_line(&Header::new("search-symmetric", &h)))?;
    for s in &found {
        sink.line(&json_line(s))?;
    }
    sink.finish()?;
    Ok(EXIT_OK)
}

pub fn match_sphere(args: &CommonArgs) -> Result<u8, CliError> {
    let (d1, d2) = args.sphere_dims()?;
    let fr = CommonArgs::range(args.fbar_min, args.fbar_max, (0.02, 1.5), "fbar")?;
    let gr = CommonArgs::range(args.big_fbar_min, args.big_fbar_max, (0.02, 1.5), "Fbar")?;
    let grid = args.grid.unwrap_or(200);
    if grid < 2 {
        return Err(CliError::Config("--grid must be at least 2".into()));
    }
    let found = if fr.0 == fr.1 || gr.0 == gr.1 {
        Vec::new()
    } else {
        sphere_match(d1, d2, fr, gr, grid).map_err(analysis_error)?
    };
    let mut sink = Sink::open(args.out.as_deref())?;
    let h = SearchHeader { d1, d2, params: sphere_params(d1, d2), fbar_range: fr, big_fbar_range: Some(gr), grid };
    sink.line(&json_line(&Header::new("match-sphere", &h)))?;
    for m in &found {
        sink.line(&json_line(m))?;
    }
    sink.finish()?;
    Ok(EXIT_OK)
}

pub fn count_critical(args: &CommonArgs) -> Result<u8, CliError> {
    let (d1, d2) = args.sphere_dims()?;
    let p = sphere_params(d1, d2);
    let (fbars, range) = match args.fbar {
        Some(f) => (vec![f], (f, f)),
        None => {
            let r = CommonArgs::range(args.fbar_min, args.fbar_max, (0.01, 1.0), "fbar")?;
            let n = if r.0 == r.1 { 1 } else { args.grid.unwrap_or(20).max(2) };
            (geomspace(r.0, r.1, n), r)
        }
    };
    if !fbars.iter().all(|f| *f > 0.0 && f.is_finite()) {
        return Err(CliError::Config("--fbar must be positive".into()));
    }
    let mut sink = Sink::open(args.out.as_deref())?;
    let h = SearchHeader { d1, d2, params: p, fbar_range: range, big_fbar_range: None, grid: fbars.len() };
    sink.line(&json_line(&Header::new("count-critical", &h)))?;
    for f in fbars {
        let (hit, _) = profile_to_slice(&p, f).map_err(analysis_error)?;
        sink.line(&json_line(&hit))?;
    }
    sink.finish()?;
    Ok(EXIT_OK)
}
