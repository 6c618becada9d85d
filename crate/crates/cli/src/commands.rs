//! One function per subcommand. Each computes everything in memory and
//! returns the artifacts; nothing touches the output directory here.

use std::fs::File;
use std::path::Path;

use growth_centers::dynamics::{aggregate, integrate, InitialCondition, Trajectory};
use growth_centers::error::Direction;
use growth_centers::ingest::{self, CountyPanel};
use growth_centers::io::{self, fmt_f64, SystemDocument};
use growth_centers::spatial::{self, DistanceBands, MoranWeights, SpatialLayout};
use growth_centers::spectral::{self, PowerIteration, SteadyState};
use growth_centers::stats::{self, JCurveReport};
use growth_centers::{scenarios, Error, GrowthSystem};
use serde::Serialize;

use crate::config::{CommandKind, RunConfig, DEFAULT_DT, DEFAULT_T_END};
use crate::error::{CliError, Result};
use crate::output::Artifacts;
use crate::svg::{Chart, Line};

/// Charts show every unit up to this count, otherwise mean, largest and smallest.
const MAX_CHART_UNITS: usize = 12;

pub fn run(config: &mut RunConfig) -> Result<(Artifacts, u64)> {
    config.validate()?;
    let mut artifacts = Artifacts::default();
    match config.command {
        CommandKind::Simulate => simulate(config, &mut artifacts)?,
        CommandKind::SteadyState => steady_state(config, &mut artifacts)?,
        CommandKind::Report => report(config, &mut artifacts)?,
        CommandKind::Moran => moran(config, &mut artifacts)?,
        CommandKind::Jcurve => jcurve(config, &mut artifacts)?,
        CommandKind::Scenario => scenario(config, &mut artifacts)?,
        CommandKind::Ingest => ingest_panel(config, &mut artifacts)?,
        CommandKind::Correlate => correlate(config, &mut artifacts)?,
    }
    Ok((artifacts, config.seed.unwrap_or(0)))
}

struct Model {
    system: GrowthSystem,
    initial: InitialCondition,
    layout: Option<SpatialLayout>,
    dt: f64,
    t_end: f64,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

/// Resolves `--system`/`--scenario` and writes the resolved dt, horizon and seed back into `config`.
fn load_model(config: &mut RunConfig) -> Result<Model> {
    let model = match (&config.system, &config.scenario) {
        (Some(_), Some(_)) => return Err(CliError::Input("pass either --system or --scenario, not both".into())),
        (None, None) => return Err(CliError::Input("one of --system or --scenario is required".into())),
        (Some(path), None) => {
            let doc = SystemDocument::from_reader(open(path)?)?;
            let system = doc.system()?;
            let mut initial = doc.initial();
            if let InitialCondition::Random { random_uniform } = &mut initial {
                match config.seed {
                    Some(seed) => random_uniform.seed = seed,
                    None => config.seed = Some(random_uniform.seed),
                }
            }
            Model {
                system,
                initial,
                layout: None,
                dt: config.dt.unwrap_or(DEFAULT_DT),
                t_end: config.t_end.unwrap_or(DEFAULT_T_END),
            }
        }
        (None, Some(name)) => {
            let s = scenarios::by_name(name, config.seed.unwrap_or(0))?;
            Model {
                layout: s.layout().cloned(),
                dt: config.dt.unwrap_or(s.dt),
                t_end: config.t_end.unwrap_or(s.t_end),
                initial: s.initial,
                system: s.system,
            }
        }
    };
    let mut model = model;
    if let Some(path) = &config.layout {
        let layout = io::read_layout_csv(open(path)?, &path.display().to_string())?;
        if layout.len() != model.system.n() {
            return Err(CliError::Input(format!(
                "layout has {} units but the system has {}",
                layout.len(),
                model.system.n()
            )));
        }
        model.layout = Some(layout);
    }
    if model.dt > model.t_end {
        return Err(CliError::Input(format!("dt {} exceeds t_end {}", model.dt, model.t_end)));
    }
    config.dt = Some(model.dt);
    config.t_end = Some(model.t_end);
    config.seed.get_or_insert(0);
    Ok(model)
}

fn simulate_model(model: &Model) -> Result<Trajectory> {
    let w0 = model.initial.realize(model.system.n())?;
    Ok(integrate(&model.system, &w0, model.t_end, model.dt)?)
}

/// `--trajectory` when given, otherwise a fresh simulation.
fn trajectory_for(config: &mut RunConfig, model: Option<&Model>) -> Result<Trajectory> {
    match (&config.trajectory, model) {
        (Some(path), _) => Ok(io::read_trajectory_csv(open(path)?, &path.display().to_string())?),
        (None, Some(m)) => simulate_model(m),
        (None, None) => Err(CliError::Input("pass --trajectory, --system or --scenario".into())),
    }
}

fn has_source(config: &RunConfig) -> bool {
    config.system.is_some() || config.scenario.is_some()
}

fn simulate(config: &mut RunConfig, out: &mut Artifacts) -> Result<()> {
    let model = load_model(config)?;
    let traj = simulate_model(&model)?;
    let window = resolve_window(config, traj.step());
    let rates = stats::growth_rates(&traj, window)?;
    out.csv("trajectory.csv", |w| io::write_trajectory_csv(&traj, w))?;
    out.csv("growth_rates.csv", |w| io::write_growth_rates_csv(&rates, w))?;
    out.add("trajectory.svg", unit_chart(&traj, false).render().into_bytes());
    out.add("log_trajectory.svg", unit_chart(&traj, true).render().into_bytes());
    Ok(())
}

/// One month rounded to a whole number of steps unless `--window` says otherwise.
fn resolve_window(config: &mut RunConfig, step: f64) -> f64 {
    let window = config
        .window
        .map(|w| (w / step).round().max(1.0) * step)
        .unwrap_or_else(|| (1.0 / step).round().max(1.0) * step);
    config.window = Some(window);
    window
}

fn unit_chart(traj: &Trajectory, log: bool) -> Chart {
    let t = traj.times();
    let f = |v: f64| if log { v.ln() } else { v };
    let (title, y) = if log { ("ln W_i(t)", "ln W") } else { ("W_i(t)", "W") };
    let mut chart = Chart::new(title, "t (months)", y);
    let n = traj.n();
    if n <= MAX_CHART_UNITS {
        for i in 0..n {
            let v: Vec<f64> = traj.unit(i).into_iter().map(f).collect();
            chart = chart.line(Line::new(format!("unit {}", i + 1), &t, &v));
        }
        return chart;
    }
    let last = &traj.last().w;
    let argmax = (0..n).max_by(|&a, &b| last[a].total_cmp(&last[b])).unwrap_or(0);
    let argmin = (0..n).min_by(|&a, &b| last[a].total_cmp(&last[b])).unwrap_or(0);
    let mean: Vec<f64> = aggregate(traj).v.into_iter().map(f).collect();
    chart.title = format!("{title}, {n} units");
    chart
        .line(Line::new("mean", &t, &mean))
        .line(Line::new(format!("unit {} (largest)", argmax + 1), &t, &traj.unit(argmax).into_iter().map(f).collect::<Vec<_>>()))
        .line(Line::new(format!("unit {} (smallest)", argmin + 1), &t, &traj.unit(argmin).into_iter().map(f).collect::<Vec<_>>()))
}

#[derive(Debug, Serialize)]
struct SteadyOutput {
    converged: bool,
    lambda: f64,
    x: Vec<f64>,
    a_tilde: Vec<f64>,
    a_tilde_max: f64,
    residual: f64,
    iterations: usize,
    /// `|mean(a x) - Λ|`.
    lambda_consistency: f64,
    fixed_point_residual: Option<f64>,
    /// `Λ - b(W(0), 0)`.
    asymptotic_rate_at_start: f64,
}

fn solve_steady(config: &RunConfig, model: &Model) -> Result<(SteadyState, SteadyOutput)> {
    let opts = PowerIteration {
        tol: config.tol,
        max_iter: config.max_iter,
    };
    let steady = spectral::steady_state(&model.system, opts)?;
    let w0 = model.initial.realize(model.system.n())?;
    let output = SteadyOutput {
        converged: true,
        lambda: steady.lambda,
        x: steady.x.clone(),
        a_tilde: steady.a_tilde.clone(),
        a_tilde_max: steady.a_tilde_max(),
        residual: steady.residual,
        iterations: steady.iterations,
        lambda_consistency: spectral::lambda_consistency(&steady, &model.system),
        fixed_point_residual: spectral::fixed_point_residual(&steady, &model.system).ok(),
        asymptotic_rate_at_start: spectral::asymptotic_rate(&steady, model.system.env(), &w0, 0.0),
    };
    Ok((steady, output))
}

fn steady_state(config: &mut RunConfig, out: &mut Artifacts) -> Result<()> {
    let model = load_model(config)?;
    let (_, output) = solve_steady(config, &model)?;
    out.json("steady_state.json", &output)
}

#[derive(Debug, Serialize)]
struct JCurveOutput {
    j_curve: bool,
    /// Set when the aggregate never turns.
    direction: Option<Direction>,
    #[serde(flatten)]
    report: Option<JCurveReport>,
    /// Log-slope of the aggregate over the final quarter of the samples.
    late_rate: f64,
}

fn j_curve_output(traj: &Trajectory) -> Result<JCurveOutput> {
    let agg = aggregate(traj);
    let from = (agg.len() * 3 / 4).min(agg.len().saturating_sub(2));
    let late_rate = stats::log_slope(&agg.t[from..], &agg.v[from..])?;
    Ok(match stats::detect_j_curve(&agg) {
        Ok(report) => JCurveOutput {
            j_curve: true,
            direction: None,
            report: Some(report),
            late_rate,
        },
        Err(Error::NoJCurve(direction)) => JCurveOutput {
            j_curve: false,
            direction: Some(direction),
            report: None,
            late_rate,
        },
        Err(e) => return Err(e.into()),
    })
}

fn aggregate_chart(traj: &Trajectory, j: &JCurveOutput) -> Chart {
    let agg = aggregate(traj);
    let mut chart = Chart::new("Average activity", "t (months)", "mean W").line(Line::new("mean W", &agg.t, &agg.v));
    if let Some(fit) = j.report.as_ref().and_then(|r| r.logistic_fit) {
        let fitted: Vec<f64> = agg.t.iter().map(|&t| fit.eval(t)).collect();
        chart = chart.line(Line::new("logistic fit before trough", &agg.t, &fitted).dashed());
    }
    chart
}

fn report(config: &mut RunConfig, out: &mut Artifacts) -> Result<()> {
    let model = load_model(config)?;
    let traj = trajectory_for(config, Some(&model))?;
    if traj.n() != model.system.n() {
        return Err(CliError::Input(format!(
            "trajectory has {} units but the system has {}",
            traj.n(),
            model.system.n()
        )));
    }
    // Nearly degenerate leading modes (distant growth centres) can defeat the
    // power iteration; the rest of the report does not depend on it.
    let steady = match solve_steady(config, &model) {
        Ok((_, s)) => serde_json::to_value(s)?,
        Err(CliError::Core(e)) if e.is_numerical() => {
            out.notice(format!("steady state unavailable: {e}"));
            serde_json::json!({ "converged": false, "error": e.to_string() })
        }
        Err(e) => return Err(e),
    };
    let j = j_curve_output(&traj)?;
    let dispersion = stats::dispersion_series(&traj)?;
    let hist = stats::log_histogram(&traj.last().w, config.bins)?;

    out.json("steady_state.json", &steady)?;
    out.json("jcurve.json", &j)?;
    out.csv("dispersion.csv", |w| io::write_dispersion_csv(&dispersion, w))?;
    out.csv("histogram.csv", |w| io::write_histogram_csv(&hist, w))?;
    out.add("aggregate.svg", aggregate_chart(&traj, &j).render().into_bytes());
    let t: Vec<f64> = dispersion.iter().map(|d| d.t).collect();
    let s: Vec<f64> = dispersion.iter().map(|d| d.log_std).collect();
    let chart = Chart::new("Dispersion of ln W", "t (months)", "std of ln W").line(Line::new("std ln W", &t, &s));
    out.add("dispersion.svg", chart.render().into_bytes());

    match &model.layout {
        Some(layout) => {
            let crossing = spatial::threshold_crossing_map(&traj, config.threshold)?;
            out.csv("crossing.csv", |w| io::write_crossing_csv(layout.ids(), &crossing, w))?;
            moran_artifacts(config, layout, &traj, out)?;
        }
        None => out.notice("moran skipped: no layout (pass --layout or a scenario with a lattice)"),
    }
    Ok(())
}

fn moran_artifacts(config: &RunConfig, layout: &SpatialLayout, traj: &Trajectory, out: &mut Artifacts) -> Result<()> {
    let snapshot = match config.at {
        Some(t) => traj.nearest(t),
        None => traj.last(),
    };
    let bands = DistanceBands::new(layout, config.band_width_km)?;
    let curve = spatial::moran_curve(&snapshot.w, layout, &bands, MoranWeights::Area)?;
    out.csv("moran.csv", |w| io::write_moran_csv(&curve, w))?;
    let (x, y): (Vec<f64>, Vec<f64>) = curve
        .iter()
        .filter_map(|p| p.index.map(|i| (p.midpoint_km(), i)))
        .unzip();
    let chart = Chart::new(format!("Moran's I at t = {}", snapshot.t), "distance (km)", "I")
        .line(Line::new("I", &x, &y));
    out.add("moran.svg", chart.render().into_bytes());
    if curve.iter().any(|p| p.index.is_none()) {
        out.notice("moran: some distance bands have no index (empty band); left blank in moran.csv");
    }

    if config.shuffles > 0 {
        let seed = config.seed.unwrap_or(0);
        let mut csv = String::from("band_lo_km,band_hi_km,mean,std,lo,hi\n");
        for p in curve.iter().filter(|p| p.index.is_some()) {
            let null = spatial::permutation_null(&snapshot.w, layout, &bands, p.band, MoranWeights::Area, config.shuffles, seed)?;
            let row = [p.lo_km, p.hi_km, null.mean, null.std, null.lo, null.hi].map(fmt_f64);
            csv.push_str(&row.join(","));
            csv.push('\n');
        }
        out.add("moran_null.csv", csv.into_bytes());
    }
    Ok(())
}

fn moran(config: &mut RunConfig, out: &mut Artifacts) -> Result<()> {
    let model = if has_source(config) { Some(load_model(config)?) } else { None };
    let layout = match (&model, &config.layout) {
        (Some(m), _) => m.layout.clone(),
        (None, Some(path)) => Some(io::read_layout_csv(open(path)?, &path.display().to_string())?),
        (None, None) => None,
    };
    let layout = layout.ok_or_else(|| CliError::Input("moran needs a layout: pass --layout or a lattice scenario".into()))?;
    let traj = trajectory_for(config, model.as_ref())?;
    if traj.n() != layout.len() {
        return Err(CliError::Input(format!(
            "trajectory has {} units but the layout has {}",
            traj.n(),
            layout.len()
        )));
    }
    config.seed.get_or_insert(0);
    moran_artifacts(config, &layout, &traj, out)
}

fn jcurve(config: &mut RunConfig, out: &mut Artifacts) -> Result<()> {
    let model = if has_source(config) { Some(load_model(config)?) } else { None };
    let traj = trajectory_for(config, model.as_ref())?;
    let j = j_curve_output(&traj)?;
    if let Some(d) = j.direction {
        out.notice(format!("no J-curve: the average is monotone {d}"));
    }
    out.json("jcurve.json", &j)?;
    out.add("aggregate.svg", aggregate_chart(&traj, &j).render().into_bytes());
    Ok(())
}

#[derive(Debug, Serialize)]
struct ScenarioInfo<'a> {
    name: &'a str,
    dt: f64,
    t_end: f64,
    seed: u64,
    centers: &'a [usize],
    notes: &'a [String],
}

fn scenario(config: &mut RunConfig, out: &mut Artifacts) -> Result<()> {
    let name = config
        .scenario
        .clone()
        .ok_or_else(|| CliError::Input("scenario needs --scenario NAME".into()))?;
    let seed = *config.seed.get_or_insert(0);
    let s = scenarios::by_name(&name, seed)?;
    let dt = *config.dt.get_or_insert(s.dt);
    let t_end = *config.t_end.get_or_insert(s.t_end);
    for note in &s.notes {
        out.notice(note.clone());
    }
    let doc = SystemDocument::from_system(&s.system, Some(s.initial.clone()));
    let mut text = doc.to_json()?;
    text.push('\n');
    out.add("system.json", text.into_bytes());
    if let Some(layout) = s.layout() {
        out.csv("layout.csv", |w| io::write_layout_csv(layout, w))?;
    }
    out.json(
        "scenario.json",
        &ScenarioInfo {
            name: &s.name,
            dt,
            t_end,
            seed,
            centers: &s.centers,
            notes: &s.notes,
        },
    )
}

fn load_county_panel(config: &RunConfig) -> Result<CountyPanel> {
    let (Some(attr), Some(act)) = (&config.attributes, &config.activity) else {
        return Err(CliError::Input("pass both --attributes and --activity".into()));
    };
    Ok(ingest::read_panel(
        open(attr)?,
        &attr.display().to_string(),
        open(act)?,
        &act.display().to_string(),
    )?)
}

#[derive(Debug, Serialize)]
struct PanelSummary {
    counties: usize,
    first_year: Option<i64>,
    last_year: Option<i64>,
    years: usize,
    cells: usize,
    gaps: usize,
    has_layout: bool,
}

fn ingest_panel(config: &mut RunConfig, out: &mut Artifacts) -> Result<()> {
    let panel = load_county_panel(config)?;
    let cells = panel.activity.iter().flatten().filter(|c| c.is_some()).count();
    let summary = PanelSummary {
        counties: panel.n(),
        first_year: panel.years.first().copied(),
        last_year: panel.years.last().copied(),
        years: panel.years.len(),
        cells,
        gaps: panel.n() * panel.years.len() - cells,
        has_layout: panel.layout.is_some(),
    };
    if summary.gaps > 0 {
        out.notice(format!("{} missing (county, year) cells kept as gaps", summary.gaps));
    }
    let (mut attr, mut act) = (Vec::new(), Vec::new());
    ingest::write_panel(&panel, &mut attr, &mut act)?;
    out.add("counties.csv", attr);
    out.add("activity.csv", act);
    out.json("panel_summary.json", &summary)
}

fn correlate(config: &mut RunConfig, out: &mut Artifacts) -> Result<()> {
    let panel = load_county_panel(config)?;
    let mut csv = String::from(
        "year,n,r_activity_education,r_activity_density,partial_activity_education,partial_activity_density\n",
    );
    let mut series: [Vec<(f64, f64)>; 4] = Default::default();
    for k in 0..panel.years.len() {
        let year = panel.years[k];
        match ingest::year_correlation(&panel, k) {
            Ok(r) => {
                let values = [
                    r.r_activity_education,
                    r.r_activity_density,
                    r.partial_activity_education,
                    r.partial_activity_density,
                ];
                for (s, v) in series.iter_mut().zip(values) {
                    s.push((year as f64, v));
                }
                let fields: Vec<String> = values.into_iter().map(fmt_f64).collect();
                csv.push_str(&format!("{year},{},{}\n", r.n, fields.join(",")));
            }
            Err(e) => {
                let n = panel.year_column(k).iter().filter(|c| c.is_some()).count();
                out.notice(e.to_string());
                csv.push_str(&format!("{year},{n},,,,\n"));
            }
        }
    }
    out.add("correlations.csv", csv.into_bytes());
    let labels = ["r(activity, education)", "r(activity, density)", "partial r, education", "partial r, density"];
    let mut chart = Chart::new("Yearly correlations", "year", "r");
    for (label, s) in labels.iter().zip(&series) {
        let (x, y): (Vec<f64>, Vec<f64>) = s.iter().copied().unzip();
        chart = chart.line(Line::new(*label, &x, &y));
    }
    out.add("correlations.svg", chart.render().into_bytes());
    Ok(())
}

