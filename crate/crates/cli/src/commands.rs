use std::path::PathBuf;

use anyhow::{bail, Result};
use lmsim_core::integrator::Profile;
use lmsim_core::model::{F, FP, FPP};
use lmsim_core::oracles::{verify_pins, PIN_NAMES};
use lmsim_core::phaseplane::{critical_a, portrait as phase_portrait, PhaseControls, Window};
use lmsim_core::shooting::{classify_ivp, solve as solve_bvp, IvpSpec, Shape, SolutionSummary};
use lmsim_core::{BvpSolution, Error, ShootControls, SolutionSet};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::output::{fmt_f64, OutDir};
use crate::{Over, Settings, Status};

pub struct Context {
    pub settings: Settings,
    pub out_dir: PathBuf,
}

impl Context {
    fn shoot_controls(&self) -> ShootControls {
        let s = self.settings;
        let mut c = ShootControls::default();
        c.integrator = c.integrator.with_tolerances(s.rel_tol, s.abs_tol).with_span(s.span);
        c.tail_tol = s.tail_tol;
        c.delta = s.delta;
        c
    }

    fn phase_controls(&self) -> PhaseControls {
        PhaseControls::default().with_delta(self.settings.delta)
    }

    fn out(&self) -> Result<OutDir> {
        OutDir::create(&self.out_dir)
    }
}

pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidParameter(_) => "invalid_parameter",
        Error::InvalidControls(_) => "invalid_controls",
        Error::NonFinite(_) => "non_finite",
        Error::OutOfSpan { .. } => "out_of_span",
        Error::StepBudget(_) => "step_budget",
        Error::Undecided { .. } => "undecided",
        Error::Bracket(_) => "bracket",
        Error::Degenerate(_) => "degenerate",
        Error::Tracing(_) => "unresolved",
        Error::Quadrature(_) => "quadrature",
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn profile_rows(prof: &Profile<6>) -> impl Iterator<Item = Vec<String>> + '_ {
    prof.samples().map(|(t, y)| vec![fmt_f64(t), fmt_f64(y[F]), fmt_f64(y[FP]), fmt_f64(y[FPP])])
}

#[derive(Serialize)]
struct SolutionEntry {
    #[serde(flatten)]
    summary: SolutionSummary,
    csv: String,
}

fn write_solutions<'a>(out: &OutDir, prefix: &str, sols: impl Iterator<Item = &'a BvpSolution>) -> Result<Vec<SolutionEntry>> {
    sols.enumerate()
        .map(|(i, s)| {
            let name = format!("{prefix}_{i}.csv");
            out.write_csv(&name, &["t", "f", "fp", "fpp"], profile_rows(&s.profile))?;
            Ok(SolutionEntry { summary: s.summary(), csv: name })
        })
        .collect()
}

pub fn solve(ctx: &Context, m: f64, a: f64, exploratory: bool) -> Result<Status> {
    let mut controls = ctx.shoot_controls();
    controls.exploratory = exploratory;
    let set = solve_bvp(m, a, &controls)?;
    let out = ctx.out()?;
    let isolated = write_solutions(&out, "solution", set.isolated.iter())?;
    let family = match &set.family {
        Some(f) => Some(json!({
            "b_lo": f.b_lo,
            "b_hi": f.b_hi,
            "samples": write_solutions(&out, "family", f.samples.iter())?,
        })),
        None => None,
    };
    let extra = write_solutions(&out, "extra", set.extra.iter())?;
    let summary = json!({
        "command": "solve",
        "m": m,
        "a": a,
        "regime": set.regime,
        "isolated": isolated,
        "family": family,
        "extra": extra,
        "uniqueness": set.uniqueness,
        "convex_concave_search": set.convex_concave_search,
        "empty_reason": set.empty_reason,
        "notes": set.notes,
        "exploratory": exploratory,
        "settings": ctx.settings,
    });
    out.write_json("solve.json", &summary)?;
    print_json(&summary)?;
    Ok(if set.is_empty() && set.empty_reason.is_some() { Status::Empty } else { Status::Done })
}

pub fn classify(ctx: &Context, m: f64, a: f64, b: f64) -> Result<Status> {
    let spec = IvpSpec::new(m, a, b)?;
    let outcome = classify_ivp(&spec, &ctx.shoot_controls())?;
    print_json(&json!({
        "command": "classify",
        "m": m,
        "a": a,
        "b": b,
        "outcome": outcome,
        "settings": ctx.settings,
    }))?;
    Ok(Status::Done)
}

pub fn portrait(ctx: &Context, m: f64, bounds: [f64; 4], grid: usize) -> Result<Status> {
    let [u_min, u_max, v_min, v_max] = bounds;
    let window = Window { u_min, u_max, v_min, v_max };
    let phase = ctx.phase_controls();
    let p = phase_portrait(m, window, grid, &phase)?;
    let out = ctx.out()?;

    let iso_rows = p.isoclines.iter().flat_map(|c| {
        c.segments.iter().enumerate().flat_map(move |(k, seg)| {
            seg.iter().map(move |pt| vec![c.name.clone(), k.to_string(), fmt_f64(pt.u), fmt_f64(pt.v)])
        })
    });
    out.write_csv("portrait_isoclines.csv", &["curve", "segment", "u", "v"], iso_rows)?;

    let name_of = |t: &lmsim_core::phaseplane::PhaseTrajectory| t.which.map(|w| w.name()).unwrap_or("generic");
    let sep_rows = p.separatrices.iter().flat_map(|t| {
        let name = name_of(t);
        t.points.iter().map(move |(s, pt)| vec![name.to_string(), fmt_f64(*s), fmt_f64(pt.u), fmt_f64(pt.v)])
    });
    out.write_csv("portrait_separatrices.csv", &["separatrix", "sigma", "u", "v"], sep_rows)?;

    let cross_rows = p.separatrices.iter().flat_map(|t| {
        let name = name_of(t);
        t.crossings.iter().map(move |c| {
            vec![name.to_string(), c.ordinal.to_string(), curve_name(c.curve), fmt_f64(c.sigma), fmt_f64(c.point.u), fmt_f64(c.point.v)]
        })
    });
    out.write_csv("portrait_crossings.csv", &["separatrix", "ordinal", "curve", "sigma", "u", "v"], cross_rows)?;

    let flow_rows = p.flow.iter().map(|f| vec![fmt_f64(f.start.u), fmt_f64(f.start.v), fmt_f64(f.end.u), fmt_f64(f.end.v)]);
    out.write_csv("portrait_flow.csv", &["u0", "v0", "u1", "v1"], flow_rows)?;

    let sp_rows = p.singular_points.iter().zip(["O", "A"]).map(|(s, name)| {
        vec![
            name.to_string(),
            fmt_f64(s.location.u),
            fmt_f64(s.location.v),
            format!("{:?}", s.classification),
            fmt_f64(s.eigenvalues[0].re),
            fmt_f64(s.eigenvalues[0].im),
            fmt_f64(s.eigenvalues[1].re),
            fmt_f64(s.eigenvalues[1].im),
        ]
    });
    out.write_csv("portrait_singular_points.csv", &["point", "u", "v", "classification", "re1", "im1", "re2", "im2"], sp_rows)?;

    let separatrices: Vec<_> = p
        .separatrices
        .iter()
        .map(|t| {
            json!({
                "name": name_of(t),
                "time_sign": t.time_sign,
                "termination": t.termination,
                "points": t.points.len(),
                "crossing_sequence": t.crossings.iter().map(|c| curve_name(c.curve)).collect::<Vec<_>>(),
            })
        })
        .collect();
    let index = json!({
        "command": "portrait",
        "m": m,
        "window": window,
        "grid": grid,
        "degenerate": p.degenerate,
        "layers": {
            "isoclines": "portrait_isoclines.csv",
            "separatrices": "portrait_separatrices.csv",
            "crossings": "portrait_crossings.csv",
            "flow": "portrait_flow.csv",
            "singular_points": "portrait_singular_points.csv",
        },
        "singular_points": p.singular_points,
        "separatrices": separatrices,
        "settings": ctx.settings,
        "phase_controls": phase,
    });
    out.write_json("portrait.json", &index)?;
    print_json(&index)?;
    Ok(Status::Done)
}

fn curve_name(c: lmsim_core::phaseplane::CurveKind) -> String {
    use lmsim_core::phaseplane::CurveKind;
    match c {
        CurveKind::PIsocline => "p_isocline".to_string(),
        CurveKind::QIsocline => "q_isocline".to_string(),
        CurveKind::UAxis => "u_axis".to_string(),
        CurveKind::VAxis => "v_axis".to_string(),
        CurveKind::Line(u) => format!("line_{}", fmt_f64(u)),
    }
}

pub fn critical(ctx: &Context, m: f64) -> Result<Status> {
    let phase = ctx.phase_controls();
    let c = critical_a(m, &phase)?;
    print_json(&json!({
        "command": "critical",
        "m": m,
        "critical": c,
        "bound": 2.0 / (m + 1.0).sqrt(),
        "settings": ctx.settings,
        "phase_controls": phase,
    }))?;
    Ok(Status::Done)
}

pub fn verify(ctx: &Context, tol: Option<f64>, pins: &[String]) -> Result<Status> {
    let mut controls = ctx.shoot_controls();
    if let Some(t) = tol {
        controls.integrator.rel_tol = t;
    }
    let names: Vec<&str> = pins.iter().map(String::as_str).collect();
    let report = verify_pins(&controls, &names)?;
    println!("{:<12} {:<6} {:>12} {:>10}", "pin", "status", "measured", "tolerance");
    for p in &report.pins {
        println!("{:<12} {:<6} {:>12.3e} {:>10.0e}", p.name, if p.passed { "pass" } else { "FAIL" }, p.measured, p.tolerance);
        for line in p.detail.split("; ") {
            println!("    {line}");
        }
    }
    let failing: Vec<&str> = report.failures().map(|p| p.name.as_str()).collect();
    if !failing.is_empty() {
        println!("failing pins: {}", failing.join(", "));
    }
    ctx.out()?.write_json(
        "verify.json",
        &json!({
            "command": "verify",
            "pins": report.pins,
            "available": PIN_NAMES,
            "rel_tol": controls.integrator.rel_tol,
            "settings": ctx.settings,
        }),
    )?;
    Ok(if report.passed() { Status::Done } else { Status::Failed })
}

fn sweep_row(m: f64, a: f64, result: &lmsim_core::Result<SolutionSet>) -> Vec<String> {
    let (status, detail, counts, family, extra) = match result {
        Ok(set) => {
            let count = |shape: Shape| set.isolated.iter().filter(|s| s.shape == shape).count().to_string();
            let status = if set.is_empty() { "empty" } else { "solutions" };
            let family = set
                .family
                .as_ref()
                .map(|f| [fmt_f64(f.b_lo), fmt_f64(f.b_hi)])
                .unwrap_or_else(|| [String::new(), String::new()]);
            let counts = [set.isolated.len().to_string(), count(Shape::Convex), count(Shape::ConvexConcave), count(Shape::ConcaveConvex)];
            (status, set.empty_reason.clone().unwrap_or_default(), counts, family, set.extra.len().to_string())
        }
        Err(e) => ("error", e.to_string(), Default::default(), Default::default(), String::new()),
    };
    let mut row = vec![fmt_f64(m), fmt_f64(a), status.to_string()];
    row.extend(counts);
    row.extend(family);
    row.push(extra);
    row.push(detail);
    row
}

#[allow(clippy::too_many_arguments)]
pub fn sweep(ctx: &Context, over: Over, from: f64, to: f64, points: usize, m: Option<f64>, a: Option<f64>) -> Result<Status> {
    if points == 0 {
        bail!(Error::InvalidParameter("a sweep needs at least one point".to_string()));
    }
    let fixed = match over {
        Over::A => m.ok_or_else(|| Error::InvalidParameter("sweeping a needs --m".to_string()))?,
        Over::M => a.ok_or_else(|| Error::InvalidParameter("sweeping m needs --a".to_string()))?,
    };
    let values: Vec<f64> = if points == 1 {
        vec![from]
    } else {
        (0..points).map(|i| from + (to - from) * i as f64 / (points - 1) as f64).collect()
    };
    let controls = ctx.shoot_controls();
    let rows: Vec<(f64, f64, lmsim_core::Result<SolutionSet>)> = values
        .par_iter()
        .map(|&x| {
            let (m, a) = match over {
                Over::A => (fixed, x),
                Over::M => (x, fixed),
            };
            (m, a, solve_bvp(m, a, &controls))
        })
        .collect();
    let errors = rows.iter().filter(|r| r.2.is_err()).count();
    let out = ctx.out()?;
    let header = [
        "m",
        "a",
        "status",
        "isolated",
        "convex",
        "convex_concave",
        "concave_convex",
        "family_b_lo",
        "family_b_hi",
        "extra",
        "detail",
    ];
    out.write_csv("sweep.csv", &header, rows.iter().map(|(m, a, r)| sweep_row(*m, *a, r)))?;
    print_json(&json!({
        "command": "sweep",
        "over": over,
        "from": from,
        "to": to,
        "points": points,
        "fixed": fixed,
        "csv": "sweep.csv",
        "errors": errors,
        "settings": ctx.settings,
    }))?;
    Ok(if errors == 0 { Status::Done } else { Status::Failed })
}
