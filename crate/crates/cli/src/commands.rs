use std::fmt::{Display, Write as _};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use perispec::finite_section::{truncate, window_spectrum, DEFAULT_ROW_CAP};
use perispec::graph::{builtin_graph, laplacian, PeriodicGraph};
use perispec::interval::IntervalUnion;
use perispec::limits::{
    essential_spectrum, fredholm_check, gaps, limit_family, EssentialSpectrum, LimitOptions,
};
use perispec::multiparticle::{
    default_schedule, three_particle_essential_spectrum, ThreeParticleOptions,
};
use perispec::operator::BandOperator;
use perispec::potential::{parse_potential, ThreeParticleSpec};
use perispec::report::fmt_num;
use perispec::symbol::{build_symbol, dispersion_curves, selfadjoint_bands, DispersionCurves};
use perispec::C64;

use crate::svg;
use crate::{CliError, Command, Input};

pub struct Output {
    pub report: String,
    pub figure: Option<String>,
    pub dump: Option<Vec<u8>>,
}

impl Output {
    fn text(report: String) -> Self {
        Output {
            report,
            figure: None,
            dump: None,
        }
    }
}

fn domain(e: impl Display) -> CliError {
    CliError::Domain(e.to_string())
}

fn read(path: &Path, flag: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{flag} {}: {e}", path.display())))
}

fn load_graph(input: &Input) -> Result<Arc<PeriodicGraph>, CliError> {
    let g = match (&input.builtin, &input.graph) {
        (Some(name), None) => builtin_graph(name, input.n).map_err(domain)?,
        (None, Some(path)) => {
            PeriodicGraph::from_toml_str(&read(path, "--graph")?).map_err(domain)?
        }
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --builtin and --graph".into(),
            ))
        }
    };
    Ok(Arc::new(g))
}

fn load_operator(input: &Input, g: &Arc<PeriodicGraph>) -> Result<BandOperator, CliError> {
    match &input.potential {
        None => Ok(laplacian(g)),
        Some(path) => {
            let spec = parse_potential(&read(path, "--potential")?).map_err(domain)?;
            spec.operator(g).map_err(domain)
        }
    }
}

fn grid(input: &Input) -> usize {
    input.grid as usize
}

fn header(out: &mut String, kind: &str, input: &Input) {
    writeln!(out, "# perispec {kind} v1").unwrap();
    writeln!(out, "# grid {} tol {}", input.grid, fmt_num(input.tol)).unwrap();
}

fn interval_lines(out: &mut String, prefix: &str, u: &IntervalUnion) {
    for p in u.parts() {
        writeln!(out, "{prefix}[{}, {}]", fmt_num(p.lo), fmt_num(p.hi)).unwrap();
    }
}

fn union_text(u: &IntervalUnion) -> String {
    if u.is_empty() {
        return "{}".into();
    }
    u.parts()
        .iter()
        .map(|p| format!("[{}, {}]", fmt_num(p.lo), fmt_num(p.hi)))
        .collect::<Vec<_>>()
        .join(" U ")
}

fn cell_text(c: &[i64]) -> String {
    let parts: Vec<String> = c.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

pub fn execute(command: &Command, input: &Input) -> Result<Output, CliError> {
    match command {
        Command::Validate(_) => validate(input),
        Command::Symbol(_) => symbol(input),
        Command::Bands(_) => bands(input),
        Command::Curves(_) => curves(input),
        Command::Ess(_) => ess(input),
        Command::Gaps(_) => gaps_command(input),
        Command::Fredholm(_) => fredholm(input),
        Command::Threeparticle(_) => threeparticle(input),
        Command::FiniteSection(_) => finite_section(input),
    }
}

fn validate(input: &Input) -> Result<Output, CliError> {
    let g = load_graph(input)?;
    let mut out = String::from("# perispec validate v1\n");
    writeln!(out, "rank {}", g.rank()).unwrap();
    writeln!(out, "orbits {}", g.orbits()).unwrap();
    if let Some(labels) = g.labels() {
        writeln!(out, "labels {}", labels.join(" ")).unwrap();
    }
    let degrees: Vec<String> = g.degrees().iter().map(|d| d.to_string()).collect();
    writeln!(out, "degrees {}", degrees.join(" ")).unwrap();
    let mut edges = g.edges().to_vec();
    edges.sort();
    for e in &edges {
        writeln!(
            out,
            "edge {} {} {}",
            e.from + 1,
            e.to + 1,
            cell_text(&e.offset.0)
        )
        .unwrap();
    }
    out.push_str("valid\n");
    Ok(Output::text(out))
}

fn symbol(input: &Input) -> Result<Output, CliError> {
    let g = load_graph(input)?;
    let s = build_symbol(&load_operator(input, &g)?).map_err(domain)?;
    let mut out = String::from("# perispec symbol v1\n");
    out.push_str("# sigma(t) = sum of r(beta) t^beta; matrix rows as re im pairs\n");
    writeln!(out, "rank {}", s.rank()).unwrap();
    writeln!(out, "size {}", s.size()).unwrap();
    for (beta, m) in s.terms() {
        writeln!(out, "term {}", cell_text(&beta.0)).unwrap();
        for i in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols())
                .map(|j| format!("{} {}", fmt_num(m[(i, j)].re), fmt_num(m[(i, j)].im)))
                .collect();
            writeln!(out, "{}", row.join(" ")).unwrap();
        }
    }
    writeln!(
        out,
        "hermitian {}",
        yes_no(s.is_hermitian(1e-12 * s.coefficient_sum().max(1.0)))
    )
    .unwrap();
    Ok(Output::text(out))
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn bands(input: &Input) -> Result<Output, CliError> {
    let g = load_graph(input)?;
    let s = build_symbol(&load_operator(input, &g)?).map_err(domain)?;
    let b = selfadjoint_bands(&s, grid(input), input.tol).map_err(domain)?;
    let mut out = String::new();
    header(&mut out, "bands", input);
    interval_lines(&mut out, "", &b);
    Ok(Output {
        figure: Some(svg::intervals(&[("bands", &b)], None)),
        report: out,
        dump: None,
    })
}

fn curve_rows(out: &mut String, prefix: &str, c: &DispersionCurves) {
    for (angles, values) in c.points() {
        let phi: Vec<String> = angles.iter().map(|&a| fmt_num(a)).collect();
        for (j, z) in values.iter().enumerate() {
            writeln!(
                out,
                "{prefix}{},{},{},{}",
                phi.join(","),
                j + 1,
                fmt_num(z.re),
                fmt_num(z.im)
            )
            .unwrap();
        }
    }
}

fn curve_columns(rank: usize) -> String {
    (1..=rank).map(|k| format!("phi{k},")).collect()
}

fn curves(input: &Input) -> Result<Output, CliError> {
    let g = load_graph(input)?;
    let a = load_operator(input, &g)?;
    let s = build_symbol(&a).map_err(domain)?;
    let hermitian = s.is_hermitian(1e-12 * s.coefficient_sum().max(1.0));
    let c = dispersion_curves(&s, grid(input), hermitian).map_err(domain)?;
    let mut out = String::from("# perispec curves v1\n");
    writeln!(out, "{}branch,re,im", curve_columns(s.rank())).unwrap();
    curve_rows(&mut out, "", &c);
    Ok(Output {
        figure: Some(svg::curves(&c)),
        report: out,
        dump: None,
    })
}

fn essential(input: &Input) -> Result<(Vec<String>, EssentialSpectrum), CliError> {
    let g = load_graph(input)?;
    let a = load_operator(input, &g)?;
    let opts = LimitOptions {
        tol: input.tol,
        ..LimitOptions::default()
    };
    let family = limit_family(&a, &opts).map_err(domain)?;
    let provenance = family
        .members
        .iter()
        .map(|m| m.provenance.join(", "))
        .collect();
    let ess = essential_spectrum(&family, grid(input), input.tol).map_err(domain)?;
    Ok((provenance, ess))
}

fn ess(input: &Input) -> Result<Output, CliError> {
    let (provenance, spectrum) = essential(input)?;
    let mut out = String::new();
    header(&mut out, "ess", input);
    match &spectrum {
        EssentialSpectrum::Bands { union, per_member } => {
            for (i, (p, b)) in provenance.iter().zip(per_member).enumerate() {
                writeln!(out, "member {} {p}: {}", i + 1, union_text(b)).unwrap();
            }
            interval_lines(&mut out, "ess ", union);
            let labelled: Vec<(String, &IntervalUnion)> = per_member
                .iter()
                .enumerate()
                .map(|(i, b)| (format!("member {}", i + 1), b))
                .collect();
            let mut rows: Vec<(&str, &IntervalUnion)> =
                labelled.iter().map(|(l, b)| (l.as_str(), *b)).collect();
            rows.push(("ess", union));
            Ok(Output {
                figure: Some(svg::intervals(&rows, None)),
                report: out,
                dump: None,
            })
        }
        EssentialSpectrum::Curves(curves) => {
            out.push_str("# not self-adjoint: the spectrum is the union of the curves below\n");
            for (i, p) in provenance.iter().enumerate() {
                writeln!(out, "member {} {p}", i + 1).unwrap();
            }
            let rank = curves.first().map_or(0, |c| c.rank());
            writeln!(out, "member,{}branch,re,im", curve_columns(rank)).unwrap();
            for (i, c) in curves.iter().enumerate() {
                curve_rows(&mut out, &format!("{},", i + 1), c);
            }
            Ok(Output::text(out))
        }
    }
}

fn gaps_command(input: &Input) -> Result<Output, CliError> {
    let (lo, hi) = match input.window.as_ref().map(|w| w.0.as_slice()) {
        Some(&[lo, hi]) if lo < hi => (lo, hi),
        _ => {
            return Err(CliError::Usage(
                "gaps needs --window LO,HI with LO < HI".into(),
            ))
        }
    };
    let (_, spectrum) = essential(input)?;
    let union = match spectrum {
        EssentialSpectrum::Bands { union, .. } => union,
        EssentialSpectrum::Curves(_) => {
            return Err(CliError::Domain(
                "NotSelfAdjoint: gaps are defined for self-adjoint operators".into(),
            ))
        }
    };
    let mut out = String::new();
    header(&mut out, "gaps", input);
    writeln!(out, "# window [{}, {}]", fmt_num(lo), fmt_num(hi)).unwrap();
    let found = gaps(&union, lo, hi);
    if found.is_empty() {
        out.push_str("# no gaps\n");
    }
    for (a, b) in &found {
        writeln!(out, "({}, {})", fmt_num(*a), fmt_num(*b)).unwrap();
    }
    Ok(Output {
        figure: Some(svg::intervals(&[("ess", &union)], Some((lo, hi)))),
        report: out,
        dump: None,
    })
}

fn fredholm(input: &Input) -> Result<Output, CliError> {
    let lambda = match input.lambda.as_ref().map(|w| w.0.as_slice()) {
        Some(&[re]) => C64::new(re, 0.0),
        Some(&[re, im]) => C64::new(re, im),
        _ => {
            return Err(CliError::Usage(
                "fredholm needs --lambda RE or --lambda RE,IM".into(),
            ))
        }
    };
    let g = load_graph(input)?;
    let a = load_operator(input, &g)?;
    let opts = LimitOptions {
        tol: input.tol,
        ..LimitOptions::default()
    };
    let family = limit_family(&a, &opts).map_err(domain)?;
    let decision = fredholm_check(&family, lambda, grid(input), input.tol).map_err(domain)?;
    let mut out = String::new();
    header(&mut out, "fredholm", input);
    writeln!(out, "lambda {} {}", fmt_num(lambda.re), fmt_num(lambda.im)).unwrap();
    for (i, (m, r)) in family.members.iter().zip(&decision.members).enumerate() {
        writeln!(
            out,
            "member {} {}: invertible {} min_abs_det {}",
            i + 1,
            m.provenance.join(", "),
            yes_no(r.invertible),
            fmt_num(r.min_abs_det)
        )
        .unwrap();
    }
    writeln!(out, "fredholm {}", yes_no(decision.fredholm)).unwrap();
    if let (Some(i), Some(w)) = (decision.failing, decision.witness()) {
        let phi: Vec<String> = w.iter().map(|&x| fmt_num(x)).collect();
        writeln!(out, "witness member {} phi {}", i + 1, phi.join(" ")).unwrap();
    }
    Ok(Output::text(out))
}

fn radii(input: &Input) -> Result<Option<Vec<usize>>, CliError> {
    let Some(w) = input.window.as_ref().map(|w| w.0.as_slice()) else {
        return Ok(None);
    };
    w.iter()
        .map(|&r| {
            if r >= 1.0 && r.fract() == 0.0 && r <= 1e6 {
                Ok(r as usize)
            } else {
                Err(CliError::Usage(format!(
                    "--window radius {r} must be a positive integer"
                )))
            }
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

fn threeparticle(input: &Input) -> Result<Output, CliError> {
    let Some(path) = &input.potential else {
        return Err(CliError::Usage(
            "threeparticle needs --potential with w1, w2, w12".into(),
        ));
    };
    let spec = ThreeParticleSpec::from_toml_str(&read(path, "--potential")?).map_err(domain)?;
    let g = load_graph(input)?;
    let mut opts = ThreeParticleOptions {
        grid: grid(input),
        tol: input.tol,
        ..ThreeParticleOptions::default()
    };
    match radii(input)?.as_deref() {
        None => {}
        Some([r]) => opts.schedule = default_schedule(*r),
        Some(s) => opts.schedule = s.to_vec(),
    }
    let r = three_particle_essential_spectrum(&g, &spec, &opts).map_err(domain)?;
    let mut out = String::new();
    header(&mut out, "threeparticle", input);
    let schedule: Vec<String> = opts.schedule.iter().map(|r| r.to_string()).collect();
    writeln!(out, "# radii {}", schedule.join(" ")).unwrap();
    writeln!(out, "S {}", union_text(&r.laplacian_bands)).unwrap();
    for (name, list) in [("discrete1", &r.discrete1), ("discrete2", &r.discrete2)] {
        for d in list.iter() {
            writeln!(
                out,
                "{name} {} drift {}",
                fmt_num(d.value),
                fmt_num(d.drift)
            )
            .unwrap();
        }
    }
    writeln!(out, "H1 {}", union_text(&r.h1)).unwrap();
    writeln!(out, "H2 {}", union_text(&r.h2)).unwrap();
    writeln!(out, "H12 inner {}", union_text(&r.h12_inner)).unwrap();
    writeln!(out, "H12 outer {}", union_text(&r.h12_outer)).unwrap();
    writeln!(out, "ess inner {}", union_text(&r.inner)).unwrap();
    writeln!(out, "ess outer {}", union_text(&r.outer)).unwrap();
    writeln!(
        out,
        "bound [{}, {}]",
        fmt_num(r.sanity.0),
        fmt_num(r.sanity.1)
    )
    .unwrap();
    writeln!(out, "within bound {}", yes_no(r.within_sanity)).unwrap();
    let rows = [
        ("H1", &r.h1),
        ("H2", &r.h2),
        ("H12 inner", &r.h12_inner),
        ("H12 outer", &r.h12_outer),
        ("ess inner", &r.inner),
        ("ess outer", &r.outer),
    ];
    Ok(Output {
        figure: Some(svg::intervals(&rows, Some(r.sanity))),
        report: out,
        dump: None,
    })
}

fn finite_section(input: &Input) -> Result<Output, CliError> {
    let radius = match radii(input)?.as_deref() {
        Some(&[r]) => r,
        _ => return Err(CliError::Usage("finite-section needs --window R".into())),
    };
    let g = load_graph(input)?;
    let a = load_operator(input, &g)?;
    let window = truncate(&a, radius, DEFAULT_ROW_CAP).map_err(domain)?;
    let values = window_spectrum(&window).map_err(domain)?;
    let mut out = String::from("# perispec finite-section v1\n");
    writeln!(out, "# window {radius} rows {}", window.rows()).unwrap();
    for z in &values {
        writeln!(out, "{} {}", fmt_num(z.re), fmt_num(z.im)).unwrap();
    }
    let dump = match input.dump {
        Some(_) => {
            let mut buf = Vec::new();
            window.dump(&mut buf).map_err(domain)?;
            Some(buf)
        }
        None => None,
    };
    Ok(Output {
        figure: Some(svg::points(&values)),
        report: out,
        dump,
    })
}
