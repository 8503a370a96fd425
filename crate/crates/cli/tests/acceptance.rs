//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.
//!
//! Expected values come from closed forms computed here, never from the
//! library under test.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use perispec::finite_section::{finite_section_spectrum, DEFAULT_ROW_CAP};
use perispec::graph::{
    cayley, graph_distance, honeycomb, laplacian, zigzag, PeriodicGraph, Vertex,
};
use perispec::interval::{Interval, IntervalUnion};
use perispec::lattice::Cell;
use perispec::limits::{essential_spectrum, limit_family, EssentialSpectrum, LimitOptions};
use perispec::linalg::CMatrix;
use perispec::operator::{
    delta, diagonal, quotient_transform, schrodinger, BandOperator, CoefficientField, FnKernel,
    Kernel,
};
use perispec::potential::parse_potential;
use perispec::symbol::{build_symbol, dispersion_curves, grid_angles, selfadjoint_bands};
use perispec::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-6;

type Verdict = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn run(args: &[&str]) -> Result<(String, Duration), String> {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_perispec"))
        .args(args)
        .output()
        .map_err(|e| format!("cannot run perispec: {e}"))?;
    let elapsed = start.elapsed();
    if !out.status.success() {
        return Err(format!(
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok((
        String::from_utf8(out.stdout).map_err(|e| e.to_string())?,
        elapsed,
    ))
}

fn parse_interval(s: &str) -> Option<(f64, f64)> {
    let inner = s.trim().strip_prefix('[')?.strip_suffix(']')?;
    let (a, b) = inner.split_once(", ")?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

fn parse_union(s: &str) -> Option<IntervalUnion> {
    if s.trim() == "{}" {
        return Some(IntervalUnion::empty());
    }
    let parts = s
        .split(" U ")
        .map(|p| parse_interval(p).map(|(a, b)| Interval::new(a, b)))
        .collect::<Option<Vec<_>>>()?;
    Some(IntervalUnion::from_intervals(parts))
}

/// Interval lines of a `bands` report.
fn report_bands(text: &str) -> Vec<(f64, f64)> {
    text.lines().filter_map(parse_interval).collect()
}

fn close_to(got: &[(f64, f64)], expect: &[(f64, f64)], tol: f64) -> bool {
    got.len() == expect.len()
        && got
            .iter()
            .zip(expect)
            .all(|(g, e)| (g.0 - e.0).abs() <= tol && (g.1 - e.1).abs() <= tol)
}

fn fmt_pairs(v: &[(f64, f64)]) -> String {
    v.iter()
        .map(|(a, b)| format!("[{a}, {b}]"))
        .collect::<Vec<_>>()
        .join(" U ")
}

fn criterion_1() -> Verdict {
    let mut notes = Vec::new();
    for n in 1..=3 {
        let rank = n.to_string();
        let (text, t) = run(&["bands", "--builtin", "cayley", "-n", &rank])?;
        let b = report_bands(&text);
        check(
            close_to(&b, &[(-1.0, 1.0)], TOL),
            format!("n={n}: got {}", fmt_pairs(&b)),
        )?;
        check(t < Duration::from_secs(1), format!("n={n}: took {t:?}"))?;
        notes.push(format!("n={n} {:.3}s", t.as_secs_f64()));
    }
    Ok(notes.join(", "))
}

fn criterion_2() -> Verdict {
    let mut notes = Vec::new();
    for name in ["zigzag", "honeycomb"] {
        let (text, t) = run(&["bands", "--builtin", name, "--grid", "256"])?;
        let b = report_bands(&text);
        check(
            close_to(&b, &[(-1.0, 1.0)], TOL),
            format!("{name}: got {}", fmt_pairs(&b)),
        )?;
        check(t < Duration::from_secs(10), format!("{name}: took {t:?}"))?;
        notes.push(format!("{name} {:.3}s", t.as_secs_f64()));
    }
    Ok(notes.join(", "))
}

/// Zigzag with potential (v1, v2): eigenvalues of the 2×2 symbol are
/// ((v1+v2) ∓ √((v1−v2)² + 4c))/2 with c = cos²(φ/2) ∈ [0, 1]; each branch is
/// monotone in c, so its range is spanned by the values at c = 0 and c = 1.
fn zigzag_oracle(v1: f64, v2: f64) -> Vec<(f64, f64)> {
    let branch =
        |sign: f64, c: f64| ((v1 + v2) + sign * ((v1 - v2).powi(2) + 4.0 * c).sqrt()) / 2.0;
    let lower = (branch(-1.0, 1.0), branch(-1.0, 0.0));
    let upper = (branch(1.0, 0.0), branch(1.0, 1.0));
    let u = IntervalUnion::from_intervals([
        Interval::new(lower.0, lower.1),
        Interval::new(upper.0, upper.1),
    ]);
    u.parts().iter().map(|p| (p.lo, p.hi)).collect()
}

fn criterion_3(dir: &Path) -> Verdict {
    let oracle = zigzag_oracle(1.0, 3.0);
    let pot = dir.join("v13.toml");
    fs::write(&pot, "kind = \"periodic\"\nvalues = [1.0, 3.0]\n").map_err(|e| e.to_string())?;
    let pot = pot.to_str().unwrap();
    let (text, _) = run(&["bands", "--builtin", "zigzag", "--potential", pot])?;
    let b = report_bands(&text);
    check(
        close_to(&b, &oracle, TOL),
        format!("bands {} vs oracle {}", fmt_pairs(&b), fmt_pairs(&oracle)),
    )?;
    let (text, _) = run(&[
        "gaps",
        "--builtin",
        "zigzag",
        "--potential",
        pot,
        "--window",
        "0,4",
    ])?;
    let gaps: Vec<(f64, f64)> = text
        .lines()
        .filter_map(|l| {
            let (a, b) = l.strip_prefix('(')?.strip_suffix(')')?.split_once(", ")?;
            Some((a.parse().ok()?, b.parse().ok()?))
        })
        .collect();
    let expect_gap = [(oracle[0].1, oracle[1].0)];
    check(close_to(&gaps, &expect_gap, TOL), format!("gaps {gaps:?}"))?;
    Ok(format!("bands {}, gap {:?}", fmt_pairs(&b), gaps[0]))
}

fn criterion_4(dir: &Path) -> Verdict {
    let ray = "kind = \"ray\"\nc = [2.0, 2.0]\nd = [1.0, 1.0]\n";
    let a = parse_potential(ray)
        .and_then(|p| p.operator(&Arc::new(zigzag())))
        .map_err(|e| e.to_string())?;
    let family = limit_family(&a, &LimitOptions::default()).map_err(|e| e.to_string())?;
    let (union, members) = match essential_spectrum(&family, 256, TOL).map_err(|e| e.to_string())? {
        EssentialSpectrum::Bands { union, per_member } => (union, per_member),
        EssentialSpectrum::Curves(_) => return Err("expected self-adjoint limits".into()),
    };
    let limit_oracles: Vec<IntervalUnion> = [1.0, 3.0]
        .iter()
        .map(|&v| {
            IntervalUnion::from_intervals(
                zigzag_oracle(v, v)
                    .into_iter()
                    .map(|(a, b)| Interval::new(a, b)),
            )
        })
        .collect();
    let expect = limit_oracles[0].union(&limit_oracles[1]);
    check(
        members.len() == 2,
        format!("{} limit operators", members.len()),
    )?;
    for m in &members {
        check(
            limit_oracles.iter().any(|o| m.hausdorff(o) <= TOL),
            format!("limit bands {m} match neither oracle"),
        )?;
    }
    check(
        union.hausdorff(&expect) <= TOL,
        format!("ess {union} vs {expect}"),
    )?;

    let plain = dir.join("ray.toml");
    let bumped = dir.join("ray_bump.toml");
    fs::write(&plain, ray).map_err(|e| e.to_string())?;
    fs::write(
        &bumped,
        format!("{ray}entries = [[1, [0], 9.0], [2, [-4], -2.5], [1, [17], 0.125]]\n"),
    )
    .map_err(|e| e.to_string())?;
    let (t1, _) = run(&[
        "ess",
        "--builtin",
        "zigzag",
        "--potential",
        plain.to_str().unwrap(),
    ])?;
    let (t2, _) = run(&[
        "ess",
        "--builtin",
        "zigzag",
        "--potential",
        bumped.to_str().unwrap(),
    ])?;
    check(t1 == t2, "compact perturbation changed the ess report")?;
    Ok(format!("ess {union}; perturbed report byte-identical"))
}

fn criterion_5(dir: &Path) -> Verdict {
    let pot = dir.join("decay.toml");
    fs::write(
        &pot,
        "kind = \"radial\"\nexponential = { amplitude = 1.0, rate = 0.5 }\n",
    )
    .map_err(|e| e.to_string())?;
    let pot = pot.to_str().unwrap();
    let (yes, _) = run(&[
        "fredholm",
        "--builtin",
        "cayley",
        "--potential",
        pot,
        "--lambda",
        "2",
    ])?;
    check(yes.lines().any(|l| l == "fredholm yes"), "λ=2 not Fredholm")?;
    let (no, _) = run(&[
        "fredholm",
        "--builtin",
        "cayley",
        "--potential",
        pot,
        "--lambda",
        "0",
    ])?;
    check(
        no.lines().any(|l| l == "fredholm no"),
        "λ=0 reported Fredholm",
    )?;
    let phi: f64 = no
        .lines()
        .find_map(|l| l.strip_prefix("witness member 1 phi "))
        .and_then(|s| s.parse().ok())
        .ok_or("no witness angle")?;
    // σ(φ) − 0 = cos φ vanishes at φ = π/2 and 3π/2.
    check(
        phi.cos().abs() < 1e-9,
        format!("witness φ = {phi} is not a zero of cos φ"),
    )?;
    Ok(format!(
        "λ=2 Fredholm, λ=0 not Fredholm with witness φ = {phi}"
    ))
}

fn criterion_6() -> Verdict {
    let zz = Arc::new(zigzag());
    let gapped = schrodinger(&zz, &diagonal(&[1.0, 3.0])).map_err(|e| e.to_string())?;
    let cases: Vec<(&str, BandOperator, usize)> = vec![
        ("cayley Z", laplacian(&Arc::new(cayley(1).unwrap())), 40),
        ("zigzag", laplacian(&zz), 40),
        ("zigzag v=(1,3)", gapped.clone(), 40),
        ("honeycomb", laplacian(&Arc::new(honeycomb())), 6),
    ];
    let mut count = 0;
    for (name, a, r) in &cases {
        let bands = selfadjoint_bands(&build_symbol(a).map_err(|e| e.to_string())?, 256, TOL)
            .map_err(|e| e.to_string())?;
        let values = finite_section_spectrum(a, *r, DEFAULT_ROW_CAP).map_err(|e| e.to_string())?;
        for z in &values {
            check(
                z.im == 0.0 && bands.distance(z.re) <= 0.05,
                format!("{name}: eigenvalue {z} outside {bands} + 0.05"),
            )?;
        }
        count += values.len();
    }
    let values =
        finite_section_spectrum(&gapped, 40, DEFAULT_ROW_CAP).map_err(|e| e.to_string())?;
    if let Some(z) = values.iter().find(|z| z.re > 1.05 && z.re < 2.95) {
        return Err(format!(
            "zigzag v=(1,3) eigenvalue {} inside (1.05, 2.95)",
            z.re
        ));
    }
    Ok(format!("{count} eigenvalues checked"))
}

fn criterion_7(dir: &Path) -> Verdict {
    let c: f64 = 0.75;
    let spec = dir.join("three.toml");
    fs::write(
        &spec,
        format!("[w1]\nprofile = [{}]\n[w2]\nprofile = [{}]\n", -c, -c),
    )
    .map_err(|e| e.to_string())?;
    let (text, t) = run(&[
        "threeparticle",
        "--builtin",
        "cayley",
        "--potential",
        spec.to_str().unwrap(),
        "--window",
        "200",
    ])?;
    check(t < Duration::from_secs(60), format!("took {t:?}"))?;
    let field = |key: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix(key))
            .ok_or(format!("missing '{key}'"))
    };
    let outer = parse_union(field("ess outer ")?).ok_or("unparsable outer enclosure")?;
    let inner = parse_union(field("ess inner ")?).ok_or("unparsable inner enclosure")?;
    // sp Δ = [−1, 1]; the bound state of Δ − cδ sits at −√(1+c²).
    let bound_state = -(1.0 + c * c).sqrt();
    let expect = IntervalUnion::single(-2.0, 2.0)
        .union(&IntervalUnion::single(bound_state - 1.0, bound_state + 1.0));
    check(
        outer.hausdorff(&expect) <= 1e-3,
        format!("outer {outer} vs {expect}"),
    )?;
    check(
        inner.hausdorff(&expect) <= 1e-3,
        format!("inner {inner} vs {expect}"),
    )?;
    let disc: f64 = field("discrete1 ")?
        .split_whitespace()
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or("no discrete eigenvalue")?;
    check(
        (disc - bound_state).abs() <= 1e-4,
        format!("discrete eigenvalue {disc} vs {bound_state}"),
    )?;
    let (m, big_m) = (-c, 0.0);
    check(
        outer.is_subset_of(&IntervalUnion::single(m - 2.0, big_m + 2.0)),
        format!("{outer} not inside [{}, {}]", m - 2.0, big_m + 2.0),
    )?;
    Ok(format!(
        "ess {outer}, discrete {disc}, {:.2}s",
        t.as_secs_f64()
    ))
}

fn torus_graph(orbits: usize) -> Arc<PeriodicGraph> {
    let mut edges = Vec::new();
    for j in 1..=orbits {
        let k = j % orbits + 1;
        let d = i64::from(j == orbits);
        edges.push(format!("[{j}, {k}, [{d}, 0]], [{k}, {j}, [{}, 0]]", -d));
        edges.push(format!("[{j}, {j}, [0, 1]], [{j}, {j}, [0, -1]]"));
    }
    let text = format!("n = 2\norbits = {orbits}\nedges = [{}]", edges.join(", "));
    Arc::new(PeriodicGraph::from_toml_str(&text).unwrap())
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

fn random_periodic(rng: &mut ChaCha8Rng, g: &Arc<PeriodicGraph>) -> BandOperator {
    let terms: BTreeMap<Cell, CoefficientField> = Cell::cube(2, 1)
        .into_iter()
        .map(|d| {
            (
                d,
                CoefficientField::Constant(random_matrix(rng, g.orbits())),
            )
        })
        .collect();
    BandOperator::from_terms(Arc::clone(g), terms).unwrap()
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn random_union(rng: &mut ChaCha8Rng) -> IntervalUnion {
    let k = rng.random_range(0..4);
    IntervalUnion::from_intervals((0..k).map(|_| {
        let a = rng.random_range(-64i32..64) as f64 / 8.0;
        let w = rng.random_range(0i32..32) as f64 / 8.0;
        Interval::new(a, a + w)
    }))
}

fn property_suites() -> Result<Vec<String>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let mut notes = Vec::new();

    let g3 = torus_graph(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a = random_periodic(&mut rng, &g3);
        let h = a.add(&a.adjoint()).unwrap().scale(C64::new(0.5, 0.0));
        let s = build_symbol(&h).map_err(|e| e.to_string())?;
        for i in 0..64 {
            let m = s.eval(&grid_angles(2, 8, i));
            worst = worst.max(max_abs(&(&m - m.adjoint())));
        }
    }
    check(worst <= 1e-12, format!("Hermitian defect {worst:e}"))?;
    notes.push(format!("hermitian {worst:.1e}"));

    let g2 = torus_graph(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a = random_periodic(&mut rng, &g2);
        let b = random_periodic(&mut rng, &g2);
        let phi = [
            rng.random_range(0.0..2.0 * PI),
            rng.random_range(0.0..2.0 * PI),
        ];
        let ab = build_symbol(&a.compose(&b).unwrap())
            .map_err(|e| e.to_string())?
            .eval(&phi);
        let prod = build_symbol(&a).unwrap().eval(&phi) * build_symbol(&b).unwrap().eval(&phi);
        worst = worst.max(max_abs(&(ab - prod)));
    }
    check(worst <= 1e-10, format!("multiplicativity error {worst:e}"))?;
    notes.push(format!("multiplicative {worst:.1e}"));

    let mut worst = 0.0f64;
    for hermitian in [true, false] {
        for _ in 0..10 {
            let a = random_periodic(&mut rng, &g3);
            let a = if hermitian {
                a.add(&a.adjoint()).unwrap()
            } else {
                a
            };
            let s = build_symbol(&a).map_err(|e| e.to_string())?;
            let curves = dispersion_curves(&s, 16, hermitian).map_err(|e| e.to_string())?;
            for i in 0..curves.len() {
                let tr = s.eval(&curves.angles(i)).trace();
                let sum: C64 = curves.values(i).iter().sum();
                worst = worst.max((tr - sum).norm());
            }
        }
    }
    check(worst <= 1e-10, format!("trace identity error {worst:e}"))?;
    notes.push(format!("trace {worst:.1e}"));

    for _ in 0..200 {
        let (a, b, c) = (
            random_union(&mut rng),
            random_union(&mut rng),
            random_union(&mut rng),
        );
        check(
            a.minkowski_sum(&b) == b.minkowski_sum(&a),
            format!("{a} + {b} not commutative"),
        )?;
        check(
            a.minkowski_sum(&b).minkowski_sum(&c) == a.minkowski_sum(&b.minkowski_sum(&c)),
            format!("({a} + {b}) + {c} not associative"),
        )?;
        check(
            a.minkowski_sum(&IntervalUnion::single(0.0, 0.0)) == a,
            "{0} is not neutral",
        )?;
        check(
            a.minkowski_sum(&IntervalUnion::empty()).is_empty(),
            "{} does not annihilate",
        )?;
    }
    notes.push("minkowski exact".into());

    for g in [zigzag(), honeycomb()] {
        let g = Arc::new(g);
        let table: Vec<C64> = (0..64)
            .map(|_| {
                C64::new(
                    rng.random_range(-8..8) as f64 / 4.0,
                    rng.random_range(-8..8) as f64 / 4.0,
                )
            })
            .collect();
        let gk = Arc::clone(&g);
        let kernel = Arc::new(FnKernel {
            radius: 2,
            periodic: false,
            bound: 4.0,
            f: move |x: &Vertex, y: &Vertex| match graph_distance(&gk, x, y, 2) {
                Ok(d) => {
                    let h = x
                        .cell
                        .0
                        .iter()
                        .chain(&y.cell.0)
                        .fold(x.orbit * 7 + y.orbit * 3 + d, |acc, &c| {
                            acc.wrapping_mul(31).wrapping_add(c.rem_euclid(64) as usize)
                        });
                    table[h % table.len()]
                }
                Err(_) => C64::new(0.0, 0.0),
            },
        });
        let a = quotient_transform(&g, kernel.clone(), 2).map_err(|e| e.to_string())?;
        let window: Vec<Vertex> = Cell::cube(g.rank(), 4)
            .into_iter()
            .flat_map(|c| (0..g.orbits()).map(move |j| Vertex::new(j, c.clone())))
            .collect();
        for y in &window {
            let column = a.apply(&delta(y));
            for x in &window {
                let got = column.get(x).copied().unwrap_or_default();
                check(
                    got == kernel.value(x, y),
                    format!("round trip differs at ({x}, {y})"),
                )?;
            }
        }
    }
    notes.push("round trip exact".into());

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ray = dir.path().join("ray.toml");
    let periodic = dir.path().join("periodic.toml");
    let three = dir.path().join("three.toml");
    fs::write(&ray, "kind = \"ray\"\nc = [2.0, 2.0]\nd = [1.0, 1.0]\n")
        .map_err(|e| e.to_string())?;
    fs::write(&periodic, "kind = \"periodic\"\nvalues = [1.0, 3.0]\n")
        .map_err(|e| e.to_string())?;
    fs::write(&three, "[w1]\nprofile = [-0.75]\n[w2]\nprofile = [-0.75]\n")
        .map_err(|e| e.to_string())?;
    let (ray, periodic, three) = (
        ray.to_str().unwrap(),
        periodic.to_str().unwrap(),
        three.to_str().unwrap(),
    );
    let commands: Vec<Vec<&str>> = vec![
        vec!["validate", "--builtin", "honeycomb"],
        vec!["symbol", "--builtin", "zigzag", "--potential", periodic],
        vec!["bands", "--builtin", "honeycomb"],
        vec!["curves", "--builtin", "honeycomb", "--grid", "32"],
        vec!["ess", "--builtin", "zigzag", "--potential", ray],
        vec![
            "gaps",
            "--builtin",
            "zigzag",
            "--potential",
            ray,
            "--window",
            "-2,6",
        ],
        vec![
            "fredholm",
            "--builtin",
            "zigzag",
            "--potential",
            ray,
            "--lambda",
            "2,0.5",
        ],
        vec![
            "threeparticle",
            "--builtin",
            "cayley",
            "--potential",
            three,
            "--window",
            "40",
        ],
        vec!["finite-section", "--builtin", "honeycomb", "--window", "3"],
    ];
    let outputs = |tag: &str| -> Result<Vec<(String, Vec<u8>)>, String> {
        let mut all = Vec::new();
        for (i, args) in commands.iter().enumerate() {
            let svg = dir.path().join(format!("{tag}{i}.svg"));
            let mut full = args.clone();
            // These three print text only.
            if args[0] != "validate" && args[0] != "symbol" && args[0] != "fredholm" {
                full.extend(["--svg", svg.to_str().unwrap()]);
            }
            let (text, _) = run(&full)?;
            let figure = fs::read(&svg).unwrap_or_default();
            all.push((text, figure));
        }
        Ok(all)
    };
    let (first, second) = (outputs("a")?, outputs("b")?);
    for ((a, b), args) in first.iter().zip(&second).zip(&commands) {
        check(a == b, format!("{} output differs between runs", args[0]))?;
    }
    notes.push(format!("{} CLI commands byte-identical", commands.len()));
    Ok(notes)
}

fn criterion_8() -> Verdict {
    property_suites().map(|notes| notes.join(", "))
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    type Criterion<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("cayley bands", Box::new(criterion_1)),
        ("zigzag and honeycomb bands", Box::new(criterion_2)),
        (
            "zigzag v=(1,3) bands and gap",
            Box::new(|| criterion_3(dir.path())),
        ),
        (
            "two-limit zigzag essential spectrum",
            Box::new(|| criterion_4(dir.path())),
        ),
        ("fredholm queries", Box::new(|| criterion_5(dir.path()))),
        ("finite-section oracle", Box::new(criterion_6)),
        ("three-particle run", Box::new(|| criterion_7(dir.path()))),
        ("property suites", Box::new(criterion_8)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criterion(s) failed");
        std::process::exit(1);
    }
}
