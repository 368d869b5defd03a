//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! fails unless every criterion passes, apart from those listed in
//! [`KNOWN_FAILURES`].

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use charweb::connection::{
    decoupling_probe, decoupling_residual, transformed_speeds, Path as StatePath, SectionQuad,
};
use charweb::expr::{Expression, Role, UnivariateSpec};
use charweb::generator::{generic_image, lindeg_image, ConservationPairs};
use charweb::hopf::{
    inscribed_rectangle, pushforward, regrid, sample_characteristics, solve_driven, solve_hopf,
    Grid, ImageFrame, InitialData, NodeStatus, QuadratureOrder, SolutionSample,
};
use charweb::system::{
    classify, cross_ratio, Condition, QuasilinearSystem, SampleBox, SystemAnalysis,
};
use charweb::web::{henaut_residual, solve_efgh, solve_node, straightness, WebSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Tolerances.
const EXACT: f64 = 1e-12;
const GENERIC_QUADRUPLE: f64 = 1e-9;
const GENERIC_STRUCTURE: f64 = 1e-8;
const CROSS_RATIO: f64 = 1e-10;
const LINDEG_DEGENERACY: f64 = 1e-10;
const DECOUPLING: f64 = 1e-6;
const TWO_PATH: f64 = 1e-8;
const TWO_PATH_RATIO: [f64; 2] = [8.0, 32.0];
/// Coarse steps for the two-path order check; at `h = 1e-3` the
/// disagreement is already at rounding level.
const TWO_PATH_STEPS: [f64; 2] = [0.025, 0.0125];
const GRONWALL_CROSS_RATIO: f64 = 1e-10;
const HOPF_ORACLE: f64 = 1e-10;
const STRAIGHTNESS_RATIO: [f64; 2] = [2.5, 6.0];
const UNPUSHED_FACTOR: f64 = 10.0;
const HENAUT_ORDER: [f64; 2] = [1.5, 2.5];
const PLATEAU_RATIO: [f64; 2] = [0.8, 1.25];
const DISCRIMINATION: f64 = 10.0;
/// Control residuals measured once on the 33 and 65 node grids
/// (0.355, 0.0980 and 0.337, 0.0934) and frozen with some slack.
const CONTROL_FLOOR: [f64; 2] = [0.30, 0.084];
const EFGH: f64 = 1e-12;

/// Criteria expected to fail, with the reason.
const KNOWN_FAILURES: &[(u32, &str)] = &[(
    7,
    "phi(x) = -x with f(u) = u spreads its characteristics (x = s(1 + t)) and never breaks for t > 0; \
     the gradient catastrophe at t = 1 belongs to phi(x) = x",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn box4() -> SampleBox {
    SampleBox::new(vec![[1.0, 2.0], [2.5, 3.5], [4.0, 5.0], [6.0, 7.0]]).unwrap()
}

fn uni(list: &[&str], role: Role) -> Vec<UnivariateSpec> {
    list.iter()
        .map(|s| UnivariateSpec::parse(s, "u", role).unwrap())
        .collect()
}

fn eval(e: &[Expression], p: &[f64]) -> Vec<f64> {
    e.iter().map(|x| x.evaluate(p).unwrap()).collect()
}

fn close(got: &[f64], want: &[f64], tol: f64) -> bool {
    got.len() == want.len() && got.iter().zip(want).all(|(g, w)| (g - w).abs() <= tol)
}

fn generic_quadratic() -> (QuasilinearSystem, ConservationPairs) {
    let (s, p) = generic_image(&uni(&["u^2/2"; 4], Role::F), &uni(&["1"; 4], Role::G)).unwrap();
    (s.with_box(box4()).unwrap(), p)
}

fn max_residual(r: &charweb::system::ConditionReport, c: Condition) -> f64 {
    r.condition(c).max_residual.unwrap_or(f64::NAN)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let sys = QuasilinearSystem::parse(&["R1", "R2", "R3", "R4"], box4()).unwrap();
    let r = classify(&sys, 200, 1, EXACT).unwrap();
    let zero = [
        Condition::SemiHamiltonian,
        Condition::QuadrupleRelation,
        Condition::PqDerivative,
        Condition::Gl2Structure,
    ];
    let worst = zero
        .iter()
        .map(|&c| max_residual(&r, c))
        .fold(0.0, f64::max);
    let ld = &r.condition(Condition::LinearDegeneracy).residuals;
    let ld_dev = ld.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    outcome(
        r.samples_accepted == 200
            && worst <= EXACT
            && ld.len() == 200
            && ld_dev <= EXACT
            && elapsed < Duration::from_secs(5),
        format!(
            "max residual {worst:e}, |LD - 1| {ld_dev:e}, {:.2?}",
            elapsed
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let (sys, _) = generic_quadratic();
    let r = classify(&sys, 100, 2, GENERIC_STRUCTURE).unwrap();
    let quad = max_residual(&r, Condition::QuadrupleRelation);
    let gl2 = max_residual(&r, Condition::Gl2Structure);
    let spot = eval(sys.lambdas(), &[1.0, 2.0, 3.0, 4.0]);
    let elapsed = start.elapsed();
    outcome(
        r.samples_accepted == 100
            && quad <= GENERIC_QUADRUPLE
            && gl2 <= GENERIC_STRUCTURE
            && close(&spot, &[1.25, -1.25, -3.75, -6.25], EXACT)
            && elapsed < Duration::from_secs(10),
        format!(
            "quadruple {quad:e}, gl(2) {gl2:e}, spot {spot:?}, {:.2?}",
            elapsed
        ),
    )
}

fn criterion_3() -> Outcome {
    let (s, _) = generic_image(&uni(&["u"; 4], Role::F), &uni(&["1"; 4], Role::G)).unwrap();
    let s = s.with_box(box4()).unwrap();
    let r = classify(&s, 100, 3, EXACT).unwrap();
    let worst = r
        .samples
        .iter()
        .map(|p| {
            eval(s.lambdas(), p)
                .iter()
                .zip(p)
                .map(|(l, x)| (l + x).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    outcome(
        r.samples.len() == 100 && worst <= EXACT,
        format!("max |λ̃ + R| {worst:e} at 100 points"),
    )
}

fn criterion_4() -> Outcome {
    let (s, _) = lindeg_image(
        &[0.0, 1.0, 2.0, 3.0],
        &uni(&["u"; 4], Role::F),
        &uni(&["1"; 4], Role::G),
    )
    .unwrap();
    let spot = eval(s.lambdas(), &[1.0, 2.0, 3.0, 4.0]);
    let r = classify(&s, 100, 4, LINDEG_DEGENERACY).unwrap();
    let cr = r
        .samples
        .iter()
        .map(|p| {
            let l = eval(s.lambdas(), p);
            (cross_ratio(l[0], l[1], l[2], l[3]).unwrap() - 4.0 / 3.0).abs()
        })
        .fold(0.0, f64::max);
    let ld = max_residual(&r, Condition::LinearDegeneracy);
    let par = r.verdicts.parallelizable_class.is_yes();
    outcome(
        close(&spot, &[-10.0 / 3.0, -5.0, 0.0, -5.0 / 3.0], EXACT)
            && r.samples.len() == 100
            && cr <= CROSS_RATIO
            && ld <= LINDEG_DEGENERACY
            && par,
        format!("spot {spot:?}, |cr - 4/3| {cr:e}, LD {ld:e}, parallelizable {par}"),
    )
}

/// Largest entry difference between transport along the straight segment
/// and along the two-leg path.
fn two_path(an: &SystemAnalysis, from: &[f64], to: &[f64], h: f64) -> f64 {
    let ev = an.forms_evaluator().unwrap();
    let rows = [[0.0, 1.0], [1.0, 0.0]];
    let a = ev
        .transport(&StatePath::segment(from, to).unwrap(), &rows, h)
        .unwrap();
    let b = ev
        .transport(&StatePath::rectangle(from, to).unwrap(), &rows, h)
        .unwrap();
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let (sys, _) = generic_quadratic();
    let an = SystemAnalysis::new(&sys);
    let quad = SectionQuad::basis(an.forms_evaluator().unwrap(), box4().center(), 1e-3).unwrap();
    let report = decoupling_probe(&quad, &box4(), 20, 5).unwrap();
    let (from, to) = (box4().center(), vec![1.1, 2.6, 4.1, 6.1]);
    let fine = two_path(&an, &from, &to, 1e-3);
    let coarse = TWO_PATH_STEPS.map(|h| two_path(&an, &from, &to, h));
    let ratio = coarse[0] / coarse[1];
    let elapsed = start.elapsed();
    outcome(
        report.probes.len() == 20
            && report.max_residual <= DECOUPLING
            && fine <= TWO_PATH
            && (TWO_PATH_RATIO[0]..=TWO_PATH_RATIO[1]).contains(&ratio)
            && elapsed < Duration::from_secs(30),
        format!(
            "decoupling {:e}, two-path {fine:e} at h = 1e-3, ratio {ratio:.2} for h = {:?}, {:.2?}",
            report.max_residual, TWO_PATH_STEPS, elapsed
        ),
    )
}

fn criterion_6() -> Outcome {
    let (sys, _) = generic_quadratic();
    let an = SystemAnalysis::new(&sys);
    let quad = SectionQuad::basis(an.forms_evaluator().unwrap(), box4().center(), 1e-3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let m = loop {
        let m: [[f64; 2]; 2] = [
            [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
            [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
        ];
        if (m[0][0] * m[1][1] - m[0][1] * m[1][0]).abs() > 0.5 {
            break m;
        }
    };
    let mixed = quad.recombine(m).unwrap();
    let (mut worst_res, mut worst_cr, mut used) = (0.0_f64, 0.0_f64, 0);
    for _ in 0..20 {
        let p = box4().sample(&mut rng);
        let (Ok(a), Ok(b)) = (quad.transformed_speeds(&p), mixed.transformed_speeds(&p)) else {
            continue;
        };
        let Ok(res) = decoupling_residual(&mixed, &p, &box4()) else {
            continue;
        };
        used += 1;
        worst_res = worst_res.max(res);
        let cr = |l: &[f64]| cross_ratio(l[0], l[1], l[2], l[3]).unwrap();
        worst_cr = worst_cr.max((cr(&a) - cr(&b)).abs());
    }
    let direct = transformed_speeds(&[1.0, 2.0, 3.0, 4.0], mixed.initial(), &[0.0; 4]).is_ok();
    outcome(
        used >= 10 && direct && worst_res <= DECOUPLING && worst_cr <= GRONWALL_CROSS_RATIO,
        format!("matrix {m:?}: {used} points, decoupling {worst_res:e}, cross-ratio change {worst_cr:e}"),
    )
}

fn criterion_7() -> Outcome {
    let f = uni(&["u"], Role::F);
    let ramp = InitialData::parse(&["x"], [-10.0, 10.0]).unwrap();
    let grid = Grid::new([0.0, 0.5], [-1.0, 1.0], 201, 201).unwrap();
    let sol = solve_hopf(&f, &ramp, grid).unwrap();
    let mut err: f64 = 0.0;
    for m in 0..grid.nt {
        for l in 0..grid.nx {
            err = err.max((sol.at(m, l)[0] - grid.x(l) / (1.0 - grid.t(m))).abs());
        }
    }
    let oracle = sol.valid_count() == grid.len() && err <= HOPF_ORACLE;
    // Rows at t >= 0.9 should be flagged for the falling ramp.
    let falling = InitialData::parse(&["-x"], [-10.0, 10.0]).unwrap();
    let late = Grid::new([0.0, 1.5], [-1.0, 1.0], 16, 11).unwrap();
    let flagged = |data: &InitialData| -> bool {
        match solve_hopf(&f, data, late) {
            Ok(s) => (0..late.nt)
                .filter(|&m| late.t(m) >= 0.9 - 1e-12)
                .all(|m| (0..late.nx).all(|l| s.status[late.index(m, l)] == NodeStatus::Breaking)),
            Err(e) => matches!(e, charweb::hopf::HopfError::BreakdownDetected { .. }),
        }
    };
    let minus = flagged(&falling);
    let plus = flagged(&ramp);
    outcome(
        oracle && minus,
        format!(
            "max |R - x/(1-t)| {err:e}; φ = -x flagged at t >= 0.9: {minus}; φ = x flagged: {plus}"
        ),
    )
}

fn waves() -> InitialData {
    InitialData::parse(
        &[
            "1.5 + 0.1*sin(x)",
            "3 + 0.1*sin(x)",
            "4.5 + 0.1*sin(x)",
            "6.5 + 0.1*sin(x)",
        ],
        [-20.0, 30.0],
    )
    .unwrap()
}

fn source() -> Grid {
    Grid::new([0.0, 0.5], [0.0, std::f64::consts::TAU], 2, 2).unwrap()
}

struct FamilyRun {
    pushed: f64,
    unpushed: f64,
    henaut: (f64, f64),
}

fn family_run(
    frame: &ImageFrame,
    rect: ([f64; 2], [f64; 2]),
    image: &QuasilinearSystem,
    pairs: &ConservationPairs,
    n: usize,
) -> FamilyRun {
    let grid = Grid::new(rect.0, rect.1, n, n).unwrap();
    let sol = regrid(frame, grid).unwrap();
    let map = pushforward(&sol, &pairs.inverse(), QuadratureOrder::RowFirst, 1e-2).unwrap();
    let (mut pushed, mut unpushed): (f64, f64) = (0.0, 0.0);
    for (i, speed) in image.lambdas().iter().enumerate() {
        for c in sample_characteristics(&sol, speed, Some(&map), i + 1, 5, grid.dt()).unwrap() {
            if c.points.len() < 3 {
                continue;
            }
            pushed = pushed.max(straightness(c.mapped.as_ref().unwrap()).unwrap());
            unpushed = unpushed.max(straightness(&c.points).unwrap());
        }
    }
    let web = WebSample::from_solution(&sol, image.lambdas()).unwrap();
    FamilyRun {
        pushed,
        unpushed,
        henaut: henaut_residual(&solve_efgh(&web).unwrap()),
    }
}

fn control_run(n: usize) -> ((f64, f64), SolutionSample) {
    let control = QuasilinearSystem::parse(&["R1 + R2^2", "R2", "R3", "R4"], box4()).unwrap();
    let grid = Grid::new([0.0, 0.5], [0.0, std::f64::consts::TAU], n, n).unwrap();
    let sol = solve_driven(&control, &waves(), grid, 64).unwrap();
    let web = WebSample::from_solution(&sol, control.lambdas()).unwrap();
    (henaut_residual(&solve_efgh(&web).unwrap()), sol)
}

fn family_runs() -> [FamilyRun; 2] {
    let (image, pairs) =
        generic_image(&uni(&["u^2/2"; 4], Role::F), &uni(&["1"; 4], Role::G)).unwrap();
    let frame = ImageFrame::new(&uni(&["u"; 4], Role::F), &waves(), &pairs, source()).unwrap();
    let rect = inscribed_rectangle(&frame, 0.02).unwrap();
    [33, 65].map(|n| family_run(&frame, rect, &image, &pairs, n))
}

fn criterion_8(runs: &[FamilyRun; 2]) -> Outcome {
    let ratio = runs[0].pushed / runs[1].pushed;
    let separated = runs
        .iter()
        .all(|r| r.unpushed >= UNPUSHED_FACTOR * r.pushed);
    outcome(
        (STRAIGHTNESS_RATIO[0]..=STRAIGHTNESS_RATIO[1]).contains(&ratio) && separated,
        format!(
            "pushed {:e} -> {:e} (ratio {ratio:.2}), unpushed {:e}, {:e}",
            runs[0].pushed, runs[1].pushed, runs[0].unpushed, runs[1].unpushed
        ),
    )
}

fn criterion_9(runs: &[FamilyRun; 2]) -> Outcome {
    let order = |a: f64, b: f64| (a / b).log2();
    let orders = [
        order(runs[0].henaut.0, runs[1].henaut.0),
        order(runs[0].henaut.1, runs[1].henaut.1),
    ];
    let control = [control_run(33).0, control_run(65).0];
    let plateau = [control[0].0 / control[1].0, control[0].1 / control[1].1];
    let in_range = |v: f64, r: [f64; 2]| (r[0]..=r[1]).contains(&v);
    let discriminates = (0..2).all(|k| {
        control[k].0 >= DISCRIMINATION * runs[k].henaut.0
            && control[k].1 >= DISCRIMINATION * runs[k].henaut.1
    });
    let floors = control
        .iter()
        .all(|c| c.0 >= CONTROL_FLOOR[0] && c.1 >= CONTROL_FLOOR[1]);
    outcome(
        orders.iter().all(|&o| in_range(o, HENAUT_ORDER))
            && plateau.iter().all(|&p| in_range(p, PLATEAU_RATIO))
            && discriminates
            && floors,
        format!(
            "family orders {:.2}, {:.2}; control {:?} -> {:?} (ratios {:.3}, {:.3})",
            orders[0], orders[1], control[0], control[1], plateau[0], plateau[1]
        ),
    )
}

fn criterion_10() -> Outcome {
    let slopes = [0.0, 1.0, 2.0, 3.0];
    let want = [-1.0 / 6.0, 1.0 / 3.0, -11.0 / 18.0, 1.0];
    // The expected values satisfy every row of the system.
    let rows_ok = slopes.iter().zip([1.0_f64, 0.0, 0.0, 0.0]).all(|(l, v)| {
        let lhs = want[0] * l * l * l + 3.0 * want[1] * l * l + 3.0 * want[2] * l + want[3];
        (lhs - v).abs() <= 1e-15
    });
    let got = solve_node(&slopes, &[1.0, 0.0, 0.0, 0.0]).unwrap().efgh;
    let grid = Grid::new([0.0, 1.0], [0.0, 1.0], 9, 9).unwrap();
    let flat: Vec<f64> = (0..grid.len())
        .flat_map(|_| [-1.0, 0.0, 0.5, 2.0])
        .collect();
    let field = solve_efgh(&WebSample::from_slopes(grid, 4, flat).unwrap()).unwrap();
    let zero = field.ok_count() > 0
        && field
            .values
            .iter()
            .flatten()
            .all(|v| v.is_nan() || *v == 0.0);
    let res = henaut_residual(&field);
    outcome(
        rows_ok && close(&got, &want, EFGH) && zero && res == (0.0, 0.0),
        format!("E, F, G, H = {got:?}; constant web zero: {zero}, residuals {res:?}"),
    )
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let system = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/perturbed4.json");
    let run = |out: &Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_charweb"))
            .args([
                "check",
                system.to_str().unwrap(),
                "--samples",
                "100",
                "--seed",
                "11",
                "--out",
                out.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        (
            status.status.success(),
            std::fs::read(out.join("check.json")).unwrap_or_default(),
        )
    };
    let out = dir.path().join("a");
    let (ok_a, a) = run(&out);
    let (ok_b, b) = run(&out);
    outcome(
        ok_a && ok_b && !a.is_empty() && a == b,
        format!("{} bytes, identical: {}", a.len(), a == b),
    )
}

fn main() {
    let runs = family_runs();
    let results: Vec<(u32, Outcome)> = vec![
        (1, criterion_1()),
        (2, criterion_2()),
        (3, criterion_3()),
        (4, criterion_4()),
        (5, criterion_5()),
        (6, criterion_6()),
        (7, criterion_7()),
        (8, criterion_8(&runs)),
        (9, criterion_9(&runs)),
        (10, criterion_10()),
        (11, criterion_11()),
    ];
    let mut unexpected = Vec::new();
    for (k, o) in &results {
        println!(
            "criterion {k:2}: {} {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        match KNOWN_FAILURES.iter().find(|(j, _)| j == k) {
            Some((_, why)) if !o.pass => println!("              known failure: {why}"),
            Some(_) => unexpected.push(format!(
                "criterion {k} passed but is listed as a known failure"
            )),
            None if !o.pass => unexpected.push(format!("criterion {k} failed")),
            None => {}
        }
    }
    if !unexpected.is_empty() {
        eprintln!("{unexpected:?}");
        std::process::exit(1);
    }
}
