use charweb::expr::{parse, Expression, Tape};
use charweb::hopf::{Characteristic, CoordinateMap, Grid, NodeStatus, SolutionSample};
use charweb::io::{
    read_solution_with_map, web_svg, write_polylines_csv, write_web_csv, SlopeFieldSpec, SystemSpec,
};
use charweb::system::QuasilinearSystem;
use charweb::web::{
    henaut_field, henaut_residual, solve_efgh, straightness, NodeFlag, WebError, WebSample,
};
use serde::Serialize;

use crate::output::{emit_report, read_json, save, Failure, THREE_WEB};
use crate::solve::characteristics;
use crate::{Format, RunConfig};

#[derive(Serialize)]
struct Nodes {
    ok: usize,
    ill_conditioned: usize,
    missing: usize,
}

#[derive(Serialize)]
struct Henaut {
    r1: f64,
    r2: f64,
    tolerance: f64,
    within_tolerance: bool,
}

#[derive(Serialize)]
struct Curve {
    family: usize,
    seed: f64,
    vertices: usize,
    truncated: bool,
    straightness: Option<f64>,
    straightness_mapped: Option<f64>,
}

#[derive(Serialize)]
struct Family {
    family: usize,
    curves: usize,
    max: Option<f64>,
    max_mapped: Option<f64>,
    tolerance: f64,
}

#[derive(Serialize)]
struct WebReport<'a> {
    config: &'a RunConfig,
    n: usize,
    grid: Grid,
    nodes: Nodes,
    henaut: Henaut,
    straightness: Vec<Family>,
    curves: Vec<Curve>,
}

/// The web, a solution carrying its slopes and the speeds of each family.
struct Input {
    web: WebSample,
    sol: SolutionSample,
    speeds: QuasilinearSystem,
    map: Option<CoordinateMap>,
}

fn three_web(n: usize) -> Failure {
    Failure {
        code: THREE_WEB,
        message: format!(
            "{}\nfor {n} families run `charweb check` on the system: its GL2_STRUCTURE condition decides linearizability",
            WebError::Underdetermined { n }
        ),
    }
}

fn from_solution(config: &RunConfig, system: &std::path::Path) -> Result<Input, Failure> {
    let sys = read_json::<SystemSpec>(system)?.build()?;
    if sys.n() < 4 {
        return Err(three_web(sys.n()));
    }
    let file = std::fs::File::open(&config.input)
        .map_err(|e| Failure::spec(format!("{}: {e}", config.input.display())))?;
    let (sol, map) = read_solution_with_map(file)?;
    if sol.n != sys.n() {
        return Err(Failure::spec(format!(
            "solution has {} components, system {}",
            sol.n,
            sys.n()
        )));
    }
    Ok(Input {
        web: WebSample::from_solution(&sol, sys.lambdas())?,
        sol,
        speeds: sys,
        map,
    })
}

/// Slopes evaluated at every node stand in for a solution whose `i`-th
/// family has speed `R^i`.
fn from_slopes(config: &RunConfig) -> Result<Input, Failure> {
    let spec: SlopeFieldSpec = read_json(&config.input)?;
    let n = spec.slopes.len();
    if n < 4 {
        return Err(three_web(n));
    }
    let grid = spec.grid()?;
    let exprs = spec.expressions()?;
    let tape = Tape::compile(&exprs);
    let mut sol = SolutionSample::new_masked(grid, n);
    for m in 0..grid.nt {
        for l in 0..grid.nx {
            let k = grid.index(m, l);
            if let Ok(v) = tape.eval(&[grid.t(m), grid.x(l)]) {
                if v.iter().all(|x| x.is_finite()) {
                    sol.values[k * n..(k + 1) * n].copy_from_slice(&v);
                    sol.status[k] = NodeStatus::Valid;
                }
            }
        }
    }
    let identity: Vec<Expression> = (1..=n)
        .map(|i| parse(&format!("R{i}"), n).expect("variable"))
        .collect();
    let speeds = QuasilinearSystem::new(identity, charweb::generator::default_box(n))?;
    Ok(Input {
        web: spec.sample()?,
        sol,
        speeds,
        map: None,
    })
}

pub fn run(config: &RunConfig) -> Result<(), Failure> {
    let input = match &config.system {
        Some(s) => from_solution(config, s)?,
        None => from_slopes(config)?,
    };
    let o = &config.options;
    let field = solve_efgh(&input.web)?;
    let residuals = henaut_field(&field);
    let (r1, r2) = henaut_residual(&field);
    let curves = characteristics(&input.speeds, &input.sol, input.map.as_ref())?;
    let measure = |pts: &[[f64; 2]]| straightness(pts).ok();
    let rows: Vec<Curve> = curves
        .iter()
        .map(|c: &Characteristic| Curve {
            family: c.family,
            seed: c.seed,
            vertices: c.points.len(),
            truncated: c.truncated,
            straightness: measure(&c.points),
            straightness_mapped: c.mapped.as_deref().and_then(measure),
        })
        .collect();
    let worst = |v: &mut dyn Iterator<Item = Option<f64>>| v.flatten().reduce(f64::max);
    let straightness = (1..=input.web.n)
        .map(|f| {
            let mine = || rows.iter().filter(move |r| r.family == f);
            Family {
                family: f,
                curves: mine().count(),
                max: worst(&mut mine().map(|r| r.straightness)),
                max_mapped: worst(&mut mine().map(|r| r.straightness_mapped)),
                tolerance: o.tol,
            }
        })
        .collect();
    let count = |flag| field.flags.iter().filter(|f| **f == flag).count();
    let report = WebReport {
        config,
        n: input.web.n,
        grid: input.web.grid,
        nodes: Nodes {
            ok: count(NodeFlag::Ok),
            ill_conditioned: count(NodeFlag::IllConditioned),
            missing: count(NodeFlag::Missing),
        },
        henaut: Henaut {
            r1,
            r2,
            tolerance: o.tol,
            within_tolerance: r1 <= o.tol && r2 <= o.tol,
        },
        straightness,
        curves: rows,
    };
    if o.wants(Format::Csv) {
        save(config, "web.csv", |w| {
            write_web_csv(w, &input.web, &field, &residuals)
        })?;
        save(config, "leaves.csv", |w| write_polylines_csv(w, &curves))?;
    }
    if o.wants(Format::Svg) {
        let mapped = input.map.is_some();
        let svg = web_svg(&curves, mapped, 640.0, 480.0);
        save(config, "web.svg", |w| {
            Ok(std::io::Write::write_all(w, svg.as_bytes())?)
        })?;
    }
    emit_report(config, "web.json", &report)
}
