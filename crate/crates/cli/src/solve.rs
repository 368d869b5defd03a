use charweb::hopf::{
    inscribed_rectangle, pde_residual, pushforward, regrid, sample_characteristics, solve_driven,
    solve_hopf, BreakingInfo, Characteristic, CoordinateMap, Grid, ImageFrame, InitialData,
    InitialDataSpec, NodeStatus, QuadratureOrder, SolutionSample,
};
use charweb::io::{web_svg, write_polylines_csv, write_solution_csv, SystemSpec};
use charweb::system::QuasilinearSystem;
use serde::Serialize;

use crate::output::{emit_report, read_json, save, Failure};
use crate::{Format, RunConfig};

const DEFAULT_GRID: [usize; 2] = [65, 65];
/// RK4 steps per backward characteristic of a driven component.
const DRIVEN_STEPS: usize = 64;
/// Closedness tolerance given to the pushforward, which rejects relative
/// defects above ten times it.
pub const CLOSEDNESS_TOLERANCE: f64 = 1e-2;
/// Fraction of the image bounding box trimmed off each side.
const IMAGE_MARGIN: f64 = 0.02;
const SEEDS: usize = 8;

#[derive(Serialize)]
struct Masked {
    valid: usize,
    breaking: usize,
    outside_reach: usize,
    no_root: usize,
}

impl Masked {
    fn of(sol: &SolutionSample) -> Self {
        let count = |s| sol.status.iter().filter(|x| **x == s).count();
        Self {
            valid: count(NodeStatus::Valid),
            breaking: count(NodeStatus::Breaking),
            outside_reach: count(NodeStatus::OutsideReach),
            no_root: count(NodeStatus::NoRoot),
        }
    }
}

#[derive(Serialize)]
struct Closedness {
    defect: f64,
    tolerance: f64,
}

impl Closedness {
    fn of(map: &CoordinateMap) -> Self {
        Self {
            defect: map.closedness,
            tolerance: 10.0 * CLOSEDNESS_TOLERANCE,
        }
    }
}

#[derive(Serialize)]
struct Source {
    grid: Grid,
    nodes: Masked,
    closedness: Closedness,
}

#[derive(Serialize)]
struct SolveReport<'a> {
    config: &'a RunConfig,
    method: &'static str,
    lambda: Vec<String>,
    grid: Grid,
    nodes: Masked,
    first_breaking_row: Option<usize>,
    breaking: &'a [BreakingInfo],
    pde_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    closedness: Option<Closedness>,
    /// For generated families: the base solution the image was taken of.
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<Source>,
}

pub fn run(config: &RunConfig) -> Result<(), Failure> {
    let spec: SystemSpec = read_json(&config.input)?;
    let sys = spec.build()?;
    let data_path = config.data.as_ref().expect("solve has --data");
    let data = InitialData::from_spec(&read_json::<InitialDataSpec>(data_path)?)?;
    if data.n() != sys.n() {
        return Err(Failure::spec(format!(
            "{} profiles for a {}-component system",
            data.n(),
            sys.n()
        )));
    }
    let o = &config.options;
    let [nt, nx] = o.grid.unwrap_or(DEFAULT_GRID);
    let [t0, t1, x0, x1] = o
        .domain
        .ok_or_else(|| Failure::spec("solve needs --domain t0,t1,x0,x1"))?;
    let grid = Grid::new([t0, t1], [x0, x1], nt, nx)?;

    let family = match &spec.family {
        Some(f) => Some(f.build()?),
        None => None,
    };
    let image = family.as_ref().and_then(|f| {
        let pairs = f.pairs.as_ref().filter(|p| p.terms.is_some())?;
        Some((f.base.hopf_speeds()?, pairs))
    });

    let (method, sol, map, source, base_out) = if let Some((base, pairs)) = image {
        let base_sol = solve_hopf(&base, &data, grid)?;
        let forward = pushforward(
            &base_sol,
            pairs,
            QuadratureOrder::RowFirst,
            CLOSEDNESS_TOLERANCE,
        )?;
        let frame = ImageFrame::new(&base, &data, pairs, grid)?;
        let (tr, xr) = inscribed_rectangle(&frame, IMAGE_MARGIN)?;
        let sol = regrid(&frame, Grid::new(tr, xr, nt, nx)?)?;
        let back = pushforward(
            &sol,
            &pairs.inverse(),
            QuadratureOrder::RowFirst,
            CLOSEDNESS_TOLERANCE,
        )?;
        let source = Source {
            grid,
            nodes: Masked::of(&base_sol),
            closedness: Closedness::of(&forward),
        };
        (
            "image_frame",
            sol,
            Some(back),
            Some(source),
            Some((base_sol, forward)),
        )
    } else if let Some(f) = sys.hopf_speeds() {
        let sol = solve_hopf(&f, &data, grid)?;
        let map = match &spec.pairs {
            Some(p) => Some(pushforward(
                &sol,
                &p.build(sys.n())?,
                QuadratureOrder::RowFirst,
                CLOSEDNESS_TOLERANCE,
            )?),
            None => None,
        };
        ("hopf", sol, map, None, None)
    } else {
        if spec.pairs.is_some() {
            return Err(Failure::spec(
                "pairs are only used with uncoupled systems or generated families",
            ));
        }
        (
            "driven",
            solve_driven(&sys, &data, grid, DRIVEN_STEPS)?,
            None,
            None,
            None,
        )
    };

    write_outputs(config, &sys, &sol, map.as_ref(), base_out.as_ref())?;
    let report = SolveReport {
        config,
        method,
        lambda: sys.lambdas().iter().map(|l| l.to_string()).collect(),
        grid: sol.grid,
        nodes: Masked::of(&sol),
        first_breaking_row: sol.first_breaking_row(),
        breaking: &sol.breaking,
        pde_residual: pde_residual(&sol, sys.lambdas())?,
        closedness: map
            .as_ref()
            .filter(|m| m.closedness.is_finite())
            .map(Closedness::of),
        source,
    };
    emit_report(config, "solve.json", &report)
}

pub fn characteristics(
    sys: &QuasilinearSystem,
    sol: &SolutionSample,
    map: Option<&CoordinateMap>,
) -> Result<Vec<Characteristic>, Failure> {
    let mut curves = Vec::new();
    for (i, speed) in sys.lambdas().iter().enumerate() {
        curves.extend(sample_characteristics(
            sol,
            speed,
            map,
            i + 1,
            SEEDS,
            sol.grid.dt(),
        )?);
    }
    Ok(curves)
}

fn write_outputs(
    config: &RunConfig,
    sys: &QuasilinearSystem,
    sol: &SolutionSample,
    map: Option<&CoordinateMap>,
    base: Option<&(SolutionSample, CoordinateMap)>,
) -> Result<(), Failure> {
    if config.options.out.is_none() {
        return Ok(());
    }
    let o = &config.options;
    let curves = characteristics(sys, sol, map)?;
    if o.wants(Format::Csv) {
        save(config, "solution.csv", |w| write_solution_csv(w, sol, map))?;
        if let Some((b, m)) = base {
            save(config, "base_solution.csv", |w| {
                write_solution_csv(w, b, Some(m))
            })?;
        }
        save(config, "characteristics.csv", |w| {
            write_polylines_csv(w, &curves)
        })?;
    }
    if o.wants(Format::Svg) {
        let svg = web_svg(&curves, false, 640.0, 480.0);
        save(config, "characteristics.svg", |w| {
            Ok(std::io::Write::write_all(w, svg.as_bytes())?)
        })?;
        if map.is_some() {
            let svg = web_svg(&curves, true, 640.0, 480.0);
            save(config, "characteristics_mapped.svg", |w| {
                Ok(std::io::Write::write_all(w, svg.as_bytes())?)
            })?;
        }
    }
    Ok(())
}
