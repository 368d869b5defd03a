//! Browser entry points. Every function takes plain text and numbers and
//! returns a JSON string, so the page needs no bindings beyond
//! `wasm-bindgen`'s.

use charweb::expr::{Role, UnivariateSpec};
use charweb::generator::generic_image;
use charweb::hopf::{
    inscribed_rectangle, pushforward, regrid, sample_characteristics, solve_hopf, Grid, ImageFrame,
    InitialData, QuadratureOrder,
};
use charweb::system::{classify, QuasilinearSystem, SampleBox};
use charweb::web::{henaut_residual, solve_efgh, straightness, WebSample};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const KAPPA: [f64; 4] = [1.5, 3.0, 4.5, 6.5];

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

fn text<E: ToString>(e: E) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct Row {
    condition: String,
    status: serde_json::Value,
    max_residual: Option<f64>,
    tolerance: f64,
}

/// `speeds` one per line in `R1..Rn`; `bounds` one `lo hi` pair per line.
pub fn check_json(
    speeds: &str,
    bounds: &str,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<String, String> {
    let speeds: Vec<&str> = speeds
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    let bounds = bounds
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: Vec<f64> = l
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|_| format!("bad bound '{s}'")))
                .collect::<Result<_, _>>()?;
            match v.as_slice() {
                [a, b] => Ok([*a, *b]),
                _ => Err(format!("expected 'lo hi', got '{}'", l.trim())),
            }
        })
        .collect::<Result<Vec<_>, String>>()?;
    let sys =
        QuasilinearSystem::parse(&speeds, SampleBox::new(bounds).map_err(text)?).map_err(text)?;
    let report = classify(&sys, samples, seed, tol).map_err(text)?;
    let rows: Vec<Row> = report
        .conditions
        .iter()
        .map(|c| Row {
            condition: serde_json::to_value(c.condition)
                .map(|v| v.as_str().unwrap_or("").to_string())
                .unwrap_or_default(),
            status: serde_json::to_value(c.status).unwrap_or_default(),
            max_residual: c.max_residual,
            tolerance: c.tolerance,
        })
        .collect();
    serde_json::to_string(&serde_json::json!({
        "verdicts": report.verdicts,
        "accepted": report.samples_accepted,
        "conditions": rows,
    }))
    .map_err(text)
}

#[derive(Serialize)]
struct Leaf {
    family: usize,
    points: Vec<[f64; 2]>,
    mapped: Vec<[f64; 2]>,
}

/// Four-component image of the Euler system with `f^k = f`, `g^k = g`
/// (in `u`), solved for data `κ_k + amplitude·sin(x)` and regridded on
/// `nodes × nodes` image points. Leaves are returned in the image frame and
/// mapped back to the Euler frame, where they are straight.
pub fn family_web_json(f: &str, g: &str, amplitude: f64, nodes: usize) -> Result<String, String> {
    let nodes = nodes.clamp(9, 129);
    let fs = vec![UnivariateSpec::parse(f, "u", Role::F).map_err(text)?; 4];
    let gs = vec![UnivariateSpec::parse(g, "u", Role::G).map_err(text)?; 4];
    let (image, pairs) = generic_image(&fs, &gs).map_err(text)?;
    let base = vec![UnivariateSpec::parse("u", "u", Role::F).map_err(text)?; 4];
    let profiles: Vec<String> = KAPPA
        .iter()
        .map(|k| format!("{k} + {amplitude}*sin(x)"))
        .collect();
    let refs: Vec<&str> = profiles.iter().map(String::as_str).collect();
    let data = InitialData::parse(&refs, [-20.0, 30.0]).map_err(text)?;
    let source = Grid::new([0.0, 0.5], [0.0, std::f64::consts::TAU], 2, 2).map_err(text)?;
    let frame = ImageFrame::new(&base, &data, &pairs, source).map_err(text)?;
    let (tr, xr) = inscribed_rectangle(&frame, 0.02).map_err(text)?;
    let sol = regrid(&frame, Grid::new(tr, xr, nodes, nodes).map_err(text)?).map_err(text)?;
    let map = pushforward(&sol, &pairs.inverse(), QuadratureOrder::RowFirst, 1e-2).map_err(text)?;
    let mut leaves = Vec::new();
    let (mut plain, mut mapped): (f64, f64) = (0.0, 0.0);
    for (i, speed) in image.lambdas().iter().enumerate() {
        for c in sample_characteristics(&sol, speed, Some(&map), i + 1, 6, sol.grid.dt())
            .map_err(text)?
        {
            let m = c.mapped.unwrap_or_default();
            if let (Ok(a), Ok(b)) = (straightness(&c.points), straightness(&m)) {
                plain = plain.max(a);
                mapped = mapped.max(b);
            }
            leaves.push(Leaf {
                family: c.family,
                points: c.points,
                mapped: m,
            });
        }
    }
    let web = WebSample::from_solution(&sol, image.lambdas()).map_err(text)?;
    let (r1, r2) = henaut_residual(&solve_efgh(&web).map_err(text)?);
    serde_json::to_string(&serde_json::json!({
        "leaves": leaves,
        "henaut": [r1, r2],
        "straightness": {"image": plain, "euler": mapped},
        "speeds": image.lambdas().iter().map(|l| l.to_string()).collect::<Vec<_>>(),
    }))
    .map_err(text)
}

/// `R(x, t)` of `R_t = f(R) R_x` with `R(x, 0) = φ(x)` at `samples` points
/// of `[x0, x1]`; NaN where the node is masked.
pub fn hopf_slice_json(
    f: &str,
    profile: &str,
    t: f64,
    x0: f64,
    x1: f64,
    samples: usize,
) -> Result<String, String> {
    let spec = UnivariateSpec::parse(f, "u", Role::F).map_err(text)?;
    let width = (x1 - x0).abs().max(1.0);
    let data =
        InitialData::parse(&[profile], [x0 - 20.0 * width, x1 + 20.0 * width]).map_err(text)?;
    let samples = samples.clamp(2, 2001);
    let grid = Grid::new([0.0, t.max(1e-9)], [x0, x1], 2, samples).map_err(text)?;
    let sol = solve_hopf(&[spec], &data, grid).map_err(text)?;
    let xs: Vec<f64> = (0..samples).map(|l| grid.x(l)).collect();
    let r0: Vec<f64> = (0..samples).map(|l| sol.at(0, l)[0]).collect();
    let r: Vec<f64> = (0..samples)
        .map(|l| {
            if sol.valid(1, l) {
                sol.at(1, l)[0]
            } else {
                f64::NAN
            }
        })
        .collect();
    let nan_to_null =
        |v: &[f64]| -> Vec<Option<f64>> { v.iter().map(|x| x.is_finite().then_some(*x)).collect() };
    serde_json::to_string(&serde_json::json!({
        "x": xs,
        "initial": nan_to_null(&r0),
        "r": nan_to_null(&r),
        "breaking": sol.breaking.first().and_then(|b| b.forward),
    }))
    .map_err(text)
}

#[wasm_bindgen]
pub fn check_system(
    speeds: &str,
    bounds: &str,
    samples: usize,
    seed: u32,
    tol: f64,
) -> Result<String, JsValue> {
    js(check_json(speeds, bounds, samples, seed as u64, tol))
}

#[wasm_bindgen]
pub fn family_web(f: &str, g: &str, amplitude: f64, nodes: usize) -> Result<String, JsValue> {
    js(family_web_json(f, g, amplitude, nodes))
}

#[wasm_bindgen]
pub fn hopf_slice(
    f: &str,
    profile: &str,
    t: f64,
    x0: f64,
    x1: f64,
    samples: usize,
) -> Result<String, JsValue> {
    js(hopf_slice_json(f, profile, t, x0, x1, samples))
}
