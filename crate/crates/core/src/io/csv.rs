use std::io::{Read, Write};

use super::IoError;
use crate::hopf::{
    Characteristic, CoordinateMap, Grid, NodeStatus, QuadratureOrder, SolutionSample,
};
use crate::web::{SchwarzianField, WebSample};

fn status_name(s: NodeStatus) -> &'static str {
    match s {
        NodeStatus::Valid => "valid",
        NodeStatus::Breaking => "breaking",
        NodeStatus::OutsideReach => "outside_reach",
        NodeStatus::NoRoot => "no_root",
    }
}

fn status_from(name: &str) -> Option<NodeStatus> {
    Some(match name {
        "valid" => NodeStatus::Valid,
        "breaking" => NodeStatus::Breaking,
        "outside_reach" => NodeStatus::OutsideReach,
        "no_root" => NodeStatus::NoRoot,
        _ => return None,
    })
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// One row per node: `t, x, x_tilde, t_tilde, R1..Rn, mask`. The new
/// coordinates are NaN without a map.
pub fn write_solution_csv<W: Write>(
    w: W,
    sol: &SolutionSample,
    map: Option<&CoordinateMap>,
) -> Result<(), IoError> {
    let mut out = ::csv::Writer::from_writer(w);
    let mut header = vec![
        "t".to_string(),
        "x".into(),
        "x_tilde".into(),
        "t_tilde".into(),
    ];
    header.extend((1..=sol.n).map(|i| format!("R{i}")));
    header.push("mask".into());
    out.write_record(&header)?;
    let grid = sol.grid;
    for m in 0..grid.nt {
        for l in 0..grid.nx {
            let (xt, tt) = map.and_then(|c| c.at(m, l)).unwrap_or((f64::NAN, f64::NAN));
            let mut rec = vec![num(grid.t(m)), num(grid.x(l)), num(xt), num(tt)];
            rec.extend(sol.at(m, l).iter().map(|&v| num(v)));
            rec.push(status_name(sol.status[grid.index(m, l)]).into());
            out.write_record(&rec)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a file written by [`write_solution_csv`]; the grid is recovered
/// from the distinct `t` and `x` values, which must be equally spaced and
/// listed row by row.
pub fn read_solution_csv<R: Read>(r: R) -> Result<SolutionSample, IoError> {
    read_solution_with_map(r).map(|(sol, _)| sol)
}

/// Like [`read_solution_csv`], also returning the `x_tilde, t_tilde`
/// columns as a map when any node carries finite values. The Jacobian and
/// closedness of such a map are unknown (NaN).
pub fn read_solution_with_map<R: Read>(
    r: R,
) -> Result<(SolutionSample, Option<CoordinateMap>), IoError> {
    let mut rdr = ::csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    let n = header
        .len()
        .checked_sub(5)
        .filter(|&n| n >= 1)
        .ok_or_else(|| {
            IoError::Format(format!(
                "expected t, x, x_tilde, t_tilde, R1.., mask; got {} columns",
                header.len()
            ))
        })?;
    if &header[0] != "t" || &header[1] != "x" || &header[header.len() - 1] != "mask" {
        return Err(IoError::Format(
            "columns must start with t, x and end with mask".into(),
        ));
    }
    let mut rows: Vec<(f64, f64, Vec<f64>, NodeStatus)> = Vec::new();
    let mut tilde: Vec<[f64; 2]> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |k: usize| -> Result<f64, IoError> {
            rec[k]
                .trim()
                .parse::<f64>()
                .map_err(|_| IoError::Format(format!("row {}: bad number '{}'", line + 2, &rec[k])))
        };
        let values = (0..n)
            .map(|i| parse(4 + i))
            .collect::<Result<Vec<_>, _>>()?;
        let status = status_from(rec[4 + n].trim()).ok_or_else(|| {
            IoError::Format(format!("row {}: bad mask '{}'", line + 2, &rec[4 + n]))
        })?;
        rows.push((parse(0)?, parse(1)?, values, status));
        tilde.push([parse(2)?, parse(3)?]);
    }
    let nx = rows.iter().take_while(|r| r.0 == rows[0].0).count();
    if nx < 2 || rows.len() % nx != 0 {
        return Err(IoError::Format(
            "rows do not form a rectangular grid".into(),
        ));
    }
    let nt = rows.len() / nx;
    let grid = Grid::new(
        [rows[0].0, rows[rows.len() - 1].0],
        [rows[0].1, rows[nx - 1].1],
        nt,
        nx,
    )?;
    let scale_t = 1e-9 * (grid.t1 - grid.t0).abs().max(grid.t0.abs());
    let scale_x = 1e-9 * (grid.x1 - grid.x0).abs().max(grid.x0.abs());
    let mut sol = SolutionSample::new_masked(grid, n);
    for (k, (t, x, values, status)) in rows.into_iter().enumerate() {
        let (m, l) = (k / nx, k % nx);
        if (t - grid.t(m)).abs() > scale_t || (x - grid.x(l)).abs() > scale_x {
            return Err(IoError::Format(format!(
                "node ({t}, {x}) is off the uniform grid"
            )));
        }
        sol.values[k * n..(k + 1) * n].copy_from_slice(&values);
        sol.status[k] = status;
    }
    let valid: Vec<bool> = tilde
        .iter()
        .map(|p| p[0].is_finite() && p[1].is_finite())
        .collect();
    let map = valid.iter().any(|&v| v).then(|| CoordinateMap {
        grid,
        x: tilde.iter().map(|p| p[0]).collect(),
        t: tilde.iter().map(|p| p[1]).collect(),
        jacobian: vec![f64::NAN; grid.len()],
        valid,
        closedness: f64::NAN,
        order: QuadratureOrder::RowFirst,
    });
    Ok((sol, map))
}

/// One row per vertex: `curve, family, vertex, x, t, x_tilde, t_tilde`.
pub fn write_polylines_csv<W: Write>(w: W, curves: &[Characteristic]) -> Result<(), IoError> {
    let mut out = ::csv::Writer::from_writer(w);
    out.write_record(["curve", "family", "vertex", "x", "t", "x_tilde", "t_tilde"])?;
    for (id, c) in curves.iter().enumerate() {
        for (k, p) in c.points.iter().enumerate() {
            let q = c
                .mapped
                .as_ref()
                .and_then(|m| m.get(k))
                .copied()
                .unwrap_or([f64::NAN; 2]);
            out.write_record(&[
                id.to_string(),
                c.family.to_string(),
                k.to_string(),
                num(p[0]),
                num(p[1]),
                num(q[0]),
                num(q[1]),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// One row per node: `t, x, lambda1..n, E, F, G, H, res1, res2`.
pub fn write_web_csv<W: Write>(
    w: W,
    web: &WebSample,
    field: &SchwarzianField,
    residuals: &[[f64; 2]],
) -> Result<(), IoError> {
    let mut out = ::csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string(), "x".into()];
    header.extend((1..=web.n).map(|i| format!("lambda{i}")));
    header.extend(["E", "F", "G", "H", "res1", "res2"].map(String::from));
    out.write_record(&header)?;
    let grid = web.grid;
    for m in 0..grid.nt {
        for l in 0..grid.nx {
            let k = grid.index(m, l);
            let mut rec = vec![num(grid.t(m)), num(grid.x(l))];
            rec.extend(web.slopes_at(m, l).iter().map(|&v| num(v)));
            rec.extend(field.values[k].iter().map(|&v| num(v)));
            rec.extend(residuals[k].iter().map(|&v| num(v)));
            out.write_record(&rec)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Role, UnivariateSpec};
    use crate::hopf::{solve_hopf, InitialData};

    #[test]
    fn solution_round_trip() {
        let f = vec![UnivariateSpec::parse("u", "u", Role::F).unwrap(); 2];
        let data = InitialData::parse(&["x", "1 + 0.1*sin(x)"], [-1.0, 1.0]).unwrap();
        let grid = Grid::new([0.0, 0.3], [-1.0, 1.0], 4, 7).unwrap();
        let sol = solve_hopf(&f, &data, grid).unwrap();
        let mut buf = Vec::new();
        write_solution_csv(&mut buf, &sol, None).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x,x_tilde,t_tilde,R1,R2,mask\n"));
        let back = read_solution_csv(buf.as_slice()).unwrap();
        assert_eq!(back.grid, grid);
        assert_eq!(back.status, sol.status);
        for (a, b) in back.values.iter().zip(&sol.values) {
            assert!(a == b || (a.is_nan() && b.is_nan()));
        }
    }

    #[test]
    fn map_columns_round_trip() {
        use crate::generator::ConservationPairs;
        use crate::hopf::pushforward;
        let f = vec![UnivariateSpec::parse("u", "u", Role::F).unwrap()];
        let data = InitialData::parse(&["1 + 0.1*sin(x)"], [-5.0, 5.0]).unwrap();
        let grid = Grid::new([0.0, 0.3], [-1.0, 1.0], 5, 6).unwrap();
        let sol = solve_hopf(&f, &data, grid).unwrap();
        let map = pushforward(
            &sol,
            &ConservationPairs::identity(),
            QuadratureOrder::RowFirst,
            1e-7,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_solution_csv(&mut buf, &sol, Some(&map)).unwrap();
        let (_, back) = read_solution_with_map(buf.as_slice()).unwrap();
        let back = back.unwrap();
        assert_eq!(back.valid, map.valid);
        assert_eq!(back.max_difference(&map), 0.0);
        let mut plain = Vec::new();
        write_solution_csv(&mut plain, &sol, None).unwrap();
        assert!(read_solution_with_map(plain.as_slice())
            .unwrap()
            .1
            .is_none());
    }
}
