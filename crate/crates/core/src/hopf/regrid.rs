use super::quadrature::CumulativeIntegral;
use super::solve::{Foot, HopfComponent};
use super::{Grid, HopfError, InitialData, NodeStatus, SolutionSample};
use crate::expr::{Expression, Tape, UnivariateSpec};
use crate::generator::ConservationPairs;

const PANEL: f64 = 0.05;
const NEWTON_ITERATIONS: usize = 60;

struct Potential {
    x: CumulativeIntegral,
    t: CumulativeIntegral,
    /// `[K_x(φ(s)), K_t(φ(s))]` with `K_x = a − b F`, `K_t = m − n F`.
    k: Tape,
}

/// Exact solution of an uncoupled system together with the coordinates
/// `x̃ = Σ_k Φ_k`, `t̃ = Σ_k Ψ_k` of a separable conservation pair, where
/// `Φ_k(s, t) = ∫^s b_k(φ_k) dσ + (a_k − b_k F_k)(φ_k(s)) t` and `s` is the
/// foot of component `k`. The origin of `(x̃, t̃)` is the source corner
/// `(x0, t0)`.
pub struct ImageFrame {
    comps: Vec<HopfComponent>,
    potentials: Vec<Potential>,
    pairs: Tape,
    pub source: Grid,
    offset: [f64; 2],
}

/// Image of one source point.
#[derive(Debug, Clone)]
pub struct Mapped {
    pub x: f64,
    pub t: f64,
    pub values: Vec<f64>,
    /// `[A, B, M, N]` at the point.
    pub coefficients: [f64; 4],
}

enum MapFailure {
    Breaking,
    Outside,
    NoRoot,
}

impl ImageFrame {
    /// `base` are the speeds `F_k` of the uncoupled system, `source` the
    /// domain the image is taken of (its node counts are not used).
    pub fn new(
        base: &[UnivariateSpec],
        data: &InitialData,
        pairs: &ConservationPairs,
        source: Grid,
    ) -> Result<Self, HopfError> {
        let comps = super::solve::components(base, data)?;
        let terms = pairs
            .terms
            .as_ref()
            .ok_or_else(|| HopfError::Spec("pairs are not a sum of one-variable terms".into()))?;
        if terms.len() != comps.len() {
            return Err(HopfError::Spec(format!(
                "{} pair terms for {} components",
                terms.len(),
                comps.len()
            )));
        }
        let potentials = terms
            .iter()
            .zip(base)
            .zip(&data.profiles)
            .map(|((term, fk), phi)| {
                let [a, b, m, n] = term;
                let kx = a - &(b * fk.expr());
                let kt = m - &(n * fk.expr());
                let on_phi = |e: &Expression| e.substitute(&|_| phi.expr().clone());
                Ok(Potential {
                    x: CumulativeIntegral::new(&on_phi(b), data.interval, PANEL)?,
                    t: CumulativeIntegral::new(&on_phi(n), data.interval, PANEL)?,
                    k: Tape::compile(&[on_phi(&kx), on_phi(&kt)]),
                })
            })
            .collect::<Result<Vec<_>, HopfError>>()?;
        let exprs: Vec<Expression> = pairs.as_array().into_iter().cloned().collect();
        let mut frame = Self {
            comps,
            potentials,
            pairs: Tape::compile(&exprs),
            source,
            offset: [0.0; 2],
        };
        let mut warm = vec![None; frame.n()];
        match frame.raw(source.x0, source.t0, &mut warm) {
            Ok(p) => frame.offset = [p.x, p.t],
            Err(_) => {
                return Err(HopfError::Spec(
                    "the source corner has no solution value".into(),
                ))
            }
        }
        Ok(frame)
    }

    pub fn n(&self) -> usize {
        self.comps.len()
    }

    fn raw(&self, x: f64, t: f64, warm: &mut [Option<f64>]) -> Result<Mapped, MapFailure> {
        if self.comps.iter().any(|c| c.masked_at(t)) {
            return Err(MapFailure::Breaking);
        }
        let n = self.n();
        let mut values = Vec::with_capacity(n);
        let (mut xt, mut tt) = (0.0, 0.0);
        for (k, (c, p)) in self.comps.iter().zip(&self.potentials).enumerate() {
            let s = match c.foot(x, t, warm[k]) {
                Ok(Foot::Found(s)) => s,
                Ok(Foot::Outside) => return Err(MapFailure::Outside),
                _ => return Err(MapFailure::NoRoot),
            };
            warm[k] = Some(s);
            values.push(c.profile(s).map_err(|_| MapFailure::NoRoot)?);
            let kk = p.k.eval(&[s]).map_err(|_| MapFailure::NoRoot)?;
            let ix = p.x.eval(s).map_err(|_| MapFailure::NoRoot)?;
            let it = p.t.eval(s).map_err(|_| MapFailure::NoRoot)?;
            xt += ix + kk[0] * t;
            tt += it + kk[1] * t;
        }
        let c = self.pairs.eval(&values).map_err(|_| MapFailure::NoRoot)?;
        Ok(Mapped {
            x: xt - self.offset[0],
            t: tt - self.offset[1],
            values,
            coefficients: [c[0], c[1], c[2], c[3]],
        })
    }

    /// `(x̃, t̃)` and the solution at the source point `(x, t)`.
    pub fn map(&self, x: f64, t: f64) -> Option<Mapped> {
        let mut warm = vec![None; self.n()];
        self.raw(x, t, &mut warm).ok()
    }

    /// Newton iteration for the source point of `(x̃, t̃) = target`.
    fn invert(
        &self,
        target: [f64; 2],
        guess: [f64; 2],
        warm: &mut [Option<f64>],
    ) -> Result<([f64; 2], Mapped), MapFailure> {
        let tol = 1e-12 * target[0].abs().max(target[1].abs()).max(1.0);
        let [mut x, mut t] = guess;
        let mut cur = self.raw(x, t, warm)?;
        for _ in 0..NEWTON_ITERATIONS {
            let fx = cur.x - target[0];
            let ft = cur.t - target[1];
            let res = fx.abs().max(ft.abs());
            if res <= tol {
                return Ok(([x, t], cur));
            }
            let [a, b, m, n] = cur.coefficients;
            let det = b * m - a * n;
            if det == 0.0 || !det.is_finite() {
                return Err(MapFailure::NoRoot);
            }
            let dx = (-fx * m + a * ft) / det;
            let dt = (-b * ft + n * fx) / det;
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..30 {
                let (xn, tn) = (x + lambda * dx, t + lambda * dt);
                let mut w = warm.to_vec();
                if let Ok(next) = self.raw(xn, tn, &mut w) {
                    let r = (next.x - target[0]).abs().max((next.t - target[1]).abs());
                    if r < res || r <= tol {
                        warm.copy_from_slice(&w);
                        accepted = Some((xn, tn, next));
                        break;
                    }
                }
                lambda *= 0.5;
            }
            match accepted {
                Some((xn, tn, next)) => {
                    let tiny = (xn - x).abs() <= 4.0 * f64::EPSILON * xn.abs().max(1.0)
                        && (tn - t).abs() <= 4.0 * f64::EPSILON * tn.abs().max(1.0);
                    x = xn;
                    t = tn;
                    cur = next;
                    if tiny {
                        let r = (cur.x - target[0]).abs().max((cur.t - target[1]).abs());
                        return if r <= 1e3 * tol {
                            Ok(([x, t], cur))
                        } else {
                            Err(MapFailure::NoRoot)
                        };
                    }
                }
                None => {
                    return if res <= 1e3 * tol {
                        Ok(([x, t], cur))
                    } else {
                        Err(MapFailure::NoRoot)
                    };
                }
            }
        }
        Err(MapFailure::NoRoot)
    }

    fn inside_source(&self, p: [f64; 2]) -> bool {
        let g = &self.source;
        let ex = 1e-9 * (g.x1 - g.x0);
        let et = 1e-9 * (g.t1 - g.t0);
        p[0] >= g.x0 - ex && p[0] <= g.x1 + ex && p[1] >= g.t0 - et && p[1] <= g.t1 + et
    }

    /// Images of the source boundary, counter-clockwise in `(x, t)`, as
    /// `(x̃, t̃)` points.
    pub fn boundary(&self, per_side: usize) -> Option<Vec<[f64; 2]>> {
        let g = &self.source;
        let mut pts = Vec::with_capacity(4 * per_side);
        let corners = [[g.x0, g.t0], [g.x1, g.t0], [g.x1, g.t1], [g.x0, g.t1]];
        let mut warm = vec![None; self.n()];
        for side in 0..4 {
            let (p, q) = (corners[side], corners[(side + 1) % 4]);
            for k in 0..per_side {
                let s = k as f64 / per_side as f64;
                let x = p[0] + s * (q[0] - p[0]);
                let t = p[1] + s * (q[1] - p[1]);
                let m = self.raw(x, t, &mut warm).ok()?;
                pts.push([m.x, m.t]);
            }
        }
        Some(pts)
    }
}

/// Samples the image solution on a rectangular grid of the new coordinates
/// (`grid.t` ranges over `t̃`, `grid.x` over `x̃`). Nodes whose source point
/// leaves the source domain are marked [`NodeStatus::OutsideReach`].
pub fn regrid(frame: &ImageFrame, grid: Grid) -> Result<SolutionSample, HopfError> {
    let n = frame.n();
    let mut sol = SolutionSample::new_masked(grid, n);
    let mut pre: Vec<Option<[f64; 2]>> = vec![None; grid.len()];
    let mut feet: Vec<Option<f64>> = vec![None; grid.len() * n];
    let src = frame.source;
    let center = [0.5 * (src.x0 + src.x1), 0.5 * (src.t0 + src.t1)];
    let anchor = frame.map(center[0], center[1]).ok_or(HopfError::Empty)?;
    for m in 0..grid.nt {
        for l in 0..grid.nx {
            let k = grid.index(m, l);
            let target = [grid.x(l), grid.t(m)];
            let neighbour = [
                (l > 0).then(|| grid.index(m, l - 1)),
                (m > 0).then(|| grid.index(m - 1, l)),
            ]
            .into_iter()
            .flatten()
            .find(|&j| pre[j].is_some());
            let (guess, mut warm) = match neighbour {
                Some(j) => (pre[j].unwrap(), feet[j * n..(j + 1) * n].to_vec()),
                None => {
                    let [a, b, mm, nn] = anchor.coefficients;
                    let det = b * mm - a * nn;
                    let fx = anchor.x - target[0];
                    let ft = anchor.t - target[1];
                    (
                        [
                            center[0] + (-fx * mm + a * ft) / det,
                            center[1] + (-b * ft + nn * fx) / det,
                        ],
                        vec![None; n],
                    )
                }
            };
            let status = match frame.invert(target, guess, &mut warm) {
                Ok((p, mapped)) => {
                    pre[k] = Some(p);
                    feet[k * n..(k + 1) * n].copy_from_slice(&warm);
                    if frame.inside_source(p) {
                        sol.values[k * n..(k + 1) * n].copy_from_slice(&mapped.values);
                        NodeStatus::Valid
                    } else {
                        NodeStatus::OutsideReach
                    }
                }
                Err(MapFailure::Breaking) => NodeStatus::Breaking,
                Err(MapFailure::Outside) => NodeStatus::OutsideReach,
                Err(MapFailure::NoRoot) => NodeStatus::NoRoot,
            };
            sol.status[k] = status;
        }
    }
    if sol.valid_count() == 0 {
        return Err(HopfError::Empty);
    }
    Ok(sol)
}

fn inside_polygon(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1])
            && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0]
        {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// A rectangle `([t̃0, t̃1], [x̃0, x̃1])` inside the image of the source
/// domain, centred on the image of its centre: first the bounding box of
/// the image scaled down until it fits, then widened in `x̃` as far as it
/// still fits, and finally shrunk by `margin` (a fraction, e.g. 0.02).
pub fn inscribed_rectangle(
    frame: &ImageFrame,
    margin: f64,
) -> Result<([f64; 2], [f64; 2]), HopfError> {
    let poly = frame
        .boundary(256)
        .ok_or_else(|| HopfError::Spec("the source boundary has no complete image".into()))?;
    let src = frame.source;
    let c = frame
        .map(0.5 * (src.x0 + src.x1), 0.5 * (src.t0 + src.t1))
        .ok_or(HopfError::Empty)?;
    let c = [c.x, c.t];
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &poly {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let fits = |hx: f64, ht: f64| -> bool {
        let per = 64;
        (0..=per).all(|k| {
            let s = -1.0 + 2.0 * k as f64 / per as f64;
            [[s * hx, -ht], [s * hx, ht], [-hx, s * ht], [hx, s * ht]]
                .iter()
                .all(|d| inside_polygon(&poly, [c[0] + d[0], c[1] + d[1]]))
        })
    };
    let search = |f: &dyn Fn(f64) -> bool| -> f64 {
        let (mut a, mut b) = (0.0, 1.0);
        for _ in 0..50 {
            let mid = 0.5 * (a + b);
            if f(mid) {
                a = mid;
            } else {
                b = mid;
            }
        }
        a
    };
    let (wx, wt) = (0.5 * (hi[0] - lo[0]), 0.5 * (hi[1] - lo[1]));
    let alpha = search(&|s| fits(s * wx, s * wt));
    if alpha == 0.0 {
        return Err(HopfError::Empty);
    }
    let ht = alpha * wt;
    let beta = search(&|s| fits(alpha * wx + s * (1.0 - alpha) * wx, ht));
    let hx = (alpha + beta * (1.0 - alpha)) * wx;
    let (hx, ht) = (hx * (1.0 - margin), ht * (1.0 - margin));
    Ok(([c[1] - ht, c[1] + ht], [c[0] - hx, c[0] + hx]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Role;
    use crate::generator::generic_image;

    fn specs(texts: &[&str], role: Role) -> Vec<UnivariateSpec> {
        texts
            .iter()
            .map(|t| UnivariateSpec::parse(t, "u", role).unwrap())
            .collect()
    }

    #[test]
    fn trivial_pair_reflects_time() {
        // f = (u, 0), g = (1, 0) give A = 0, B = 1, M = -1, N = 0.
        let (_, pairs) =
            generic_image(&specs(&["u", "0"], Role::F), &specs(&["1", "0"], Role::G)).unwrap();
        let base = specs(&["u", "u"], Role::F);
        let data =
            InitialData::parse(&["1 + 0.1*sin(x)", "2 + 0.1*cos(x)"], [-20.0, 20.0]).unwrap();
        let src = Grid::new([0.0, 0.5], [-1.0, 1.0], 2, 2).unwrap();
        let frame = ImageFrame::new(&base, &data, &pairs, src).unwrap();
        let p = frame.map(0.3, 0.2).unwrap();
        assert!((p.x - 1.3).abs() < 1e-12, "{}", p.x);
        assert!((p.t + 0.2).abs() < 1e-12, "{}", p.t);
    }

    #[test]
    fn image_coordinates_match_trapezoid_pushforward() {
        let f = specs(&["u^2/2"; 3], Role::F);
        let g = specs(&["1"; 3], Role::G);
        let (_, pairs) = generic_image(&f, &g).unwrap();
        let base = specs(&["u"; 3], Role::F);
        let data = InitialData::parse(
            &[
                "1.5 + 0.1*sin(x)",
                "3 + 0.1*sin(x + 0.7)",
                "4.5 + 0.1*sin(x + 1.4)",
            ],
            [-30.0, 30.0],
        )
        .unwrap();
        let grid = Grid::new([0.0, 0.3], [0.0, 2.0], 241, 321).unwrap();
        let sol = super::super::solve_hopf(&base, &data, grid).unwrap();
        let map =
            super::super::pushforward(&sol, &pairs, super::super::QuadratureOrder::RowFirst, 1e-2)
                .unwrap();
        let frame = ImageFrame::new(&base, &data, &pairs, grid).unwrap();
        for (m, l) in [(0, 0), (120, 160), (240, 320), (17, 301)] {
            let p = frame.map(grid.x(l), grid.t(m)).unwrap();
            let (x, t) = map.at(m, l).unwrap();
            assert!(
                (p.x - x).abs() < 1e-4 && (p.t - t).abs() < 1e-4,
                "{:?} vs {:?}",
                (p.x, p.t),
                (x, t)
            );
        }
    }

    #[test]
    fn regrid_inverts_the_map() {
        let f = specs(&["u^2/2"; 3], Role::F);
        let g = specs(&["1"; 3], Role::G);
        let (image, pairs) = generic_image(&f, &g).unwrap();
        let base = specs(&["u"; 3], Role::F);
        let data = InitialData::parse(
            &[
                "1.5 + 0.1*sin(x)",
                "3 + 0.1*sin(x + 0.7)",
                "4.5 + 0.1*sin(x + 1.4)",
            ],
            [-30.0, 30.0],
        )
        .unwrap();
        let src = Grid::new([0.0, 0.3], [0.0, 2.0], 2, 2).unwrap();
        let frame = ImageFrame::new(&base, &data, &pairs, src).unwrap();
        let (tr, xr) = inscribed_rectangle(&frame, 0.02).unwrap();
        let grid = Grid::new(tr, xr, 41, 41).unwrap();
        let sol = regrid(&frame, grid).unwrap();
        let bad: Vec<_> = (0..grid.len())
            .filter(|&k| sol.status[k] != NodeStatus::Valid)
            .map(|k| (k, sol.status[k]))
            .collect();
        assert!(bad.is_empty(), "{bad:?}");
        let res = super::super::pde_residual(&sol, image.lambdas()).unwrap();
        let fine = regrid(&frame, grid.refined()).unwrap();
        let res_fine = super::super::pde_residual(&fine, image.lambdas()).unwrap();
        let ratio = res / res_fine;
        assert!((3.0..5.0).contains(&ratio), "{res} {res_fine}");
    }
}
