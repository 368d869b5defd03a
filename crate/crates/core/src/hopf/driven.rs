use super::solve::{Foot, HopfComponent};
use super::{Grid, HopfError, InitialData, NodeStatus, SolutionSample};
use crate::expr::{Tape, UnivariateSpec};
use crate::system::QuasilinearSystem;

/// A diagonal system in which every speed but one depends on its own
/// invariant only, `λ^j = f^j(R^j)`, while the remaining (driven) speed may
/// depend on all of them. The free components are solved exactly; the driven
/// one by shooting along its characteristic, which is integrated backwards
/// to `t = 0` with a fixed number of RK4 steps.
pub struct DrivenSystem {
    n: usize,
    driver: usize,
    speed: Tape,
    deps: Vec<usize>,
    free: Vec<Option<HopfComponent>>,
    profile: Tape,
    interval: [f64; 2],
    steps: usize,
}

enum Shot {
    Found(f64),
    Outside,
    NoRoot,
}

impl DrivenSystem {
    pub fn new(
        system: &QuasilinearSystem,
        data: &InitialData,
        steps: usize,
    ) -> Result<Self, HopfError> {
        let n = system.n();
        if data.n() != n {
            return Err(HopfError::Spec(format!(
                "{} profiles for {n} components",
                data.n()
            )));
        }
        if steps == 0 {
            return Err(HopfError::Spec("need at least one step".into()));
        }
        let lambdas = system.lambdas();
        let coupled: Vec<usize> = (0..n)
            .filter(|&i| lambdas[i].variables().iter().any(|&v| v != i))
            .collect();
        let driver = match coupled.as_slice() {
            [d] => *d,
            [] => {
                return Err(HopfError::Spec(
                    "no coupled speed; solve the uncoupled system directly".into(),
                ))
            }
            _ => {
                return Err(HopfError::Spec(format!(
                    "{} speeds depend on other invariants; only one may",
                    coupled.len()
                )))
            }
        };
        let mut free = Vec::with_capacity(n);
        for i in 0..n {
            if i == driver {
                free.push(None);
                continue;
            }
            let mut perm: Vec<usize> = (0..n).collect();
            perm.swap(0, i);
            let f = UnivariateSpec::from_expr(lambdas[i].relabel(&perm), crate::expr::Role::F)
                .ok_or_else(|| {
                    HopfError::Spec(format!("speed {} is not a function of R{}", i + 1, i + 1))
                })?;
            free.push(Some(HopfComponent::new(
                i,
                &f,
                &data.profiles[i],
                data.interval,
            )?));
        }
        let deps = lambdas[driver]
            .variables()
            .into_iter()
            .filter(|&v| v != driver)
            .collect();
        Ok(Self {
            n,
            driver,
            speed: Tape::compile(std::slice::from_ref(&lambdas[driver])),
            deps,
            free,
            profile: Tape::compile(std::slice::from_ref(data.profiles[driver].expr())),
            interval: data.interval,
            steps,
        })
    }

    /// Zero-based index of the driven component.
    pub fn driver(&self) -> usize {
        self.driver
    }

    /// Foot of the driven characteristic through `(x, t)` carrying value `v`.
    fn foot(&self, x: f64, t: f64, v: f64, warm: &[Option<f64>]) -> Result<Option<f64>, HopfError> {
        let mut r = vec![0.0; self.n];
        r[self.driver] = v;
        let mut warm = warm.to_vec();
        let mut rate = |xx: f64, tt: f64, r: &mut Vec<f64>| -> Result<Option<f64>, HopfError> {
            for &j in &self.deps {
                let c = self.free[j].as_ref().expect("free component");
                match c.foot(xx, tt, warm[j])? {
                    Foot::Found(s) => {
                        warm[j] = Some(s);
                        r[j] = c.profile(s)?;
                    }
                    _ => return Ok(None),
                }
            }
            Ok(Some(-self.speed.eval(r)?[0]))
        };
        let h = -t / self.steps as f64;
        let (mut xx, mut tt) = (x, t);
        for k in 0..self.steps {
            let t_next = if k + 1 == self.steps { 0.0 } else { tt + h };
            let Some(k1) = rate(xx, tt, &mut r)? else {
                return Ok(None);
            };
            let Some(k2) = rate(xx + 0.5 * h * k1, tt + 0.5 * h, &mut r)? else {
                return Ok(None);
            };
            let Some(k3) = rate(xx + 0.5 * h * k2, tt + 0.5 * h, &mut r)? else {
                return Ok(None);
            };
            let Some(k4) = rate(xx + h * k3, t_next, &mut r)? else {
                return Ok(None);
            };
            xx += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
            tt = t_next;
        }
        Ok(Some(xx))
    }

    fn shoot(&self, x: f64, t: f64, guess: f64, warm: &[Option<f64>]) -> Result<Shot, HopfError> {
        let [a, b] = self.interval;
        let residual = |v: f64| -> Result<Option<(f64, f64)>, HopfError> {
            match self.foot(x, t, v, warm)? {
                Some(s) if (a..=b).contains(&s) => {
                    let p = self.profile.eval(&[s])?[0];
                    Ok(Some((p - v, p)))
                }
                _ => Ok(None),
            }
        };
        let tol = 1e-13 * guess.abs().max(1.0);
        let Some((mut r0, p0)) = residual(guess)? else {
            return Ok(Shot::Outside);
        };
        let mut v0 = guess;
        if r0.abs() <= tol {
            return Ok(Shot::Found(v0));
        }
        let mut v1 = p0;
        for _ in 0..60 {
            let Some((r1, p1)) = residual(v1)? else {
                return Ok(Shot::Outside);
            };
            if r1.abs() <= tol {
                return Ok(Shot::Found(v1));
            }
            let next = if r1 != r0 {
                v1 - r1 * (v1 - v0) / (r1 - r0)
            } else {
                p1
            };
            if !next.is_finite() {
                return Ok(Shot::NoRoot);
            }
            if (next - v1).abs() <= 4.0 * f64::EPSILON * next.abs().max(1.0) {
                return Ok(if r1.abs() <= 1e3 * tol {
                    Shot::Found(v1)
                } else {
                    Shot::NoRoot
                });
            }
            (v0, r0) = (v1, r1);
            v1 = next;
        }
        Ok(Shot::NoRoot)
    }
}

/// Solves a [`DrivenSystem`] node by node on `grid`, with `steps` RK4 steps
/// per backward characteristic.
pub fn solve_driven(
    system: &QuasilinearSystem,
    data: &InitialData,
    grid: Grid,
    steps: usize,
) -> Result<SolutionSample, HopfError> {
    let ds = DrivenSystem::new(system, data, steps)?;
    let n = ds.n;
    let mut sol = SolutionSample::new_masked(grid, n);
    sol.breaking = ds
        .free
        .iter()
        .flatten()
        .map(|c| c.breaking.clone())
        .collect();
    let mut prev_row: Vec<Option<f64>> = vec![None; grid.nx * n];
    for m in 0..grid.nt {
        let t = grid.t(m);
        if ds.free.iter().flatten().any(|c| c.masked_at(t)) {
            for l in 0..grid.nx {
                sol.status[grid.index(m, l)] = NodeStatus::Breaking;
            }
            continue;
        }
        let mut left: Vec<Option<f64>> = vec![None; n];
        for l in 0..grid.nx {
            let x = grid.x(l);
            let k = grid.index(m, l);
            let mut status = NodeStatus::Valid;
            let mut warm = vec![None; n];
            for (i, c) in ds.free.iter().enumerate() {
                let Some(c) = c else { continue };
                match c.foot(x, t, left[i].or(prev_row[l * n + i]))? {
                    Foot::Found(s) => {
                        sol.values[k * n + i] = c.profile(s)?;
                        warm[i] = Some(s);
                        left[i] = Some(s);
                        prev_row[l * n + i] = Some(s);
                    }
                    Foot::Outside => {
                        status = NodeStatus::OutsideReach;
                        left[i] = None;
                    }
                    Foot::NoRoot => {
                        if status == NodeStatus::Valid {
                            status = NodeStatus::NoRoot;
                        }
                        left[i] = None;
                    }
                }
            }
            let d = ds.driver;
            if status == NodeStatus::Valid {
                let guess = match left[d].or(prev_row[l * n + d]) {
                    Some(v) => v,
                    None => ds
                        .profile
                        .eval(&[x.clamp(data.interval[0], data.interval[1])])?[0],
                };
                match ds.shoot(x, t, guess, &warm)? {
                    Shot::Found(v) => {
                        sol.values[k * n + d] = v;
                        left[d] = Some(v);
                        prev_row[l * n + d] = Some(v);
                    }
                    Shot::Outside => status = NodeStatus::OutsideReach,
                    Shot::NoRoot => status = NodeStatus::NoRoot,
                }
            }
            if status != NodeStatus::Valid {
                left[d] = None;
            }
            sol.status[k] = status;
        }
    }
    if sol.status.iter().all(|s| *s == NodeStatus::Breaking) {
        return Err(HopfError::Empty);
    }
    Ok(sol)
}
