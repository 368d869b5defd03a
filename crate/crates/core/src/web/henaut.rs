use super::SchwarzianField;

/// The two Hénaut residuals at every node whose 3×3 neighbourhood is fitted
/// (NaN elsewhere), with all derivatives by central differences:
///
/// `r1 = 2G_tx + H_xx + F_tt − 6GG_x + 2HE_t + EH_t + 3FH_x − 3GF_t + 3HF_x`
///
/// `r2 = G_xx + E_tt + 2F_tx + 3EG_t − 3FG_x + 3GE_t + HE_x + 2EH_x − 6FF_t`
pub fn henaut_field(field: &SchwarzianField) -> Vec<[f64; 2]> {
    let grid = field.grid;
    let (dt, dx) = (grid.dt(), grid.dx());
    let mut out = vec![[f64::NAN; 2]; grid.len()];
    for m in 1..grid.nt.saturating_sub(1) {
        'node: for l in 1..grid.nx.saturating_sub(1) {
            let mut s = [[[0.0; 4]; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    match field.at(m + a - 1, l + b - 1) {
                        Some(v) => s[a][b] = v,
                        None => continue 'node,
                    }
                }
            }
            // d[c] = (value, _t, _x, _tt, _xx, _tx) of component c.
            let d = |c: usize| {
                let v = s[1][1][c];
                let t = (s[2][1][c] - s[0][1][c]) / (2.0 * dt);
                let x = (s[1][2][c] - s[1][0][c]) / (2.0 * dx);
                let tt = (s[2][1][c] - 2.0 * v + s[0][1][c]) / (dt * dt);
                let xx = (s[1][2][c] - 2.0 * v + s[1][0][c]) / (dx * dx);
                let tx = (s[2][2][c] - s[2][0][c] - s[0][2][c] + s[0][0][c]) / (4.0 * dt * dx);
                [v, t, x, tt, xx, tx]
            };
            let (e, f, g, h) = (d(0), d(1), d(2), d(3));
            const V: usize = 0;
            const T: usize = 1;
            const X: usize = 2;
            const TT: usize = 3;
            const XX: usize = 4;
            const TX: usize = 5;
            let r1 = 2.0 * g[TX] + h[XX] + f[TT] - 6.0 * g[V] * g[X]
                + 2.0 * h[V] * e[T]
                + e[V] * h[T]
                + 3.0 * f[V] * h[X]
                - 3.0 * g[V] * f[T]
                + 3.0 * h[V] * f[X];
            let r2 = g[XX] + e[TT] + 2.0 * f[TX] + 3.0 * e[V] * g[T] - 3.0 * f[V] * g[X]
                + 3.0 * g[V] * e[T]
                + h[V] * e[X]
                + 2.0 * e[V] * h[X]
                - 6.0 * f[V] * f[T];
            out[grid.index(m, l)] = [r1, r2];
        }
    }
    out
}

/// Largest `|r1|` and `|r2|` over the nodes where [`henaut_field`] is
/// defined; `(0, 0)` when there are none.
pub fn henaut_residual(field: &SchwarzianField) -> (f64, f64) {
    henaut_field(field)
        .iter()
        .filter(|r| r[0].is_finite() && r[1].is_finite())
        .fold((0.0, 0.0), |(a, b), r| {
            (f64::max(a, r[0].abs()), f64::max(b, r[1].abs()))
        })
}
