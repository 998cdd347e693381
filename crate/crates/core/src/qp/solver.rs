use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{kkt_residuals, QpError, QpProblem, QpSettings, QpSolution, QpStatus};

/// Problem after Ruiz equilibration: `x = d .* x~`, `y = ea .* y~ / cost`,
/// `z = eg .* z~ / cost`.
struct Scaled {
    p: DMatrix<f64>,
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    g: DMatrix<f64>,
    h: DVector<f64>,
    d: DVector<f64>,
    ea: DVector<f64>,
    eg: DVector<f64>,
    cost: f64,
}

fn inv_sqrt_norm(m: f64) -> f64 {
    if m < 1e-4 {
        1.0
    } else {
        1.0 / m.min(1e4).sqrt()
    }
}

fn row_amax(m: &DMatrix<f64>, i: usize) -> f64 {
    m.row(i).iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn col_amax(m: &DMatrix<f64>, j: usize) -> f64 {
    m.column(j).iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn equilibrate(prob: &QpProblem, iters: usize) -> Scaled {
    let (n, me, mi) = (prob.n(), prob.n_eq(), prob.n_ineq());
    let mut s = Scaled {
        p: prob.p.to_dense(),
        c: prob.c.clone(),
        a: prob.a.to_dense(),
        b: prob.b.clone(),
        g: prob.g.to_dense(),
        h: prob.h.clone(),
        d: DVector::from_element(n, 1.0),
        ea: DVector::from_element(me, 1.0),
        eg: DVector::from_element(mi, 1.0),
        cost: 1.0,
    };
    for _ in 0..iters {
        let dd = DVector::from_fn(n, |j, _| {
            inv_sqrt_norm(col_amax(&s.p, j).max(col_amax(&s.a, j)).max(col_amax(&s.g, j)))
        });
        let da = DVector::from_fn(me, |i, _| inv_sqrt_norm(row_amax(&s.a, i)));
        let dg = DVector::from_fn(mi, |i, _| inv_sqrt_norm(row_amax(&s.g, i)));
        for j in 0..n {
            for i in 0..n {
                s.p[(i, j)] *= dd[i] * dd[j];
            }
            for i in 0..me {
                s.a[(i, j)] *= da[i] * dd[j];
            }
            for i in 0..mi {
                s.g[(i, j)] *= dg[i] * dd[j];
            }
        }
        s.c.component_mul_assign(&dd);
        s.b.component_mul_assign(&da);
        s.h.component_mul_assign(&dg);
        s.d.component_mul_assign(&dd);
        s.ea.component_mul_assign(&da);
        s.eg.component_mul_assign(&dg);
    }
    if iters > 0 && n > 0 {
        let mean_col = (0..n).map(|j| col_amax(&s.p, j)).sum::<f64>() / n as f64;
        let m = mean_col.max(s.c.amax());
        let k = if m < 1e-4 { 1.0 } else { 1.0 / m.min(1e4) };
        s.p *= k;
        s.c *= k;
        s.cost = k;
    }
    s
}

/// Cholesky factor of `P + eps I + rho A'A + rho G_S' G_S` for the current
/// active set `S`, kept in sync with rank-one updates.
struct Factor {
    h0: DMatrix<f64>,
    gt: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    active: Vec<bool>,
    rho: f64,
}

impl Factor {
    fn new(s: &Scaled, rho: f64, eps: f64) -> Result<Self, QpError> {
        let n = s.c.len();
        let mut f = Factor {
            h0: DMatrix::zeros(n, n),
            gt: s.g.transpose(),
            chol: Cholesky::new(DMatrix::identity(n, n)).expect("identity is positive definite"),
            active: vec![false; s.h.len()],
            rho,
        };
        f.set_rho(s, rho, eps)?;
        Ok(f)
    }

    fn set_rho(&mut self, s: &Scaled, rho: f64, eps: f64) -> Result<(), QpError> {
        let n = s.c.len();
        self.rho = rho;
        self.h0 = &s.p + DMatrix::identity(n, n) * eps + s.a.tr_mul(&s.a) * rho;
        self.rebuild()
    }

    fn rebuild(&mut self) -> Result<(), QpError> {
        let mut h = self.h0.clone();
        for (i, _) in self.active.iter().enumerate().filter(|(_, &a)| a) {
            let gi = self.gt.column(i);
            h.ger(self.rho, &gi, &gi, 1.0);
        }
        self.chol = Cholesky::new(h).ok_or(QpError::NotConvex)?;
        Ok(())
    }

    fn set_active(&mut self, want: &[bool]) -> Result<(), QpError> {
        let changed: Vec<usize> = (0..want.len()).filter(|&i| want[i] != self.active[i]).collect();
        if changed.is_empty() {
            return Ok(());
        }
        self.active.copy_from_slice(want);
        let n = self.h0.nrows();
        if 3 * changed.len() > n {
            return self.rebuild();
        }
        // additions first so downdates act on the larger matrix
        let mut order = changed;
        order.sort_by_key(|&i| !want[i]);
        for i in order {
            let gi = self.gt.column(i).clone_owned();
            let sigma = if want[i] { self.rho } else { -self.rho };
            self.chol.rank_one_update(&gi, sigma);
        }
        let l = self.chol.l_dirty();
        if (0..n).any(|k| !(l[(k, k)].is_finite() && l[(k, k)] > 0.0)) {
            return self.rebuild();
        }
        Ok(())
    }
}

/// Smallest minimizer over `alpha >= 0` of the piecewise quadratic whose
/// derivative is `g0 + alpha q + rho sum_i w_i max(r_i + alpha w_i, 0)`.
fn exact_line_search(g0: f64, q: f64, r: &DVector<f64>, w: &DVector<f64>, rho: f64) -> f64 {
    let (mut c0, mut c1) = (g0, q);
    let mut events = Vec::new();
    for i in 0..r.len() {
        if r[i] > 0.0 || (r[i] == 0.0 && w[i] > 0.0) {
            c0 += rho * w[i] * r[i];
            c1 += rho * w[i] * w[i];
        }
        if w[i] != 0.0 {
            let t = -r[i] / w[i];
            if t > 0.0 {
                events.push((t, i));
            }
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut lo = 0.0;
    for (t, i) in events {
        if c1 > 0.0 {
            let a = -c0 / c1;
            if a <= t {
                return a.max(lo);
            }
        }
        let sign = if w[i] > 0.0 { 1.0 } else { -1.0 };
        c0 += sign * rho * w[i] * r[i];
        c1 += sign * rho * w[i] * w[i];
        lo = t;
    }
    if c1 > 0.0 {
        (-c0 / c1).max(lo)
    } else {
        lo
    }
}

struct Tolerances {
    stat: f64,
    eq: f64,
    ineq: f64,
}

fn tolerances(prob: &QpProblem, set: &QpSettings, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> Tolerances {
    if set.eps_rel == 0.0 {
        return Tolerances {
            stat: set.eps_abs,
            eq: set.eps_abs,
            ineq: set.eps_abs,
        };
    }
    let amax = |v: DVector<f64>| if v.is_empty() { 0.0 } else { v.amax() };
    let stat = amax(prob.p.mul_vec(x))
        .max(amax(prob.c.clone()))
        .max(amax(prob.a.tr_mul_vec(y)))
        .max(amax(prob.g.tr_mul_vec(z)));
    let eq = amax(prob.a.mul_vec(x)).max(amax(prob.b.clone()));
    let ineq = amax(prob.g.mul_vec(x)).max(amax(prob.h.clone()));
    Tolerances {
        stat: set.eps_abs + set.eps_rel * stat,
        eq: set.eps_abs + set.eps_rel * eq,
        ineq: set.eps_abs + set.eps_rel * ineq,
    }
}

/// Solve a convex QP with the proximal method of multipliers.
///
/// Each outer iteration minimizes the proximal augmented Lagrangian
/// with semismooth Newton steps and an exact line search, then updates
/// the multipliers. The penalty grows by `rho_growth` whenever the primal
/// residual fails to shrink by a factor of four.
pub fn solve(prob: &QpProblem, set: &QpSettings) -> Result<QpSolution, QpError> {
    prob.validate()?;
    set.validate()?;
    let (n, me, mi) = (prob.n(), prob.n_eq(), prob.n_ineq());
    let s = equilibrate(prob, set.scaling_iters);
    let eps = set.eps_prox;

    let (mut x, mut y, mut z, mut rho) = match &set.warm_start {
        Some(w) => {
            if w.x.len() != n || w.y.len() != me || w.z.len() != mi {
                return Err(QpError::Dim("warm start does not match the problem".into()));
            }
            (
                w.x.component_div(&s.d),
                w.y.component_div(&s.ea) * s.cost,
                w.z.map(|v| v.max(0.0)).component_div(&s.eg) * s.cost,
                if w.rho.is_finite() {
                    w.rho.clamp(set.rho_init, set.rho_max)
                } else {
                    set.rho_init
                },
            )
        }
        None => (DVector::zeros(n), DVector::zeros(me), DVector::zeros(mi), set.rho_init),
    };
    let mut fac = Factor::new(&s, rho, eps)?;
    let unscale = |x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>| {
        (
            x.component_mul(&s.d),
            y.component_mul(&s.ea) / s.cost,
            z.component_mul(&s.eg) / s.cost,
        )
    };
    let inner_tol = 1e-2 * set.eps_abs;

    let mut prev_primal = f64::INFINITY;
    let mut stall = 0usize;
    let mut newton_steps = 0usize;
    let mut status = QpStatus::MaxIter;
    let mut iterations = 0;
    let mut xhat = x.clone();
    let mut active = vec![false; mi];

    for it in 1..=set.max_iter {
        iterations = it;
        for _ in 0..set.max_newton {
            let re = &s.a * &x - &s.b + &y / rho;
            let ri = &s.g * &x - &s.h + &z / rho;
            for i in 0..mi {
                active[i] = ri[i] > 0.0;
            }
            let gb = &s.p * &x + &s.c + (&x - &xhat) * eps + s.a.tr_mul(&re) * rho;
            let ri_plus = ri.map(|v| v.max(0.0));
            let grad = &gb + s.g.tr_mul(&ri_plus) * rho;
            let gnorm = grad.component_div(&s.d).amax() / s.cost;
            if n == 0 || gnorm <= inner_tol {
                break;
            }
            fac.set_active(&active)?;
            let dx = -fac.chol.solve(&grad);
            if dx.amax() == 0.0 {
                break;
            }
            let adx = &s.a * &dx;
            let q = dx.dot(&(&s.p * &dx)) + eps * dx.norm_squared() + rho * adx.norm_squared();
            let w = &s.g * &dx;
            let alpha = exact_line_search(gb.dot(&dx), q, &ri, &w, rho);
            x += &dx * alpha;
            newton_steps += 1;
            // a full step that keeps the active set lands on the exact minimizer
            if (alpha - 1.0).abs() < 1e-12 {
                let ri_new = &s.g * &x - &s.h + &z / rho;
                if (0..mi).all(|i| (ri_new[i] > 0.0) == active[i]) {
                    break;
                }
            }
        }

        let re = &s.a * &x - &s.b;
        let ri = &s.g * &x - &s.h;
        y += &re * rho;
        z = (&z + &ri * rho).map(|v| v.max(0.0));
        xhat.copy_from(&x);

        let (xu, yu, zu) = unscale(&x, &y, &z);
        let res = kkt_residuals(prob, &xu, &yu, &zu);
        let tol = tolerances(prob, set, &xu, &yu, &zu);
        if res.stationarity <= tol.stat
            && res.eq_feasibility <= tol.eq
            && res.ineq_feasibility <= tol.ineq
            && res.complementarity <= tol.ineq
        {
            status = QpStatus::Optimal;
            break;
        }

        let primal = res.eq_feasibility.max(res.ineq_feasibility);
        let primal_tol = tol.eq.min(tol.ineq);
        if primal > primal_tol && primal > 0.25 * prev_primal {
            if rho < set.rho_max {
                rho = (rho * set.rho_growth).min(set.rho_max);
                fac.set_rho(&s, rho, eps)?;
            } else if primal > 0.9 * prev_primal {
                stall += 1;
                if stall >= 10 {
                    status = QpStatus::InfeasibleIsh;
                    break;
                }
            }
        } else {
            stall = 0;
        }
        prev_primal = primal;
    }

    let (x, y, z) = unscale(&x, &y, &z);
    let residuals = kkt_residuals(prob, &x, &y, &z);
    Ok(QpSolution {
        x,
        y,
        z,
        status,
        iterations,
        newton_steps,
        rho,
        residuals,
    })
}
