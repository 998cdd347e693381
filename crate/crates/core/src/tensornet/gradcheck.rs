use ndarray::Array2;

use super::{Graph, ParamStore, Result, TensorError, Var};

/// Entries whose analytic and numeric gradients are both below this
/// magnitude are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-3;

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel: f64,
    pub max_abs: f64,
    pub checked: usize,
}

impl GradCheck {
    fn new() -> Self {
        GradCheck {
            max_rel: 0.0,
            max_abs: 0.0,
            checked: 0,
        }
    }

    fn record(&mut self, analytic: f64, numeric: f64) {
        let diff = (analytic - numeric).abs();
        let scale = analytic.abs().max(numeric.abs()).max(REL_FLOOR);
        self.max_abs = self.max_abs.max(diff);
        self.max_rel = self.max_rel.max(diff / scale);
        self.checked += 1;
    }
}

/// Compare the gradient of scalar `f` at `x` with central differences of step `h`.
pub fn grad_check<F>(f: F, x: &Array2<f64>, h: f64) -> Result<GradCheck>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    let eval = |x: Array2<f64>| -> Result<f64> {
        let mut g = Graph::detached();
        let v = g.input(x);
        let out = f(&mut g, v)?;
        Ok(g.scalar(out))
    };
    let mut g = Graph::detached();
    let v = g.input(x.clone());
    let out = f(&mut g, v)?;
    let grads = g.backward(out)?;
    let analytic = grads
        .wrt(v)
        .cloned()
        .unwrap_or_else(|| Array2::zeros(x.dim()));

    let mut res = GradCheck::new();
    for (idx, &a) in analytic.indexed_iter() {
        let mut xp = x.clone();
        xp[idx] += h;
        let mut xm = x.clone();
        xm[idx] -= h;
        let numeric = (eval(xp)? - eval(xm)?) / (2.0 * h);
        res.record(a, numeric);
    }
    Ok(res)
}

/// Finite-difference check of the parameter gradients of `f`. At most
/// `max_coords` coordinates are perturbed, spread evenly over the store.
pub fn grad_check_params<F, E>(
    store: &ParamStore,
    f: F,
    h: f64,
    max_coords: usize,
) -> std::result::Result<GradCheck, E>
where
    F: Fn(&mut Graph) -> std::result::Result<Var, E>,
    E: From<TensorError>,
{
    let grads = {
        let mut g = Graph::new(store);
        let out = f(&mut g)?;
        g.backward(out).map_err(E::from)?
    };
    let total = store.param_count();
    let stride = total.div_ceil(max_coords.max(1)).max(1);
    let mut work = store.clone();
    let mut res = GradCheck::new();
    let mut flat = 0usize;
    let ids: Vec<_> = store.iter().map(|(id, _, _)| id).collect();
    for id in ids {
        let shape = store.value(id).value.dim();
        for r in 0..shape.0 {
            for c in 0..shape.1 {
                if flat % stride == 0 {
                    let a = grads.param(id).map_or(0.0, |g| g[[r, c]]);
                    let orig = work.value(id).value[[r, c]];
                    work.value_mut(id).value[[r, c]] = orig + h;
                    let fp = eval_store(&work, &f)?;
                    work.value_mut(id).value[[r, c]] = orig - h;
                    let fm = eval_store(&work, &f)?;
                    work.value_mut(id).value[[r, c]] = orig;
                    res.record(a, (fp - fm) / (2.0 * h));
                }
                flat += 1;
            }
        }
    }
    Ok(res)
}

fn eval_store<F, E>(store: &ParamStore, f: &F) -> std::result::Result<f64, E>
where
    F: Fn(&mut Graph) -> std::result::Result<Var, E>,
{
    let mut g = Graph::new(store);
    let out = f(&mut g)?;
    Ok(g.scalar(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensornet::ParamStore;
    use proptest::prelude::*;

    fn mlp_store() -> ParamStore {
        let mut s = ParamStore::new();
        s.add_linear("l0", 5, 7, 1).unwrap();
        s.add_linear("l1", 7, 6, 2).unwrap();
        s.add_linear("l2", 6, 3, 3).unwrap();
        s
    }

    fn mlp(g: &mut Graph, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, layer) in ["l0", "l1", "l2"].iter().enumerate() {
            let w = g.param_by_name(&format!("{layer}.w"))?;
            let b = g.param_by_name(&format!("{layer}.b"))?;
            h = g.affine(h, w, b)?;
            if i < 2 {
                h = g.elu(h)?;
            }
        }
        Ok(h)
    }

    fn sample_input() -> Array2<f64> {
        Array2::from_shape_fn((4, 5), |(i, j)| ((i * 5 + j) as f64 * 0.37).sin())
    }

    #[test]
    fn quadratic_is_exact() {
        let x = Array2::from_shape_vec((1, 3), vec![0.4, -1.2, 2.0]).unwrap();
        let r = grad_check(
            |g, x| {
                let sq = g.square(x)?;
                g.sum_all(sq)
            },
            &x,
            1e-6,
        )
        .unwrap();
        assert!(r.max_rel < 1e-9, "{r:?}");
    }

    #[test]
    fn mlp_parameter_gradients() {
        let store = mlp_store();
        let x = sample_input();
        let r = grad_check_params(
            &store,
            |g| {
                let xv = g.input(x.clone());
                let y = mlp(g, xv)?;
                let sq = g.square(y)?;
                g.mean_all(sq)
            },
            1e-6,
            usize::MAX,
        )
        .unwrap_or_else(|e: TensorError| panic!("{e}"));
        assert_eq!(r.checked, store.param_count());
        assert!(r.max_rel < 1e-6, "{r:?}");
    }

    #[test]
    fn softmax_cross_entropy() {
        let x = Array2::from_shape_fn((3, 4), |(i, j)| (i as f64 - j as f64) * 0.3);
        let t = Array2::from_shape_fn((3, 4), |(i, j)| if (i + 1) % 4 == j { 1.0 } else { 0.0 });
        let r = grad_check(
            |g, x| {
                let p = g.softmax(x)?;
                let lp = g.ln(p)?;
                let tv = g.input(t.clone());
                let tl = g.mul(tv, lp)?;
                let s = g.sum_all(tl)?;
                g.mul_scalar(s, -1.0 / 3.0)
            },
            &x,
            1e-6,
        )
        .unwrap();
        assert!(r.max_rel < 1e-6, "{r:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn random_compositions_have_exact_gradients(
            vals in proptest::collection::vec(-1.5f64..1.5, 12),
            ops in proptest::collection::vec(0usize..7, 1..6),
        ) {
            let x = Array2::from_shape_vec((3, 4), vals).unwrap();
            let w = Array2::from_shape_fn((4, 4), |(i, j)| ((i * 4 + j) as f64).cos() * 0.5);
            let r = grad_check(
                |g, x| {
                    let mut h = x;
                    for &op in &ops {
                        h = match op {
                            0 => g.elu(h)?,
                            1 => g.softmax(h)?,
                            2 => { let wv = g.input(w.clone()); g.matmul(h, wv)? }
                            3 => { let e = g.clamp(h, -2.0, 2.0)?; g.exp(e)? }
                            4 => g.mul(h, h)?,
                            5 => { let c = g.concat(h, h)?; let wv = g.input(Array2::from_shape_fn((8, 4), |(i, j)| ((i + 2 * j) as f64).sin())); g.matmul(c, wv)? }
                            _ => { let s = g.softmax(h)?; g.column_scale(h, s, 1)? }
                        };
                    }
                    let sq = g.square(h)?;
                    let s = g.sum_all(sq)?;
                    g.mul_scalar(s, 0.1)
                },
                &x,
                1e-6,
            )
            .unwrap();
            prop_assert!(r.max_rel < 1e-6, "{:?} {:?}", r, ops);
        }
    }
}
