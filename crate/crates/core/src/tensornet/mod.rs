//! Dense define-by-run reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every operation applied to its [`Var`]s; calling
//! [`Graph::backward`] on a scalar walks the tape in reverse and returns
//! exact gradients for all parameters and inputs. All tensors are 2-D
//! (`rows x cols`, a vector is a `1 x n` row) in `f64`. A graph is rebuilt
//! for every forward pass.

mod adam;
mod gradcheck;
mod params;

pub use adam::AdamState;
pub use gradcheck::{grad_check, grad_check_params, GradCheck, REL_FLOOR};
pub use params::{ParamId, ParamStore, ParamsFile, SplitMix64, Tensor, PARAMS_VERSION};

use ndarray::{concatenate, s, Array2, Axis};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {a:?} vs {b:?}")]
    Shape {
        op: &'static str,
        a: (usize, usize),
        b: (usize, usize),
    },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss((usize, usize)),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("unknown parameter '{0}'")]
    UnknownParam(String),
    #[error("parameter file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    Affine(Var, Var, Var),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulScalar(Var, f64),
    AddScalar(Var),
    Elu(Var),
    Exp(Var),
    Ln(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    Softmax(Var),
    Concat(Var, Var),
    ColumnScale(Var, Var, usize),
    SumAll(Var),
}

#[derive(Debug)]
struct Node {
    value: Option<Array2<f64>>,
    op: Op,
}

/// Gradients from one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    nodes: Vec<Option<Array2<f64>>>,
    params: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    /// Gradient with respect to a graph node (input or intermediate).
    pub fn wrt(&self, v: Var) -> Option<&Array2<f64>> {
        self.nodes[v.0].as_ref()
    }

    pub fn param(&self, id: ParamId) -> Option<&Array2<f64>> {
        self.params.get(id.0).and_then(|g| g.as_ref())
    }

    pub(crate) fn params(&self) -> &[Option<Array2<f64>>] {
        &self.params
    }
}

pub struct Graph<'s> {
    store: Option<&'s ParamStore>,
    nodes: Vec<Node>,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Graph {
            store: None,
            nodes: Vec::new(),
        }
    }
}

impl<'s> Graph<'s> {
    /// A graph whose parameter nodes read from `store`.
    pub fn new(store: &'s ParamStore) -> Self {
        Graph {
            store: Some(store),
            nodes: Vec::new(),
        }
    }

    /// A graph with no parameters (inputs only).
    pub fn detached() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(x), _) => x,
            (None, Op::Param(id)) => &self.store.expect("param graph").value(*id).value,
            _ => unreachable!("node without value"),
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[[0, 0]]
    }

    fn push(&mut self, value: Array2<f64>, op: Op, name: &'static str) -> Result<Var> {
        if cfg!(debug_assertions) && value.iter().any(|x| !x.is_finite()) {
            return Err(TensorError::NonFinite(name));
        }
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn input(&mut self, value: Array2<f64>) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op: Op::Input,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn row(&mut self, values: &[f64]) -> Var {
        let a = Array2::from_shape_vec((1, values.len()), values.to_vec()).expect("row shape");
        self.input(a)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param_by_name(&mut self, name: &str) -> Result<Var> {
        let id = self
            .store
            .and_then(|s| s.id(name))
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))?;
        Ok(self.param(id))
    }

    /// Copy of a node's value with no gradient path back.
    pub fn detach(&mut self, v: Var) -> Var {
        let val = self.value(v).clone();
        self.input(val)
    }

    /// `x W + b` with `x: n x i`, `W: i x o`, `b: 1 x o`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.1 != ws.0 {
            return Err(TensorError::Shape { op: "affine", a: xs, b: ws });
        }
        if bs != (1, ws.1) {
            return Err(TensorError::Shape { op: "affine bias", a: bs, b: ws });
        }
        let out = self.value(x).dot(self.value(w)) + self.value(b);
        self.push(out, Op::Affine(x, w, b), "affine")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(TensorError::Shape { op: "matmul", a: sa, b: sb });
        }
        let out = self.value(a).dot(self.value(b));
        self.push(out, Op::MatMul(a, b), "matmul")
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(TensorError::Shape { op, a: sa, b: sb });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.value(a) + self.value(b);
        self.push(out, Op::Add(a, b), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a) - self.value(b);
        self.push(out, Op::Sub(a, b), "sub")
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a) * self.value(b);
        self.push(out, Op::Mul(a, b), "mul")
    }

    pub fn mul_scalar(&mut self, a: Var, s: f64) -> Result<Var> {
        let out = self.value(a) * s;
        self.push(out, Op::MulScalar(a, s), "mul_scalar")
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Result<Var> {
        let out = self.value(a) + s;
        self.push(out, Op::AddScalar(a), "add_scalar")
    }

    pub fn elu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).mapv(|x| if x > 0.0 { x } else { x.exp_m1() });
        self.push(out, Op::Elu(a), "elu")
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).mapv(f64::exp);
        self.push(out, Op::Exp(a), "exp")
    }

    /// Natural logarithm; the caller keeps inputs positive.
    pub fn ln(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).mapv(f64::ln);
        self.push(out, Op::Ln(a), "ln")
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).mapv(|x| x * x);
        self.push(out, Op::Square(a), "square")
    }

    /// Elementwise clamp; the gradient is zero outside `[lo, hi]`.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        let out = self.value(a).mapv(|x| x.clamp(lo, hi));
        self.push(out, Op::Clamp(a, lo, hi), "clamp")
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let mut out = self.value(a).clone();
        for mut row in out.rows_mut() {
            let m = row.fold(f64::NEG_INFINITY, |acc, &x| acc.max(x));
            row.mapv_inplace(|x| (x - m).exp());
            let s = row.sum();
            row.mapv_inplace(|x| x / s);
        }
        self.push(out, Op::Softmax(a), "softmax")
    }

    /// Column-wise concatenation `[a | b]`.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.0 != sb.0 {
            return Err(TensorError::Shape { op: "concat", a: sa, b: sb });
        }
        let out = concatenate(Axis(1), &[self.value(a).view(), self.value(b).view()])
            .expect("concat shapes checked");
        self.push(out, Op::Concat(a, b), "concat")
    }

    /// Scale every row of `a` by the matching entry of column `k` of `w`.
    pub fn column_scale(&mut self, a: Var, w: Var, k: usize) -> Result<Var> {
        let (sa, sw) = (self.shape(a), self.shape(w));
        if sa.0 != sw.0 || k >= sw.1 {
            return Err(TensorError::Shape { op: "column_scale", a: sa, b: sw });
        }
        let col = self.value(w).slice(s![.., k..k + 1]).to_owned();
        let out = self.value(a) * &col;
        self.push(out, Op::ColumnScale(a, w, k), "column_scale")
    }

    /// Sum of all entries as a `1 x 1` node.
    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let out = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(out, Op::SumAll(a), "sum_all")
    }

    pub fn mean_all(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len() as f64;
        let s = self.sum_all(a)?;
        self.mul_scalar(s, 1.0 / n)
    }

    /// Reverse pass from a `1 x 1` loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(TensorError::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Array2::ones((1, 1)));
        let n_params = self.store.map_or(0, |s| s.len());
        let mut params: Vec<Option<Array2<f64>>> = vec![None; n_params];

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Input => {}
                Op::Param(id) => accumulate(&mut params[id.0], g.clone()),
                Op::Affine(x, w, b) => {
                    let dx = g.dot(&self.value(*w).t());
                    let dw = self.value(*x).t().dot(&g);
                    let db = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads[x.0], dx);
                    accumulate(&mut grads[w.0], dw);
                    accumulate(&mut grads[b.0], db);
                }
                Op::MatMul(a, b) => {
                    let da = g.dot(&self.value(*b).t());
                    let db = self.value(*a).t().dot(&g);
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], g.clone());
                    accumulate(&mut grads[b.0], g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads[a.0], g.clone());
                    accumulate(&mut grads[b.0], -&g);
                }
                Op::Mul(a, b) => {
                    let da = &g * self.value(*b);
                    let db = &g * self.value(*a);
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::MulScalar(a, s) => accumulate(&mut grads[a.0], &g * *s),
                Op::AddScalar(a) => accumulate(&mut grads[a.0], g.clone()),
                Op::Elu(a) => {
                    let y = self.value(Var(i));
                    let mut d = g.clone();
                    ndarray::Zip::from(&mut d)
                        .and(self.value(*a))
                        .and(y)
                        .for_each(|d, &x, &y| {
                            if x <= 0.0 {
                                *d *= y + 1.0;
                            }
                        });
                    accumulate(&mut grads[a.0], d);
                }
                Op::Exp(a) => accumulate(&mut grads[a.0], &g * self.value(Var(i))),
                Op::Ln(a) => accumulate(&mut grads[a.0], &g / self.value(*a)),
                Op::Square(a) => accumulate(&mut grads[a.0], &g * &(self.value(*a) * 2.0)),
                Op::Clamp(a, lo, hi) => {
                    let mut d = g.clone();
                    ndarray::Zip::from(&mut d)
                        .and(self.value(*a))
                        .for_each(|d, &x| {
                            if x < *lo || x > *hi {
                                *d = 0.0;
                            }
                        });
                    accumulate(&mut grads[a.0], d);
                }
                Op::Softmax(a) => {
                    let y = self.value(Var(i));
                    let dot = (&g * y).sum_axis(Axis(1)).insert_axis(Axis(1));
                    let d = y * &(&g - &dot);
                    accumulate(&mut grads[a.0], d);
                }
                Op::Concat(a, b) => {
                    let ca = self.shape(*a).1;
                    accumulate(&mut grads[a.0], g.slice(s![.., ..ca]).to_owned());
                    accumulate(&mut grads[b.0], g.slice(s![.., ca..]).to_owned());
                }
                Op::ColumnScale(a, w, k) => {
                    let col = self.value(*w).slice(s![.., *k..*k + 1]).to_owned();
                    accumulate(&mut grads[a.0], &g * &col);
                    let dcol = (&g * self.value(*a)).sum_axis(Axis(1));
                    let mut dw = Array2::zeros(self.shape(*w));
                    dw.column_mut(*k).assign(&dcol);
                    accumulate(&mut grads[w.0], dw);
                }
                Op::SumAll(a) => {
                    let d = Array2::from_elem(self.shape(*a), g[[0, 0]]);
                    accumulate(&mut grads[a.0], d);
                }
            }
            grads[i] = Some(g);
        }
        Ok(Gradients {
            nodes: grads,
            params,
        })
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
    match slot {
        Some(acc) => *acc += &g,
        None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn affine_with_identity_is_identity() {
        let mut g = Graph::detached();
        let x = g.input(array![[1.0, -2.0, 3.0]]);
        let w = g.input(Array2::eye(3));
        let b = g.input(Array2::zeros((1, 3)));
        let y = g.affine(x, w, b).unwrap();
        assert_eq!(g.value(y), &array![[1.0, -2.0, 3.0]]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut g = Graph::detached();
        let x = g.input(array![[1.0, 2.0, 3.0, -40.0], [500.0, 0.0, -3.0, 2.0]]);
        let y = g.softmax(x).unwrap();
        for row in g.value(y).rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn elu_negative_one() {
        let mut g = Graph::detached();
        let x = g.row(&[-1.0, 2.0]);
        let y = g.elu(x).unwrap();
        assert!((g.value(y)[[0, 0]] - (-0.632_120_558_828_557_7)).abs() < 1e-15);
        assert_eq!(g.value(y)[[0, 1]], 2.0);
    }

    #[test]
    fn shape_errors() {
        let mut g = Graph::detached();
        let a = g.input(Array2::zeros((2, 3)));
        let b = g.input(Array2::zeros((3, 2)));
        assert!(matches!(g.add(a, b), Err(TensorError::Shape { .. })));
        let bias = g.input(Array2::zeros((1, 3)));
        assert!(g.affine(a, a, bias).is_err());
        assert!(g.concat(a, b).is_err());
    }

    #[test]
    fn sum_of_squares_gradient() {
        let mut g = Graph::detached();
        let x = g.row(&[1.0, -2.0, 0.5]);
        let sq = g.square(x).unwrap();
        let l = g.sum_all(sq).unwrap();
        let gr = g.backward(l).unwrap();
        assert_eq!(gr.wrt(x).unwrap(), &array![[2.0, -4.0, 1.0]]);
    }

    #[test]
    fn zero_times_anything_has_zero_gradient() {
        let mut g = Graph::detached();
        let x = g.row(&[1.0, -2.0, 0.5]);
        let e = g.exp(x).unwrap();
        let s = g.sum_all(e).unwrap();
        let l = g.mul_scalar(s, 0.0).unwrap();
        let gr = g.backward(l).unwrap();
        assert!(gr.wrt(x).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut g = Graph::detached();
        let x = g.row(&[1.0, 2.0]);
        assert!(matches!(g.backward(x), Err(TensorError::NonScalarLoss((1, 2)))));
    }

    #[test]
    fn repeated_backward_accumulates_in_store() {
        let mut store = ParamStore::new();
        let id = store.add("w", array![[1.5, -1.0]]).unwrap();
        for _ in 0..2 {
            let grads = {
                let mut g = Graph::new(&store);
                let w = g.param(id);
                let sq = g.square(w).unwrap();
                let l = g.sum_all(sq).unwrap();
                g.backward(l).unwrap()
            };
            store.accumulate(&grads);
        }
        assert_eq!(store.value(id).grad.as_ref().unwrap(), &array![[6.0, -4.0]]);
        store.zero_grad();
        assert!(store.value(id).grad.is_none());
    }

    #[test]
    fn nan_is_caught_in_debug_builds() {
        if !cfg!(debug_assertions) {
            return;
        }
        let mut g = Graph::detached();
        let x = g.row(&[1000.0]);
        assert!(matches!(g.exp(x), Err(TensorError::NonFinite("exp"))));
    }
}
