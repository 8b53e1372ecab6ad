//! Dense multi-index tensor fields over a chart.
//!
//! A [`TensorField`] is a `dim^rank` array of [`ScalarExpr`] components
//! together with a variance signature (upper/lower per slot). Storage is
//! dense and row-major; at desk scale (`dim <= 8`) there is no reason for
//! anything cleverer. The differentiation slot of [`TensorField::partial_derivative`]
//! is always *prepended*: the first lower index is the form index.

use thiserror::Error;

use crate::expr::{DiffCache, EvalError, Evaluator, ScalarExpr};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variance {
    Up,
    Down,
}

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("chart dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("signature mismatch")]
    SignatureMismatch,
    #[error("slot {slot} out of range for rank {rank}")]
    SlotOutOfRange { slot: usize, rank: usize },
    #[error("slot {slot} has the wrong variance for this operation")]
    VarianceMismatch { slot: usize },
    #[error("expected {expected} components, got {got}")]
    ComponentCount { expected: usize, got: usize },
    #[error("expected a rank-{expected} field, got rank {got}")]
    WrongRank { expected: usize, got: usize },
}

/// Multi-index array of scalar expressions with a variance signature.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    dim: usize,
    signature: Vec<Variance>,
    components: Vec<ScalarExpr>,
}

/// Row-major linear index of a multi-index.
pub fn linear_index(dim: usize, indices: &[usize]) -> usize {
    indices.iter().fold(0, |acc, &i| {
        debug_assert!(i < dim);
        acc * dim + i
    })
}

/// Calls `f` with every multi-index in `[0,dim)^rank`, row-major order.
pub fn for_each_index(dim: usize, rank: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; rank];
    loop {
        f(&idx);
        let mut slot = rank;
        loop {
            if slot == 0 {
                return;
            }
            slot -= 1;
            idx[slot] += 1;
            if idx[slot] < dim {
                break;
            }
            idx[slot] = 0;
        }
    }
}

impl TensorField {
    /// Builds a field componentwise from a closure over multi-indices.
    pub fn from_fn(
        dim: usize,
        signature: &[Variance],
        mut f: impl FnMut(&[usize]) -> ScalarExpr,
    ) -> Self {
        let mut components = Vec::with_capacity(dim.pow(signature.len() as u32));
        for_each_index(dim, signature.len(), |idx| components.push(f(idx)));
        TensorField {
            dim,
            signature: signature.to_vec(),
            components,
        }
    }

    pub fn zeros(dim: usize, signature: &[Variance]) -> Self {
        Self::from_fn(dim, signature, |_| ScalarExpr::zero(dim))
    }

    /// Rank-0 field holding a single scalar.
    pub fn scalar(expr: ScalarExpr) -> Self {
        TensorField {
            dim: expr.dim(),
            signature: Vec::new(),
            components: vec![expr],
        }
    }

    pub fn from_components(
        dim: usize,
        signature: &[Variance],
        components: Vec<ScalarExpr>,
    ) -> Result<Self, TensorError> {
        let expected = dim.pow(signature.len() as u32);
        if components.len() != expected {
            return Err(TensorError::ComponentCount {
                expected,
                got: components.len(),
            });
        }
        Ok(TensorField {
            dim,
            signature: signature.to_vec(),
            components,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.signature.len()
    }

    pub fn signature(&self) -> &[Variance] {
        &self.signature
    }

    pub fn components(&self) -> &[ScalarExpr] {
        &self.components
    }

    pub fn component(&self, indices: &[usize]) -> &ScalarExpr {
        assert_eq!(indices.len(), self.rank(), "index rank mismatch");
        &self.components[linear_index(self.dim, indices)]
    }

    /// The single component of a rank-0 field.
    pub fn scalar_component(&self) -> &ScalarExpr {
        assert_eq!(self.rank(), 0, "not a rank-0 field");
        &self.components[0]
    }

    pub fn map(&self, f: impl FnMut(&ScalarExpr) -> ScalarExpr) -> Self {
        TensorField {
            dim: self.dim,
            signature: self.signature.clone(),
            components: self.components.iter().map(f).collect(),
        }
    }

    fn check_same_shape(&self, other: &Self) -> Result<(), TensorError> {
        if self.dim != other.dim {
            return Err(TensorError::DimMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        if self.signature != other.signature {
            return Err(TensorError::SignatureMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, TensorError> {
        self.check_same_shape(other)?;
        Ok(TensorField {
            dim: self.dim,
            signature: self.signature.clone(),
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.add(b))
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, TensorError> {
        self.check_same_shape(other)?;
        Ok(TensorField {
            dim: self.dim,
            signature: self.signature.clone(),
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.sub(b))
                .collect(),
        })
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|c| c.scale(factor))
    }

    /// Tensor product; the signature is the concatenation of both signatures.
    pub fn tensor_product(&self, other: &Self) -> Result<Self, TensorError> {
        if self.dim != other.dim {
            return Err(TensorError::DimMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let mut signature = self.signature.clone();
        signature.extend_from_slice(&other.signature);
        let ra = self.rank();
        Ok(TensorField::from_fn(self.dim, &signature, |idx| {
            self.component(&idx[..ra]).mul(other.component(&idx[ra..]))
        }))
    }

    /// Einstein contraction of an upper slot against a lower slot.
    pub fn contract(&self, slot_up: usize, slot_down: usize) -> Result<Self, TensorError> {
        let rank = self.rank();
        for slot in [slot_up, slot_down] {
            if slot >= rank {
                return Err(TensorError::SlotOutOfRange { slot, rank });
            }
        }
        if slot_up == slot_down {
            return Err(TensorError::SlotOutOfRange {
                slot: slot_down,
                rank,
            });
        }
        if self.signature[slot_up] != Variance::Up {
            return Err(TensorError::VarianceMismatch { slot: slot_up });
        }
        if self.signature[slot_down] != Variance::Down {
            return Err(TensorError::VarianceMismatch { slot: slot_down });
        }
        let signature: Vec<Variance> = self
            .signature
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != slot_up && *i != slot_down)
            .map(|(_, v)| *v)
            .collect();
        let dim = self.dim;
        Ok(TensorField::from_fn(dim, &signature, |idx| {
            let mut full = vec![0usize; rank];
            let mut src = idx.iter();
            for (slot, target) in full.iter_mut().enumerate() {
                if slot != slot_up && slot != slot_down {
                    *target = *src.next().unwrap();
                }
            }
            let mut acc = ScalarExpr::zero(dim);
            for k in 0..dim {
                full[slot_up] = k;
                full[slot_down] = k;
                acc = acc.add(self.component(&full));
            }
            acc
        }))
    }

    /// Exact partial derivative; the new lower slot is prepended.
    pub fn partial_derivative(&self) -> Self {
        let mut signature = vec![Variance::Down];
        signature.extend_from_slice(&self.signature);
        let mut cache = DiffCache::new();
        TensorField::from_fn(self.dim, &signature, |idx| {
            cache.derive(self.component(&idx[1..]), idx[0])
        })
    }

    fn pair_sym(&self, slot_a: usize, slot_b: usize, sign: f64) -> Result<Self, TensorError> {
        let rank = self.rank();
        for slot in [slot_a, slot_b] {
            if slot >= rank {
                return Err(TensorError::SlotOutOfRange { slot, rank });
            }
        }
        if slot_a == slot_b || self.signature[slot_a] != self.signature[slot_b] {
            return Err(TensorError::VarianceMismatch { slot: slot_b });
        }
        Ok(TensorField::from_fn(self.dim, &self.signature, |idx| {
            let mut swapped = idx.to_vec();
            swapped.swap(slot_a, slot_b);
            self.component(idx)
                .add(&self.component(&swapped).scale(sign))
                .scale(0.5)
        }))
    }

    /// Weight-1/2 symmetrization over a slot pair: `A_(ab) = (A_ab + A_ba)/2`.
    pub fn symmetrized(&self, slot_a: usize, slot_b: usize) -> Result<Self, TensorError> {
        self.pair_sym(slot_a, slot_b, 1.0)
    }

    /// Weight-1/2 antisymmetrization over a slot pair: `A_[ab] = (A_ab - A_ba)/2`.
    pub fn antisymmetrized(&self, slot_a: usize, slot_b: usize) -> Result<Self, TensorError> {
        self.pair_sym(slot_a, slot_b, -1.0)
    }

    /// Evaluates every component at a point, row-major.
    pub fn evaluate_at(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut evaluator = Evaluator::new(point, self.dim)?;
        self.evaluate_with(&mut evaluator)
    }

    /// Evaluates with a caller-provided (shared) per-point evaluator.
    pub fn evaluate_with(&self, evaluator: &mut Evaluator) -> Result<Vec<f64>, EvalError> {
        self.components.iter().map(|c| evaluator.eval(c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    use Variance::{Down, Up};

    fn dt(dim: usize) -> TensorField {
        TensorField::from_fn(dim, &[Down], |idx| {
            if idx[0] == 0 {
                ScalarExpr::one(dim)
            } else {
                ScalarExpr::zero(dim)
            }
        })
    }

    fn d_dt(dim: usize) -> TensorField {
        TensorField::from_fn(dim, &[Up], |idx| {
            if idx[0] == 0 {
                ScalarExpr::one(dim)
            } else {
                ScalarExpr::zero(dim)
            }
        })
    }

    #[test]
    fn tensor_product_of_clock_forms() {
        let tau = dt(2);
        let prod = tau.tensor_product(&tau).unwrap();
        assert_eq!(prod.signature(), &[Down, Down]);
        let vals = prod.evaluate_at(&[0.3, -0.7]).unwrap();
        assert_eq!(vals, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn tensor_product_shapes_and_mismatch() {
        let v = d_dt(2);
        let tau = dt(2);
        let vt = v.tensor_product(&tau).unwrap();
        assert_eq!(vt.signature(), &[Up, Down]);
        assert_eq!(vt.evaluate_at(&[0.0, 0.0]).unwrap()[0], 1.0);

        let rank3 = tau.tensor_product(&vt).unwrap();
        assert_eq!(rank3.rank(), 3);
        assert_eq!(rank3.components().len(), 8);

        let other_dim = dt(3);
        assert_eq!(
            tau.tensor_product(&other_dim).unwrap_err(),
            TensorError::DimMismatch { left: 2, right: 3 }
        );
    }

    #[test]
    fn contract_projector_trace() {
        // Flat spatial projector diag(0,1,1,1) in a (t,x,y,z) chart.
        let dim = 4;
        let p = TensorField::from_fn(dim, &[Up, Down], |idx| {
            if idx[0] == idx[1] && idx[0] != 0 {
                ScalarExpr::one(dim)
            } else {
                ScalarExpr::zero(dim)
            }
        });
        let trace = p.contract(0, 1).unwrap();
        assert_eq!(trace.rank(), 0);
        assert_eq!(trace.scalar_component().as_constant(), Some(3.0));
    }

    #[test]
    fn contract_unit_timelike_pairing() {
        let v = d_dt(3);
        let tau = dt(3);
        let pairing = v.tensor_product(&tau).unwrap().contract(0, 1).unwrap();
        assert_eq!(pairing.scalar_component().as_constant(), Some(1.0));
    }

    #[test]
    fn contract_variance_checks() {
        let tau = dt(2);
        let two_down = tau.tensor_product(&tau).unwrap();
        assert_eq!(
            two_down.contract(0, 1).unwrap_err(),
            TensorError::VarianceMismatch { slot: 0 }
        );
    }

    #[test]
    fn partial_derivative_basics() {
        let dim = 2;
        let constant = TensorField::from_fn(dim, &[Down], |_| ScalarExpr::constant(3.0, dim));
        let d = constant.partial_derivative();
        assert_eq!(d.signature(), &[Down, Down]);
        assert!(d.components().iter().all(|c| c.is_zero()));

        // tau = dt is closed: every derivative component vanishes.
        let d_tau = dt(dim).partial_derivative();
        assert!(d_tau.components().iter().all(|c| c.is_zero()));
    }

    #[test]
    fn partial_derivative_of_curved_metric_entry() {
        // h^{xx} = 1 + x^2 in a (t,x) chart; d_x h^{xx} = 2x.
        let dim = 2;
        let x = ScalarExpr::coord(1, dim);
        let h = TensorField::from_fn(dim, &[Up, Up], |idx| {
            if idx == [1, 1] {
                ScalarExpr::one(dim).add(&x.powi(2))
            } else {
                ScalarExpr::zero(dim)
            }
        });
        let dh = h.partial_derivative();
        let val = dh.component(&[1, 1, 1]).evaluate(&[0.0, 1.0]).unwrap();
        assert_eq!(val, 2.0);
    }

    #[test]
    fn antisymmetrize_symmetric_field_is_zero() {
        let dim = 2;
        let x = ScalarExpr::coord(1, dim);
        let sym = TensorField::from_fn(dim, &[Down, Down], |idx| {
            x.scale((idx[0] + idx[1]) as f64)
        });
        let anti = sym.antisymmetrized(0, 1).unwrap();
        for v in anti.evaluate_at(&[0.5, 2.0]).unwrap() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn bracket_convention_on_simple_two_form() {
        // A = x dt (x) dx: A_[tx] = x/2, A_[xt] = -x/2.
        let dim = 2;
        let x = ScalarExpr::coord(1, dim);
        let a = TensorField::from_fn(dim, &[Down, Down], |idx| {
            if idx == [0, 1] {
                x.clone()
            } else {
                ScalarExpr::zero(dim)
            }
        });
        let anti = a.antisymmetrized(0, 1).unwrap();
        let vals = anti.evaluate_at(&[0.0, 3.0]).unwrap();
        assert_eq!(vals, vec![0.0, 1.5, -1.5, 0.0]);
    }

    #[test]
    fn evaluate_at_flat_fields() {
        let p = [0.4, -1.2];
        assert_eq!(dt(2).evaluate_at(&p).unwrap(), vec![1.0, 0.0]);
        assert_eq!(d_dt(2).evaluate_at(&p).unwrap(), vec![1.0, 0.0]);
        let x = ScalarExpr::coord(1, 2);
        let f = TensorField::from_fn(2, &[Down], |idx| x.scale(idx[0] as f64 + 1.0));
        assert_eq!(f.evaluate_at(&p).unwrap(), vec![-1.2, -2.4]);
    }

    fn arb_component() -> impl Strategy<Value = ScalarExpr> {
        let dim = 2;
        prop_oneof![
            (-2.0..2.0f64).prop_map(move |c| ScalarExpr::constant(c, dim)),
            (0usize..dim).prop_map(move |i| ScalarExpr::coord(i, dim)),
            ((0usize..dim), -2.0..2.0f64)
                .prop_map(move |(i, c)| ScalarExpr::coord(i, dim).powi(2).scale(c)),
        ]
    }

    fn arb_rank2() -> impl Strategy<Value = TensorField> {
        prop::collection::vec(arb_component(), 4)
            .prop_map(|c| TensorField::from_components(2, &[Down, Down], c).unwrap())
    }

    fn arb_mixed() -> impl Strategy<Value = TensorField> {
        prop::collection::vec(arb_component(), 4)
            .prop_map(|c| TensorField::from_components(2, &[Up, Down], c).unwrap())
    }

    fn max_abs_diff(a: &TensorField, b: &TensorField, p: &[f64]) -> f64 {
        a.evaluate_at(p)
            .unwrap()
            .iter()
            .zip(b.evaluate_at(p).unwrap())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    proptest! {
        #[test]
        fn antisymmetrization_is_a_projector(a in arb_rank2(), p in prop::array::uniform2(-1.0..1.0f64)) {
            let once = a.antisymmetrized(0, 1).unwrap();
            let twice = once.antisymmetrized(0, 1).unwrap();
            prop_assert!(max_abs_diff(&once, &twice, &p) < 1e-12);
        }

        #[test]
        fn sym_plus_antisym_is_identity(a in arb_rank2(), p in prop::array::uniform2(-1.0..1.0f64)) {
            let recomposed = a
                .symmetrized(0, 1)
                .unwrap()
                .add(&a.antisymmetrized(0, 1).unwrap())
                .unwrap();
            prop_assert!(max_abs_diff(&a, &recomposed, &p) < 1e-12);
        }

        #[test]
        fn contraction_matches_matrix_composition(
            a in arb_mixed(),
            b in arb_mixed(),
            p in prop::array::uniform2(-1.0..1.0f64),
        ) {
            // contract(a (x) b, last slot of a, first slot of b) on rank-(1,1)
            // fields is matrix multiplication.
            let composed = a.tensor_product(&b).unwrap().contract(2, 1).unwrap();
            let av = a.evaluate_at(&p).unwrap();
            let bv = b.evaluate_at(&p).unwrap();
            let cv = composed.evaluate_at(&p).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let expect = av[i * 2] * bv[j] + av[i * 2 + 1] * bv[2 + j];
                    prop_assert!((cv[i * 2 + j] - expect).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn derivative_commutes_with_linear_combinations(
            a in arb_rank2(),
            b in arb_rank2(),
            s in -2.0..2.0f64,
            p in prop::array::uniform2(-1.0..1.0f64),
        ) {
            let lhs = a.add(&b.scale(s)).unwrap().partial_derivative();
            let rhs = a
                .partial_derivative()
                .add(&b.partial_derivative().scale(s))
                .unwrap();
            prop_assert!(max_abs_diff(&lhs, &rhs, &p) < 1e-12);
        }
    }
}
