//! Galilei structures, observers, and degenerate-metric index gymnastics.
//!
//! A Galilei structure on a chart of dimension `n+1` is a nowhere-vanishing
//! clock form `tau` together with a contravariant space metric `h` that is
//! positive semidefinite of rank `n` and annihilated by `tau`. The metric is
//! degenerate, so raising and lowering indices are not inverse to each
//! other; their composition is the spatial projector of the observer used
//! for lowering.

use thiserror::Error;

use crate::expr::ScalarExpr;
use crate::matrix;
use crate::sample::{max_component_scan, min_scan, scan, Check, ResidualScan};
use crate::tensor::{TensorField, TensorError, Variance};

/// General residual tolerance for structure invariants.
pub const TOL_STRUCTURE: f64 = 1e-10;
/// Threshold for the eigenvalue rank test (scale-robust, looser than the
/// residual tolerance).
pub const TOL_EIGEN_RANK: f64 = 1e-8;
/// Tolerance for the defining equations of the covariant space metric.
pub const TOL_SPACE_COMETRIC: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum StructureError {
    #[error("clock form must be a rank-1 lower-index field")]
    ClockShape,
    #[error("space metric must be a rank-2 upper-index field")]
    MetricShape,
    #[error("observer must be a rank-1 upper-index field")]
    ObserverShape,
    #[error("chart dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("chart dimension {dim} is too small: a Galilei manifold needs at least one spatial dimension")]
    ChartTooSmall { dim: usize },
    #[error("space metric plus observer square is symbolically singular; structure or observer is invalid")]
    Singular,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// A Galilei structure `(tau, h)` on a fixed chart.
#[derive(Debug, Clone)]
pub struct GalileiStructure {
    clock_form: TensorField,
    space_metric: TensorField,
}

impl GalileiStructure {
    pub fn new(clock_form: TensorField, space_metric: TensorField) -> Result<Self, StructureError> {
        if clock_form.signature() != [Variance::Down] {
            return Err(StructureError::ClockShape);
        }
        if space_metric.signature() != [Variance::Up, Variance::Up] {
            return Err(StructureError::MetricShape);
        }
        if clock_form.dim() != space_metric.dim() {
            return Err(StructureError::DimMismatch {
                left: clock_form.dim(),
                right: space_metric.dim(),
            });
        }
        if clock_form.dim() < 2 {
            return Err(StructureError::ChartTooSmall {
                dim: clock_form.dim(),
            });
        }
        Ok(GalileiStructure {
            clock_form,
            space_metric,
        })
    }

    /// Flat structure: `tau = dt`, `h` the identity on the spatial block.
    pub fn flat(dim: usize) -> Self {
        let tau = TensorField::from_fn(dim, &[Variance::Down], |idx| {
            if idx[0] == 0 {
                ScalarExpr::one(dim)
            } else {
                ScalarExpr::zero(dim)
            }
        });
        let h = TensorField::from_fn(dim, &[Variance::Up, Variance::Up], |idx| {
            if idx[0] == idx[1] && idx[0] != 0 {
                ScalarExpr::one(dim)
            } else {
                ScalarExpr::zero(dim)
            }
        });
        GalileiStructure::new(tau, h).expect("flat structure is well-formed")
    }

    pub fn dim(&self) -> usize {
        self.clock_form.dim()
    }

    /// Number of spatial dimensions `n = dim - 1`.
    pub fn spatial_dim(&self) -> usize {
        self.dim() - 1
    }

    pub fn clock_form(&self) -> &TensorField {
        &self.clock_form
    }

    pub fn space_metric(&self) -> &TensorField {
        &self.space_metric
    }

    /// Checks the defining invariants at the sampled points.
    pub fn validate(&self, points: &[Vec<f64>]) -> Vec<Check> {
        let dim = self.dim();
        let mut checks = Vec::new();

        checks.push(Check::above(
            "clock_form_nonvanishing",
            min_scan(points, |p| {
                Ok(self
                    .clock_form
                    .evaluate_at(p)?
                    .iter()
                    .fold(0.0f64, |acc, v| acc.max(v.abs())))
            }),
            TOL_STRUCTURE,
        ));

        let transposed = TensorField::from_fn(dim, self.space_metric.signature(), |idx| {
            self.space_metric.component(&[idx[1], idx[0]]).clone()
        });
        checks.push(Check::residual(
            "space_metric_symmetric",
            crate::sample::max_difference_scan(&self.space_metric, &transposed, points),
            TOL_STRUCTURE,
        ));

        let tau_h = TensorField::from_fn(dim, &[Variance::Up], |idx| {
            let mut acc = ScalarExpr::zero(dim);
            for mu in 0..dim {
                acc = acc.add(
                    &self
                        .clock_form
                        .component(&[mu])
                        .mul(self.space_metric.component(&[mu, idx[0]])),
                );
            }
            acc
        });
        checks.push(Check::residual(
            "clock_metric_orthogonal",
            max_component_scan(&tau_h, points),
            TOL_STRUCTURE,
        ));

        // Eigenvalue rank test: one eigenvalue vanishes, the other n stay
        // positive.
        let eigen = |p: &[f64]| -> Result<Vec<f64>, crate::expr::EvalError> {
            let values = self.space_metric.evaluate_at(p)?;
            let m = nalgebra::DMatrix::from_fn(dim, dim, |i, j| values[i * dim + j]);
            let sym = nalgebra::DMatrix::from_fn(dim, dim, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
            let mut eig: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
            eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
            Ok(eig)
        };
        checks.push(Check::residual(
            "space_metric_degenerate_direction",
            scan(points, |p| Ok(eigen(p)?[0].abs())),
            TOL_EIGEN_RANK,
        ));
        checks.push(Check::above(
            "space_metric_spatial_rank",
            min_scan(points, |p| Ok(eigen(p)?[1])),
            TOL_EIGEN_RANK,
        ));

        checks
    }

    /// Spatial projector `P = id - v (x) tau` of an observer.
    pub fn spatial_projector(&self, observer: &Observer) -> TensorField {
        let dim = self.dim();
        let v = &observer.velocity;
        TensorField::from_fn(dim, &[Variance::Up, Variance::Down], |idx| {
            let delta = if idx[0] == idx[1] {
                ScalarExpr::one(dim)
            } else {
                ScalarExpr::zero(dim)
            };
            delta.sub(&v.component(&[idx[0]]).mul(self.clock_form.component(&[idx[1]])))
        })
    }

    /// The covariant space metric of an observer: the unique symmetric
    /// 2-tensor with `h_v . v = 0` and `h_v . h = P`.
    ///
    /// Computed via the closed form `(h + v (x) v)^{-1} - tau (x) tau`, kept
    /// symbolic so downstream derivatives stay exact; the defining equations
    /// are verified by tests rather than trusted.
    pub fn covariant_space_metric(&self, observer: &Observer) -> Result<TensorField, StructureError> {
        let dim = self.dim();
        let v = &observer.velocity;
        let mut augmented = vec![vec![ScalarExpr::zero(dim); dim]; dim];
        for (i, row) in augmented.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = self
                    .space_metric
                    .component(&[i, j])
                    .add(&v.component(&[i]).mul(v.component(&[j])));
            }
        }
        let (inverse, det) = matrix::inverse(&augmented);
        if det.is_zero() {
            return Err(StructureError::Singular);
        }
        Ok(TensorField::from_fn(
            dim,
            &[Variance::Down, Variance::Down],
            |idx| {
                inverse[idx[0]][idx[1]].sub(
                    &self
                        .clock_form
                        .component(&[idx[0]])
                        .mul(self.clock_form.component(&[idx[1]])),
                )
            },
        ))
    }

    /// Raises a lower slot by contraction with `h`.
    pub fn raise_index(&self, field: &TensorField, slot: usize) -> Result<TensorField, StructureError> {
        let rank = field.rank();
        if slot >= rank {
            return Err(TensorError::SlotOutOfRange { slot, rank }.into());
        }
        if field.signature()[slot] != Variance::Down {
            return Err(TensorError::VarianceMismatch { slot }.into());
        }
        if field.dim() != self.dim() {
            return Err(StructureError::DimMismatch {
                left: field.dim(),
                right: self.dim(),
            });
        }
        let dim = self.dim();
        let mut signature = field.signature().to_vec();
        signature[slot] = Variance::Up;
        Ok(TensorField::from_fn(dim, &signature, |idx| {
            let mut source = idx.to_vec();
            let mut acc = ScalarExpr::zero(dim);
            for sigma in 0..dim {
                source[slot] = sigma;
                acc = acc.add(
                    &self
                        .space_metric
                        .component(&[idx[slot], sigma])
                        .mul(field.component(&source)),
                );
            }
            acc
        }))
    }

    /// Lowers an upper slot by contraction with the covariant space metric
    /// of `observer`. Raising after lowering (or vice versa) projects with
    /// `P`, not the identity.
    pub fn lower_index(
        &self,
        field: &TensorField,
        slot: usize,
        observer: &Observer,
    ) -> Result<TensorField, StructureError> {
        let hv = self.covariant_space_metric(observer)?;
        lower_index_with(field, slot, &hv)
    }

    /// Splits a rank-1 field into timelike and spacelike parts with respect
    /// to an observer. The parts sum to the input.
    pub fn split(
        &self,
        field: &TensorField,
        observer: &Observer,
    ) -> Result<(TensorField, TensorField), StructureError> {
        if field.rank() != 1 {
            return Err(TensorError::WrongRank {
                expected: 1,
                got: field.rank(),
            }
            .into());
        }
        if field.dim() != self.dim() {
            return Err(StructureError::DimMismatch {
                left: field.dim(),
                right: self.dim(),
            });
        }
        let dim = self.dim();
        let v = &observer.velocity;
        let tau = &self.clock_form;
        match field.signature()[0] {
            Variance::Up => {
                // X = v tau(X) + P X
                let mut pairing = ScalarExpr::zero(dim);
                for mu in 0..dim {
                    pairing = pairing.add(&tau.component(&[mu]).mul(field.component(&[mu])));
                }
                let timelike = TensorField::from_fn(dim, &[Variance::Up], |idx| {
                    v.component(&[idx[0]]).mul(&pairing)
                });
                let spacelike = field.sub(&timelike)?;
                Ok((timelike, spacelike))
            }
            Variance::Down => {
                // alpha = tau alpha(v) + alpha . P
                let mut pairing = ScalarExpr::zero(dim);
                for mu in 0..dim {
                    pairing = pairing.add(&v.component(&[mu]).mul(field.component(&[mu])));
                }
                let timelike = TensorField::from_fn(dim, &[Variance::Down], |idx| {
                    tau.component(&[idx[0]]).mul(&pairing)
                });
                let spacelike = field.sub(&timelike)?;
                Ok((timelike, spacelike))
            }
        }
    }
}

/// Lowers a slot with an explicitly provided covariant space metric.
pub fn lower_index_with(
    field: &TensorField,
    slot: usize,
    space_cometric: &TensorField,
) -> Result<TensorField, StructureError> {
    let rank = field.rank();
    if slot >= rank {
        return Err(TensorError::SlotOutOfRange { slot, rank }.into());
    }
    if field.signature()[slot] != Variance::Up {
        return Err(TensorError::VarianceMismatch { slot }.into());
    }
    let dim = field.dim();
    let mut signature = field.signature().to_vec();
    signature[slot] = Variance::Down;
    Ok(TensorField::from_fn(dim, &signature, |idx| {
        let mut source = idx.to_vec();
        let mut acc = ScalarExpr::zero(dim);
        for sigma in 0..dim {
            source[slot] = sigma;
            acc = acc.add(
                &space_cometric
                    .component(&[idx[slot], sigma])
                    .mul(field.component(&source)),
            );
        }
        acc
    }))
}

/// A unit timelike vector field: `tau(v) = 1`.
#[derive(Debug, Clone)]
pub struct Observer {
    velocity: TensorField,
}

impl Observer {
    pub fn new(velocity: TensorField) -> Result<Self, StructureError> {
        if velocity.signature() != [Variance::Up] {
            return Err(StructureError::ObserverShape);
        }
        Ok(Observer { velocity })
    }

    /// The coordinate-time observer `d/dt`.
    pub fn coordinate_time(dim: usize) -> Self {
        Observer {
            velocity: TensorField::from_fn(dim, &[Variance::Up], |idx| {
                if idx[0] == 0 {
                    ScalarExpr::one(dim)
                } else {
                    ScalarExpr::zero(dim)
                }
            }),
        }
    }

    pub fn velocity(&self) -> &TensorField {
        &self.velocity
    }

    /// Residual of the unit-timelike condition `tau(v) = 1`.
    pub fn validate(&self, structure: &GalileiStructure, points: &[Vec<f64>]) -> Check {
        Check::residual(
            "observer_unit_timelike",
            unit_timelike_scan(structure, &self.velocity, points),
            TOL_STRUCTURE,
        )
    }
}

pub(crate) fn unit_timelike_scan(
    structure: &GalileiStructure,
    velocity: &TensorField,
    points: &[Vec<f64>],
) -> ResidualScan {
    let dim = structure.dim();
    let mut pairing = ScalarExpr::zero(dim);
    for mu in 0..dim {
        pairing = pairing.add(
            &structure
                .clock_form
                .component(&[mu])
                .mul(velocity.component(&[mu])),
        );
    }
    scan(points, |p| Ok((pairing.evaluate(p)? - 1.0).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::{all_passed, max_difference_scan, SamplePlan};

    use Variance::{Down, Up};

    fn points(dim: usize) -> Vec<Vec<f64>> {
        SamplePlan::default().points(dim)
    }

    fn boosted_observer(dim: usize, u: f64) -> Observer {
        Observer::new(TensorField::from_fn(dim, &[Up], |idx| match idx[0] {
            0 => ScalarExpr::one(dim),
            1 => ScalarExpr::constant(u, dim),
            _ => ScalarExpr::zero(dim),
        }))
        .unwrap()
    }

    /// Structure with h^{xx} = 1 + x^2, used across the tests as the
    /// standard curved example.
    fn curved_structure() -> GalileiStructure {
        let dim = 3;
        let x = ScalarExpr::coord(1, dim);
        let tau = TensorField::from_fn(dim, &[Down], |idx| {
            if idx[0] == 0 {
                ScalarExpr::one(dim)
            } else {
                ScalarExpr::zero(dim)
            }
        });
        let h = TensorField::from_fn(dim, &[Up, Up], |idx| match (idx[0], idx[1]) {
            (1, 1) => ScalarExpr::one(dim).add(&x.powi(2)),
            (2, 2) => ScalarExpr::one(dim),
            _ => ScalarExpr::zero(dim),
        });
        GalileiStructure::new(tau, h).unwrap()
    }

    #[test]
    fn flat_structure_validates() {
        let g = GalileiStructure::flat(4);
        let checks = g.validate(&points(4));
        assert!(all_passed(&checks), "{checks:?}");
        for c in &checks {
            if c.criterion == crate::sample::Criterion::BelowTolerance {
                assert_eq!(c.value, 0.0, "{}", c.name);
            }
        }
    }

    #[test]
    fn timelike_metric_component_fails_orthogonality() {
        let dim = 2;
        let tau = GalileiStructure::flat(dim).clock_form.clone();
        let h = TensorField::from_fn(dim, &[Up, Up], |idx| {
            if idx[0] == idx[1] {
                ScalarExpr::one(dim)
            } else {
                ScalarExpr::zero(dim)
            }
        });
        let g = GalileiStructure::new(tau, h).unwrap();
        let checks = g.validate(&points(dim));
        let orth = checks
            .iter()
            .find(|c| c.name == "clock_metric_orthogonal")
            .unwrap();
        assert!(!orth.passed);
    }

    #[test]
    fn negative_eigenvalue_fails_rank_test() {
        let dim = 3;
        let tau = GalileiStructure::flat(dim).clock_form.clone();
        let h = TensorField::from_fn(dim, &[Up, Up], |idx| match (idx[0], idx[1]) {
            (1, 1) => ScalarExpr::constant(-1.0, dim),
            (2, 2) => ScalarExpr::one(dim),
            _ => ScalarExpr::zero(dim),
        });
        let g = GalileiStructure::new(tau, h).unwrap();
        let checks = g.validate(&points(dim));
        assert!(!all_passed(&checks));
    }

    #[test]
    fn one_dimensional_chart_is_rejected() {
        let tau = TensorField::from_fn(1, &[Down], |_| ScalarExpr::one(1));
        let h = TensorField::zeros(1, &[Up, Up]);
        assert!(matches!(
            GalileiStructure::new(tau, h),
            Err(StructureError::ChartTooSmall { dim: 1 })
        ));
    }

    #[test]
    fn flat_projector_is_spatial_identity() {
        let g = GalileiStructure::flat(3);
        let v = Observer::coordinate_time(3);
        let p = g.spatial_projector(&v);
        let vals = p.evaluate_at(&[0.2, -0.4, 0.9]).unwrap();
        assert_eq!(vals, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn boosted_projector_components() {
        let g = GalileiStructure::flat(2);
        let v = boosted_observer(2, 0.7);
        let p = g.spatial_projector(&v);
        let vals = p.evaluate_at(&[0.0, 0.0]).unwrap();
        // rows (t, x): P^t_t = 0, P^t_x = 0, P^x_t = -u, P^x_x = 1
        assert_eq!(vals, vec![0.0, 0.0, -0.7, 1.0]);
    }

    #[test]
    fn projector_identities_on_curved_structure() {
        let g = curved_structure();
        let dim = g.dim();
        let v = boosted_observer(dim, 0.3);
        let p = g.spatial_projector(&v);
        let pts = points(dim);

        // P . P = P
        let pp = p.tensor_product(&p).unwrap().contract(2, 1).unwrap();
        assert!(max_difference_scan(&pp, &p, &pts).max_residual < 1e-12);

        // P v = 0 and tau . P = 0
        let pv = p.tensor_product(v.velocity()).unwrap().contract(2, 1).unwrap();
        assert!(crate::sample::max_component_scan(&pv, &pts).max_residual < 1e-12);
        let tau_p = g
            .clock_form()
            .tensor_product(&p)
            .unwrap()
            .contract(1, 0)
            .unwrap();
        assert!(crate::sample::max_component_scan(&tau_p, &pts).max_residual < 1e-12);

        // trace P = n
        let trace = p.contract(0, 1).unwrap();
        let scan = scan(&pts, |q| {
            Ok((trace.scalar_component().evaluate(q)? - g.spatial_dim() as f64).abs())
        });
        assert!(scan.max_residual < 1e-12);
    }

    #[test]
    fn flat_space_cometric() {
        let g = GalileiStructure::flat(3);
        let v = Observer::coordinate_time(3);
        let hv = g.covariant_space_metric(&v).unwrap();
        let vals = hv.evaluate_at(&[0.5, 1.0, -2.0]).unwrap();
        assert_eq!(vals, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn boosted_space_cometric_matches_hand_computation() {
        let g = GalileiStructure::flat(4);
        let u = 0.6;
        let v = boosted_observer(4, u);
        let hv = g.covariant_space_metric(&v).unwrap();
        let vals = hv.evaluate_at(&[0.0, 0.0, 0.0, 0.0]).unwrap();
        let expect = [
            [u * u, -u, 0.0, 0.0],
            [-u, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((vals[i * 4 + j] - expect[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn space_cometric_defining_equations() {
        let g = curved_structure();
        let dim = g.dim();
        let v = boosted_observer(dim, 0.4);
        let hv = g.covariant_space_metric(&v).unwrap();
        let pts = points(dim);

        let hv_v = hv.tensor_product(v.velocity()).unwrap().contract(2, 1).unwrap();
        assert!(crate::sample::max_component_scan(&hv_v, &pts).max_residual < TOL_SPACE_COMETRIC);

        let hv_h = hv.tensor_product(g.space_metric()).unwrap().contract(2, 1).unwrap();
        // hv_h has slots (mu lower, rho upper); P has (rho upper, mu lower)
        let p = g.spatial_projector(&v);
        let p_transposed = TensorField::from_fn(dim, &[Down, Up], |idx| {
            p.component(&[idx[1], idx[0]]).clone()
        });
        assert!(
            max_difference_scan(&hv_h, &p_transposed, &pts).max_residual < TOL_SPACE_COMETRIC
        );

        // Symmetry
        let transposed = TensorField::from_fn(dim, hv.signature(), |idx| {
            hv.component(&[idx[1], idx[0]]).clone()
        });
        assert!(max_difference_scan(&hv, &transposed, &pts).max_residual < 1e-12);
    }

    /// Independent oracle: solve the defining linear system of the covariant
    /// space metric pointwise by least squares and compare with the
    /// adjugate-based closed form.
    #[test]
    fn space_cometric_matches_least_squares_oracle() {
        let g = curved_structure();
        let dim = g.dim();
        let v = boosted_observer(dim, 0.25);
        let hv = g.covariant_space_metric(&v).unwrap();
        let p = g.spatial_projector(&v);

        for point in points(dim).iter().take(12) {
            let h_vals = g.space_metric().evaluate_at(point).unwrap();
            let v_vals = v.velocity().evaluate_at(point).unwrap();
            let p_vals = p.evaluate_at(point).unwrap();

            // Unknowns: s_{ij} for i <= j.
            let unknowns: Vec<(usize, usize)> = (0..dim)
                .flat_map(|i| (i..dim).map(move |j| (i, j)))
                .collect();
            let coeff = |mu: usize, nu: usize, ui: usize| -> f64 {
                let (i, j) = unknowns[ui];
                let mut c = 0.0;
                if (mu, nu) == (i, j) {
                    c += 1.0;
                }
                if (mu, nu) == (j, i) {
                    c += if i == j { 0.0 } else { 1.0 };
                }
                c
            };
            let rows = dim + dim * dim;
            let mut a = nalgebra::DMatrix::zeros(rows, unknowns.len());
            let mut b = nalgebra::DVector::zeros(rows);
            // X v = 0
            for mu in 0..dim {
                for ui in 0..unknowns.len() {
                    let mut acc = 0.0;
                    for nu in 0..dim {
                        acc += coeff(mu, nu, ui) * v_vals[nu];
                    }
                    a[(mu, ui)] = acc;
                }
            }
            // X h = P
            for mu in 0..dim {
                for rho in 0..dim {
                    let row = dim + mu * dim + rho;
                    for ui in 0..unknowns.len() {
                        let mut acc = 0.0;
                        for nu in 0..dim {
                            acc += coeff(mu, nu, ui) * h_vals[nu * dim + rho];
                        }
                        a[(row, ui)] = acc;
                    }
                    b[row] = p_vals[rho * dim + mu];
                }
            }
            let solution = a.svd(true, true).solve(&b, 1e-12).unwrap();
            let closed = hv.evaluate_at(point).unwrap();
            for (ui, &(i, j)) in unknowns.iter().enumerate() {
                assert!(
                    (solution[ui] - closed[i * dim + j]).abs() < TOL_SPACE_COMETRIC,
                    "entry ({i},{j}) disagrees: ls {} vs closed {}",
                    solution[ui],
                    closed[i * dim + j]
                );
            }
        }
    }

    #[test]
    fn raising_clock_form_gives_zero() {
        let g = curved_structure();
        let raised = g.raise_index(g.clock_form(), 0).unwrap();
        assert!(raised.components().iter().all(|c| c.is_zero()));
    }

    #[test]
    fn lowering_observer_gives_zero() {
        let g = curved_structure();
        let v = boosted_observer(g.dim(), 0.8);
        let lowered = g.lower_index(v.velocity(), 0, &v).unwrap();
        let scan = crate::sample::max_component_scan(&lowered, &points(g.dim()));
        assert!(scan.max_residual < 1e-12);
    }

    #[test]
    fn raise_after_lower_projects() {
        let g = curved_structure();
        let dim = g.dim();
        let v = boosted_observer(dim, 0.5);
        let x0 = ScalarExpr::coord(0, dim);
        let x1 = ScalarExpr::coord(1, dim);
        let field = TensorField::from_fn(dim, &[Up], |idx| match idx[0] {
            0 => x1.powi(2).add(&ScalarExpr::constant(0.4, dim)),
            1 => x0.mul(&x1),
            _ => ScalarExpr::constant(-1.3, dim),
        });
        let roundtrip = g
            .raise_index(&g.lower_index(&field, 0, &v).unwrap(), 0)
            .unwrap();
        let p = g.spatial_projector(&v);
        let projected = p.tensor_product(&field).unwrap().contract(2, 1).unwrap();
        let scan = max_difference_scan(&roundtrip, &projected, &points(dim));
        assert!(scan.max_residual < TOL_SPACE_COMETRIC);
    }

    #[test]
    fn split_reproduces_inputs() {
        let g = curved_structure();
        let dim = g.dim();
        let v = boosted_observer(dim, 0.2);
        let pts = points(dim);

        // X = v -> (v, 0)
        let (timelike, spacelike) = g.split(v.velocity(), &v).unwrap();
        assert!(max_difference_scan(&timelike, v.velocity(), &pts).max_residual < 1e-12);
        assert!(crate::sample::max_component_scan(&spacelike, &pts).max_residual < 1e-12);

        // Spacelike X -> (0, X)
        let spatial = TensorField::from_fn(dim, &[Up], |idx| {
            if idx[0] == 2 {
                ScalarExpr::coord(1, dim)
            } else {
                ScalarExpr::zero(dim)
            }
        });
        let (timelike, spacelike) = g.split(&spatial, &v).unwrap();
        assert!(crate::sample::max_component_scan(&timelike, &pts).max_residual < 1e-12);
        assert!(max_difference_scan(&spacelike, &spatial, &pts).max_residual < 1e-12);

        // Random covector: parts sum to the input.
        let alpha = TensorField::from_fn(dim, &[Down], |idx| {
            ScalarExpr::coord(idx[0], dim).add(&ScalarExpr::constant(0.3, dim))
        });
        let (timelike, spacelike) = g.split(&alpha, &v).unwrap();
        let sum = timelike.add(&spacelike).unwrap();
        assert!(max_difference_scan(&sum, &alpha, &pts).max_residual < 1e-12);
    }

    #[test]
    fn projector_composition_on_spacelike_inputs() {
        // P_v P_v' P_v = P_v on ker tau.
        let g = curved_structure();
        let dim = g.dim();
        let v1 = boosted_observer(dim, 0.3);
        let v2 = boosted_observer(dim, -0.6);
        let p1 = g.spatial_projector(&v1);
        let p2 = g.spatial_projector(&v2);
        let spacelike = TensorField::from_fn(dim, &[Up], |idx| match idx[0] {
            1 => ScalarExpr::coord(2, dim),
            2 => ScalarExpr::constant(0.9, dim),
            _ => ScalarExpr::zero(dim),
        });
        let apply = |p: &TensorField, x: &TensorField| {
            p.tensor_product(x).unwrap().contract(2, 1).unwrap()
        };
        let lhs = apply(&p1, &apply(&p2, &apply(&p1, &spacelike)));
        let rhs = apply(&p1, &spacelike);
        let scan = max_difference_scan(&lhs, &rhs, &points(dim));
        assert!(scan.max_residual < 1e-12);
    }

    #[test]
    fn observer_validation() {
        let g = GalileiStructure::flat(3);
        let good = Observer::coordinate_time(3);
        assert!(good.validate(&g, &points(3)).passed);

        let bad = Observer::new(TensorField::from_fn(3, &[Up], |idx| {
            ScalarExpr::constant(if idx[0] == 0 { 2.0 } else { 0.0 }, 3)
        }))
        .unwrap();
        assert!(!bad.validate(&g, &points(3)).passed);
    }
}
