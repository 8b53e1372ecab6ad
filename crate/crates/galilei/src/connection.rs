//! Affine connections on Galilei manifolds and their classification.
//!
//! A connection is a bare coefficient array `Gamma^rho_{mu nu}` (the first
//! lower index is the differentiation index). Relative to an observer `v`,
//! a connection is pinned down by four freely specifiable fields
//! ([`ConnectionData`]): the spatial part of its torsion, the clock
//! non-metricity `nabla tau`, the spatial part of the space-metric
//! non-metricity `nabla h`, and the Newton–Coriolis form. The remaining
//! (timelike) parts of torsion and non-metricity are *not* free: they are
//! recomputed from two identities whenever a connection is assembled, so
//! inconsistent inputs are impossible by construction.
//!
//! [`build_connection`] maps data to a connection, [`extract_data`] inverts
//! it; the two round trips are the content of the classification and are
//! what the acceptance suite checks.

use thiserror::Error;

use crate::expr::ScalarExpr;
use crate::sample::{max_component_scan, max_difference_scan, Check, ResidualScan};
use crate::structure::{lower_index_with, GalileiStructure, Observer, StructureError};
use crate::tensor::{TensorField, TensorError, Variance};

use Variance::{Down, Up};

/// Tolerance for single identities evaluated on one connection.
pub const TOL_IDENTITY: f64 = 1e-9;
/// Tolerance for build/extract round trips (two symbolic compositions).
pub const TOL_ROUNDTRIP: f64 = 1e-8;
/// Tolerance for the compatibility checks of the special connection.
pub const TOL_SPECIAL: f64 = 1e-9;
/// The special connection's torsion equals `v (x) d tau` exactly, up to
/// rounding.
pub const TOL_SPECIAL_TORSION: f64 = 1e-10;
/// Tolerance for the invariants of free connection data.
pub const TOL_DATA: f64 = 1e-10;
/// Tolerance for pairwise agreement of the three coefficient formulas.
pub const TOL_THREE_FORMS: f64 = 1e-9;
/// Tolerance for the two lemma checks and difference-tensor relations.
pub const TOL_LEMMA: f64 = 1e-9;
/// Tolerance for recomposition of the Newton–Coriolis decomposition.
pub const TOL_NC_DECOMP: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ConnectionError {
    #[error("connection data violates invariant '{name}' (residual {residual:e})")]
    InvalidData { name: String, residual: f64 },
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// An affine connection given by its coefficient array.
///
/// The coefficients are stored with slot order `(rho, mu, nu)` for
/// `Gamma^rho_{mu nu}`; they are not a tensor (they transform affinely),
/// so the array is wrapped rather than exposed as a [`TensorField`].
#[derive(Debug, Clone)]
pub struct Connection {
    coefficients: TensorField,
}

impl Connection {
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> ScalarExpr) -> Self {
        Connection {
            coefficients: TensorField::from_fn(dim, &[Up, Down, Down], |idx| {
                f(idx[0], idx[1], idx[2])
            }),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_fn(dim, |_, _, _| ScalarExpr::zero(dim))
    }

    pub fn dim(&self) -> usize {
        self.coefficients.dim()
    }

    pub fn coefficient(&self, rho: usize, mu: usize, nu: usize) -> &ScalarExpr {
        self.coefficients.component(&[rho, mu, nu])
    }

    /// The raw coefficient array. Shaped like a rank-(1,2) field for storage
    /// and evaluation purposes only.
    pub fn coefficient_field(&self) -> &TensorField {
        &self.coefficients
    }

    /// Worst componentwise coefficient difference over a point set.
    pub fn max_difference_scan(&self, other: &Connection, points: &[Vec<f64>]) -> ResidualScan {
        max_difference_scan(&self.coefficients, &other.coefficients, points)
    }

    /// Covariant derivative of a tensor field; the new lower slot is
    /// prepended. One `+Gamma` correction per upper slot, one `-Gamma`
    /// correction per lower slot.
    pub fn covariant_derivative(&self, field: &TensorField) -> Result<TensorField, TensorError> {
        let dim = self.dim();
        if field.dim() != dim {
            return Err(TensorError::DimMismatch {
                left: field.dim(),
                right: dim,
            });
        }
        let partial = field.partial_derivative();
        let mut signature = vec![Down];
        signature.extend_from_slice(field.signature());
        Ok(TensorField::from_fn(dim, &signature, |idx| {
            let mu = idx[0];
            let inner = &idx[1..];
            let mut acc = partial.component(idx).clone();
            let mut source = inner.to_vec();
            for (slot, variance) in field.signature().iter().enumerate() {
                let held = inner[slot];
                for sigma in 0..dim {
                    source[slot] = sigma;
                    let term = match variance {
                        Up => self.coefficient(held, mu, sigma).mul(field.component(&source)),
                        Down => self
                            .coefficient(sigma, mu, held)
                            .mul(field.component(&source))
                            .neg(),
                    };
                    acc = acc.add(&term);
                }
                source[slot] = held;
            }
            acc
        }))
    }

    /// Torsion `T^rho_{mu nu} = 2 Gamma^rho_{[mu nu]}`.
    pub fn torsion(&self) -> TensorField {
        let dim = self.dim();
        TensorField::from_fn(dim, &[Up, Down, Down], |idx| {
            self.coefficient(idx[0], idx[1], idx[2])
                .sub(self.coefficient(idx[0], idx[2], idx[1]))
        })
    }

    /// The non-metricities `(nabla tau, nabla h)` of the structure.
    pub fn nonmetricities(
        &self,
        structure: &GalileiStructure,
    ) -> Result<(TensorField, TensorField), TensorError> {
        let clock = self.covariant_derivative(structure.clock_form())?;
        let space = self.covariant_derivative(structure.space_metric())?;
        Ok((clock, space))
    }

    /// Newton–Coriolis form with respect to an observer:
    /// `Omega_{mu nu} = 2 (nabla_[mu v^rho) h_nu]rho`.
    pub fn newton_coriolis(
        &self,
        structure: &GalileiStructure,
        observer: &Observer,
    ) -> Result<TensorField, ConnectionError> {
        let dim = self.dim();
        let velocity_gradient = self.covariant_derivative(observer.velocity())?;
        let hv = structure.covariant_space_metric(observer)?;
        Ok(TensorField::from_fn(dim, &[Down, Down], |idx| {
            let (mu, nu) = (idx[0], idx[1]);
            let mut acc = ScalarExpr::zero(dim);
            for rho in 0..dim {
                acc = acc.add(
                    &velocity_gradient
                        .component(&[mu, rho])
                        .mul(hv.component(&[nu, rho])),
                );
                acc = acc.sub(
                    &velocity_gradient
                        .component(&[nu, rho])
                        .mul(hv.component(&[mu, rho])),
                );
            }
            acc
        }))
    }
}

/// The free fields representing a connection relative to an observer.
///
/// Expected shapes: `spatial_torsion` is `(Up, Down, Down)`, antisymmetric
/// in its last two slots and spacelike on the first; `clock_nonmetricity`
/// is `(Down, Down)` and unconstrained; `spatial_nonmetricity` is
/// `(Down, Up, Up)`, symmetric in its last two slots and spacelike on both;
/// `newton_coriolis` is an antisymmetric `(Down, Down)` two-form.
#[derive(Debug, Clone)]
pub struct ConnectionData {
    pub spatial_torsion: TensorField,
    pub clock_nonmetricity: TensorField,
    pub spatial_nonmetricity: TensorField,
    pub newton_coriolis: TensorField,
}

impl ConnectionData {
    pub fn zero(dim: usize) -> Self {
        ConnectionData {
            spatial_torsion: TensorField::zeros(dim, &[Up, Down, Down]),
            clock_nonmetricity: TensorField::zeros(dim, &[Down, Down]),
            spatial_nonmetricity: TensorField::zeros(dim, &[Down, Up, Up]),
            newton_coriolis: TensorField::zeros(dim, &[Down, Down]),
        }
    }

    pub fn dim(&self) -> usize {
        self.spatial_torsion.dim()
    }

    /// Numeric invariant checks: spacelikeness of the constrained slots and
    /// the declared (anti)symmetries.
    pub fn validate(
        &self,
        structure: &GalileiStructure,
        observer: &Observer,
        points: &[Vec<f64>],
    ) -> Vec<Check> {
        let dim = self.dim();
        let projector = structure.spatial_projector(observer);
        let tau = structure.clock_form();
        let mut checks = Vec::new();

        let projected = TensorField::from_fn(dim, &[Up, Down, Down], |idx| {
            let mut acc = ScalarExpr::zero(dim);
            for lambda in 0..dim {
                acc = acc.add(
                    &projector
                        .component(&[idx[0], lambda])
                        .mul(self.spatial_torsion.component(&[lambda, idx[1], idx[2]])),
                );
            }
            acc
        });
        checks.push(Check::residual(
            "data_spatial_torsion_spacelike",
            max_difference_scan(&projected, &self.spatial_torsion, points),
            TOL_DATA,
        ));

        let antisym_defect = self
            .spatial_torsion
            .add(&TensorField::from_fn(dim, &[Up, Down, Down], |idx| {
                self.spatial_torsion
                    .component(&[idx[0], idx[2], idx[1]])
                    .clone()
            }))
            .expect("same shape");
        checks.push(Check::residual(
            "data_spatial_torsion_antisymmetric",
            max_component_scan(&antisym_defect, points),
            TOL_DATA,
        ));

        for slot in [1usize, 2] {
            let contracted = TensorField::from_fn(dim, &[Down, Up], |idx| {
                let mut acc = ScalarExpr::zero(dim);
                for mu in 0..dim {
                    let source = if slot == 1 {
                        [idx[0], mu, idx[1]]
                    } else {
                        [idx[0], idx[1], mu]
                    };
                    acc = acc.add(
                        &tau.component(&[mu])
                            .mul(self.spatial_nonmetricity.component(&source)),
                    );
                }
                acc
            });
            checks.push(Check::residual(
                &format!("data_spatial_nonmetricity_spacelike_slot{slot}"),
                max_component_scan(&contracted, points),
                TOL_DATA,
            ));
        }

        let sym_defect = self
            .spatial_nonmetricity
            .sub(&TensorField::from_fn(dim, &[Down, Up, Up], |idx| {
                self.spatial_nonmetricity
                    .component(&[idx[0], idx[2], idx[1]])
                    .clone()
            }))
            .expect("same shape");
        checks.push(Check::residual(
            "data_spatial_nonmetricity_symmetric",
            max_component_scan(&sym_defect, points),
            TOL_DATA,
        ));

        let nc_defect = self
            .newton_coriolis
            .add(&TensorField::from_fn(dim, &[Down, Down], |idx| {
                self.newton_coriolis.component(&[idx[1], idx[0]]).clone()
            }))
            .expect("same shape");
        checks.push(Check::residual(
            "data_newton_coriolis_antisymmetric",
            max_component_scan(&nc_defect, points),
            TOL_DATA,
        ));

        checks
    }

    /// Worst componentwise difference against another data tuple.
    pub fn max_difference_scan(&self, other: &ConnectionData, points: &[Vec<f64>]) -> ResidualScan {
        max_difference_scan(&self.spatial_torsion, &other.spatial_torsion, points)
            .merge(max_difference_scan(
                &self.clock_nonmetricity,
                &other.clock_nonmetricity,
                points,
            ))
            .merge(max_difference_scan(
                &self.spatial_nonmetricity,
                &other.spatial_nonmetricity,
                points,
            ))
            .merge(max_difference_scan(
                &self.newton_coriolis,
                &other.newton_coriolis,
                points,
            ))
    }
}

/// Difference of two connections; unlike the coefficients themselves this
/// is a genuine tensor.
#[derive(Debug, Clone)]
pub struct DifferenceTensor {
    field: TensorField,
}

impl DifferenceTensor {
    pub fn field(&self) -> &TensorField {
        &self.field
    }
}

/// Exterior derivative of a one-form: `(d alpha)_{mu nu} = 2 d_[mu alpha_nu]`.
pub fn exterior_derivative(one_form: &TensorField) -> Result<TensorField, TensorError> {
    if one_form.signature() != [Down] {
        return Err(TensorError::WrongRank {
            expected: 1,
            got: one_form.rank(),
        });
    }
    let partial = one_form.partial_derivative();
    let dim = one_form.dim();
    Ok(TensorField::from_fn(dim, &[Down, Down], |idx| {
        partial
            .component(&[idx[0], idx[1]])
            .sub(partial.component(&[idx[1], idx[0]]))
    }))
}

/// The special Galilei connection of an observer:
/// `v^rho d_mu tau_nu + (1/2) h^{rho sigma} (d_mu h_{nu sigma} + d_nu h_{mu sigma} - d_sigma h_{mu nu})`.
///
/// It is compatible (`nabla tau = 0`, `nabla h = 0`), has vanishing
/// Newton–Coriolis form with respect to its observer, and torsion
/// `v (x) d tau`.
pub fn special_connection(
    structure: &GalileiStructure,
    observer: &Observer,
) -> Result<Connection, StructureError> {
    let dim = structure.dim();
    let hv = structure.covariant_space_metric(observer)?;
    let dhv = hv.partial_derivative();
    let dtau = structure.clock_form().partial_derivative();
    let h = structure.space_metric();
    let v = observer.velocity();
    Ok(Connection::from_fn(dim, |rho, mu, nu| {
        let mut acc = v.component(&[rho]).mul(dtau.component(&[mu, nu]));
        for sigma in 0..dim {
            let bracket = dhv
                .component(&[mu, nu, sigma])
                .add(dhv.component(&[nu, mu, sigma]))
                .sub(dhv.component(&[sigma, mu, nu]));
            acc = acc.add(&h.component(&[rho, sigma]).mul(&bracket).scale(0.5));
        }
        acc
    }))
}

/// Completes free data to the full torsion: the timelike part on the first
/// slot is `tau_rho T^rho_{mu nu} = (d tau)_{mu nu} - 2 Qhat_[mu nu]`.
pub fn complete_torsion(
    data: &ConnectionData,
    structure: &GalileiStructure,
    observer: &Observer,
) -> Result<TensorField, TensorError> {
    let dim = structure.dim();
    let dtau = exterior_derivative(structure.clock_form())?;
    let qhat = &data.clock_nonmetricity;
    let v = observer.velocity();
    Ok(TensorField::from_fn(dim, &[Up, Down, Down], |idx| {
        let (rho, mu, nu) = (idx[0], idx[1], idx[2]);
        let temporal = dtau
            .component(&[mu, nu])
            .sub(&qhat.component(&[mu, nu]).sub(qhat.component(&[nu, mu])));
        data.spatial_torsion
            .component(&[rho, mu, nu])
            .add(&v.component(&[rho]).mul(&temporal))
    }))
}

/// Completes free data to the full space-metric non-metricity: the timelike
/// parts on the rear slots come from
/// `tau_mu Q_rho^{mu nu} = -Qhat_{rho mu} h^{mu nu}`.
pub fn complete_space_nonmetricity(
    data: &ConnectionData,
    structure: &GalileiStructure,
    observer: &Observer,
) -> Result<TensorField, TensorError> {
    let dim = structure.dim();
    let h = structure.space_metric();
    let qhat = &data.clock_nonmetricity;
    let v = observer.velocity();
    // Qhat with its second slot raised: Qhat_rho^nu = Qhat_{rho sigma} h^{sigma nu}
    let qhat_raised = TensorField::from_fn(dim, &[Down, Up], |idx| {
        let mut acc = ScalarExpr::zero(dim);
        for sigma in 0..dim {
            acc = acc.add(
                &qhat
                    .component(&[idx[0], sigma])
                    .mul(h.component(&[sigma, idx[1]])),
            );
        }
        acc
    });
    Ok(TensorField::from_fn(dim, &[Down, Up, Up], |idx| {
        let (rho, mu, nu) = (idx[0], idx[1], idx[2]);
        data.spatial_nonmetricity
            .component(&[rho, mu, nu])
            .sub(&v.component(&[mu]).mul(qhat_raised.component(&[rho, nu])))
            .sub(&v.component(&[nu]).mul(qhat_raised.component(&[rho, mu])))
    }))
}

/// The three displayed forms of the classification formula.
enum CoefficientForm {
    One,
    Two,
    Three,
}

/// Shared assembly for the three classification formulas. `torsion` and
/// `space_nonmetricity` are the *full* fields (timelike parts included).
fn assemble(
    structure: &GalileiStructure,
    observer: &Observer,
    torsion: &TensorField,
    clock_nonmetricity: &TensorField,
    space_nonmetricity: &TensorField,
    newton_coriolis: &TensorField,
    form: CoefficientForm,
) -> Result<Connection, StructureError> {
    let dim = structure.dim();
    let h = structure.space_metric();
    let tau = structure.clock_form();
    let v = observer.velocity();
    let hv = structure.covariant_space_metric(observer)?;
    let projector = structure.spatial_projector(observer);
    let dtau = tau.partial_derivative();
    let dhv = hv.partial_derivative();

    // T_{lambda mu nu} = h_{lambda kappa} T^kappa_{mu nu}
    let torsion_low = lower_index_with(torsion, 0, &hv)?;
    // T_{mu nu}^rho = T_{mu nu sigma} h^{sigma rho}
    let torsion_low_raised = TensorField::from_fn(dim, &[Down, Down, Up], |idx| {
        let mut acc = ScalarExpr::zero(dim);
        for sigma in 0..dim {
            acc = acc.add(
                &torsion_low
                    .component(&[idx[0], idx[1], sigma])
                    .mul(h.component(&[sigma, idx[2]])),
            );
        }
        acc
    });

    // Omega_nu^rho = Omega_{nu sigma} h^{sigma rho}
    let nc_raised = TensorField::from_fn(dim, &[Down, Up], |idx| {
        let mut acc = ScalarExpr::zero(dim);
        for sigma in 0..dim {
            acc = acc.add(
                &newton_coriolis
                    .component(&[idx[0], sigma])
                    .mul(h.component(&[sigma, idx[1]])),
            );
        }
        acc
    });

    // Q_{rho mu nu}: both rear slots lowered with h_v.
    let q_low = lower_index_with(
        &lower_index_with(space_nonmetricity, 1, &hv)?,
        2,
        &hv,
    )?;
    // Q^rho_{mu nu} = h^{rho sigma} Q_{sigma mu nu}
    let q_raised_first = TensorField::from_fn(dim, &[Up, Down, Down], |idx| {
        let mut acc = ScalarExpr::zero(dim);
        for sigma in 0..dim {
            acc = acc.add(
                &h.component(&[idx[0], sigma])
                    .mul(q_low.component(&[sigma, idx[1], idx[2]])),
            );
        }
        acc
    });
    // Q_{mu nu}^lambda = Q_mu^{sigma lambda} h_{nu sigma}: only one of the
    // upper slots is lowered (which one is immaterial by the symmetry of Q).
    let q_one_low = TensorField::from_fn(dim, &[Down, Down, Up], |idx| {
        let mut acc = ScalarExpr::zero(dim);
        for sigma in 0..dim {
            acc = acc.add(
                &hv.component(&[idx[1], sigma])
                    .mul(space_nonmetricity.component(&[idx[0], sigma, idx[2]])),
            );
        }
        acc
    });

    Ok(Connection::from_fn(dim, |rho, mu, nu| {
        // Special-connection part; form 1 uses d_mu tau_nu, forms 2 and 3
        // its symmetrization.
        let clock_term = match form {
            CoefficientForm::One => dtau.component(&[mu, nu]).clone(),
            _ => dtau
                .component(&[mu, nu])
                .add(dtau.component(&[nu, mu]))
                .scale(0.5),
        };
        let mut acc = v.component(&[rho]).mul(&clock_term);
        for sigma in 0..dim {
            let bracket = dhv
                .component(&[mu, nu, sigma])
                .add(dhv.component(&[nu, mu, sigma]))
                .sub(dhv.component(&[sigma, mu, nu]));
            acc = acc.add(&h.component(&[rho, sigma]).mul(&bracket).scale(0.5));
        }

        // Torsion terms.
        match form {
            CoefficientForm::One => {
                for lambda in 0..dim {
                    acc = acc.add(
                        &projector
                            .component(&[rho, lambda])
                            .mul(torsion.component(&[lambda, mu, nu]))
                            .scale(0.5),
                    );
                }
            }
            _ => {
                acc = acc.add(&torsion.component(&[rho, mu, nu]).scale(0.5));
            }
        }
        acc = acc.sub(
            &torsion_low_raised
                .component(&[mu, nu, rho])
                .add(torsion_low_raised.component(&[nu, mu, rho]))
                .scale(0.5),
        );

        // Newton–Coriolis term: tau_(mu Omega_nu)^rho.
        acc = acc.add(
            &tau.component(&[mu])
                .mul(nc_raised.component(&[nu, rho]))
                .add(&tau.component(&[nu]).mul(nc_raised.component(&[mu, rho])))
                .scale(0.5),
        );

        // Non-metricity terms.
        acc = acc.sub(&q_raised_first.component(&[rho, mu, nu]).scale(0.5));
        let q_sym = q_one_low
            .component(&[mu, nu, rho])
            .add(q_one_low.component(&[nu, mu, rho]))
            .scale(0.5);
        match form {
            CoefficientForm::Three => {
                acc = acc.add(&q_sym);
            }
            _ => {
                // P^rho_lambda Q_(mu nu)^lambda
                let mut projected = ScalarExpr::zero(dim);
                for lambda in 0..dim {
                    let q_sym_l = q_one_low
                        .component(&[mu, nu, lambda])
                        .add(q_one_low.component(&[nu, mu, lambda]))
                        .scale(0.5);
                    projected = projected.add(&projector.component(&[rho, lambda]).mul(&q_sym_l));
                }
                acc = acc.add(&projected);
            }
        }

        // Clock non-metricity term.
        match form {
            CoefficientForm::One => {
                acc = acc.sub(&v.component(&[rho]).mul(clock_nonmetricity.component(&[mu, nu])));
            }
            CoefficientForm::Two => {
                acc = acc.sub(
                    &v.component(&[rho]).mul(
                        &clock_nonmetricity
                            .component(&[mu, nu])
                            .add(clock_nonmetricity.component(&[nu, mu]))
                            .scale(0.5),
                    ),
                );
            }
            CoefficientForm::Three => {
                // -v^rho v^sigma tau_(mu Qhat_nu)sigma
                let mut qhat_v_mu = ScalarExpr::zero(dim);
                let mut qhat_v_nu = ScalarExpr::zero(dim);
                for sigma in 0..dim {
                    qhat_v_mu = qhat_v_mu.add(
                        &v.component(&[sigma])
                            .mul(clock_nonmetricity.component(&[mu, sigma])),
                    );
                    qhat_v_nu = qhat_v_nu.add(
                        &v.component(&[sigma])
                            .mul(clock_nonmetricity.component(&[nu, sigma])),
                    );
                }
                let term = tau
                    .component(&[mu])
                    .mul(&qhat_v_nu)
                    .add(&tau.component(&[nu]).mul(&qhat_v_mu))
                    .scale(0.5);
                acc = acc.sub(&v.component(&[rho]).mul(&term));
            }
        }

        acc
    }))
}

/// Builds the connection determined by free data relative to an observer.
///
/// The data invariants are checked at the sample points first; violating
/// data is rejected before assembly. The timelike parts of torsion and
/// non-metricity are completed from the identities and never taken from the
/// caller.
pub fn build_connection(
    structure: &GalileiStructure,
    observer: &Observer,
    data: &ConnectionData,
    points: &[Vec<f64>],
) -> Result<Connection, ConnectionError> {
    for check in data.validate(structure, observer, points) {
        if !check.passed {
            return Err(ConnectionError::InvalidData {
                name: check.name,
                residual: check.value,
            });
        }
    }
    let torsion = complete_torsion(data, structure, observer)?;
    let space_nm = complete_space_nonmetricity(data, structure, observer)?;
    Ok(assemble(
        structure,
        observer,
        &torsion,
        &data.clock_nonmetricity,
        &space_nm,
        &data.newton_coriolis,
        CoefficientForm::One,
    )?)
}

/// Reads the free-field representation of a connection off relative to an
/// observer: spatial projections of torsion and `nabla h`, the full
/// `nabla tau`, and the Newton–Coriolis form.
pub fn extract_data(
    connection: &Connection,
    structure: &GalileiStructure,
    observer: &Observer,
) -> Result<ConnectionData, ConnectionError> {
    let dim = structure.dim();
    let projector = structure.spatial_projector(observer);
    let torsion = connection.torsion();
    let (clock_nm, space_nm) = connection.nonmetricities(structure)?;

    let spatial_torsion = TensorField::from_fn(dim, &[Up, Down, Down], |idx| {
        let mut acc = ScalarExpr::zero(dim);
        for lambda in 0..dim {
            acc = acc.add(
                &projector
                    .component(&[idx[0], lambda])
                    .mul(torsion.component(&[lambda, idx[1], idx[2]])),
            );
        }
        acc
    });

    let spatial_nonmetricity = TensorField::from_fn(dim, &[Down, Up, Up], |idx| {
        let mut acc = ScalarExpr::zero(dim);
        for kappa in 0..dim {
            for lambda in 0..dim {
                acc = acc.add(
                    &space_nm.component(&[idx[0], kappa, lambda]).mul(
                        &projector
                            .component(&[idx[1], kappa])
                            .mul(projector.component(&[idx[2], lambda])),
                    ),
                );
            }
        }
        acc
    });

    let newton_coriolis = connection.newton_coriolis(structure, observer)?;

    Ok(ConnectionData {
        spatial_torsion,
        clock_nonmetricity: clock_nm,
        spatial_nonmetricity,
        newton_coriolis,
    })
}

/// Residuals of the two identities every connection's `(T, Qhat, Q)` must
/// satisfy:
/// `tau_mu Q_rho^{mu nu} = -Qhat_{rho mu} h^{mu nu}` and
/// `tau_rho T^rho_{mu nu} = (d tau)_{mu nu} - 2 Qhat_[mu nu]`.
pub fn check_identities(
    torsion: &TensorField,
    clock_nonmetricity: &TensorField,
    space_nonmetricity: &TensorField,
    structure: &GalileiStructure,
    points: &[Vec<f64>],
) -> Result<Vec<Check>, TensorError> {
    let dim = structure.dim();
    let tau = structure.clock_form();
    let h = structure.space_metric();

    let first = TensorField::from_fn(dim, &[Down, Up], |idx| {
        let (rho, nu) = (idx[0], idx[1]);
        let mut acc = ScalarExpr::zero(dim);
        for mu in 0..dim {
            acc = acc.add(
                &tau.component(&[mu])
                    .mul(space_nonmetricity.component(&[rho, mu, nu])),
            );
            acc = acc.add(
                &clock_nonmetricity
                    .component(&[rho, mu])
                    .mul(h.component(&[mu, nu])),
            );
        }
        acc
    });

    let dtau = exterior_derivative(tau)?;
    let second = TensorField::from_fn(dim, &[Down, Down], |idx| {
        let (mu, nu) = (idx[0], idx[1]);
        let mut acc = ScalarExpr::zero(dim);
        for rho in 0..dim {
            acc = acc.add(&tau.component(&[rho]).mul(torsion.component(&[rho, mu, nu])));
        }
        acc.sub(dtau.component(&[mu, nu])).add(
            &clock_nonmetricity
                .component(&[mu, nu])
                .sub(clock_nonmetricity.component(&[nu, mu])),
        )
    });

    Ok(vec![
        Check::residual(
            "identity_nonmetricity_timelike",
            max_component_scan(&first, points),
            TOL_IDENTITY,
        ),
        Check::residual(
            "identity_torsion_temporal",
            max_component_scan(&second, points),
            TOL_IDENTITY,
        ),
    ])
}

/// The coefficient array computed from all three displayed forms of the
/// classification formula. On inputs satisfying the identities the three
/// agree pointwise; on violating inputs they legitimately differ.
pub fn coefficients_three_ways(
    structure: &GalileiStructure,
    observer: &Observer,
    torsion: &TensorField,
    clock_nonmetricity: &TensorField,
    space_nonmetricity: &TensorField,
    newton_coriolis: &TensorField,
) -> Result<(Connection, Connection, Connection), StructureError> {
    let one = assemble(
        structure,
        observer,
        torsion,
        clock_nonmetricity,
        space_nonmetricity,
        newton_coriolis,
        CoefficientForm::One,
    )?;
    let two = assemble(
        structure,
        observer,
        torsion,
        clock_nonmetricity,
        space_nonmetricity,
        newton_coriolis,
        CoefficientForm::Two,
    )?;
    let three = assemble(
        structure,
        observer,
        torsion,
        clock_nonmetricity,
        space_nonmetricity,
        newton_coriolis,
        CoefficientForm::Three,
    )?;
    Ok((one, two, three))
}

/// Residual of the temporal-torsion lemma
/// `tau_rho T^rho_{mu nu} = (d tau)_{mu nu} - 2 nabla_[mu tau_nu]`,
/// which holds for *every* affine connection.
pub fn lemma_temporal_torsion(
    connection: &Connection,
    structure: &GalileiStructure,
    points: &[Vec<f64>],
) -> Result<ResidualScan, TensorError> {
    let dim = structure.dim();
    let tau = structure.clock_form();
    let torsion = connection.torsion();
    let grad_tau = connection.covariant_derivative(tau)?;
    let dtau = exterior_derivative(tau)?;
    let defect = TensorField::from_fn(dim, &[Down, Down], |idx| {
        let (mu, nu) = (idx[0], idx[1]);
        let mut acc = ScalarExpr::zero(dim);
        for rho in 0..dim {
            acc = acc.add(&tau.component(&[rho]).mul(torsion.component(&[rho, mu, nu])));
        }
        acc.sub(dtau.component(&[mu, nu]))
            .add(&grad_tau.component(&[mu, nu]).sub(grad_tau.component(&[nu, mu])))
    });
    Ok(max_component_scan(&defect, points))
}

/// Residual of the covariant-space-metric derivative lemma
/// `nabla_rho h_{mu nu} = -2 Lambda_{rho(mu} tau_{nu)} - Q_{rho mu nu}`
/// with `Lambda_mu^nu = nabla_mu v^nu` and all lowering done with `h_v`.
pub fn lemma_covariant_space_metric(
    connection: &Connection,
    structure: &GalileiStructure,
    observer: &Observer,
    points: &[Vec<f64>],
) -> Result<ResidualScan, ConnectionError> {
    let dim = structure.dim();
    let tau = structure.clock_form();
    let hv = structure.covariant_space_metric(observer)?;
    let grad_hv = connection.covariant_derivative(&hv)?;
    let lambda = connection.covariant_derivative(observer.velocity())?;
    let lambda_low = lower_index_with(&lambda, 1, &hv)?;
    let (_, space_nm) = connection.nonmetricities(structure)?;
    let q_low = lower_index_with(&lower_index_with(&space_nm, 1, &hv)?, 2, &hv)?;
    let defect = TensorField::from_fn(dim, &[Down, Down, Down], |idx| {
        let (rho, mu, nu) = (idx[0], idx[1], idx[2]);
        grad_hv
            .component(&[rho, mu, nu])
            .add(
                &lambda_low
                    .component(&[rho, mu])
                    .mul(tau.component(&[nu]))
                    .add(&lambda_low.component(&[rho, nu]).mul(tau.component(&[mu]))),
            )
            .add(q_low.component(&[rho, mu, nu]))
    });
    Ok(max_component_scan(&defect, points))
}

/// The difference tensor `S^rho_{mu nu}` of two connections.
pub fn difference_tensor(
    left: &Connection,
    right: &Connection,
) -> Result<DifferenceTensor, TensorError> {
    Ok(DifferenceTensor {
        field: left
            .coefficient_field()
            .sub(right.coefficient_field())?,
    })
}

/// Residual of `(Q_left - Q_right)_mu^{rho sigma} = 2 S^{(rho}_mu^{sigma)}`,
/// the difference-tensor form of the space-metric non-metricity.
pub fn difference_nonmetricity_scan(
    left: &Connection,
    right: &Connection,
    structure: &GalileiStructure,
    points: &[Vec<f64>],
) -> Result<ResidualScan, TensorError> {
    let dim = structure.dim();
    let h = structure.space_metric();
    let s = difference_tensor(left, right)?;
    let (_, q_left) = left.nonmetricities(structure)?;
    let (_, q_right) = right.nonmetricities(structure)?;
    let defect = TensorField::from_fn(dim, &[Down, Up, Up], |idx| {
        let (mu, rho, sigma) = (idx[0], idx[1], idx[2]);
        let mut sym = ScalarExpr::zero(dim);
        for lambda in 0..dim {
            sym = sym.add(
                &s.field
                    .component(&[rho, mu, lambda])
                    .mul(h.component(&[lambda, sigma])),
            );
            sym = sym.add(
                &s.field
                    .component(&[sigma, mu, lambda])
                    .mul(h.component(&[lambda, rho])),
            );
        }
        q_left
            .component(&[mu, rho, sigma])
            .sub(q_right.component(&[mu, rho, sigma]))
            .sub(&sym)
    });
    Ok(max_component_scan(&defect, points))
}

/// Residual of `(Omega_left - Omega_right)_{mu rho} = 2 S_{[rho mu] nu} v^nu`,
/// the difference-tensor form of the Newton–Coriolis shift.
pub fn difference_newton_coriolis_scan(
    left: &Connection,
    right: &Connection,
    structure: &GalileiStructure,
    observer: &Observer,
    points: &[Vec<f64>],
) -> Result<ResidualScan, ConnectionError> {
    let dim = structure.dim();
    let hv = structure.covariant_space_metric(observer)?;
    let v = observer.velocity();
    let s = difference_tensor(left, right)?;
    let s_low = lower_index_with(&s.field, 0, &hv)?;
    let nc_left = left.newton_coriolis(structure, observer)?;
    let nc_right = right.newton_coriolis(structure, observer)?;
    let defect = TensorField::from_fn(dim, &[Down, Down], |idx| {
        let (mu, rho) = (idx[0], idx[1]);
        let mut rhs = ScalarExpr::zero(dim);
        for nu in 0..dim {
            rhs = rhs.add(
                &s_low
                    .component(&[rho, mu, nu])
                    .sub(s_low.component(&[mu, rho, nu]))
                    .mul(v.component(&[nu])),
            );
        }
        nc_left
            .component(&[mu, rho])
            .sub(nc_right.component(&[mu, rho]))
            .sub(&rhs)
    });
    Ok(max_component_scan(&defect, points))
}

/// Decomposes a Newton–Coriolis form as
/// `Omega_{mu nu} = 2 tau_[mu alpha_nu] + 2 omega_{mu nu}` with `alpha`
/// spacelike and `omega` spacelike-spacelike.
pub fn decompose_newton_coriolis(
    omega: &TensorField,
    structure: &GalileiStructure,
    observer: &Observer,
) -> Result<(TensorField, TensorField), TensorError> {
    let dim = structure.dim();
    if omega.signature() != [Down, Down] {
        return Err(TensorError::SignatureMismatch);
    }
    let tau = structure.clock_form();
    let v = observer.velocity();
    // alpha_nu = v^mu Omega_{mu nu}; automatically spacelike by antisymmetry.
    let acceleration = TensorField::from_fn(dim, &[Down], |idx| {
        let mut acc = ScalarExpr::zero(dim);
        for mu in 0..dim {
            acc = acc.add(&v.component(&[mu]).mul(omega.component(&[mu, idx[0]])));
        }
        acc
    });
    let vorticity = TensorField::from_fn(dim, &[Down, Down], |idx| {
        let (mu, nu) = (idx[0], idx[1]);
        let wedge = tau
            .component(&[mu])
            .mul(acceleration.component(&[nu]))
            .sub(&tau.component(&[nu]).mul(acceleration.component(&[mu])));
        omega.component(&[mu, nu]).sub(&wedge).scale(0.5)
    });
    Ok((acceleration, vorticity))
}

/// Recomposes the Newton–Coriolis form from its decomposition.
pub fn recompose_newton_coriolis(
    acceleration: &TensorField,
    vorticity: &TensorField,
    structure: &GalileiStructure,
) -> TensorField {
    let dim = structure.dim();
    let tau = structure.clock_form();
    TensorField::from_fn(dim, &[Down, Down], |idx| {
        let (mu, nu) = (idx[0], idx[1]);
        tau.component(&[mu])
            .mul(acceleration.component(&[nu]))
            .sub(&tau.component(&[nu]).mul(acceleration.component(&[mu])))
            .add(&vorticity.component(&[mu, nu]).scale(2.0))
    })
}
