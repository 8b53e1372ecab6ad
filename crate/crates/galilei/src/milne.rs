//! Observer changes (Milne boosts).
//!
//! A connection is observer-independent; only its free-field representation
//! changes under `v -> v + w` with spacelike `w`. There is no closed-form
//! transformation law here on purpose: the new representation is obtained by
//! re-extracting from the rebuilt connection, which doubles as an oracle for
//! the equivalence-class statement.

use thiserror::Error;

use crate::connection::{build_connection, extract_data, Connection, ConnectionData, ConnectionError};
use crate::sample::ResidualScan;
use crate::structure::{unit_timelike_scan, GalileiStructure, Observer, StructureError};
use crate::tensor::{TensorField, TensorError, Variance};

/// Tolerance for the spacelikeness of a boost field.
pub const TOL_BOOST: f64 = 1e-10;
/// Tolerance for observer-independence of rebuilt connections.
pub const TOL_MILNE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum MilneError {
    #[error("boost field is not spacelike: worst |tau(w)| = {residual:e}")]
    NotSpacelike { residual: f64 },
    #[error("boost field must be a rank-1 upper-index field")]
    BoostShape,
    #[error("boost field could not be evaluated at any sample point")]
    Unsampled,
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Connection(#[from] ConnectionError),
}

/// Boosts an observer by a spacelike field: `v' = v + w`.
///
/// Spacelikeness (`tau(w) = 0`) is checked at the sample points; the boosted
/// observer is then automatically unit timelike.
pub fn boost(
    structure: &GalileiStructure,
    observer: &Observer,
    boost_field: &TensorField,
    points: &[Vec<f64>],
) -> Result<Observer, MilneError> {
    if boost_field.signature() != [Variance::Up] {
        return Err(MilneError::BoostShape);
    }
    // tau(w) = 0 means the unit-timelike scan sits at exactly 1.
    let scan = unit_timelike_scan(structure, boost_field, points);
    if scan.points_used == 0 {
        return Err(MilneError::Unsampled);
    }
    let worst = pairing_residual(structure, boost_field, points)?;
    if worst > TOL_BOOST {
        return Err(MilneError::NotSpacelike { residual: worst });
    }
    let velocity = observer.velocity().add(boost_field)?;
    Ok(Observer::new(velocity)?)
}

fn pairing_residual(
    structure: &GalileiStructure,
    field: &TensorField,
    points: &[Vec<f64>],
) -> Result<f64, MilneError> {
    let dim = structure.dim();
    let tau = structure.clock_form();
    let mut pairing = crate::expr::ScalarExpr::zero(dim);
    for mu in 0..dim {
        pairing = pairing.add(&tau.component(&[mu]).mul(field.component(&[mu])));
    }
    let scan = crate::sample::scan(points, |p| pairing.evaluate(p).map(f64::abs));
    if scan.points_used == 0 {
        return Err(MilneError::Unsampled);
    }
    Ok(scan.max_residual)
}

/// The free-field representation of a fixed connection in a new gauge.
pub fn transform_data(
    connection: &Connection,
    structure: &GalileiStructure,
    new_observer: &Observer,
) -> Result<ConnectionData, ConnectionError> {
    extract_data(connection, structure, new_observer)
}

/// Builds the connection from `data` in the gauge of `observer`, re-extracts
/// its representation in the gauge of `boosted`, rebuilds, and reports the
/// worst coefficient difference. By the classification this must vanish.
pub fn verify_milne_invariance(
    structure: &GalileiStructure,
    observer: &Observer,
    boosted: &Observer,
    data: &ConnectionData,
    points: &[Vec<f64>],
) -> Result<ResidualScan, MilneError> {
    let original = build_connection(structure, observer, data, points)?;
    let transformed = transform_data(&original, structure, boosted)?;
    let rebuilt = build_connection(structure, boosted, &transformed, points)?;
    Ok(original.max_difference_scan(&rebuilt, points))
}
