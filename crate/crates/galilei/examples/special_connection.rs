//! The special Galilei connection of an observer: compatible with the
//! structure, vanishing Newton-Coriolis form, torsion `v (x) d tau`.
//!
//! Uses a non-closed clock form `tau = dt + x dy` so the torsion is
//! actually nonzero.
//!
//! ```text
//! cargo run --example special_connection
//! ```

use galilei::connection::exterior_derivative;
use galilei::sample::{max_component_scan, max_difference_scan, SamplePlan};
use galilei::{special_connection, GalileiStructure, Observer, ScalarExpr, TensorField, Variance};

use Variance::{Down, Up};

fn main() {
    let dim = 3;
    let x = ScalarExpr::coord(1, dim);

    // tau = dt + x dy and the matching degenerate metric, assembled from
    // the spacelike legs e_x = d/dx and e_y = d/dy - x d/dt.
    let tau = TensorField::from_fn(dim, &[Down], |idx| match idx[0] {
        0 => ScalarExpr::one(dim),
        2 => x.clone(),
        _ => ScalarExpr::zero(dim),
    });
    let h = TensorField::from_fn(dim, &[Up, Up], |idx| match (idx[0], idx[1]) {
        (0, 0) => x.powi(2),
        (0, 2) | (2, 0) => x.neg(),
        (1, 1) | (2, 2) => ScalarExpr::one(dim),
        _ => ScalarExpr::zero(dim),
    });
    let structure = GalileiStructure::new(tau, h).unwrap();
    let observer = Observer::coordinate_time(dim);
    let points = SamplePlan::default().points(dim);

    let special = special_connection(&structure, &observer).unwrap();

    let (clock_nm, space_nm) = special.nonmetricities(&structure).unwrap();
    println!(
        "nabla tau residual: {:.3e}",
        max_component_scan(&clock_nm, &points).max_residual
    );
    println!(
        "nabla h residual:   {:.3e}",
        max_component_scan(&space_nm, &points).max_residual
    );
    let nc = special.newton_coriolis(&structure, &observer).unwrap();
    println!(
        "Newton-Coriolis residual: {:.3e}",
        max_component_scan(&nc, &points).max_residual
    );

    // Torsion equals v (x) d tau; with d tau = dx ^ dy the only nonzero
    // components are T^t_{xy} = -T^t_{yx} = 1.
    let torsion = special.torsion();
    let dtau = exterior_derivative(structure.clock_form()).unwrap();
    let expected = TensorField::from_fn(dim, &[Up, Down, Down], |idx| {
        observer
            .velocity()
            .component(&[idx[0]])
            .mul(dtau.component(&[idx[1], idx[2]]))
    });
    println!(
        "torsion vs v (x) d tau residual: {:.3e}",
        max_difference_scan(&torsion, &expected, &points).max_residual
    );
    let p = [0.3, 0.7, -0.2];
    println!(
        "T^t_xy at {p:?} = {}",
        torsion.component(&[0, 1, 2]).evaluate(&p).unwrap()
    );
}
