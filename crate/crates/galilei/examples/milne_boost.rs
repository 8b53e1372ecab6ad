//! Observer changes: the free-field representation of a connection is
//! gauge-dependent, the connection itself is not.
//!
//! ```text
//! cargo run --example milne_boost
//! ```

use galilei::connection::build_connection;
use galilei::milne::{boost, transform_data, verify_milne_invariance};
use galilei::sample::{max_component_scan, SamplePlan};
use galilei::synth::Synth;

fn main() {
    let mut synth = Synth::new(19);
    let dim = 3;
    let (structure, observer) = synth.structure(dim);
    let data = synth.connection_data(&structure, &observer, 0.4);
    let points = SamplePlan::default().points(dim);

    // A position-dependent spacelike boost field.
    let shift = synth.spacelike_field(&structure, &observer, 0.5);
    let boosted = boost(&structure, &observer, &shift, &points).unwrap();
    println!(
        "boosted observer stays unit timelike: residual {:.3e}",
        boosted.validate(&structure, &points).value
    );

    // The representation changes under the boost...
    let connection = build_connection(&structure, &observer, &data, &points).unwrap();
    let transformed = transform_data(&connection, &structure, &boosted).unwrap();
    let omega_shift = transformed
        .newton_coriolis
        .sub(&data.newton_coriolis)
        .unwrap();
    println!(
        "Newton-Coriolis form shifts by up to {:.3}",
        max_component_scan(&omega_shift, &points).max_residual
    );

    // ...but rebuilding in the new gauge reproduces the same connection.
    let scan =
        verify_milne_invariance(&structure, &observer, &boosted, &data, &points).unwrap();
    println!(
        "rebuilt connection across the boost: residual {:.3e} over {} points",
        scan.max_residual, scan.points_used
    );

    // Boosting by the observer itself is rejected: it is not spacelike.
    match boost(&structure, &observer, observer.velocity(), &points) {
        Err(e) => println!("boost by a timelike field: {e}"),
        Ok(_) => unreachable!(),
    }
}
