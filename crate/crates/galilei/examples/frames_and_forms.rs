//! Galilei frames and the frame-level view of a connection: the local
//! connection form, Cartan's first structure equation, the frame
//! components of the non-metricities, and the split into Galilei-algebra
//! part and rest.
//!
//! ```text
//! cargo run --example frames_and_forms
//! ```

use galilei::frames::{
    cartan_torsion_checks, decompose_gal, frame_at_point, frame_newton_coriolis,
    frame_nonmetricity_checks, local_connection_form, GalileiFrame,
};
use galilei::sample::{max_component_scan, max_difference_scan, SamplePlan};
use galilei::synth::Synth;

fn main() {
    let mut synth = Synth::new(23);
    let dim = 3;
    let (structure, observer, legs) = synth.structure_with_frame(dim);
    let frame = GalileiFrame::from_fields(legs).unwrap();
    let points = SamplePlan::default().points(dim);

    println!("frame conditions:");
    for check in frame.validate(&structure, &points) {
        println!("  {:<28} residual {:.3e}", check.name, check.value);
    }

    let connection = synth.connection(dim, 0.4);
    let form = local_connection_form(&connection, &frame).unwrap();

    // Cartan's first structure equation reproduces the coordinate torsion.
    for check in cartan_torsion_checks(&connection, &structure, &frame, &form, &points).unwrap() {
        println!("{}: residual {:.3e}", check.name, check.value);
    }

    // The non-metricities sit in fixed blocks of the connection form.
    for check in
        frame_nonmetricity_checks(&connection, &structure, &frame, &form, &points).unwrap()
    {
        println!("{}: residual {:.3e}", check.name, check.value);
    }

    // Omega = delta_ab varpi^a ^ e^b against the coordinate computation.
    let frame_observer = frame.observer().unwrap();
    let coordinate_nc = connection
        .newton_coriolis(&structure, &frame_observer)
        .unwrap();
    let residual = max_difference_scan(
        &frame_newton_coriolis(&frame, &form),
        &coordinate_nc,
        &points,
    )
    .max_residual;
    println!("frame Newton-Coriolis vs coordinates: residual {residual:.3e}");

    // The rest of the algebra split is exactly the non-metric content; for
    // this random (incompatible) connection it is visibly nonzero.
    let (_, rest) = decompose_gal(&form);
    let mut size = 0.0f64;
    for a in 0..dim {
        for b in 0..dim {
            size = size.max(max_component_scan(rest.entry(a, b), &points).max_residual);
        }
    }
    println!("non-Galilei rest part of the connection form: magnitude {size:.3}");

    // Pointwise frames can also be synthesized from the structure alone.
    let p = vec![0.3, -0.6, 0.1];
    let pointwise = frame_at_point(&structure, &observer, &p).unwrap();
    println!("pointwise frame at {p:?}:");
    for (a, e) in pointwise.vectors.iter().enumerate() {
        println!("  e_{a} = {e:?}");
    }
}
