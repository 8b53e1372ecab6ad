//! Galilei structures and degenerate-metric index gymnastics: validation,
//! the spatial projector, and the covariant space metric of an observer.
//!
//! ```text
//! cargo run --example structure_basics
//! ```

use galilei::sample::SamplePlan;
use galilei::{GalileiStructure, Observer, ScalarExpr, TensorField, Variance};

use Variance::Up;

fn main() {
    // Flat 1+2 chart (t, x, y) with a curved space metric h^{xx} = 1 + x^2.
    let dim = 3;
    let x = ScalarExpr::coord(1, dim);
    let tau = TensorField::from_fn(dim, &[Variance::Down], |idx| {
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
    let structure = GalileiStructure::new(tau, h).unwrap();

    let points = SamplePlan::default().points(dim);
    println!("structure invariants at {} sample points:", points.len());
    for check in structure.validate(&points) {
        println!(
            "  {:<34} value {:>11.3e}  pass {}",
            check.name, check.value, check.passed
        );
    }

    // An observer drifting in x.
    let observer = Observer::new(TensorField::from_fn(dim, &[Up], |idx| match idx[0] {
        0 => ScalarExpr::one(dim),
        1 => ScalarExpr::constant(0.4, dim),
        _ => ScalarExpr::zero(dim),
    }))
    .unwrap();
    println!(
        "observer unit-timelike residual: {:.3e}",
        observer.validate(&structure, &points).value
    );

    // The spatial projector annihilates the observer and fixes space.
    let projector = structure.spatial_projector(&observer);
    let p = [0.2, -0.5, 0.8];
    println!("projector at {p:?}: {:?}", projector.evaluate_at(&p).unwrap());

    // The covariant space metric: lowering then raising projects with P.
    let hv = structure.covariant_space_metric(&observer).unwrap();
    println!("h_v at {p:?}: {:?}", hv.evaluate_at(&p).unwrap());

    let spacelike = TensorField::from_fn(dim, &[Up], |idx| {
        if idx[0] == 1 {
            ScalarExpr::coord(2, dim)
        } else {
            ScalarExpr::zero(dim)
        }
    });
    let roundtrip = structure
        .raise_index(&structure.lower_index(&spacelike, 0, &observer).unwrap(), 0)
        .unwrap();
    let (timelike_part, spacelike_part) = structure.split(&spacelike, &observer).unwrap();
    println!(
        "raise(lower(X)) at {p:?}: {:?} (X is spacelike, so X comes back)",
        roundtrip.evaluate_at(&p).unwrap()
    );
    println!(
        "split of X: timelike {:?}, spacelike {:?}",
        timelike_part.evaluate_at(&p).unwrap(),
        spacelike_part.evaluate_at(&p).unwrap()
    );
}
