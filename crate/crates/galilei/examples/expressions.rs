//! The symbolic scalar engine: parse chart expressions, evaluate them, and
//! take exact partial derivatives.
//!
//! ```text
//! cargo run --example expressions
//! ```

use galilei::parse_expression;

fn main() {
    let coords = ["t", "x", "y"];

    let field = parse_expression("x^2 + sin(t)*y - x/(1 + y^2)", &coords).unwrap();
    println!("field = {}", field.to_string_with(&coords));

    let point = [0.5, 1.0, -2.0];
    println!("value at {point:?} = {}", field.evaluate(&point).unwrap());

    for (index, name) in coords.iter().enumerate() {
        let derivative = field.differentiate(index);
        println!(
            "d/d{name} = {}  ->  {:.6} at the point",
            derivative.to_string_with(&coords),
            derivative.evaluate(&point).unwrap()
        );
    }

    // Derivatives are exact: compare against a central finite difference.
    let exact = field.differentiate(1).evaluate(&point).unwrap();
    let step = 1e-5;
    let mut hi = point;
    let mut lo = point;
    hi[1] += step;
    lo[1] -= step;
    let numeric =
        (field.evaluate(&hi).unwrap() - field.evaluate(&lo).unwrap()) / (2.0 * step);
    println!("exact d/dx {exact:.12} vs central difference {numeric:.12}");

    // Evaluation failures are reported, never NaN.
    let pole = parse_expression("x / t", &coords).unwrap();
    println!("x/t at t = 0: {:?}", pole.evaluate(&[0.0, 1.0, 0.0]));
}
