//! The verification harness as a library: parse a manifold spec from a
//! string and run commands against it, the same machinery the `galilei`
//! binary exposes on files.
//!
//! ```text
//! cargo run --example verify_from_spec
//! ```

use galilei::cli::{parse_spec, run, CommandKind, RunOptions};

const SPEC: &str = "\
[manifold]
dim = 4
coords = t, x, y, z

[tau]
t = 1

[h]
x, x = 1
y, y = 1
z, z = 1

[observer]
t = 1

[data.omega]
t, x = 2*x
t, y = z
t, z = y

[boost]
x = 0.5

[sampling]
points = 40
seed = 7
";

fn main() {
    let spec = parse_spec(SPEC, "<embedded>").unwrap();

    for command in [
        CommandKind::Validate,
        CommandKind::Build,
        CommandKind::Roundtrip,
        CommandKind::ThreeForms,
        CommandKind::Milne,
    ] {
        let report = run(command, &spec, "<embedded>", &RunOptions::default()).unwrap();
        println!(
            "{:<12} all_passed = {}",
            report.command, report.all_passed
        );
        for check in &report.checks {
            println!("    {:<40} {:>11.3e}  {}", check.name, check.value, check.passed);
        }
    }
}
