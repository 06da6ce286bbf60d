//! Small random programs with one or two counting loops over at most five
//! Int variables.

use rand::seq::SliceRandom;
use rand::Rng;

fn stmt(rng: &mut impl Rng) -> String {
    let v = |rng: &mut _| *["s", "t", "p"].choose(rng).unwrap();
    let c = rng.gen_range(-2..=3);
    match rng.gen_range(0..5) {
        0 => {
            let x = v(rng);
            format!("{x} := {x} + {c};")
        }
        1 => format!("{} := {} - {};", v(rng), v(rng), v(rng)),
        2 => format!("{} := {} + {c};", v(rng), v(rng)),
        3 => format!(
            "if ({} < {}) {{ {} := {} + 1; }} else {{ {} := {}; }}",
            v(rng),
            v(rng),
            v(rng),
            v(rng),
            v(rng),
            v(rng)
        ),
        _ => format!("{} := {c};", v(rng)),
    }
}

fn body(rng: &mut impl Rng) -> String {
    (0..rng.gen_range(1..=3)).map(|_| stmt(rng)).collect::<Vec<_>>().join(" ")
}

/// Source of a random method `r{id}` with parameters n and p and locals
/// i, s and t.
pub fn random_program(rng: &mut impl Rng, id: usize) -> String {
    let mut src = format!(
        "method r{id}(n: int, p: int) requires n <= 12; {{ var i: int; var s: int; var t: int; \
         i := 0; s := {}; t := p; while (i < n) {{ {} i := i + 1; }}",
        rng.gen_range(-1..=2),
        body(rng)
    );
    if rng.gen_bool(0.5) {
        src.push_str(&format!(" while (0 < i) {{ {} i := i - 1; }}", body(rng)));
    }
    src.push_str(" }");
    src
}
