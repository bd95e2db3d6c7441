//! Finite-difference check of every parameter gradient of a small
//! double-precision model, for a few seeds, plus the negative control.
//!
//!     cargo run --release --example gradient_check

use bimha::gradcheck::{run, GradcheckOptions};

fn main() {
    for seed in 0..3 {
        let r = run(seed, &GradcheckOptions::default()).unwrap();
        println!(
            "seed {seed}: {} elements, max relative error {:.2e} at {} -> {}",
            r.checked,
            r.max_rel_error,
            r.worst,
            if r.passed() { "pass" } else { "FAIL" }
        );
    }

    let corrupted = GradcheckOptions {
        corrupt: Some("ibi.w_o".into()),
        ..GradcheckOptions::default()
    };
    let r = run(0, &corrupted).unwrap();
    println!(
        "corrupted ibi.w_o: max relative error {:.2e} at {} -> {}",
        r.max_rel_error,
        r.worst,
        if r.passed() { "pass" } else { "FAIL" }
    );
}
