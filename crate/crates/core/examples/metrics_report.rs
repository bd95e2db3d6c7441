//! Label binnings and the full metric report for both regression schemes
//! and the binary classification scheme.
//!
//!     cargo run --example metrics_report

use bimha::metrics::{binary_report, full_report, rounded_class, sims5, Scheme, SIMS5_CLASSES};

fn main() {
    println!("five-class binning of the [-1, 1] annotation grid:");
    for step in -5..=5 {
        let x = f64::from(step) / 5.0;
        println!("  {x:>5.1} -> {}", SIMS5_CLASSES[sims5(x)]);
    }
    println!(
        "seven-class binning on [-3, 3]: 2.6 -> {}, -0.5 -> {}",
        rounded_class(2.6, 3),
        rounded_class(-0.5, 3)
    );

    let labels = [-0.8, -0.4, 0.0, 0.2, 0.6, 1.0, -0.2, 0.0];
    let preds = [-0.7, -0.1, 0.05, 0.3, 0.4, 0.9, 0.1, -0.02];
    println!("\n[-1, 1] labels:");
    print!("{}", full_report(&preds, &labels, Scheme::Sims).unwrap());

    let labels = [-2.4, -1.0, 0.0, 0.6, 1.8, 3.0];
    let preds = [-2.0, -1.6, 0.3, 0.2, 2.2, 3.4];
    println!("\n[-3, 3] labels:");
    print!("{}", full_report(&preds, &labels, Scheme::Mosi).unwrap());

    println!("\nbinary classes:");
    print!(
        "{}",
        binary_report(&[1, 0, 1, 1, 0, 0], &[1, 0, 0, 1, 0, 1]).unwrap()
    );

    println!("\nJSON:");
    println!(
        "{}",
        full_report(&[0.1, -0.3, 0.5], &[0.2, -0.4, 0.4], Scheme::Sims)
            .unwrap()
            .to_json()
    );
}
