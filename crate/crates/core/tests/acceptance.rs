//! Runs every acceptance criterion, prints one line each, then checks that
//! the negative controls actually break the criteria they target.

use std::process::ExitCode;

use haven::federated::Aggregation;
use haven::harness::{run_acceptance, run_criterion, Overrides};

fn main() -> ExitCode {
    let results = run_acceptance(None, &Overrides::default());
    println!("\nacceptance criteria");
    for r in &results {
        println!("{r}");
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria passed", results.len());

    println!("\nnegative controls (each line is expected to FAIL)");
    let controls = [
        (
            5,
            Overrides {
                aggregation: Some(Aggregation::Mean),
                ..Overrides::default()
            },
            "plain mean aggregation",
        ),
        (
            3,
            Overrides {
                theta2: Some(0.0),
                ..Overrides::default()
            },
            "confidence gate disabled",
        ),
    ];
    let mut controls_ok = true;
    for (id, ov, label) in &controls {
        let r = run_criterion(*id, ov);
        println!("{label}: {r}");
        controls_ok &= !r.passed;
    }

    if passed == results.len() && controls_ok {
        println!("\nacceptance ... ok");
        ExitCode::SUCCESS
    } else {
        println!("\nacceptance ... FAILED");
        ExitCode::FAILURE
    }
}
