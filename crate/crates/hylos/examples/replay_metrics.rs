//! Blind forward replay over the full scenario family under all six
//! conditions, scored with the metric suite.

use hylos::bench::{build_scenarios, run_family, HylosConfig, ALL_CONDITIONS};
use hylos::txn::verify_log;

fn main() -> hylos::Result<()> {
    let config = HylosConfig::default();
    let scenarios = build_scenarios(&config);
    println!("scenario family: {} scenarios", scenarios.len());

    let run = run_family(&config, &ALL_CONDITIONS)?;
    verify_log(&run.log)?;
    println!("merged commit log verified ({} entries)", run.log.len());
    println!();
    print!("{}", run.metrics.render());

    // The interesting contrast: the contract policy with alternatives
    // repairs every supported scenario and defers on every unsupported
    // one, while the direct edit never clears review.
    let contract = &run.metrics.per_condition["contract-alternatives"];
    let direct = &run.metrics.per_condition["direct-edit"];
    println!();
    println!(
        "contract-alternatives: cra {:?}, tcs {:?}",
        contract.cra, contract.tcs
    );
    println!("direct-edit:           cra {:?}, tcs {:?}", direct.cra, direct.tcs);
    Ok(())
}
