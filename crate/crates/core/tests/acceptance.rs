//! Runs every acceptance criterion and prints one line each. Exits with a
//! failure status if any criterion fails.

use cmw_core::acceptance::{Suite, SuiteConfig};

fn main() {
    let cfg = SuiteConfig::default();
    println!("acceptance: seed {} workers {}", cfg.seed, cfg.workers);
    let mut suite = Suite::new(cfg);
    let mut failed = 0;
    for id in 1..=cmw_core::acceptance::CRITERIA {
        let r = suite.run(id);
        println!("{r} [{:.1}s]", r.runtime.as_secs_f64());
        failed += usize::from(r.failed());
    }
    if failed > 0 {
        println!("acceptance: {failed} criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
