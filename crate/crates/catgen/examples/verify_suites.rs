//! Run verification suites from code and print their reports. Pass suite
//! names as arguments (default: extinction and codec).

use catgen::verify::{run_suite, suite_names, SuiteConfig};

fn main() -> catgen::Result<()> {
    let mut names: Vec<String> = std::env::args().skip(1).collect();
    if names.is_empty() {
        names = vec!["extinction".into(), "codec".into()];
    }
    println!("available: {}", suite_names().collect::<Vec<_>>().join(", "));
    let cfg = SuiteConfig { seed: 7, replicas: None };
    for name in &names {
        for report in run_suite(name, &cfg)? {
            println!("{}", report.summary_line());
        }
    }
    Ok(())
}
