fn main() {
    for name in mskc_core::experiments::PRESETS {
        let t = std::time::Instant::now();
        match mskc_core::experiments::run_preset(name) {
            Ok(report) => {
                let failed = report.failed_rows();
                println!(
                    "{name}: pass={} cells={} failed_rows={} ({} ms)",
                    report.pass,
                    report.cells.len(),
                    failed.len(),
                    t.elapsed().as_millis()
                );
                for (params, row) in failed.iter().take(4) {
                    println!("   FAIL [{params}] {} {} {} {}", row.quantity, row.value, row.relation, row.bound);
                }
            }
            Err(e) => println!("{name}: ERROR {e} ({} ms)", t.elapsed().as_millis()),
        }
    }
}
