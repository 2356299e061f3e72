use oulab::harness::{builtin_suite, run_suite};

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "symmetric-1d".into());
    let suite = builtin_suite(&name, 42).unwrap();
    let results = run_suite(&suite).unwrap();
    for r in &results {
        println!(
            "{:24} {:>12} measured={:+.6e} bound={:+.6e} tol={:.1e} [{:.2}s] {}",
            r.id, r.verdict.to_string(), r.measured, r.bound, r.tol, r.seconds,
            &r.detail.chars().take(110).collect::<String>()
        );
    }
}
