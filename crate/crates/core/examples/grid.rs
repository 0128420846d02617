//! Run one benchmark cell and print its table row.
//!
//! Usage: grid <spsa|bspsas|bspsa> <n_params> <c_end> [repeats] [iterations] [seed]

use pairtune_core::{benchmark_config, run_experiment, Method};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 3 {
        eprintln!(
            "usage: grid <spsa|bspsas|bspsa> <n_params> <c_end> [repeats] [iterations] [seed]"
        );
        std::process::exit(2);
    }
    let method = match args[0].as_str() {
        "spsa" => Method::Spsa,
        "bspsas" => Method::Bspsas,
        "bspsa" => Method::Bspsa,
        other => {
            eprintln!("unknown method {other:?}");
            std::process::exit(2);
        }
    };
    let n: usize = args[1].parse().expect("n_params");
    let c_end: f64 = args[2].parse().expect("c_end");
    let repeats: u32 = args.get(3).map_or(10, |s| s.parse().expect("repeats"));
    let iterations: u64 = args
        .get(4)
        .map_or(200_000, |s| s.parse().expect("iterations"));
    let seed: u64 = args.get(5).map_or(1, |s| s.parse().expect("seed"));

    let config = benchmark_config(method, n, iterations, repeats, seed, c_end).unwrap();
    let report = run_experiment(&config).unwrap();
    println!(
        "{method} n={n} c_end={c_end} repeats={repeats}: mean={:.5} std={:.5} ({:.1}s)",
        report.elo_gain_mean, report.elo_gain_std, report.wall_time_secs
    );
}
