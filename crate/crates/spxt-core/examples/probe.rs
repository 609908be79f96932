use std::time::Instant;
use spxt_core::forward::simulate;
use spxt_core::geometry::{generate_sources, DetectorSpec};
use spxt_core::phantom::{build_radial_map, reduce_to_profile, voxelize, ShellPhantom};
use spxt_core::solver::{reconstruct, DrParams, InnerParams};

fn run(gamma: f64, iters: usize, inner_cap: usize) {
    let phantom = ShellPhantom::two_shell();
    let n = 10;
    let sources = generate_sources(200, 3.0).unwrap();
    let det = DetectorSpec::new(6.0, 4.0, 6).unwrap();
    let meas = simulate(&phantom, &sources, &det, n, 0.0, 4).unwrap();
    let map = build_radial_map(n).unwrap();
    let truth = reduce_to_profile(&voxelize(&phantom, n).unwrap(), &map).unwrap();
    let params = DrParams {
        alpha: 0.0, gamma, max_iters: iters, early_stop: None,
        inner: InnerParams { max_iters: inner_cap, ..InnerParams::default() },
        ..DrParams::default()
    };
    let t = Instant::now();
    let rec = reconstruct(&meas, &det, n, &params).unwrap();
    let err = rec.profile.values().iter().zip(truth.values()).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
    println!("gamma {gamma} iters {iters} cap {inner_cap}: err {err:.3e}  F_end {:.3e}  [{:.0?}]",
        rec.history.last().unwrap().data_term, t.elapsed());
}

fn main() {
    run(5000.0, 500, 200);
    run(20000.0, 500, 300);
}
