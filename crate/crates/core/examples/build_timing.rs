//! Times PT construction for a given parameter set.
//!
//! cargo run --release --example build_timing -- <alpha> <T> <dt> <n_steps> <dkmax> <eps_rel> [qr]
//!
//! A trailing `qr` selects the QR-canonicalizing sweep instead of zip-up.

use ptspec::bath::BathSpec;
use ptspec::process_tensor::{build_pt_mpo_with, BuildOptions};

fn main() {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let a: Vec<f64> = args[..6]
        .iter()
        .map(|s| s.parse().expect("number"))
        .collect();
    let opts = BuildOptions {
        zip_up: args.get(6).map(String::as_str) != Some("qr"),
        ..BuildOptions::default()
    };
    let b = BathSpec::new(a[0], 3.04, a[1]).expect("bath");
    let pt = build_pt_mpo_with(&b, a[2], a[3] as usize, a[4] as usize, a[5], &opts).expect("build");
    let st = pt.stats();
    println!(
        "max bond {} peak {} time {:.2}s",
        pt.max_bond_dim(),
        st.peak_bond_dim,
        st.seconds
    );
}
