use cmzd_core::hardy::{RationalHardyFunction, SignMode};
use cmzd_core::operator::{build_halfline, resolve_zd_operator};
use std::time::Instant;

fn main() {
    let u = RationalHardyFunction::figure1();
    let t0 = Instant::now();
    let op = build_halfline(&u, 40.0, 4096).unwrap();
    println!("build {:?}", t0.elapsed());
    for x in [-3.0, 1.0] {
        let t0 = Instant::now();
        let s = resolve_zd_operator(&op, 2.0, x, SignMode::Focusing, 0.1).unwrap();
        println!("x={x} value={} in {:?}", s.value, t0.elapsed());
    }
}
