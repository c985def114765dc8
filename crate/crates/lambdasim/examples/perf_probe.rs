use lambdasim::herm::HermOp;
use lambdasim::polytope::{caratheodory_decompose, FacetSystem};
use std::time::Instant;

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let t0 = Instant::now();
    let sys = FacetSystem::build(n).unwrap();
    println!("n={n}: facets={} build={:?}", sys.facet_count(), t0.elapsed());
    let h = HermOp::magic_h().tensor_power(n).unwrap();
    let t1 = Instant::now();
    let dec = caratheodory_decompose(&h, &sys).unwrap();
    println!(
        "decompose={:?} support={} weight_ok={} exact={}",
        t1.elapsed(),
        dec.support(),
        dec.total_weight() == lambdasim::QSqrt2::one(),
        dec.reconstruct().unwrap() == h
    );
}
