use vgw_core::recursion::*;
fn main() {
    for d in 2..=4 {
        let t0 = std::time::Instant::now();
        let p = poly_d(d).unwrap();
        println!("poly_{d}: {} terms in {:?}", p.num_terms(), t0.elapsed());
    }
}
