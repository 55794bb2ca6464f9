use std::time::Instant;
fn main() {
    let p: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(11);
    for v in [
        ("lemma5_sweep_500", {
            let t = Instant::now();
            let v = cayley_ci::polyring::check_lemma5_sweep(p, 500, 0);
            println!("lemma5 sweep 500: pass={} in {:?}", v.pass, t.elapsed());
            v
        }),
        ("lemma6", {
            let t = Instant::now();
            let v = cayley_ci::polyring::check_lemma6(p);
            println!("lemma6: pass={} in {:?}", v.pass, t.elapsed());
            v
        }),
        ("lemma2", {
            let t = Instant::now();
            let v = cayley_ci::polyring::check_lemma2(p);
            println!("lemma2: pass={} in {:?}", v.pass, t.elapsed());
            v
        }),
        ("lemma1", {
            let t = Instant::now();
            let v = cayley_ci::polyring::check_lemma1(p);
            println!("lemma1: pass={} in {:?}", v.pass, t.elapsed());
            v
        }),
        ("power", {
            let t = Instant::now();
            let v = cayley_ci::polyring::check_power_congruence(p);
            println!("power: pass={} in {:?}", v.pass, t.elapsed());
            v
        }),
    ] {
        assert!(v.1.pass, "{} failed", v.0);
    }
}
