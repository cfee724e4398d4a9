use std::time::Instant;

use rhythm::crypto::{ProviderKind, SharedProvider};
use rhythm::seed::{self, Stream};

use crate::BenchArgs;

const MIN_ITERATIONS: usize = 200;

fn median_ms(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2.0
    }
}

fn time<T>(f: impl FnOnce() -> T) -> (f64, T) {
    let start = Instant::now();
    let out = f();
    (start.elapsed().as_secs_f64() * 1e3, out)
}

pub fn cmd_bench_crypto(args: &BenchArgs) -> u8 {
    let crypto: SharedProvider = match ProviderKind::Ecdsa.build() {
        Ok(c) => c,
        Err(e) => {
            println!("skipping: elliptic-curve provider unavailable ({e})");
            return 0;
        }
    };
    if args.iterations == 0 {
        eprintln!("error: --iterations must be >= 1");
        return 2;
    }
    if args.iterations < MIN_ITERATIONS {
        eprintln!("warning: {} iterations is a low sample count; medians may be noisy (>= {MIN_ITERATIONS} recommended)", args.iterations);
    }
    let mut rng = seed::rng(0, Stream::Keys, 0);
    let group = crypto.group_setup(&mut rng);
    let gsk = match crypto.group_join(&group.issuing, rhythm::crypto::SignerIdentity(1)) {
        Ok(k) => k,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let kp = crypto.keygen(&mut rng);
    let msg = b"rhythm benchmark message";
    let (mut sign, mut verify, mut gsign, mut gverify) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..args.iterations {
        let (ms, sig) = time(|| crypto.sign(&kp.secret, msg).expect("sign"));
        sign.push(ms);
        let (ms, ok) = time(|| crypto.verify(&kp.public, msg, &sig).expect("verify"));
        assert!(ok);
        verify.push(ms);
        let (ms, gsig) = time(|| crypto.group_sign(&gsk, msg, &mut rng).expect("group sign"));
        gsign.push(ms);
        let (ms, ok) = time(|| crypto.group_verify(&group.public, msg, &gsig).expect("group verify"));
        assert!(ok);
        gverify.push(ms);
    }
    println!("provider: {} ({} iterations; timings are hardware-dependent, informational only)", crypto.name(), args.iterations);
    println!("{:<14} {:>14} {:>16}", "operation", "median_ms", "reference_ms");
    for (name, samples, reference) in [
        ("sign", sign, None),
        ("verify", verify, None),
        ("group_sign", gsign, Some(56.0)),
        ("group_verify", gverify, Some(82.5)),
    ] {
        let r = reference.map_or_else(|| "-".to_owned(), |v: f64| format!("{v:.1}"));
        println!("{:<14} {:>14.4} {:>16}", name, median_ms(samples), r);
    }
    0
}
