use nodestory::evaluation::clopper_pearson;
use statrs::distribution::{Binomial, DiscreteCDF};

const ALPHA: f64 = 0.05;

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// P(X >= k) from statrs.
fn at_least(k: u64, n: u64, p: f64) -> f64 {
    let b = Binomial::new(p, n).unwrap();
    if k == 0 {
        1.0
    } else {
        b.sf(k - 1)
    }
}

fn at_most(k: u64, n: u64, p: f64) -> f64 {
    Binomial::new(p, n).unwrap().cdf(k)
}

#[test]
fn published_intervals() {
    let (lo, hi) = clopper_pearson(8, 10, ALPHA).unwrap();
    assert_eq!((round2(lo), round2(hi)), (0.44, 0.97));
    let (lo, hi) = clopper_pearson(10, 10, ALPHA).unwrap();
    assert_eq!((round2(lo), round2(hi)), (0.69, 1.00));
}

#[test]
fn bounds_solve_the_tail_equations() {
    for n in 1..=12u64 {
        for k in 0..=n {
            let (lo, hi) = clopper_pearson(k, n, ALPHA).unwrap();
            if k == 0 {
                assert_eq!(lo, 0.0);
            } else {
                let tail = at_least(k, n, lo);
                assert!((tail - ALPHA / 2.0).abs() < 1e-6, "lower k={k} n={n}: {tail}");
            }
            if k == n {
                assert_eq!(hi, 1.0);
            } else {
                let tail = at_most(k, n, hi);
                assert!((tail - ALPHA / 2.0).abs() < 1e-6, "upper k={k} n={n}: {tail}");
            }
            let rate = k as f64 / n as f64;
            assert!(0.0 <= lo && lo <= rate && rate <= hi && hi <= 1.0);
        }
    }
}

#[test]
fn bounds_grow_with_successes() {
    for n in 1..=12u64 {
        let bounds: Vec<(f64, f64)> = (0..=n).map(|k| clopper_pearson(k, n, ALPHA).unwrap()).collect();
        for w in bounds.windows(2) {
            assert!(w[0].0 <= w[1].0 && w[0].1 <= w[1].1, "n={n}: {w:?}");
        }
    }
}

#[test]
fn no_successes_mirrors_all_successes() {
    let (lo, hi) = clopper_pearson(0, 10, ALPHA).unwrap();
    assert_eq!(lo, 0.0);
    assert!((hi - 0.308).abs() < 5e-4);
    let (mirror, _) = clopper_pearson(10, 10, ALPHA).unwrap();
    assert!((hi - (1.0 - mirror)).abs() < 1e-9);
}
