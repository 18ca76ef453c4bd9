//! Scalar infimum over an open interval: grid pre-scan, then golden-section refinement.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Minimum {
    pub arg: f64,
    pub value: f64,
}

/// Infimum of `f` over the open interval `(lo, hi)`.
///
/// `f` is evaluated only at interior points. The pre-scan uses `scan` equally
/// spaced interior points, the golden-section search then runs on the bracket
/// around the best one until its width drops below `tol`. When the infimum is a
/// boundary limit the search converges towards that endpoint.
pub fn infimum_open(f: impl Fn(f64) -> f64, lo: f64, hi: f64, scan: usize, tol: f64) -> Minimum {
    assert!(hi > lo, "empty interval");
    let scan = scan.max(3);
    let h = (hi - lo) / (scan + 1) as f64;
    let mut best_k = 1;
    let mut best_v = f64::INFINITY;
    for k in 1..=scan {
        let v = f(lo + k as f64 * h);
        if v < best_v {
            best_v = v;
            best_k = k;
        }
    }
    let mut a = lo + (best_k - 1) as f64 * h;
    let mut b = lo + (best_k + 1) as f64 * h;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = Minimum {
        arg: lo + best_k as f64 * h,
        value: best_v,
    };
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            if c <= lo || c == d {
                break;
            }
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            if d >= hi || d == c {
                break;
            }
            fd = f(d);
        }
        for (x, v) in [(c, fc), (d, fd)] {
            if v < best.value {
                best = Minimum { arg: x, value: v };
            }
        }
    }
    best
}
