//! Finite power sums `Σ_{k=lo}^{hi} k^{-s}`.
//!
//! Short ranges are summed term by term. Long ranges sum the head directly
//! and evaluate the remaining block with the Euler–Maclaurin formula, whose
//! remainder at a starting index of 1000 is far below double precision for
//! the exponents used here. This keeps sums over `M = 10^15` skills exact to
//! rounding without materializing them.

/// Ranges with at most this many terms are summed directly.
const DIRECT_LIMIT: u64 = 4096;
/// First index handled by the Euler–Maclaurin tail.
const TAIL_START: u64 = 1000;

/// `B_{2j} / (2j)!` for j = 1..=6.
const BERNOULLI_OVER_FACTORIAL: [f64; 6] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
];

/// `Σ_{k=lo}^{hi} k^{-s}` for `1 <= lo`; zero when `lo > hi`.
pub fn power_sum(s: f64, lo: u64, hi: u64) -> f64 {
    assert!(lo >= 1, "power sums start at k = 1");
    if lo > hi {
        return 0.0;
    }
    if hi - lo < DIRECT_LIMIT {
        return direct_sum(s, lo, hi);
    }
    let start = lo.max(TAIL_START);
    let head = if start > lo { direct_sum(s, lo, start - 1) } else { 0.0 };
    head + euler_maclaurin(s, start as f64, hi as f64)
}

/// Term-by-term compensated sum, smallest terms first when `s > 0`.
pub fn direct_sum(s: f64, lo: u64, hi: u64) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut add = |term: f64| {
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    };
    if s > 0.0 {
        for k in (lo..=hi).rev() {
            add((k as f64).powf(-s));
        }
    } else {
        for k in lo..=hi {
            add((k as f64).powf(-s));
        }
    }
    sum + comp
}

fn euler_maclaurin(s: f64, a: f64, b: f64) -> f64 {
    let f = |x: f64| x.powf(-s);
    let log_ratio = (b / a).ln();
    let integral = if s == 1.0 {
        log_ratio
    } else {
        let u = (1.0 - s) * log_ratio;
        a.powf(1.0 - s) * log_ratio * exp_m1_over(u)
    };
    let mut total = integral + 0.5 * (f(a) + f(b));
    // f^{(m)}(x) = c_m x^{-s-m} with c_m = Π_{i<m} (-s - i)
    let mut coeff = -s; // c_1
    let mut order = 1.0;
    for (j, &bf) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        if j > 0 {
            coeff *= (-s - order) * (-s - order - 1.0);
            order += 2.0;
        }
        let deriv = |x: f64| coeff * x.powf(-s - order);
        total += bf * (deriv(b) - deriv(a));
    }
    total
}

/// `expm1(u) / u`, continuous at zero.
fn exp_m1_over(u: f64) -> f64 {
    if u.abs() < 1e-300 {
        1.0
    } else {
        u.exp_m1() / u
    }
}
