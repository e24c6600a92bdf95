//! Exponentially scaled modified Bessel functions of the first kind.

const SERIES_LIMIT: f64 = 30.0;

/// e^{-x} I_m(x) for x >= 0 and integer order m.
pub fn bessel_ie(m: u32, x: f64) -> f64 {
    assert!(x >= 0.0, "bessel_ie needs x >= 0, got {x}");
    if x == 0.0 {
        return if m == 0 { 1.0 } else { 0.0 };
    }
    if x <= SERIES_LIMIT {
        series(m, x)
    } else {
        asymptotic(m, x)
    }
}

pub fn i0e(x: f64) -> f64 {
    bessel_ie(0, x)
}

pub fn i1e(x: f64) -> f64 {
    bessel_ie(1, x)
}

/// sum_k (x/2)^{2k+m} / (k! (k+m)!) times e^{-x}; all terms positive.
fn series(m: u32, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = (m as f64 * h.ln() - ln_factorial(m) - x).exp();
    let mut sum = term;
    let q = h * h;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + m as f64));
        sum += term;
        if term < sum * 1e-17 {
            return sum;
        }
        k += 1.0;
    }
}

/// Hankel expansion 1/sqrt(2 pi x) sum_k (-1)^k a_k(m) / x^k, truncated at the smallest term.
fn asymptotic(m: u32, x: f64) -> f64 {
    let mu = 4.0 * (m as f64).powi(2);
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut k = 1.0f64;
    loop {
        let next = -term * (mu - (2.0 * k - 1.0).powi(2)) / (k * 8.0 * x);
        if next.abs() >= term.abs() || next.abs() < 1e-17 * sum.abs() {
            if next.abs() < term.abs() {
                sum += next;
            }
            break;
        }
        sum += next;
        term = next;
        k += 1.0;
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

fn ln_factorial(n: u32) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}
