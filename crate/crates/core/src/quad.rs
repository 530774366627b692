//! Fixed Gauss–Legendre rules.

const X8: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const W8: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

/// Eight-point rule on `[a, b]`; exact for polynomials of degree ≤ 15.
pub fn gl8<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    let m = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut s = 0.0;
    for (x, w) in X8.iter().zip(W8) {
        s += w * (f(m - r * x) + f(m + r * x));
    }
    s * r
}

/// Nodes and weights of the eight-point rule mapped to `[0, 1]`.
pub fn gl8_unit() -> [(f64, f64); 8] {
    let mut out = [(0.0, 0.0); 8];
    for (k, (x, w)) in X8.iter().zip(W8).enumerate() {
        out[2 * k] = (0.5 - 0.5 * x, 0.5 * w);
        out[2 * k + 1] = (0.5 + 0.5 * x, 0.5 * w);
    }
    out
}

/// Composite eight-point rule with panels no wider than `max_panel`.
pub fn gl8_composite<F: FnMut(f64) -> f64>(a: f64, b: f64, max_panel: f64, mut f: F) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = ((b - a) / max_panel).ceil().max(1.0) as usize;
    let w = (b - a) / n as f64;
    (0..n).map(|k| gl8(a + k as f64 * w, a + (k + 1) as f64 * w, &mut f)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_degree_fifteen() {
        let v = gl8(0.0, 2.0, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-10);
        let s: f64 = gl8_unit().iter().map(|p| p.1).sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn composite_smooth() {
        let v = gl8_composite(0.0, 3.0, 0.5, f64::cosh);
        assert!((v - 3f64.sinh()).abs() < 1e-13);
    }
}
