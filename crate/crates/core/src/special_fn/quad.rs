//! Globally adaptive 21-point Gauss-Kronrod quadrature.

use std::collections::BinaryHeap;

use super::KahanSum;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_980_085_323,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7, 9.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_intervals: 2000,
        }
    }
}

impl QuadOptions {
    pub fn precise() -> Self {
        Self {
            abs_tol: 1e-15,
            rel_tol: 1e-13,
            max_intervals: 5000,
        }
    }

    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub intervals: usize,
    /// False when the interval budget ran out before the tolerance was met.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn gk21(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = WGK[10] * fc;
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv = [0.0f64; 21];
    fv[10] = fc;
    for j in 0..10 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv[j] = f1;
        fv[20 - j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv[j] - mean).abs() + (fv[20 - j] - mean).abs());
    }
    let value = resk * h;
    resabs *= h.abs();
    resasc *= h.abs();
    let mut err = ((resk - resg) * h).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    Segment { a, b, value, err }
}

/// Adaptive integral of `f` over `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, opts: QuadOptions) -> QuadResult {
    integrate_breaks(f, &[a, b], opts)
}

/// Adaptive integral over `[breaks[0], breaks[last]]`, seeded with the given
/// sub-intervals. Useful when the integrand has kinks or spans many scales.
pub fn integrate_breaks(f: impl Fn(f64) -> f64, breaks: &[f64], opts: QuadOptions) -> QuadResult {
    assert!(breaks.len() >= 2, "need at least one interval");
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        if w[1] != w[0] {
            heap.push(gk21(&f, w[0], w[1]));
        }
    }
    let max = opts.max_intervals.max(heap.len());
    loop {
        let (value, err) = totals(&heap);
        let tol = opts.abs_tol.max(opts.rel_tol * value.abs());
        if err <= tol {
            return QuadResult {
                value,
                abs_error: err,
                intervals: heap.len(),
                converged: true,
            };
        }
        if heap.len() >= max {
            return QuadResult {
                value,
                abs_error: err,
                intervals: heap.len(),
                converged: false,
            };
        }
        let worst = match heap.pop() {
            Some(s) => s,
            None => {
                return QuadResult {
                    value: 0.0,
                    abs_error: 0.0,
                    intervals: 0,
                    converged: true,
                }
            }
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // interval cannot be split further in floating point
            heap.push(Segment { err: 0.0, ..worst });
            continue;
        }
        heap.push(gk21(&f, worst.a, mid));
        heap.push(gk21(&f, mid, worst.b));
    }
}

fn totals(heap: &BinaryHeap<Segment>) -> (f64, f64) {
    let v: KahanSum = heap.iter().map(|s| s.value).collect();
    let e: f64 = heap.iter().map(|s| s.err).sum();
    (v.value(), e)
}

/// Integral over `[a, inf)` through `x = a + t/(1-t)`.
pub fn integrate_to_infinity(f: impl Fn(f64) -> f64, a: f64, opts: QuadOptions) -> QuadResult {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - t;
        let v = f(a + t / s) / (s * s);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate_breaks(g, &[0.0, 0.5, 0.9, 0.99, 1.0], opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_subrule_is_the_ten_point_rule() {
        let g10 = [0.148_874_34, 0.433_395_39, 0.679_409_57, 0.865_063_37, 0.973_906_53];
        let w10 = [0.295_524_22, 0.269_266_72, 0.219_086_36, 0.149_451_35, 0.066_671_34];
        for k in 0..5 {
            assert!((XGK[9 - 2 * k] - g10[k]).abs() < 1e-8);
            assert!((WG[4 - k] - w10[k]).abs() < 1e-8);
        }
        let s: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn kronrod_is_exact_to_degree_31() {
        // single panel on [-1, 1]
        for k in 0..=31 {
            let seg = gk21(&|x: f64| x.powi(k), -1.0, 1.0);
            let want = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((seg.value - want).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn smooth_and_peaked_integrands() {
        let r = integrate(f64::sin, 0.0, std::f64::consts::PI, QuadOptions::precise());
        assert!((r.value - 2.0).abs() < 1e-14 && r.converged);
        let r = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, QuadOptions::precise());
        let want = 2.0 * 100.0 * (100.0f64).atan();
        assert!(((r.value - want) / want).abs() < 1e-12);
        let r = integrate(|x: f64| x.sqrt(), 0.0, 1.0, QuadOptions::precise());
        assert!((r.value - 2.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn semi_infinite() {
        let r = integrate_to_infinity(|x| (-x).exp(), 0.0, QuadOptions::precise());
        assert!((r.value - 1.0).abs() < 1e-13);
        let r = integrate_to_infinity(|x| 1.0 / (1.0 + x * x), 0.0, QuadOptions::precise());
        assert!((r.value - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let r = integrate(|x| x * x, 1.0, 0.0, QuadOptions::default());
        assert!((r.value + 1.0 / 3.0).abs() < 1e-14);
    }
}
