//! Globally adaptive 21-point Gauss–Kronrod integration.
//!
//! The interval with the largest error estimate is bisected until the summed
//! estimate drops below `max(abs, rel·|I|)`. Semi-infinite ranges `[a, ∞)`
//! are mapped onto `[0, 1)` by `x = a + t / (1 - t)`, `dx = dt / (1 - t)²`;
//! the Kronrod nodes are open so the singular endpoint is never evaluated.
//!
//! Partitioning and summation order depend only on the integrand values,
//! so repeated calls are bit-identical.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

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
    0.123_491_976_262_065_851_077_600_525_452_300,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
/// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const DEFAULT_LIMIT: usize = 4000;

/// Convergence target: stop once the error estimate is at most
/// `max(abs, rel·|value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    /// Tolerance used for distribution functions.
    pub const CDF: Tolerance = Tolerance {
        abs: 1e-9,
        rel: 1e-8,
    };

    /// Purely relative target, for small tail probabilities.
    pub const fn relative(rel: f64) -> Self {
        Tolerance { abs: 0.0, rel }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// One 21-point Gauss–Kronrod panel with the QUADPACK error heuristic.
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - reskh).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let value = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let uflow = f64::MIN_POSITIVE / (50.0 * f64::EPSILON);
    if resabs > uflow {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (value, err)
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Integral> {
    integrate_with_breaks(f, a, b, &[], tol)
}

/// Like [`integrate`], with the initial partition split at `breaks`
/// (points outside `(a, b)` are ignored). Use it for known kinks.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            abs_error: 0.0,
            evaluations: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut points: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > lo && *p < hi)
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    let mut left = lo;
    for right in points.into_iter().chain(std::iter::once(hi)) {
        let (value, error) = gk21(&f, left, right);
        evaluations += 21;
        heap.push(Segment {
            a: left,
            b: right,
            value,
            error,
        });
        left = right;
    }

    loop {
        // Summing in a fixed order keeps results independent of heap layout.
        let (value, error) = totals(&heap);
        if error <= tol.target(value) || !error.is_finite() {
            if !value.is_finite() || !error.is_finite() {
                return Err(Error::Quadrature {
                    achieved: error,
                    requested: tol.target(value),
                });
            }
            return Ok(Integral {
                value: sign * value,
                abs_error: error,
                evaluations,
            });
        }
        if heap.len() >= DEFAULT_LIMIT {
            return Err(Error::Quadrature {
                achieved: error,
                requested: tol.target(value),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval exhausted at machine precision; its error cannot shrink.
            let requested = tol.target(value);
            if error <= requested.max(1e3 * f64::EPSILON * value.abs()) {
                heap.push(worst);
                let (value, error) = totals(&heap);
                return Ok(Integral {
                    value: sign * value,
                    abs_error: error,
                    evaluations,
                });
            }
            return Err(Error::Quadrature {
                achieved: error,
                requested,
            });
        }
        let (v1, e1) = gk21(&f, worst.a, mid);
        let (v2, e2) = gk21(&f, mid, worst.b);
        evaluations += 42;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
}

fn totals(heap: &BinaryHeap<Segment>) -> (f64, f64) {
    let mut segs: Vec<&Segment> = heap.iter().collect();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    segs.iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error))
}

/// Integrates `f` over `[a, ∞)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: Tolerance) -> Result<Integral> {
    integrate_to_infinity_with_breaks(f, a, &[], tol)
}

/// Like [`integrate_to_infinity`], with breakpoints given in the original
/// variable.
pub fn integrate_to_infinity_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Integral> {
    let mapped = |t: f64| {
        let one_minus = 1.0 - t;
        let x = a + t / one_minus;
        let v = f(x);
        if v == 0.0 {
            0.0
        } else {
            v / (one_minus * one_minus)
        }
    };
    let tbreaks: Vec<f64> = breaks
        .iter()
        .filter(|&&x| x > a && x.is_finite())
        .map(|&x| (x - a) / (1.0 + (x - a)))
        .collect();
    integrate_with_breaks(mapped, 0.0, 1.0, &tbreaks, tol)
}
