//! Adaptive Gauss–Kronrod (10/21) integration with global subdivision.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
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

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const ROUNDOFF: f64 = 100.0 * f64::EPSILON;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_segments: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs: f64,
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
        self.error.total_cmp(&other.error).then(other.a.total_cmp(&self.a))
    }
}

/// One 21-point Kronrod estimate with the QUADPACK error heuristic.
fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_g = 0.0;
    let mut res_k = fc * WGK[10];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..5 {
        let jtw = 2 * j + 1;
        let dx = half * XGK[jtw];
        let (f1, f2) = (f(center - dx), f(center + dx));
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_g += WG[j] * (f1 + f2);
        res_k += WGK[jtw] * (f1 + f2);
        res_abs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let dx = half * XGK[jtwm1];
        let (f1, f2) = (f(center - dx), f(center + dx));
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        res_k += WGK[jtwm1] * (f1 + f2);
        res_abs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let scale = half.abs();
    let value = res_k * half;
    let res_abs = res_abs * scale;
    let res_asc = res_asc * scale;
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, err, res_abs)
}

/// Integrates `f` over `[breaks[0], breaks[last]]`, starting from the segments
/// between consecutive (sorted, distinct) breakpoints.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, breaks: &[f64], tol: Tolerance) -> Result<QuadResult> {
    let (r, converged) = integrate_best_effort(f, breaks, tol)?;
    if !converged {
        return Err(Error::Integration { partial: r.value, error_bound: r.error });
    }
    Ok(r)
}

/// Like [`integrate`] but returns the current estimate when the segment
/// budget runs out, flagged as not converged. Non-finite values still fail.
pub fn integrate_best_effort<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<(QuadResult, bool)> {
    if breaks.len() < 2 {
        return Ok((QuadResult { value: 0.0, error: 0.0, evaluations: 0 }, true));
    }
    let mut heap = BinaryHeap::with_capacity(breaks.len() * 2);
    let mut settled: Vec<Segment> = Vec::new();
    let mut evaluations = 0;
    for w in breaks.windows(2) {
        let (value, error, abs) = gk21(&mut f, w[0], w[1]);
        evaluations += 21;
        heap.push(Segment { a: w[0], b: w[1], value, error, abs });
    }
    let total = |heap: &BinaryHeap<Segment>, settled: &[Segment]| {
        let mut v = 0.0;
        let mut e = 0.0;
        let mut m = 0.0;
        for s in heap.iter().chain(settled) {
            v += s.value;
            e += s.error;
            m += s.abs;
        }
        (v, e, m)
    };
    let (mut value, mut error, mut mass) = total(&heap, &settled);
    let mut segments = heap.len();
    let mut converged = true;
    loop {
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Integration { partial: value, error_bound: error });
        }
        // Below twice the per-segment roundoff floor no refinement can help.
        let target = tol.abs.max(tol.rel * value.abs()).max(ROUNDOFF * mass);
        if error <= target {
            break;
        }
        if segments >= tol.max_segments {
            converged = false;
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) <= 4.0 * f64::EPSILON * worst.a.abs().max(worst.b.abs()) {
            settled.push(worst);
            continue;
        }
        let (v1, e1, m1) = gk21(&mut f, worst.a, mid);
        let (v2, e2, m2) = gk21(&mut f, mid, worst.b);
        evaluations += 42;
        segments += 1;
        value += v1 + v2 - worst.value;
        error += e1 + e2 - worst.error;
        mass += m1 + m2 - worst.abs;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1, abs: m1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2, abs: m2 });
        if segments % 64 == 0 {
            (value, error, mass) = total(&heap, &settled);
        }
    }
    let (value, error, _) = total(&heap, &settled);
    if !value.is_finite() {
        return Err(Error::Integration { partial: value, error_bound: error });
    }
    Ok((QuadResult { value, error, evaluations }, converged))
}

/// Sorts, clips to `[lo, hi]` and removes near-duplicate breakpoints.
pub fn normalize_breaks(mut pts: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    pts.retain(|p| p.is_finite());
    pts.push(lo);
    pts.push(hi);
    for p in pts.iter_mut() {
        *p = p.clamp(lo, hi);
    }
    pts.sort_by(f64::total_cmp);
    let span = (hi - lo).abs().max(f64::MIN_POSITIVE);
    let mut out: Vec<f64> = Vec::with_capacity(pts.len());
    for p in pts {
        match out.last() {
            Some(&last) if p - last <= 1e-15 * span.max(p.abs()) => {}
            _ => out.push(p),
        }
    }
    out
}
