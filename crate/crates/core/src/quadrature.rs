//! Globally adaptive Gauss–Kronrod (7/15) quadrature in one and two dimensions.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rel: 1e-10, abs: 1e-14, max_intervals: 400 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Estimate {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut abs_sum = fc.abs() * WGK[7];
    for i in 0..7 {
        let dx = hw * XGK[i];
        let (f1, f2) = (f(c - dx), f(c + dx));
        k += WGK[i] * (f1 + f2);
        abs_sum += WGK[i] * (f1.abs() + f2.abs());
        if i % 2 == 1 {
            g += WG[i / 2] * (f1 + f2);
        }
    }
    let value = k * hw;
    let raw = ((k - g) * hw).abs();
    // QUADPACK's rescaling of the Gauss/Kronrod difference.
    let scale = abs_sum * hw.abs();
    let error = if raw == 0.0 {
        0.0
    } else if scale > 0.0 {
        (scale * (200.0 * raw / scale).powf(1.5).min(1.0)).max(raw * 1e-3)
    } else {
        raw
    };
    Estimate { value, error }
}

struct Piece {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

/// ∫_a^b f over the given breakpoints, bisecting the worst interval until
/// the summed error estimate meets the tolerance.
pub fn integrate(mut f: impl FnMut(f64) -> f64, breaks: &[f64], tol: Tolerance) -> Estimate {
    let mut heap = BinaryHeap::new();
    let mut total = Estimate { value: 0.0, error: 0.0 };
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let est = gk15(&mut f, w[0], w[1]);
        total.value += est.value;
        total.error += est.error;
        heap.push(Piece { a: w[0], b: w[1], est });
    }
    let mut count = heap.len();
    while total.error > tol.abs.max(tol.rel * total.value.abs()) && count < tol.max_intervals {
        let Some(worst) = heap.pop() else { break };
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            heap.push(worst);
            break;
        }
        let l = gk15(&mut f, worst.a, m);
        let r = gk15(&mut f, m, worst.b);
        total.value += l.value + r.value - worst.est.value;
        total.error += l.error + r.error - worst.est.error;
        heap.push(Piece { a: worst.a, b: m, est: l });
        heap.push(Piece { a: m, b: worst.b, est: r });
        count += 1;
    }
    // re-sum to shed the drift of incremental updates
    let mut value = 0.0;
    let mut error = 0.0;
    let mut pieces: Vec<Piece> = heap.into_vec();
    pieces.sort_by(|p, q| p.a.total_cmp(&q.a));
    for p in &pieces {
        value += p.est.value;
        error += p.est.error;
    }
    Estimate { value, error }
}

/// Breakpoints for [a, b] refined geometrically around `center` on the
/// length scale `width`, so narrow kernels are seen by the first pass.
pub fn ladder(a: f64, b: f64, center: f64, width: f64) -> Vec<f64> {
    let mut out = vec![a, b];
    if center > a && center < b {
        out.push(center);
    }
    if width > 0.0 {
        let mut d = 0.25 * width;
        while d < (b - a) {
            for x in [center - d, center + d] {
                if x > a && x < b {
                    out.push(x);
                }
            }
            d *= 2.0;
        }
    }
    out.sort_by(|x, y| x.total_cmp(y));
    out.dedup();
    out
}

/// Iterated integral ∫∫ f(s, t) dt ds with breakpoints per axis; the inner
/// breakpoints may depend on s.
pub fn integrate_2d(f: impl Fn(f64, f64) -> f64, outer: &[f64], inner: impl Fn(f64) -> Vec<f64>, tol: Tolerance) -> Estimate {
    let inner_tol = Tolerance { rel: tol.rel * 0.1, abs: tol.abs * 0.1, ..tol };
    let mut inner_error = 0.0;
    let est = integrate(
        |s| {
            let e = integrate(|t| f(s, t), &inner(s), inner_tol);
            inner_error += e.error;
            e.value
        },
        outer,
        tol,
    );
    Estimate { value: est.value, error: est.error + inner_error.min(est.value.abs() * tol.rel) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_exact() {
        let e = integrate(|x| x.powi(10), &[0.0, 1.0], Tolerance::default());
        assert!((e.value - 1.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn narrow_gaussian() {
        let s: f64 = 1e-3;
        let e = integrate(|x| (-x * x / (2.0 * s * s)).exp(), &ladder(-3.0, 5.0, 0.0, s), Tolerance::default());
        let exact = s * (2.0 * PI).sqrt();
        assert!(((e.value - exact) / exact).abs() < 1e-10, "{e:?}");
    }

    #[test]
    fn disk_area_2d() {
        let e = integrate_2d(|r, _| r, &[0.0, 1.0], |_| vec![0.0, 2.0 * PI], Tolerance::default());
        assert!((e.value - PI).abs() < 1e-13);
    }
}
