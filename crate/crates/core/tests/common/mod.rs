//! Reference implementations used by the integration tests. They share no
//! code with the library and favour the plainest formulation over speed.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Great-circle distance by the haversine formula, on (lat, lon) radians.
pub fn haversine(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let s1 = ((lat2 - lat1) / 2.0).sin();
    let s2 = ((lon2 - lon1) / 2.0).sin();
    let a = s1 * s1 + lat1.cos() * lat2.cos() * s2 * s2;
    2.0 * a.sqrt().min(1.0).asin()
}

/// Haversine on (phi, theta) with theta measured from the zenith.
pub fn haversine_spherical(phi1: f64, theta1: f64, phi2: f64, theta2: f64) -> f64 {
    haversine(PI / 2.0 - theta1, phi1, PI / 2.0 - theta2, phi2)
}

/// Center of cell `(x, y)` as (lat, lon), row 0 at the north.
pub fn cell_center(x: usize, y: usize, w: usize, h: usize) -> (f64, f64) {
    let lon = -PI + 2.0 * PI * (x as f64 + 0.5) / w as f64;
    let lat = PI / 2.0 - PI * (y as f64 + 0.5) / h as f64;
    (lat, lon)
}

/// Gaussian kernel of one viewer re-evaluated cell by cell, row-major.
pub fn gaussian_map(center_lat: f64, center_lon: f64, sigma: f64, w: usize, h: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (lat, lon) = cell_center(x, y, w, h);
            let d = haversine(center_lat, center_lon, lat, lon);
            out.push((-(d * d) / (2.0 * sigma * sigma)).exp());
        }
    }
    out
}

/// Wrapped azimuth difference in (-pi, pi].
pub fn wrapped_diff(a: f64, b: f64) -> f64 {
    let mut d = (a - b) % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    }
    if d <= -PI {
        d += 2.0 * PI;
    }
    d
}

/// Per-axis RMSE in degrees from (phi, theta) pairs.
pub fn rmse_oracle(pred: &[(f64, f64)], truth: &[(f64, f64)]) -> (f64, f64) {
    let mut sp = 0.0;
    let mut st = 0.0;
    for i in 0..pred.len() {
        let dp = wrapped_diff(pred[i].0, truth[i].0).to_degrees();
        let dt = (pred[i].1 - truth[i].1).to_degrees();
        sp += dp * dp;
        st += dt * dt;
    }
    let n = pred.len() as f64;
    ((sp / n).sqrt(), (st / n).sqrt())
}

/// Mean, population std and per-step mean of haversine errors.
pub fn orthodromic_oracle(pred: &[Vec<(f64, f64)>], truth: &[Vec<(f64, f64)>]) -> (f64, f64, Vec<f64>) {
    let horizon = truth[0].len();
    let mut all = Vec::new();
    let mut per_step = vec![0.0; horizon];
    for w in 0..pred.len() {
        for s in 0..horizon {
            let (p, t) = (pred[w][s], truth[w][s]);
            let d = haversine_spherical(p.0, p.1, t.0, t.1);
            per_step[s] += d;
            all.push(d);
        }
    }
    for v in &mut per_step {
        *v /= pred.len() as f64;
    }
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let mut var = 0.0;
    for d in &all {
        var += (d - mean) * (d - mean);
    }
    (mean, (var / all.len() as f64).sqrt(), per_step)
}

/// Central difference of `f` with respect to `x[i]`.
pub fn central_diff(x: &mut [f64], i: usize, h: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[i];
    x[i] = orig + h;
    let up = f(x);
    x[i] = orig - h;
    let down = f(x);
    x[i] = orig;
    (up - down) / (2.0 * h)
}

/// `|a - b| / max(|a|, |b|)` over whole gradient vectors, with a floor so
/// vanishing gradients compare absolutely.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let mut diff = 0.0;
    let mut na = 0.0;
    let mut nn = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        diff += (a - n) * (a - n);
        na += a * a;
        nn += n * n;
    }
    diff.sqrt() / na.sqrt().max(nn.sqrt()).max(1e-8)
}

/// Rolling mean over `window` consecutive values.
pub fn rolling_mean(v: &[f64], window: usize) -> Vec<f64> {
    v.windows(window).map(|w| w.iter().sum::<f64>() / window as f64).collect()
}
