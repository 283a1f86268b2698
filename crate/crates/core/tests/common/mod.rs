//! Reference implementations shared by the integration tests.

#![allow(dead_code)]

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use egostitch::model::{axis_angle, BinaryMask, Intrinsics, Pose, Sim3};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

impl Dd {
    pub fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact `a - b`.
    pub fn diff(a: f64, b: f64) -> Dd {
        let (hi, lo) = two_sum(a, -b);
        Dd { hi, lo }
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * o.lo + self.lo * o.hi));
        Dd { hi, lo }
    }

    /// Multiplication by a power of two, exact away from the subnormal range.
    pub fn scale2(self, k: i32) -> Dd {
        let f = 2f64.powi(k);
        Dd { hi: self.hi * f, lo: self.lo * f }
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.add(o.mul(Dd::from(q1)).neg());
        let q2 = r.hi / o.hi;
        let r = r.add(o.mul(Dd::from(q2)).neg());
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::from(q3))
    }

    /// `e^x` to roughly 30 significant digits.
    pub fn exp(self) -> Dd {
        if self.hi < -745.0 {
            return Dd::from(0.0);
        }
        let k = (self.hi / LN2.hi).round();
        let r = self.add(LN2.mul(Dd::from(k)).neg()).scale2(-10);
        let mut term = Dd::from(1.0);
        let mut sum = Dd::from(1.0);
        for n in 1..=20 {
            term = term.mul(r).div(Dd::from(n as f64));
            sum = sum.add(term);
        }
        for _ in 0..10 {
            sum = sum.mul(sum);
        }
        // split the exponent so neither factor overflows or flushes early
        let k = k as i32;
        sum.scale2(k / 2).scale2(k - k / 2)
    }
}

/// Softmax over the entries with `keep[i]`, in double-double arithmetic.
pub fn softmax_reference(logits: &[f64], keep: &[bool]) -> Vec<f64> {
    let m = logits
        .iter()
        .zip(keep)
        .filter(|(_, k)| **k)
        .map(|(l, _)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<Dd> = logits
        .iter()
        .zip(keep)
        .map(|(l, k)| if *k { Dd::diff(*l, m).exp() } else { Dd::from(0.0) })
        .collect();
    let total = e.iter().fold(Dd::from(0.0), |acc, x| acc.add(*x));
    e.iter().map(|x| x.div(total).hi).collect()
}

pub fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> nalgebra::Matrix3<f64> {
    let axis = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    axis_angle(&axis, rng.random_range(-max_angle..=max_angle))
}

pub fn random_pose(rng: &mut ChaCha8Rng, spread: f64) -> Pose {
    let t = Vector3::new(
        rng.random_range(-spread..spread),
        rng.random_range(-spread..spread),
        rng.random_range(-spread..spread),
    );
    Pose::new(random_rotation(rng, std::f64::consts::PI), t).unwrap()
}

pub fn random_sim3(rng: &mut ChaCha8Rng) -> Sim3 {
    let t = Vector3::new(
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
    );
    Sim3::new(rng.random_range(0.5..2.0), random_rotation(rng, std::f64::consts::PI), t).unwrap()
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, half: f64) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| {
            Vector3::new(
                rng.random_range(-half..half),
                rng.random_range(-half..half),
                rng.random_range(-half..half),
            )
        })
        .collect()
}

pub fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |_, _| rng.random_bool(density))
}

pub fn random_intrinsics(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Intrinsics {
    let f = rng.random_range(0.5..1.5) * w as f64;
    Intrinsics::new(f, f, w as f64 / 2.0, h as f64 / 2.0, w, h).unwrap()
}

/// Linear-scan nearest-neighbor distance.
pub fn brute_nn(x: &Vector3<f64>, set: &[Vector3<f64>]) -> f64 {
    set.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min)
}

/// `½·(mean_{q∈b} d(q, a) + mean_{p∈a} d(p, b))` by double loop.
pub fn brute_symmetric(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    let mut ab = 0.0;
    for q in b {
        ab += brute_nn(q, a);
    }
    let mut ba = 0.0;
    for p in a {
        ba += brute_nn(p, b);
    }
    0.5 * (ab / b.len() as f64 + ba / a.len() as f64)
}

/// Lifts valid pixels clear of `exclude`, row by row.
pub fn brute_lift(
    depth: &[f64],
    k: &Intrinsics,
    pose: &Pose,
    exclude: Option<&BinaryMask>,
) -> Vec<Vector3<f64>> {
    let mut out = Vec::new();
    for v in 0..k.height {
        for u in 0..k.width {
            let z = depth[v * k.width + u];
            if !(z.is_finite() && z > 0.0) || exclude.is_some_and(|m| m.get(u, v)) {
                continue;
            }
            let cam = Vector3::new(
                (u as f64 - k.cx) / k.fx * z,
                (v as f64 - k.cy) / k.fy * z,
                z,
            );
            out.push(pose.rotation() * cam + pose.translation());
        }
    }
    out
}

/// Pixel a world point rounds to, if any.
pub fn brute_pixel(p: &Vector3<f64>, pose: &Pose, k: &Intrinsics) -> Option<(usize, usize)> {
    let c = pose.rotation().transpose() * (p - pose.translation());
    if !(c.z > 0.0) {
        return None;
    }
    let u = (k.fx * c.x / c.z + k.cx).round();
    let v = (k.fy * c.y / c.z + k.cy).round();
    (u >= 0.0 && v >= 0.0 && u < k.width as f64 && v < k.height as f64).then_some((u as usize, v as usize))
}
