use super::Curve;
use crate::Vec3;

/// Segments per bounding box in the prefilter.
const CHUNK: usize = 8;

/// Minimum distance between the polylines of two curves
/// (exact segment–segment distance with an AABB prefilter).
pub fn min_distance(a: &Curve, b: &Curve) -> f64 {
    let sa: Vec<(Vec3, Vec3)> = a.segments().collect();
    let sb: Vec<(Vec3, Vec3)> = b.segments().collect();
    let ba = boxes(&sa);
    let bb = boxes(&sb);
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(ba.len() * bb.len());
    for (i, x) in ba.iter().enumerate() {
        for (j, y) in bb.iter().enumerate() {
            pairs.push((box_gap(x, y), i, j));
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut best = f64::INFINITY;
    for (gap, i, j) in pairs {
        if gap >= best {
            break;
        }
        for p in &sa[i * CHUNK..((i + 1) * CHUNK).min(sa.len())] {
            for q in &sb[j * CHUNK..((j + 1) * CHUNK).min(sb.len())] {
                best = best.min(segment_segment_distance(p.0, p.1, q.0, q.1));
            }
        }
    }
    best
}

/// Distance from a point to the polyline of a curve.
pub fn point_curve_distance(curve: &Curve, x: &Vec3) -> f64 {
    curve
        .segments()
        .map(|(a, b)| point_segment_distance(x, a, b))
        .fold(f64::INFINITY, f64::min)
}

fn point_segment_distance(x: &Vec3, a: Vec3, b: Vec3) -> f64 {
    let d = b - a;
    let l2 = d.norm_squared();
    let t = if l2 > 0.0 {
        ((x - a).dot(&d) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + d * t - x).norm()
}

type Aabb = (Vec3, Vec3);

fn boxes(segs: &[(Vec3, Vec3)]) -> Vec<Aabb> {
    segs.chunks(CHUNK)
        .map(|c| {
            let mut lo = Vec3::repeat(f64::INFINITY);
            let mut hi = Vec3::repeat(f64::NEG_INFINITY);
            for (p, q) in c {
                lo = lo.inf(p).inf(q);
                hi = hi.sup(p).sup(q);
            }
            (lo, hi)
        })
        .collect()
}

fn box_gap(a: &Aabb, b: &Aabb) -> f64 {
    let mut g2 = 0.0;
    for k in 0..3 {
        let d = (a.0[k] - b.1[k]).max(b.0[k] - a.1[k]).max(0.0);
        g2 += d * d;
    }
    g2.sqrt()
}

/// Exact distance between segments `[p1, q1]` and `[p2, q2]`.
pub fn segment_segment_distance(p1: Vec3, q1: Vec3, p2: Vec3, q2: Vec3) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let tiny = 1e-300;
    let (s, t);
    if a <= tiny && e <= tiny {
        return r.norm();
    }
    if a <= tiny {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= tiny {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 1e-14 * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}
