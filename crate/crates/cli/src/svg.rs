//! Emit-only SVG: one closed polyline for the level set, one open polyline
//! per trajectory.

use std::fmt::Write as _;

use nalgebra::DVector;
use swlyap::synth::Candidate;

use crate::level_radius;

pub const LEVEL_SAMPLES: usize = 720;
const SIZE: f64 = 512.0;
const PAD: f64 = 16.0;

/// Points of `{F = 1}` at `samples` equally spaced angles.
pub fn level_set(f: &dyn Candidate, samples: usize) -> swlyap::Result<Vec<DVector<f64>>> {
    (0..samples)
        .map(|k| {
            let th = std::f64::consts::TAU * k as f64 / samples as f64;
            let u = DVector::from_vec(vec![th.cos(), th.sin()]);
            let r = level_radius(f, &u);
            if r.is_finite() && r > 0.0 {
                Ok(u * r)
            } else {
                Err(swlyap::Error::NumericDomain(format!(
                    "candidate is not positive along angle {th:.6}"
                )))
            }
        })
        .collect()
}

fn extent<'a>(pts: impl Iterator<Item = &'a DVector<f64>>) -> f64 {
    pts.map(|p| p[0].abs().max(p[1].abs())).fold(0.0, f64::max)
}

fn polyline(out: &mut String, class: &str, pts: &[(f64, f64)]) {
    let _ = write!(out, "  <polyline class=\"{class}\" fill=\"none\" points=\"");
    for (i, (x, y)) in pts.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{x:.4},{y:.4}");
    }
    out.push_str("\"/>\n");
}

pub fn document(level: &[DVector<f64>], overlays: &[Vec<DVector<f64>>]) -> String {
    let r = extent(level.iter().chain(overlays.iter().flatten())).max(f64::MIN_POSITIVE);
    let c = SIZE / 2.0;
    let s = (c - PAD) / r;
    // SVG y grows downward.
    let map = |p: &DVector<f64>| (c + s * p[0], c - s * p[1]);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n"
    );
    let _ = writeln!(
        out,
        "  <style>.level{{stroke:#1f4e9c;stroke-width:1.5}} .trajectory{{stroke:#c0392b;stroke-width:0.8}}</style>"
    );
    let mut ring: Vec<(f64, f64)> = level.iter().map(map).collect();
    if let Some(first) = ring.first().copied() {
        ring.push(first);
    }
    polyline(&mut out, "level", &ring);
    for traj in overlays {
        let pts: Vec<(f64, f64)> = traj.iter().map(map).collect();
        polyline(&mut out, "trajectory", &pts);
    }
    out.push_str("</svg>\n");
    out
}
