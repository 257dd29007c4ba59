//! Frame augmentation: exact horizontal flips and random affine warps
//! (rotation, shift, zoom) with bilinear sampling and reflection fill.

use rand::Rng;

use super::Frame;

/// Horizontal mirror; an exact involution.
pub fn flip_h(frame: &Frame) -> Frame {
    let n = frame.size;
    let mut data = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            data[r * n + c] = frame.data[r * n + (n - 1 - c)];
        }
    }
    Frame {
        size: n,
        data,
        t: frame.t,
    }
}

/// Augmentation ranges used during codec pretraining.
#[derive(Clone, Copy, Debug)]
pub struct AugmentConfig {
    pub max_rotate_deg: f64,
    pub max_shift_frac: f64,
    pub zoom_min: f64,
    pub zoom_max: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            max_rotate_deg: 10.0,
            max_shift_frac: 0.10,
            zoom_min: 0.9,
            zoom_max: 1.1,
        }
    }
}

fn reflect(mut i: isize, n: isize) -> usize {
    // symmetric reflection: ...cba|abc...cba|abc...
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

fn bilinear_reflect(frame: &Frame, y: f64, x: f64) -> f64 {
    let n = frame.size as isize;
    let y0 = y.floor();
    let x0 = x.floor();
    let dy = y - y0;
    let dx = x - x0;
    let (r0, r1) = (reflect(y0 as isize, n), reflect(y0 as isize + 1, n));
    let (c0, c1) = (reflect(x0 as isize, n), reflect(x0 as isize + 1, n));
    let s = frame.size;
    let v00 = frame.data[r0 * s + c0];
    let v01 = frame.data[r0 * s + c1];
    let v10 = frame.data[r1 * s + c0];
    let v11 = frame.data[r1 * s + c1];
    v00 * (1.0 - dy) * (1.0 - dx) + v01 * (1.0 - dy) * dx + v10 * dy * (1.0 - dx) + v11 * dy * dx
}

/// Applies a rotation/zoom/shift warp with the given parameters (rotation in
/// radians, shift in pixels).
pub fn affine_warp(frame: &Frame, rot: f64, zoom: f64, shift_y: f64, shift_x: f64) -> Frame {
    let n = frame.size;
    let cy = (n as f64 - 1.0) / 2.0;
    let cx = cy;
    let (sin, cos) = rot.sin_cos();
    let mut data = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            // destination → source: undo shift, then rotate back and unzoom
            let yd = r as f64 - cy - shift_y;
            let xd = c as f64 - cx - shift_x;
            let ys = (cos * yd + sin * xd) / zoom + cy;
            let xs = (-sin * yd + cos * xd) / zoom + cx;
            data[r * n + c] = bilinear_reflect(frame, ys, xs).clamp(-1.0, 1.0);
        }
    }
    Frame {
        size: n,
        data,
        t: frame.t,
    }
}

/// Seeded random warp within the configured ranges, plus a coin-flip
/// horizontal mirror.
pub fn random_augment(frame: &Frame, rng: &mut impl Rng, cfg: &AugmentConfig) -> Frame {
    let base = if rng.random::<bool>() {
        flip_h(frame)
    } else {
        frame.clone()
    };
    let rot = rng.random_range(-cfg.max_rotate_deg..=cfg.max_rotate_deg).to_radians();
    let zoom = rng.random_range(cfg.zoom_min..=cfg.zoom_max);
    let max_shift = cfg.max_shift_frac * frame.size as f64;
    let sy = rng.random_range(-max_shift..=max_shift);
    let sx = rng.random_range(-max_shift..=max_shift);
    affine_warp(&base, rot, zoom, sy, sx)
}
