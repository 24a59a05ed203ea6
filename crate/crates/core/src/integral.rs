//! Soft-argmax (integral) regression over per-joint heatmap volumes.
//!
//! Volume axis 0 (`p_x`, size `W`) runs along camera-frame x, axis 1 (`p_y`, size `H`) along y
//! and axis 2 (`p_z`, size `D`) along z. Coordinates are 1-based: `p_x ∈ [1, W]`.

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Extent of a heatmap volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VolumeDims {
    pub w: usize,
    pub h: usize,
    pub d: usize,
}

impl VolumeDims {
    pub fn new(w: usize, h: usize, d: usize) -> Result<Self> {
        if w == 0 || h == 0 || d == 0 {
            return Err(Error::InvalidArgument(format!(
                "volume dimensions must be positive, got {w}x{h}x{d}"
            )));
        }
        Ok(Self { w, h, d })
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    pub fn len(&self) -> usize {
        self.w * self.h * self.d
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of the 1-based coordinate `(px, py, pz)`.
    pub fn index(&self, px: usize, py: usize, pz: usize) -> usize {
        debug_assert!((1..=self.w).contains(&px));
        debug_assert!((1..=self.h).contains(&py));
        debug_assert!((1..=self.d).contains(&pz));
        ((pz - 1) * self.h + (py - 1)) * self.w + (px - 1)
    }

    /// 1-based coordinate of a flat index.
    pub fn coord(&self, idx: usize) -> [f64; 3] {
        let px = idx % self.w;
        let py = (idx / self.w) % self.h;
        let pz = idx / (self.w * self.h);
        [(px + 1) as f64, (py + 1) as f64, (pz + 1) as f64]
    }

    /// Geometric centre of the coordinate range.
    pub fn center(&self) -> Vec3 {
        Vec3::new(
            (self.w + 1) as f64 / 2.0,
            (self.h + 1) as f64 / 2.0,
            (self.d + 1) as f64 / 2.0,
        )
    }
}

/// Normalized heatmaps, one `W x H x D` volume per joint.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapVolume {
    dims: VolumeDims,
    joints: Vec<Vec<f64>>,
}

impl HeatmapVolume {
    /// Validates non-negativity and per-joint normalization (to 1e-6).
    pub fn new(dims: VolumeDims, joints: Vec<Vec<f64>>) -> Result<Self> {
        for (k, vol) in joints.iter().enumerate() {
            if vol.len() != dims.len() {
                return Err(Error::InvalidArgument(format!(
                    "joint {k}: volume has {} cells, expected {}",
                    vol.len(),
                    dims.len()
                )));
            }
            if vol.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "joint {k}: heatmap has negative or non-finite entries"
                )));
            }
            let sum: f64 = vol.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidArgument(format!(
                    "joint {k}: heatmap sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { dims, joints })
    }

    /// Softmax over each joint's logit volume.
    pub fn from_logits(dims: VolumeDims, logits: &[Vec<f64>]) -> Result<Self> {
        let joints = logits
            .iter()
            .map(|l| {
                if l.len() != dims.len() {
                    return Err(Error::InvalidArgument(format!(
                        "logit volume has {} cells, expected {}",
                        l.len(),
                        dims.len()
                    )));
                }
                Ok(volume_softmax(l))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dims, joints })
    }

    /// A point mass at the 1-based coordinate `(px, py, pz)` for every joint.
    pub fn point_mass(dims: VolumeDims, num_joints: usize, at: [usize; 3]) -> Result<Self> {
        let mut vol = vec![0.0; dims.len()];
        if !(1..=dims.w).contains(&at[0]) || !(1..=dims.h).contains(&at[1]) || !(1..=dims.d).contains(&at[2]) {
            return Err(Error::InvalidArgument(format!("{at:?} lies outside the volume")));
        }
        vol[dims.index(at[0], at[1], at[2])] = 1.0;
        Ok(Self {
            dims,
            joints: vec![vol; num_joints],
        })
    }

    pub fn dims(&self) -> VolumeDims {
        self.dims
    }

    pub fn num_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn joint(&self, k: usize) -> &[f64] {
        &self.joints[k]
    }
}

/// Numerically stable softmax over a flat volume.
pub fn volume_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

/// Expected coordinate of joint `k` under its heatmap.
pub fn soft_argmax(h: &HeatmapVolume, k: usize) -> Vec3 {
    expectation(h.dims, &h.joints[k])
}

/// Expected coordinate of a single normalized volume.
pub fn expectation(dims: VolumeDims, vol: &[f64]) -> Vec3 {
    let mut acc = [0.0; 3];
    for (idx, &v) in vol.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let c = dims.coord(idx);
        acc[0] += c[0] * v;
        acc[1] += c[1] * v;
        acc[2] += c[2] * v;
    }
    Vec3::from(acc)
}

/// 1-D x and y marginals of joint `k`.
pub fn marginals_xy(h: &HeatmapVolume, k: usize) -> (Vec<f64>, Vec<f64>) {
    let dims = h.dims;
    let vol = &h.joints[k];
    let mut mx = vec![0.0; dims.w];
    let mut my = vec![0.0; dims.h];
    for pz in 1..=dims.d {
        for py in 1..=dims.h {
            for px in 1..=dims.w {
                let v = vol[dims.index(px, py, pz)];
                mx[px - 1] += v;
                my[py - 1] += v;
            }
        }
    }
    (mx, my)
}

/// Expectations of the x and y heat vectors of joint `k`.
pub fn heat_vectors(h: &HeatmapVolume, k: usize) -> (f64, f64) {
    let (mx, my) = marginals_xy(h, k);
    let ex = mx.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
    let ey = my.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
    (ex, ey)
}

/// Pulls `d loss / d J` back to the logits of a softmax-normalized volume.
///
/// With `J = sum_p p * softmax(l)_p`, `dJ/dl_p = h_p (p - J)`.
pub fn soft_argmax_backward_logits(dims: VolumeDims, vol: &[f64], grad_joint: &Vec3, out: &mut [f64]) {
    let j = expectation(dims, vol);
    let gj = grad_joint.dot(&j);
    for (idx, (o, &v)) in out.iter_mut().zip(vol).enumerate() {
        let c = dims.coord(idx);
        let gp = grad_joint.x * c[0] + grad_joint.y * c[1] + grad_joint.z * c[2];
        *o = v * (gp - gj);
    }
}
