//! Shading data for illuminated streamlines: headlight intensity table,
//! tangent texture transform, colormaps, linear fog and autofocus.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LightingParams {
    pub ambient: f64,
    pub diffuse: f64,
    pub specular: f64,
    /// Specular exponent `s`.
    pub shininess: f64,
    /// Diffuse compensation exponent `p`.
    pub diffuse_exponent: f64,
}

impl Default for LightingParams {
    fn default() -> Self {
        LightingParams {
            ambient: 0.1,
            diffuse: 0.6,
            specular: 0.3,
            shininess: 16.0,
            diffuse_exponent: 4.7635,
        }
    }
}

impl LightingParams {
    pub fn validate(&self) -> Result<()> {
        let k = [self.ambient, self.diffuse, self.specular];
        if k.iter().any(|v| !(v.is_finite() && (0.0..=1.0).contains(v))) {
            return Err(Error::Configuration("lighting intensities must lie in [0, 1]".into()));
        }
        if !(self.shininess.is_finite() && self.shininess >= 1.0) {
            return Err(Error::Configuration("specular exponent must be at least 1".into()));
        }
        if !(self.diffuse_exponent.is_finite() && self.diffuse_exponent > 0.0) {
            return Err(Error::Configuration("diffuse exponent must be positive".into()));
        }
        Ok(())
    }

    /// Intensity for a tangent with `L.T = u` when light and eye coincide.
    pub fn headlight(&self, u: f64) -> f64 {
        let s2 = (1.0 - u * u).max(0.0);
        self.ambient
            + self.diffuse * s2.sqrt().powf(self.diffuse_exponent)
            + self.specular * (1.0 - 2.0 * u * u).clamp(0.0, 1.0).powf(self.shininess)
    }
}

/// Exact headlight intensity as a function of the texture coordinate `t1`.
pub fn light_profile(params: &LightingParams, t1: f64) -> f64 {
    params.headlight(2.0 * t1 - 1.0)
}

/// Intensities sampled at `t1 = i / (R - 1)`, with `L.T = 2 t1 - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LightTable {
    pub params: LightingParams,
    pub entries: Vec<f64>,
}

impl LightTable {
    pub const DEFAULT_RESOLUTION: usize = 256;

    pub fn build(params: LightingParams, resolution: usize) -> Result<Self> {
        params.validate()?;
        if resolution < 2 {
            return Err(Error::Configuration("light table needs at least 2 entries".into()));
        }
        let last = (resolution - 1) as f64;
        let entries = (0..resolution)
            .map(|i| {
                // mirror the index so both halves evaluate identical u^2
                let m = i.min(resolution - 1 - i) as f64;
                let u = 1.0 - 2.0 * m / last;
                params.headlight(u)
            })
            .collect();
        Ok(LightTable { params, entries })
    }

    pub fn resolution(&self) -> usize {
        self.entries.len()
    }

    /// Linear interpolation between entries at `t1` in `[0, 1]`.
    pub fn lookup(&self, t1: f64) -> f64 {
        let last = self.entries.len() - 1;
        let f = t1.clamp(0.0, 1.0) * last as f64;
        let i = (f.floor() as usize).min(last - 1);
        let w = f - i as f64;
        self.entries[i] * (1.0 - w) + self.entries[i + 1] * w
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Reference intensity for light `l`, eye `v` and line tangent `t`.
pub fn line_intensity(l: [f64; 3], v: [f64; 3], t: [f64; 3], params: &LightingParams) -> f64 {
    let lt = dot(l, t);
    let vt = dot(v, t);
    let ln = (1.0 - lt * lt).max(0.0).sqrt();
    let vn = (1.0 - vt * vt).max(0.0).sqrt();
    let vr = ln * vn - lt * vt;
    params.ambient + params.diffuse * ln.powf(params.diffuse_exponent) + params.specular * vr.max(0.0).powf(params.shininess)
}

/// Homogeneous matrix mapping `(T, 1)` to `(t1, t2, 0, 1)` with
/// `t1 = (L.T + 1) / 2` and `t2 = (V.T + 1) / 2`. Row-major.
pub fn texture_transform(l: [f64; 3], v: [f64; 3]) -> [[f64; 4]; 4] {
    [
        [0.5 * l[0], 0.5 * l[1], 0.5 * l[2], 0.5],
        [0.5 * v[0], 0.5 * v[1], 0.5 * v[2], 0.5],
        [0.0; 4],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

pub fn apply_transform(m: &[[f64; 4]; 4], t: [f64; 3]) -> [f64; 4] {
    let h = [t[0], t[1], t[2], 1.0];
    m.map(|row| row.iter().zip(h).map(|(a, b)| a * b).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FogParams {
    pub z_start: f64,
    pub z_end: f64,
    pub start_factor: f64,
    pub stop_factor: f64,
}

/// Linear depth cue: 1 at `z_start`, 0 at `z_end`, clamped.
pub fn fog_factor(z: f64, fog: &FogParams) -> f64 {
    ((fog.z_end - z) / (fog.z_end - fog.z_start)).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Autofocus {
    pub focus: [f64; 3],
    pub radius: f64,
    pub distance: f64,
    pub fog: FogParams,
}

/// Fits the bounding sphere of a box into a view cone of `fov` radians.
pub fn autofocus(lo: [f64; 3], hi: [f64; 3], fov: f64, start_factor: f64, stop_factor: f64) -> Result<Autofocus> {
    let size = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    if size.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidGeometry("autofocus target box is degenerate".into()));
    }
    if !(fov > 0.0 && fov < std::f64::consts::PI) {
        return Err(Error::Configuration("field of view must lie in (0, pi)".into()));
    }
    let radius = 0.5 * dot(size, size).sqrt();
    let distance = radius / (0.5 * fov).sin();
    Ok(Autofocus {
        focus: [0, 1, 2].map(|a| 0.5 * (lo[a] + hi[a])),
        radius,
        distance,
        fog: fog_for(distance, radius, start_factor, stop_factor),
    })
}

pub fn fog_for(distance: f64, radius: f64, start_factor: f64, stop_factor: f64) -> FogParams {
    FogParams {
        z_start: distance - start_factor * radius,
        z_end: distance + stop_factor * radius,
        start_factor,
        stop_factor,
    }
}

pub const DEFAULT_FOV: f64 = std::f64::consts::FRAC_PI_4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorMap {
    Jet,
    Summer,
}

impl ColorMap {
    pub const ALL: [ColorMap; 2] = [ColorMap::Jet, ColorMap::Summer];

    pub fn name(self) -> &'static str {
        match self {
            ColorMap::Jet => "jet",
            ColorMap::Summer => "summer",
        }
    }

    /// Evenly spaced control colours.
    pub fn control_points(self) -> &'static [[f64; 3]] {
        match self {
            ColorMap::Jet => &[
                [0.0, 0.0, 0.5],
                [0.0, 0.0, 1.0],
                [0.0, 1.0, 1.0],
                [1.0, 1.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.5, 0.0, 0.0],
            ],
            ColorMap::Summer => &[[0.0, 0.5, 0.4], [1.0, 1.0, 0.4]],
        }
    }
}

/// Colour for `value` scaled into `[v_min, v_max]`, clamped at the ends.
pub fn map_color(value: f64, v_min: f64, v_max: f64, cmap: ColorMap) -> [f64; 3] {
    let pts = cmap.control_points();
    let t = if v_max > v_min {
        ((value - v_min) / (v_max - v_min)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let t = if t.is_nan() { 0.0 } else { t };
    let f = t * (pts.len() - 1) as f64;
    let i = (f.floor() as usize).min(pts.len() - 2);
    let w = f - i as f64;
    [0, 1, 2].map(|c| pts[i][c] * (1.0 - w) + pts[i + 1][c] * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> LightingParams {
        LightingParams::default()
    }

    #[test]
    fn table_ends_and_centre() {
        let p = params();
        let t = LightTable::build(p, 257).unwrap();
        assert_eq!(t.entries[0], p.ambient);
        assert_eq!(t.entries[256], p.ambient);
        assert_eq!(t.entries[128], p.ambient + p.diffuse + p.specular);
    }

    #[test]
    fn profile_ends_and_centre() {
        let p = params();
        assert_eq!(light_profile(&p, 0.0), p.ambient);
        assert_eq!(light_profile(&p, 1.0), p.ambient);
        assert_eq!(light_profile(&p, 0.5), p.ambient + p.diffuse + p.specular);
    }

    #[test]
    fn table_is_symmetric() {
        let t = LightTable::build(params(), 256).unwrap();
        for i in 0..256 {
            assert_eq!(t.entries[i], t.entries[255 - i]);
        }
    }

    #[test]
    fn diffuse_only_at_specular_cutoff() {
        let p = params();
        let u = std::f64::consts::FRAC_1_SQRT_2;
        let expected = p.ambient + p.diffuse * 2f64.powf(-p.diffuse_exponent / 2.0);
        assert!((p.headlight(u) - expected).abs() < 1e-12);
    }

    #[test]
    fn two_vector_oracle_limits() {
        let p = params();
        let l = [0.0, 0.0, 1.0];
        assert!((line_intensity(l, l, [1.0, 0.0, 0.0], &p) - (p.ambient + p.diffuse + p.specular)).abs() < 1e-15);
        assert_eq!(line_intensity(l, l, l, &p), p.ambient);
    }

    #[test]
    fn texture_coordinates() {
        let l = [0.0, 0.6, 0.8];
        let v = [1.0, 0.0, 0.0];
        let m = texture_transform(l, v);
        assert!((apply_transform(&m, l)[0] - 1.0).abs() < 1e-15);
        assert!((apply_transform(&m, [1.0, 0.0, 0.0])[0] - 0.5).abs() < 1e-15);
        assert_eq!(apply_transform(&m, l)[3], 1.0);
    }

    #[test]
    fn fog_ramp() {
        let fog = fog_for(10.0, 2.0, 1.0, 1.0);
        assert_eq!((fog.z_start, fog.z_end), (8.0, 12.0));
        assert_eq!(fog_factor(8.0, &fog), 1.0);
        assert_eq!(fog_factor(12.0, &fog), 0.0);
        assert_eq!(fog_factor(10.0, &fog), 0.5);
        assert_eq!(fog_factor(20.0, &fog), 0.0);
        assert_eq!(fog_for(10.0, 2.0, 2.0, 1.0).z_start, 6.0);
    }

    #[test]
    fn autofocus_unit_cube() {
        let a = autofocus([0.0; 3], [1.0; 3], DEFAULT_FOV, 1.0, 1.0).unwrap();
        assert!((a.radius - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(a.focus, [0.5; 3]);
        assert!((a.distance - a.radius / (DEFAULT_FOV / 2.0).sin()).abs() < 1e-15);
        assert!(autofocus([0.0; 3], [1.0, 0.0, 1.0], DEFAULT_FOV, 1.0, 1.0).is_err());
    }

    #[test]
    fn colormap_ends() {
        for cmap in ColorMap::ALL {
            let pts = cmap.control_points();
            assert_eq!(map_color(0.0, 0.0, 1.0, cmap), pts[0]);
            assert_eq!(map_color(1.0, 0.0, 1.0, cmap), pts[pts.len() - 1]);
            assert_eq!(map_color(-5.0, 0.0, 1.0, cmap), pts[0]);
        }
        assert_eq!(map_color(0.4, 0.0, 1.0, ColorMap::Jet), [0.0, 1.0, 1.0]);
    }

    proptest! {
        #[test]
        fn intensities_bounded(u in -1.0..=1.0f64) {
            let p = params();
            let i = p.headlight(u);
            prop_assert!(i >= 0.0 && i <= p.ambient + p.diffuse + p.specular + 1e-15);
        }

        #[test]
        fn fog_monotone(a in -5.0..20.0f64, b in -5.0..20.0f64) {
            let fog = fog_for(10.0, 2.0, 1.0, 1.0);
            let (near, far) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(fog_factor(near, &fog) >= fog_factor(far, &fog));
        }

        #[test]
        fn texture_transform_is_linear(a in -1.0..1.0f64, b in -1.0..1.0f64, w in 0.0..1.0f64) {
            let m = texture_transform([0.0, 0.0, 1.0], [0.0, 1.0, 0.0]);
            let t0 = [a, b, 0.3];
            let t1 = [b, 0.2, a];
            let blend = [0, 1, 2].map(|c| t0[c] * (1.0 - w) + t1[c] * w);
            let expect = apply_transform(&m, t0)[0] * (1.0 - w) + apply_transform(&m, t1)[0] * w;
            prop_assert!((apply_transform(&m, blend)[0] - expect).abs() < 1e-12);
        }
    }
}
