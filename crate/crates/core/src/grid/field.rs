use serde::{Deserialize, Serialize};

use super::GridSpec;

/// Values that can be blended by trilinear interpolation.
pub trait FieldValue: Copy + Send + Sync + 'static {
    fn zero() -> Self;
    /// `self + w * other`
    fn add_scaled(self, w: f64, other: Self) -> Self;
}

impl FieldValue for f64 {
    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn add_scaled(self, w: f64, other: Self) -> Self {
        self + w * other
    }
}

impl FieldValue for [f64; 3] {
    #[inline]
    fn zero() -> Self {
        [0.0; 3]
    }
    #[inline]
    fn add_scaled(self, w: f64, other: Self) -> Self {
        [self[0] + w * other[0], self[1] + w * other[1], self[2] + w * other[2]]
    }
}

/// Dense per-grid-point storage, x fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field3<T> {
    dims: [usize; 3],
    data: Vec<T>,
}

pub type ScalarField = Field3<f64>;
pub type VectorField = Field3<[f64; 3]>;

impl<T: FieldValue> Field3<T> {
    pub fn filled(dims: [usize; 3], value: T) -> Self {
        Field3 {
            dims,
            data: vec![value; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn zeros(dims: [usize; 3]) -> Self {
        Self::filled(dims, T::zero())
    }

    /// Wraps `data`; `None` when the length does not match `dims`.
    pub fn from_vec(dims: [usize; 3], data: Vec<T>) -> Option<Self> {
        (data.len() == dims[0] * dims[1] * dims[2]).then_some(Field3 { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut([usize; 3]) -> T) -> Self {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    data.push(f([i, j, k]));
                }
            }
        }
        Field3 { dims, data }
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn index(&self, p: [usize; 3]) -> usize {
        p[0] + self.dims[0] * (p[1] + self.dims[1] * p[2])
    }

    #[inline]
    pub fn get(&self, p: [usize; 3]) -> T {
        self.data[self.index(p)]
    }

    #[inline]
    pub fn set(&mut self, p: [usize; 3], value: T) {
        let idx = self.index(p);
        self.data[idx] = value;
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Trilinear blend of the eight grid values around `pos` (metres).
    pub fn sample(&self, grid: &GridSpec, pos: [f64; 3]) -> Result<T, OutsideDomain> {
        debug_assert_eq!(self.dims, grid.dims());
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let n = self.dims[a];
            let f = pos[a] / grid.h;
            let max = (n - 1) as f64;
            if !(f >= -SNAP && f <= max + SNAP) {
                return Err(OutsideDomain { position: pos });
            }
            let f = f.clamp(0.0, max);
            let mut i0 = (f.floor() as usize).min(n - 2);
            let mut t = f - i0 as f64;
            // land exactly on grid points despite rounding in pos / h
            if t < SNAP {
                t = 0.0;
            } else if t > 1.0 - SNAP {
                if i0 + 2 < n {
                    i0 += 1;
                    t = 0.0;
                } else {
                    t = 1.0;
                }
            }
            base[a] = i0;
            frac[a] = t;
        }
        let mut acc = T::zero();
        for corner in 0..8 {
            let mut w = 1.0;
            let mut p = base;
            for a in 0..3 {
                if corner >> a & 1 == 1 {
                    w *= frac[a];
                    p[a] += 1;
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w != 0.0 {
                acc = acc.add_scaled(w, self.get(p));
            }
        }
        Ok(acc)
    }
}

const SNAP: f64 = 1e-9;

/// A sample position fell outside the grid box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutsideDomain {
    pub position: [f64; 3],
}

impl std::fmt::Display for OutsideDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "position {:?} outside the cell", self.position)
    }
}

impl std::error::Error for OutsideDomain {}

pub fn sample_scalar(field: &ScalarField, grid: &GridSpec, pos: [f64; 3]) -> Result<f64, OutsideDomain> {
    field.sample(grid, pos)
}

pub fn sample_vector(field: &VectorField, grid: &GridSpec, pos: [f64; 3]) -> Result<[f64; 3], OutsideDomain> {
    field.sample(grid, pos)
}
