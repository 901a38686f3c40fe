use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of a per-slice tensor: classes × height × width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub classes: usize,
    pub height: usize,
    pub width: usize,
}

impl Dims {
    pub fn new(classes: usize, height: usize, width: usize) -> Result<Self> {
        let dims = Dims {
            classes,
            height,
            width,
        };
        dims.validate()?;
        Ok(dims)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let reject = |reason| {
            Err(Error::InvalidDimensions {
                classes: self.classes,
                height: self.height,
                width: self.width,
                reason,
            })
        };
        if self.classes == 0 || self.height == 0 || self.width == 0 {
            return reject("every dimension must be at least 1");
        }
        if self.classes > u16::MAX as usize
            || self.height > u32::MAX as usize
            || self.width > u32::MAX as usize
        {
            return reject("dimension exceeds the on-disk field width");
        }
        if self
            .classes
            .checked_mul(self.height)
            .and_then(|v| v.checked_mul(self.width))
            .is_none()
        {
            return reject("element count overflows");
        }
        Ok(())
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.classes * self.plane_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn as_tuple(&self) -> (usize, usize, usize) {
        (self.classes, self.height, self.width)
    }

    pub(crate) fn ensure_same(&self, other: &Dims, context: impl FnOnce() -> String) -> Result<()> {
        if self != other {
            return Err(Error::DimensionMismatch {
                context: context(),
                expected: self.as_tuple(),
                found: other.as_tuple(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.classes, self.height, self.width)
    }
}

/// Identifier of one validation slice.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SliceId(String);

impl SliceId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::invalid("slice id must be non-empty"));
        }
        Ok(SliceId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for SliceId {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        SliceId::new(value)
    }
}

impl From<SliceId> for String {
    fn from(value: SliceId) -> Self {
        value.0
    }
}

impl fmt::Display for SliceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Per-class foreground probabilities for one slice, class-major and
/// row-major within each class plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    dims: Dims,
    values: Vec<f32>,
}

impl ProbabilityMap {
    /// Every value must lie in `[0, 1]`; NaN is rejected.
    pub fn new(dims: Dims, values: Vec<f32>) -> Result<Self> {
        dims.validate()?;
        if values.len() != dims.len() {
            return Err(Error::invalid(format!(
                "probability map {dims} needs {} values, got {}",
                dims.len(),
                values.len()
            )));
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidProbability { index, value });
        }
        Ok(ProbabilityMap { dims, values })
    }

    pub fn filled(dims: Dims, value: f32) -> Result<Self> {
        ProbabilityMap::new(dims, vec![value; dims.len()])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn plane(&self, class: usize) -> &[f32] {
        let len = self.dims.plane_len();
        &self.values[class * len..(class + 1) * len]
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }
}

/// A single binary plane, row-major, one byte (0 or 1) per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plane {
    height: usize,
    width: usize,
    bits: Vec<u8>,
}

impl Plane {
    pub fn zeros(height: usize, width: usize) -> Self {
        Plane {
            height,
            width,
            bits: vec![0; height * width],
        }
    }

    pub fn from_bits(height: usize, width: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::invalid(format!(
                "plane {height}x{width} needs {} pixels, got {}",
                height * width,
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::invalid("plane pixels must be 0 or 1"));
        }
        Ok(Plane {
            height,
            width,
            bits,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col] == 1
    }

    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.bits[row * self.width + col] = on as u8;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }
}

/// Per-class binary masks for one slice (ground truth or thresholded
/// prediction). Same layout as [`ProbabilityMap`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSet {
    dims: Dims,
    bits: Vec<u8>,
}

impl MaskSet {
    pub fn zeros(dims: Dims) -> Result<Self> {
        dims.validate()?;
        Ok(MaskSet {
            dims,
            bits: vec![0; dims.len()],
        })
    }

    pub fn from_bits(dims: Dims, bits: Vec<u8>) -> Result<Self> {
        dims.validate()?;
        if bits.len() != dims.len() {
            return Err(Error::invalid(format!(
                "mask set {dims} needs {} pixels, got {}",
                dims.len(),
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::invalid("mask pixels must be 0 or 1"));
        }
        Ok(MaskSet { dims, bits })
    }

    pub fn from_planes(planes: Vec<Plane>) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::invalid("mask set needs at least one plane"))?;
        let dims = Dims::new(planes.len(), first.height, first.width)?;
        let mut bits = Vec::with_capacity(dims.len());
        for (class, plane) in planes.iter().enumerate() {
            if plane.height != dims.height || plane.width != dims.width {
                return Err(Error::DimensionMismatch {
                    context: format!("plane {class}"),
                    expected: (1, dims.height, dims.width),
                    found: (1, plane.height, plane.width),
                });
            }
            bits.extend_from_slice(&plane.bits);
        }
        Ok(MaskSet { dims, bits })
    }

    pub(crate) fn from_bits_unchecked(dims: Dims, bits: Vec<u8>) -> Self {
        debug_assert_eq!(bits.len(), dims.len());
        MaskSet { dims, bits }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn class_bits(&self, class: usize) -> &[u8] {
        let len = self.dims.plane_len();
        &self.bits[class * len..(class + 1) * len]
    }

    pub fn plane(&self, class: usize) -> Plane {
        Plane {
            height: self.dims.height,
            width: self.dims.width,
            bits: self.class_bits(class).to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_dims() {
        assert!(Dims::new(0, 1, 1).is_err());
        assert!(Dims::new(1, 0, 1).is_err());
        assert!(Dims::new(1, 1, 0).is_err());
        assert!(Dims::new(1 << 17, 1, 1).is_err());
    }

    #[test]
    fn probability_map_rejects_out_of_range() {
        let dims = Dims::new(1, 1, 2).unwrap();
        let err = ProbabilityMap::new(dims, vec![0.5, 1.25]).unwrap_err();
        assert!(matches!(err, Error::InvalidProbability { index: 1, .. }));
        assert!(ProbabilityMap::new(dims, vec![f32::NAN, 0.0]).is_err());
        assert!(ProbabilityMap::new(dims, vec![-0.0, 1.0]).is_ok());
        assert!(ProbabilityMap::new(dims, vec![0.5]).is_err());
    }

    #[test]
    fn slice_id_non_empty() {
        assert!(SliceId::new("").is_err());
        assert_eq!(
            SliceId::new("case1_day0_slice_0001").unwrap().as_str(),
            "case1_day0_slice_0001"
        );
    }

    #[test]
    fn mask_set_from_planes() {
        let mut a = Plane::zeros(2, 2);
        a.set(0, 1, true);
        let b = Plane::zeros(2, 2);
        let set = MaskSet::from_planes(vec![a.clone(), b]).unwrap();
        assert_eq!(set.dims(), Dims::new(2, 2, 2).unwrap());
        assert_eq!(set.plane(0), a);
        assert_eq!(set.class_bits(1), &[0, 0, 0, 0]);
        assert!(MaskSet::from_planes(vec![Plane::zeros(2, 2), Plane::zeros(3, 2)]).is_err());
    }
}
