//! Axis-aligned box primitives shared by every other module.
//!
//! Boxes use continuous pixel coordinates with an exclusive bottom-right
//! corner: the area of `(x1, y1, x2, y2)` is `(x2 - x1) * (y2 - y1)`, no
//! `+1` convention. Zero-area boxes are allowed; inverted or non-finite
//! coordinates are rejected at construction, so every `BBox` in circulation
//! is valid.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("box coordinates must be finite, got ({x1}, {y1}, {x2}, {y2})")]
    NonFinite { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("box has a negative extent: ({x1}, {y1}, {x2}, {y2})")]
    NegativeExtent { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("box [{x1}, {x2}] does not fit in an image of width {image_width}, cannot mirror")]
    FlipOutsideImage { x1: f64, x2: f64, image_width: f64 },
    #[error("unknown formula class `{0}`, expected `embedded` or `isolated`")]
    UnknownClass(String),
}

/// Axis-aligned rectangle in pixel coordinates, `(x1, y1)` top-left,
/// `(x2, y2)` bottom-right.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        if !(x1.is_finite() && y1.is_finite() && x2.is_finite() && y2.is_finite()) {
            return Err(GeometryError::NonFinite { x1, y1, x2, y2 });
        }
        if x2 < x1 || y2 < y1 {
            return Err(GeometryError::NegativeExtent { x1, y1, x2, y2 });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn short_side(&self) -> f64 {
        self.width().min(self.height())
    }

    pub fn long_side(&self) -> f64 {
        self.width().max(self.height())
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// True when `(x, y)` lies strictly inside the box; points on the
    /// boundary do not count.
    pub fn contains_strict(&self, x: f64, y: f64) -> bool {
        x > self.x1 && x < self.x2 && y > self.y1 && y < self.y2
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    /// Intersection over union, in `[0, 1]`. Returns 0 when the union has
    /// zero area (two degenerate boxes).
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }

    /// Mirrors the box across the vertical centerline of an image of the
    /// given width. Involutive: flipping twice restores the input whenever
    /// the arithmetic is exact.
    pub fn hflip(&self, image_width: f64) -> Result<Self, GeometryError> {
        if self.x1 < 0.0 || !(self.x2 <= image_width) {
            return Err(GeometryError::FlipOutsideImage {
                x1: self.x1,
                x2: self.x2,
                image_width,
            });
        }
        BBox::new(image_width - self.x2, self.y1, image_width - self.x1, self.y2)
    }

    /// Clamps the box into `[0, width] x [0, height]`.
    pub fn clip(&self, width: f64, height: f64) -> Self {
        Self {
            x1: self.x1.clamp(0.0, width),
            y1: self.y1.clamp(0.0, height),
            x2: self.x2.clamp(0.0, width),
            y2: self.y2.clamp(0.0, height),
        }
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.x1, self.y1, self.x2, self.y2)
    }
}

/// The two formula classes of the detection task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FormulaClass {
    /// Inline with running text; typically tiny (short side around 16 px).
    Embedded,
    /// Display-style, on its own line; can be very large and wide.
    Isolated,
}

impl FormulaClass {
    pub const ALL: [FormulaClass; 2] = [FormulaClass::Embedded, FormulaClass::Isolated];

    pub fn as_str(&self) -> &'static str {
        match self {
            FormulaClass::Embedded => "embedded",
            FormulaClass::Isolated => "isolated",
        }
    }
}

impl fmt::Display for FormulaClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormulaClass {
    type Err = GeometryError;

    /// Case-insensitive; serialization is always lowercase.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("embedded") {
            Ok(FormulaClass::Embedded)
        } else if s.eq_ignore_ascii_case("isolated") {
            Ok(FormulaClass::Isolated)
        } else {
            Err(GeometryError::UnknownClass(s.to_string()))
        }
    }
}
