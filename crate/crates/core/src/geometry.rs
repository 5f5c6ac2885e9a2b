//! Axis-aligned boxes in normalized center-size form and their overlap metrics.

use serde::{Deserialize, Serialize};

/// Axis-aligned box stored as center and size, normalized to the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    /// Builds a box from corners. Swapped corners are reordered so the result has
    /// non-negative size.
    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        let (x1, x2) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
        let (y1, y2) = if y1 <= y2 { (y1, y2) } else { (y2, y1) };
        Self {
            cx: 0.5 * (x1 + x2),
            cy: 0.5 * (y1 + y2),
            w: x2 - x1,
            h: y2 - y1,
        }
    }

    /// `(x1, y1, x2, y2)`.
    pub fn corners(&self) -> [f64; 4] {
        let hw = 0.5 * self.w;
        let hh = 0.5 * self.h;
        [self.cx - hw, self.cy - hh, self.cx + hw, self.cy + hh]
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn is_valid(&self) -> bool {
        self.cx.is_finite()
            && self.cy.is_finite()
            && self.w.is_finite()
            && self.h.is_finite()
            && self.w >= 0.0
            && self.h >= 0.0
    }

    /// Clips the box to the unit square, keeping it in center-size form.
    pub fn clip_unit(&self) -> Self {
        let [x1, y1, x2, y2] = self.corners();
        Self::from_corners(
            x1.clamp(0.0, 1.0),
            y1.clamp(0.0, 1.0),
            x2.clamp(0.0, 1.0),
            y2.clamp(0.0, 1.0),
        )
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.cx + dx, self.cy + dy, self.w, self.h)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.cx, self.cy, self.w, self.h]
    }
}

impl From<[f64; 4]> for BoundingBox {
    fn from(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        b.to_array()
    }
}

fn intersection_union(a: &BoundingBox, b: &BoundingBox) -> (f64, f64) {
    let [ax1, ay1, ax2, ay2] = a.corners();
    let [bx1, by1, bx2, by2] = b.corners();
    let iw = (ax2.min(bx2) - ax1.max(bx1)).max(0.0);
    let ih = (ay2.min(by2) - ay1.max(by1)).max(0.0);
    let inter = iw * ih;
    (inter, a.area() + b.area() - inter)
}

/// Intersection over union. Degenerate pairs with an empty union give 0.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (inter, union) = intersection_union(a, b);
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Generalized IoU: `iou - (enclosing - union) / enclosing`.
pub fn giou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let [ax1, ay1, ax2, ay2] = a.corners();
    let [bx1, by1, bx2, by2] = b.corners();
    let enclosing = (ax2.max(bx2) - ax1.min(bx1)) * (ay2.max(by2) - ay1.min(by1));
    if enclosing <= 0.0 {
        return 0.0;
    }
    let (inter, union) = intersection_union(a, b);
    let overlap = if union > 0.0 { inter / union } else { 0.0 };
    overlap - (enclosing - union) / enclosing
}

/// Sum of absolute differences of the center-size coordinates.
pub fn l1_distance(a: &BoundingBox, b: &BoundingBox) -> f64 {
    (a.cx - b.cx).abs() + (a.cy - b.cy).abs() + (a.w - b.w).abs() + (a.h - b.h).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corners(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::from_corners(x1, y1, x2, y2)
    }

    #[test]
    fn iou_hand_cases() {
        let a = corners(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert!((iou(&a, &corners(1.0, 1.0, 3.0, 3.0)) - 1.0 / 7.0).abs() < 1e-12);
        assert_eq!(iou(&a, &corners(5.0, 5.0, 6.0, 6.0)), 0.0);
    }

    #[test]
    fn giou_hand_cases() {
        let a = corners(0.0, 0.0, 1.0, 1.0);
        assert!((giou(&a, &a) - 1.0).abs() < 1e-12);
        assert!((giou(&a, &corners(2.0, 0.0, 3.0, 1.0)) + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_boxes_have_no_overlap() {
        let p = BoundingBox::new(0.5, 0.5, 0.0, 0.0);
        assert_eq!(iou(&p, &p), 0.0);
        assert_eq!(giou(&p, &p), 0.0);
        let line = BoundingBox::new(0.5, 0.5, 0.2, 0.0);
        assert_eq!(iou(&line, &BoundingBox::new(0.5, 0.5, 0.2, 0.2)), 0.0);
    }

    #[test]
    fn corner_round_trip() {
        let b = BoundingBox::new(0.3, 0.7, 0.11, 0.05);
        let [x1, y1, x2, y2] = b.corners();
        let r = BoundingBox::from_corners(x1, y1, x2, y2);
        for (u, v) in b.to_array().iter().zip(r.to_array()) {
            assert!((u - v).abs() <= 2.0 * f64::EPSILON);
        }
    }

    #[test]
    fn clip_keeps_box_inside() {
        let b = BoundingBox::new(0.98, 0.02, 0.1, 0.1).clip_unit();
        let [x1, y1, x2, y2] = b.corners();
        assert!(x1 >= 0.0 && y1 >= 0.0 && x2 <= 1.0 + 1e-15 && y2 <= 1.0);
        assert!((b.w - 0.07).abs() < 1e-12);
    }

    #[test]
    fn serde_as_array() {
        let b = BoundingBox::new(0.5, 0.25, 0.1, 0.2);
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(s, "[0.5,0.25,0.1,0.2]");
        let back: BoundingBox = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b);
    }
}
