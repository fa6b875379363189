/// Symmetric quadrature on a triangle, in barycentric coordinates.
/// Weights sum to 1 and are multiplied by the triangle area.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn centroid() -> Self {
        Self {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![1.0],
            degree: 1,
        }
    }

    /// Three interior points, exact for quadratics.
    pub fn degree2() -> Self {
        let a = 2.0 / 3.0;
        let b = 1.0 / 6.0;
        Self {
            points: vec![[a, b, b], [b, a, b], [b, b, a]],
            weights: vec![1.0 / 3.0; 3],
            degree: 2,
        }
    }

    /// Six-point Dunavant rule, exact for quartics.
    pub fn degree4() -> Self {
        let a1 = 0.445_948_490_915_964_9;
        let b1 = 1.0 - 2.0 * a1;
        let w1 = 0.223_381_589_678_011_5;
        let a2 = 0.091_576_213_509_770_74;
        let b2 = 1.0 - 2.0 * a2;
        let w2 = 0.109_951_743_655_321_9;
        Self {
            points: vec![
                [b1, a1, a1],
                [a1, b1, a1],
                [a1, a1, b1],
                [b2, a2, a2],
                [a2, b2, a2],
                [a2, a2, b2],
            ],
            weights: vec![w1, w1, w1, w2, w2, w2],
            degree: 4,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::degree4()
    }
}
