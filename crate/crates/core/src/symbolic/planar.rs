use nalgebra::Matrix2;

pub type Point = [f64; 2];

/// A planar map that may be undefined at some points.
pub trait PlanarMap: Sync {
    fn apply(&self, x: Point) -> Option<Point>;

    /// `k`-fold composition; `None` as soon as one application fails.
    fn iterate(&self, x: Point, k: usize) -> Option<Point> {
        let mut y = x;
        for _ in 0..k {
            y = self.apply(y)?;
        }
        Some(y)
    }

    /// Central-difference Jacobian with step `1e-6·(1 + |x_j|)`.
    fn jacobian(&self, x: Point) -> Option<Matrix2<f64>> {
        let mut j = Matrix2::zeros();
        for c in 0..2 {
            let h = 1e-6 * (1.0 + x[c].abs());
            let mut xp = x;
            let mut xm = x;
            xp[c] += h;
            xm[c] -= h;
            let fp = self.apply(xp)?;
            let fm = self.apply(xm)?;
            for r in 0..2 {
                j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        Some(j)
    }
}

/// Affine map `x ↦ M x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub m: [[f64; 2]; 2],
    pub t: [f64; 2],
}

impl AffineMap {
    pub fn linear(m: [[f64; 2]; 2]) -> Self {
        AffineMap { m, t: [0.0, 0.0] }
    }
}

impl PlanarMap for AffineMap {
    fn apply(&self, x: Point) -> Option<Point> {
        Some([
            self.m[0][0] * x[0] + self.m[0][1] * x[1] + self.t[0],
            self.m[1][0] * x[0] + self.m[1][1] * x[1] + self.t[1],
        ])
    }
}

/// Wraps a closure as a [`PlanarMap`].
pub struct FnMap<F>(pub F);

impl<F> PlanarMap for FnMap<F>
where
    F: Fn(Point) -> Option<Point> + Sync,
{
    fn apply(&self, x: Point) -> Option<Point> {
        (self.0)(x)
    }
}

/// Closed polygon sampling a circle, counterclockwise.
pub fn circle_loop(center: Point, radius: f64, n: usize) -> Vec<Point> {
    (0..n)
        .map(|k| {
            let th = std::f64::consts::TAU * k as f64 / n as f64;
            [center[0] + radius * th.cos(), center[1] + radius * th.sin()]
        })
        .collect()
}

/// Axis-aligned ellipse, useful when the two section coordinates have very different scales.
pub fn ellipse_loop(center: Point, radii: [f64; 2], n: usize) -> Vec<Point> {
    (0..n)
        .map(|k| {
            let th = std::f64::consts::TAU * k as f64 / n as f64;
            [center[0] + radii[0] * th.cos(), center[1] + radii[1] * th.sin()]
        })
        .collect()
}
