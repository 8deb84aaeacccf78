use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::planar::{PlanarMap, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShootingError {
    #[error("no seed points")]
    EmptySeed,
    #[error("map undefined at a seed point")]
    SeedEvaluation,
    #[error("jacobian unavailable at shooting point {0}")]
    Jacobian(usize),
    #[error("singular shooting system at iteration {0}")]
    Singular(usize),
    #[error("no convergence after {iterations} iterations, residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Smallest damping factor tried before giving up on a Newton step.
    pub min_damping: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            tol: 1e-10,
            max_iter: 40,
            min_damping: 1.0 / 1024.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingSolution {
    pub points: Vec<Point>,
    pub residual: f64,
    pub iterations: usize,
    pub jacobians: Vec<Matrix2<f64>>,
    pub monodromy: Matrix2<f64>,
    pub multipliers: [Complex64; 2],
}

impl ShootingSolution {
    /// Product of the per-point Jacobian determinants.
    pub fn det_product(&self) -> f64 {
        self.jacobians.iter().map(|j| j.determinant()).product()
    }

    pub fn unstable_count(&self) -> usize {
        self.multipliers.iter().filter(|m| m.norm() > 1.0).count()
    }
}

fn residual<M: PlanarMap + ?Sized>(map: &M, xs: &[Point]) -> Option<(Vec<f64>, f64)> {
    let k = xs.len();
    let mut r = Vec::with_capacity(2 * k);
    for i in 0..k {
        let y = map.apply(xs[i])?;
        let nx = xs[(i + 1) % k];
        r.push(y[0] - nx[0]);
        r.push(y[1] - nx[1]);
    }
    let norm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    norm.is_finite().then_some((r, norm))
}

/// Eigenvalues of a real 2×2 matrix, larger modulus first.
///
/// The smaller real root is taken as `det/λ₁` so it survives strong contraction.
pub fn eigenvalues2(m: &Matrix2<f64>) -> [Complex64; 2] {
    eigenvalues_from(m.trace(), m.determinant())
}

/// Roots of `λ² − tr·λ + det`, larger modulus first.
pub fn eigenvalues_from(tr: f64, det: f64) -> [Complex64; 2] {
    let disc = 0.25 * tr * tr - det;
    if disc < 0.0 {
        let im = (-disc).sqrt();
        return [Complex64::new(0.5 * tr, im), Complex64::new(0.5 * tr, -im)];
    }
    let big = 0.5 * tr + if tr >= 0.0 { disc.sqrt() } else { -disc.sqrt() };
    let small = if big != 0.0 { det / big } else { 0.0 };
    [Complex64::new(big, 0.0), Complex64::new(small, 0.0)]
}

/// Solves `f(x_i) = x_{i+1 mod k}` by damped Newton on the stacked system.
pub fn solve_periodic<M: PlanarMap + ?Sized>(
    map: &M,
    seed: &[Point],
    opts: &ShootingOptions,
) -> Result<ShootingSolution, ShootingError> {
    let k = seed.len();
    if k == 0 {
        return Err(ShootingError::EmptySeed);
    }
    let mut xs = seed.to_vec();
    let (mut r, mut norm) = residual(map, &xs).ok_or(ShootingError::SeedEvaluation)?;
    let mut iterations = 0;
    while norm > opts.tol {
        if iterations >= opts.max_iter {
            return Err(ShootingError::NoConvergence {
                iterations,
                residual: norm,
            });
        }
        iterations += 1;
        let mut jm = DMatrix::<f64>::zeros(2 * k, 2 * k);
        for i in 0..k {
            let d = map.jacobian(xs[i]).ok_or(ShootingError::Jacobian(i))?;
            let j = (i + 1) % k;
            for a in 0..2 {
                for b in 0..2 {
                    jm[(2 * i + a, 2 * i + b)] += d[(a, b)];
                }
                jm[(2 * i + a, 2 * j + a)] -= 1.0;
            }
        }
        let rhs = -DVector::from_vec(r.clone());
        let delta = jm
            .lu()
            .solve(&rhs)
            .ok_or(ShootingError::Singular(iterations))?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec<Point> = xs
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    [
                        x[0] + lambda * delta[2 * i],
                        x[1] + lambda * delta[2 * i + 1],
                    ]
                })
                .collect();
            if let Some((tr, tn)) = residual(map, &trial) {
                if tn < norm {
                    xs = trial;
                    r = tr;
                    norm = tn;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < opts.min_damping {
                return Err(ShootingError::NoConvergence {
                    iterations,
                    residual: norm,
                });
            }
        }
    }
    let jacobians = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| map.jacobian(x).ok_or(ShootingError::Jacobian(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let monodromy = jacobians
        .iter()
        .fold(Matrix2::identity(), |acc, j| j * acc);
    // the determinant of the product loses everything to cancellation under strong contraction
    let det: f64 = jacobians.iter().map(|j| j.determinant()).product();
    Ok(ShootingSolution {
        multipliers: eigenvalues_from(monodromy.trace(), det),
        points: xs,
        residual: norm,
        iterations,
        jacobians,
        monodromy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::planar::FnMap;

    fn henon() -> FnMap<impl Fn(Point) -> Option<Point> + Sync> {
        FnMap(|x: Point| Some([1.0 - 1.4 * x[0] * x[0] + x[1], 0.3 * x[0]]))
    }

    #[test]
    fn henon_fixed_point() {
        // x = 1 - 1.4x² + 0.3x
        let xf = (-0.7 + (0.49f64 + 5.6).sqrt()) / 2.8;
        let sol = solve_periodic(&henon(), &[[0.5, 0.1]], &ShootingOptions::default()).unwrap();
        assert!((sol.points[0][0] - xf).abs() < 1e-9);
        assert!((sol.points[0][1] - 0.3 * xf).abs() < 1e-9);
        assert_eq!(sol.unstable_count(), 1);
        // constant Jacobian determinant −0.3
        assert!((sol.det_product() + 0.3).abs() < 1e-6);
        let again = solve_periodic(&henon(), &sol.points, &ShootingOptions::default()).unwrap();
        assert!(again.iterations <= 2);
    }

    #[test]
    fn henon_period_two() {
        let sol = solve_periodic(
            &henon(),
            &[[-0.5, 0.3], [1.0, -0.15]],
            &ShootingOptions::default(),
        )
        .unwrap();
        assert!(sol.residual <= 1e-10);
        let (a, b) = (sol.points[0], sol.points[1]);
        assert!((a[0] - b[0]).abs() > 0.1);
        let prod = sol.multipliers[0] * sol.multipliers[1];
        assert!((prod.re - 0.09).abs() < 1e-6 && prod.im.abs() < 1e-9);
    }

    #[test]
    fn undefined_seed() {
        let m = FnMap(|_: Point| None);
        assert_eq!(
            solve_periodic(&m, &[[0.0, 0.0]], &ShootingOptions::default()),
            Err(ShootingError::SeedEvaluation)
        );
        assert_eq!(
            solve_periodic(&m, &[], &ShootingOptions::default()),
            Err(ShootingError::EmptySeed)
        );
    }
}
