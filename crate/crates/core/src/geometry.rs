//! Planar projective geometry between the camera image plane and the court
//! ground plane.
//!
//! A [`Homography`] is always stored in canonical form: unit Frobenius norm,
//! bottom-right entry nonnegative (if that entry is exactly zero, the first
//! nonzero entry in row-major order is positive). Two matrices that differ by
//! a nonzero scale therefore canonicalize to the same value.

use std::ops::{Add, Mul, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::right_svd;
use crate::scalar::{Scalar, TOLERANCES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("need at least 4 correspondences, got {0}")]
    InsufficientPoints(usize),
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("point maps to infinity (|w| = {w:e})")]
    PointAtInfinity { w: f64 },
    #[error("singular matrix (|det| = {det:e})")]
    SingularMatrix { det: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Error)]
pub enum CalibrationFileError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn norm(&self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: &Self) -> T {
        (*self - *other).norm()
    }

    /// `self + frac * (other - self)`.
    pub fn lerp(&self, other: &Self, frac: T) -> Self {
        *self + (*other - *self) * frac
    }

    pub fn cast<U: Scalar>(&self) -> Point2<U> {
        Point2::new(U::lit(self.x.to_f64_lossy()), U::lit(self.y.to_f64_lossy()))
    }
}

impl<T: Scalar> Add for Point2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Scalar> Sub for Point2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Scalar> Mul<T> for Point2<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

/// A known point seen in the camera image (pixels) and its position on the
/// court plane (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence<T> {
    pub camera: Point2<T>,
    pub world: Point2<T>,
}

impl<T: Scalar> Correspondence<T> {
    pub fn new(camera: Point2<T>, world: Point2<T>) -> Self {
        Self { camera, world }
    }

    /// Same pair with the roles of the two planes exchanged.
    pub fn swapped(&self) -> Self {
        Self { camera: self.world, world: self.camera }
    }
}

pub type Matrix3<T> = [[T; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix3<T>", into = "Matrix3<T>")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct Homography<T> {
    m: Matrix3<T>,
}

impl<T: Scalar> TryFrom<Matrix3<T>> for Homography<T> {
    type Error = GeometryError;
    fn try_from(m: Matrix3<T>) -> Result<Self, Self::Error> {
        Self::from_matrix(m)
    }
}

impl<T: Scalar> From<Homography<T>> for Matrix3<T> {
    fn from(h: Homography<T>) -> Self {
        h.m
    }
}

impl<T: Scalar> Homography<T> {
    /// Canonicalizes `m` and checks that it is finite and nonsingular.
    pub fn from_matrix(m: Matrix3<T>) -> Result<Self, GeometryError> {
        let m = canonicalize(m)?;
        let det = determinant(&m);
        if det.abs() <= T::lit(TOLERANCES.eps_det) {
            return Err(GeometryError::SingularMatrix { det: det.to_f64_lossy() });
        }
        Ok(Self { m })
    }

    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self::from_matrix([[o, z, z], [z, o, z], [z, z, o]]).expect("identity is nonsingular")
    }

    pub fn translation(dx: T, dy: T) -> Self {
        let (o, z) = (T::one(), T::zero());
        Self::from_matrix([[o, z, dx], [z, o, dy], [z, z, o]]).expect("translation is nonsingular")
    }

    pub fn scaling(sx: T, sy: T) -> Result<Self, GeometryError> {
        let (o, z) = (T::one(), T::zero());
        Self::from_matrix([[sx, z, z], [z, sy, z], [z, z, o]])
    }

    /// Canonical row-major matrix.
    pub fn matrix(&self) -> &Matrix3<T> {
        &self.m
    }

    pub fn determinant(&self) -> T {
        determinant(&self.m)
    }

    pub fn apply(&self, p: Point2<T>) -> Result<Point2<T>, GeometryError> {
        apply_matrix(&self.m, p)
    }

    pub fn inverse(&self) -> Result<Self, GeometryError> {
        let m = &self.m;
        let det = determinant(m);
        if det.abs() <= T::lit(TOLERANCES.eps_det) {
            return Err(GeometryError::SingularMatrix { det: det.to_f64_lossy() });
        }
        // adjugate; the 1/det factor is irrelevant up to scale
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        let adj = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        Self::from_matrix(adj)
    }

    /// The map `p ↦ self(first(p))`.
    pub fn after(&self, first: &Self) -> Result<Self, GeometryError> {
        Self::from_matrix(matmul(&self.m, &first.m))
    }

    pub fn cast<U: Scalar>(&self) -> Result<Homography<U>, GeometryError> {
        Homography::from_matrix(self.m.map(|row| row.map(|v| U::lit(v.to_f64_lossy()))))
    }
}

pub fn determinant<T: Scalar>(m: &Matrix3<T>) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn matmul<T: Scalar>(a: &Matrix3<T>, b: &Matrix3<T>) -> Matrix3<T> {
    let mut out = [[T::zero(); 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).fold(T::zero(), |acc, k| acc + a[i][k] * b[k][j]);
        }
    }
    out
}

/// Scales `m` to unit Frobenius norm and fixes the sign.
pub fn canonicalize<T: Scalar>(m: Matrix3<T>) -> Result<Matrix3<T>, GeometryError> {
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFinite("homography matrix"));
    }
    let norm = m.iter().flatten().fold(T::zero(), |acc, &v| acc + v * v).sqrt();
    if norm == T::zero() {
        return Err(GeometryError::SingularMatrix { det: 0.0 });
    }
    let pivot = if m[2][2] != T::zero() {
        m[2][2]
    } else {
        *m.iter().flatten().find(|v| **v != T::zero()).expect("nonzero norm")
    };
    let scale = if pivot < T::zero() { -norm } else { norm };
    // `+ 0` turns -0.0 into 0.0 so equal maps serialize identically
    Ok(m.map(|row| row.map(|v| v / scale + T::zero())))
}

/// Projects `p` through an arbitrary (not necessarily canonical) matrix.
pub fn apply_matrix<T: Scalar>(m: &Matrix3<T>, p: Point2<T>) -> Result<Point2<T>, GeometryError> {
    if !p.is_finite() {
        return Err(GeometryError::NonFinite("point"));
    }
    let u = m[0][0] * p.x + m[0][1] * p.y + m[0][2];
    let v = m[1][0] * p.x + m[1][1] * p.y + m[1][2];
    let w = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
    if w.abs() < T::lit(TOLERANCES.eps_w) {
        return Err(GeometryError::PointAtInfinity { w: w.to_f64_lossy() });
    }
    Ok(Point2::new(u / w, v / w))
}

pub fn apply_homography<T: Scalar>(h: &Homography<T>, p: Point2<T>) -> Result<Point2<T>, GeometryError> {
    h.apply(p)
}

pub fn invert_homography<T: Scalar>(h: &Homography<T>) -> Result<Homography<T>, GeometryError> {
    h.inverse()
}

/// Similarity that moves the centroid to the origin and the mean distance
/// from it to √2.
#[derive(Debug, Clone, Copy)]
struct Normalization<T> {
    cx: T,
    cy: T,
    s: T,
}

impl<T: Scalar> Normalization<T> {
    fn fit(points: &[Point2<T>]) -> Result<Self, GeometryError> {
        let n = T::from_usize(points.len()).expect("count fits in scalar");
        let (sx, sy) = points.iter().fold((T::zero(), T::zero()), |(a, b), p| (a + p.x, b + p.y));
        let (cx, cy) = (sx / n, sy / n);
        let mean = points.iter().fold(T::zero(), |acc, p| acc + (p.x - cx).hypot(p.y - cy)) / n;
        if !(mean > T::zero()) {
            return Err(GeometryError::DegenerateConfiguration("all points coincide".into()));
        }
        Ok(Self { cx, cy, s: T::lit(std::f64::consts::SQRT_2) / mean })
    }

    fn apply(&self, p: &Point2<T>) -> Point2<T> {
        Point2::new(self.s * (p.x - self.cx), self.s * (p.y - self.cy))
    }

    fn matrix(&self) -> Matrix3<T> {
        let (o, z) = (T::one(), T::zero());
        [[self.s, z, -self.s * self.cx], [z, self.s, -self.s * self.cy], [z, z, o]]
    }

    fn inverse_matrix(&self) -> Matrix3<T> {
        let (o, z) = (T::one(), T::zero());
        let inv = o / self.s;
        [[inv, z, self.cx], [z, inv, self.cy], [z, z, o]]
    }
}

fn twice_area<T: Scalar>(a: &Point2<T>, b: &Point2<T>, c: &Point2<T>) -> T {
    ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)).abs()
}

fn check_collinearity<T: Scalar>(points: &[Point2<T>], plane: &str) -> Result<(), GeometryError> {
    let eps = T::lit(2.0 * TOLERANCES.eps_collinear);
    let n = points.len();
    let mut any_spread = false;
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let area = twice_area(&points[i], &points[j], &points[k]);
                if area > eps {
                    any_spread = true;
                } else if n == 4 {
                    return Err(GeometryError::DegenerateConfiguration(format!(
                        "{plane} points {i}, {j}, {k} are collinear"
                    )));
                }
            }
        }
    }
    if !any_spread {
        return Err(GeometryError::DegenerateConfiguration(format!("all {plane} points are collinear")));
    }
    Ok(())
}

/// Direct linear transform with similarity normalization of both point sets.
///
/// Returns the canonical homography mapping `camera` points onto `world`
/// points that minimizes the algebraic residual of the stacked `2n × 9`
/// system. With exactly four correspondences the fit is exact.
pub fn estimate_homography<T: Scalar>(correspondences: &[Correspondence<T>]) -> Result<Homography<T>, GeometryError> {
    let n = correspondences.len();
    if n < 4 {
        return Err(GeometryError::InsufficientPoints(n));
    }
    if correspondences.iter().any(|c| !c.camera.is_finite() || !c.world.is_finite()) {
        return Err(GeometryError::NonFinite("correspondence"));
    }
    let cam: Vec<Point2<T>> = correspondences.iter().map(|c| c.camera).collect();
    let world: Vec<Point2<T>> = correspondences.iter().map(|c| c.world).collect();
    let norm_cam = Normalization::fit(&cam)?;
    let norm_world = Normalization::fit(&world)?;
    let cam: Vec<Point2<T>> = cam.iter().map(|p| norm_cam.apply(p)).collect();
    let world: Vec<Point2<T>> = world.iter().map(|p| norm_world.apply(p)).collect();
    check_collinearity(&cam, "camera")?;
    check_collinearity(&world, "world")?;

    // at least 9 rows so the decomposition sees a square system
    let rows = (2 * n).max(9);
    let z = T::zero();
    let o = T::one();
    let mut a = vec![z; rows * 9];
    for (i, (c, w)) in cam.iter().zip(&world).enumerate() {
        let (x, y, u, v) = (c.x, c.y, w.x, w.y);
        a[(2 * i) * 9..(2 * i + 1) * 9].copy_from_slice(&[-x, -y, -o, z, z, z, u * x, u * y, u]);
        a[(2 * i + 1) * 9..(2 * i + 2) * 9].copy_from_slice(&[z, z, z, -x, -y, -o, v * x, v * y, v]);
    }
    let svd = right_svd(rows, 9, &a);
    let top = svd.singular_values[0];
    let runner_up = svd.singular_values[7];
    if !(runner_up > top * T::epsilon().sqrt()) {
        return Err(GeometryError::DegenerateConfiguration("solution is not unique".into()));
    }
    let h = svd.smallest();
    let hn = [[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], h[8]]];
    let m = matmul(&norm_world.inverse_matrix(), &matmul(&hn, &norm_cam.matrix()));
    Homography::from_matrix(m).map_err(|e| match e {
        GeometryError::SingularMatrix { .. } => {
            GeometryError::DegenerateConfiguration("estimated homography is singular".into())
        }
        other => other,
    })
}

/// Per-point and summary reprojection errors, in the target plane's units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReprojStats<T> {
    pub per_point: Vec<T>,
    pub rms: T,
    pub max: T,
    pub mean: T,
}

pub fn reprojection_error<T: Scalar>(
    h: &Homography<T>,
    correspondences: &[Correspondence<T>],
) -> Result<ReprojStats<T>, GeometryError> {
    if correspondences.is_empty() {
        return Err(GeometryError::InsufficientPoints(0));
    }
    let per_point = correspondences
        .iter()
        .map(|c| h.apply(c.camera).map(|p| p.distance(&c.world)))
        .collect::<Result<Vec<T>, _>>()?;
    let n = T::from_usize(per_point.len()).expect("count fits in scalar");
    let sum = per_point.iter().fold(T::zero(), |a, &e| a + e);
    let sum_sq = per_point.iter().fold(T::zero(), |a, &e| a + e * e);
    let max = per_point.iter().fold(T::zero(), |a, &e| a.max(e));
    Ok(ReprojStats { rms: (sum_sq / n).sqrt(), max, mean: sum / n, per_point })
}

/// Parses `cam_x cam_y world_x world_y` lines; `#` starts a comment.
pub fn parse_correspondences<T: Scalar>(text: &str) -> Result<Vec<Correspondence<T>>, CalibrationFileError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let values = parse_numbers::<T>(line, idx + 1)?;
        if values.len() != 4 {
            return Err(CalibrationFileError::Parse {
                line: idx + 1,
                msg: format!("expected 4 numbers (cam_x cam_y world_x world_y), found {}", values.len()),
            });
        }
        out.push(Correspondence::new(Point2::new(values[0], values[1]), Point2::new(values[2], values[3])));
    }
    Ok(out)
}

pub fn load_correspondences<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<Correspondence<T>>, CalibrationFileError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| CalibrationFileError::Io { path: path.display().to_string(), source })?;
    parse_correspondences(&text)
}

pub(crate) fn parse_numbers<T: Scalar>(line: &str, lineno: usize) -> Result<Vec<T>, CalibrationFileError> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(T::lit)
                .ok_or_else(|| CalibrationFileError::Parse { line: lineno, msg: format!("invalid number {tok:?}") })
        })
        .collect()
}
