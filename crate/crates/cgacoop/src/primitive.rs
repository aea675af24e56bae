//! Geometric primitives built by wedging conformal points, their derived
//! parameters (center, radius, axis) and the similarity versor between two
//! primitives of the same kind.

use alloc::vec::Vec;
use libm::log as ln;

use crate::algebra::{embed_point, jacobian_inverse, jacobian_normalize, Blade, Multivector, DEGENERACY_TOL, IDENTITY_TOL};
use crate::error::{Error, Result};
use crate::versor::{exp_dilator, exp_translator, Group};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Point,
    PointPair,
    Line,
    Circle,
    Plane,
    Sphere,
}

impl Kind {
    pub const ALL: [Kind; 6] = [Kind::Point, Kind::PointPair, Kind::Line, Kind::Circle, Kind::Plane, Kind::Sphere];

    /// Number of points wedged to build the primitive.
    pub fn point_count(self) -> usize {
        match self {
            Kind::Point => 1,
            Kind::PointPair | Kind::Line => 2,
            Kind::Circle | Kind::Plane => 3,
            Kind::Sphere => 4,
        }
    }

    /// Flats carry e∞ in their blade.
    pub fn is_flat(self) -> bool {
        matches!(self, Kind::Line | Kind::Plane)
    }

    pub fn is_round(self) -> bool {
        matches!(self, Kind::PointPair | Kind::Circle | Kind::Sphere)
    }

    /// Whether the primitive has an oriented axis (direction or normal).
    pub fn has_axis(self) -> bool {
        !matches!(self, Kind::Point | Kind::Sphere)
    }

    /// The subgroup that maps primitives of this kind onto each other.
    pub fn group(self) -> Group {
        match self {
            Kind::Point => Group::Translator,
            Kind::Line | Kind::Plane => Group::Motor,
            Kind::PointPair | Kind::Circle | Kind::Sphere => Group::Similarity,
        }
    }

    /// Body-frame bivector coordinates that move the primitive, in the order
    /// (e23, e13, e12, e0∞, e1∞, e2∞, e3∞).
    pub fn controllable_mask(self) -> [bool; 7] {
        match self {
            Kind::Point => [false, false, false, false, true, true, true],
            Kind::PointPair => [true, false, true, true, true, true, true],
            Kind::Line => [true, false, true, false, true, false, true],
            Kind::Circle => [true, true, false, true, true, true, true],
            Kind::Plane => [true, true, false, false, false, false, true],
            Kind::Sphere => [false, false, false, true, true, true, true],
        }
    }

    /// Axis of the unit primitive (e2 for point pairs and lines, e3 for circles and planes).
    pub fn unit_axis(self) -> [f64; 3] {
        match self {
            Kind::PointPair | Kind::Line => [0.0, 1.0, 0.0],
            _ => [0.0, 0.0, 1.0],
        }
    }

    /// Kind formed by `n` cooperating chains.
    pub fn for_chain_count(n: usize, flat: bool) -> Result<Kind> {
        Ok(match (n, flat) {
            (1, _) => Kind::Point,
            (2, false) => Kind::PointPair,
            (2, true) => Kind::Line,
            (3, false) => Kind::Circle,
            (3, true) => Kind::Plane,
            (4, _) => Kind::Sphere,
            _ => return Err(Error::ChainCount(n)),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Point => "point",
            Kind::PointPair => "point_pair",
            Kind::Line => "line",
            Kind::Circle => "circle",
            Kind::Plane => "plane",
            Kind::Sphere => "sphere",
        }
    }

    pub fn from_name(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// A primitive: its kind and its (outer-product) blade.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Primitive {
    pub kind: Kind,
    pub blade: Multivector,
}

/// Derived parameters. `center` is the center of a round, the position of a
/// point, or the point of a flat closest to the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Params {
    pub center: [f64; 3],
    pub log_radius: f64,
    pub axis: [f64; 3],
}

impl Params {
    pub fn radius(&self) -> f64 {
        libm::exp(self.log_radius)
    }
}

fn euclid(m: &Multivector) -> [f64; 3] {
    m.euclidean()
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn wedge_points(points: &[Multivector]) -> Multivector {
    points.iter().skip(1).fold(points[0], |acc, p| acc.wedge(p))
}

/// Degeneracy measure `|F reverse(F)|` of the carrier flat (the blade itself
/// for flats, `X ∧ e∞` for rounds).
pub fn degeneracy_measure(kind: Kind, blade: &Multivector) -> f64 {
    let carrier = if kind.is_round() { blade.wedge(&Multivector::einf()) } else { *blade };
    (carrier * carrier.reverse()).scalar_part().abs()
}

impl Primitive {
    /// Wedge conformal points (normalized first); flats also wedge e∞.
    pub fn from_conformal_points(kind: Kind, points: &[Multivector]) -> Result<Self> {
        if points.len() != kind.point_count() {
            return Err(Error::DimensionMismatch { expected: kind.point_count(), found: points.len() });
        }
        let mut normalized = Vec::with_capacity(points.len());
        for p in points {
            let w = p[Blade::E0];
            if w.abs() < IDENTITY_TOL {
                return Err(Error::DegeneratePoint);
            }
            normalized.push(p.scale(1.0 / w));
        }
        let mut blade = wedge_points(&normalized);
        if kind.is_flat() {
            blade = blade.wedge(&Multivector::einf());
        }
        if kind != Kind::Point {
            let measure = degeneracy_measure(kind, &blade);
            if measure < DEGENERACY_TOL {
                return Err(Error::DegeneratePrimitive { measure });
            }
        }
        Ok(Primitive { kind, blade })
    }

    pub fn from_points(kind: Kind, points: &[[f64; 3]]) -> Result<Self> {
        let pts: Vec<Multivector> = points.iter().map(|p| embed_point(*p)).collect();
        Self::from_conformal_points(kind, &pts)
    }

    /// Canonical unit primitive of each kind: the origin, the pair ±e2, the
    /// e2 axis, the unit circle and plane with normal +e3, the unit sphere.
    pub fn unit(kind: Kind) -> Self {
        let pts: &[[f64; 3]] = match kind {
            Kind::Point => &[[0.0, 0.0, 0.0]],
            Kind::PointPair => &[[0.0, -1.0, 0.0], [0.0, 1.0, 0.0]],
            Kind::Line => &[[0.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            Kind::Circle => &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]],
            Kind::Plane => &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            Kind::Sphere => &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-1.0, 0.0, 0.0]],
        };
        Self::from_points(kind, pts).expect("unit primitives are non-degenerate")
    }

    /// Apply a versor by sandwiching the blade.
    pub fn transformed(&self, v: &Multivector) -> Primitive {
        Primitive { kind: self.kind, blade: v.sandwich(&self.blade) }
    }

    /// Equality up to a nonzero scale (orientation included in the scale).
    pub fn same_as(&self, other: &Primitive, tol: f64) -> bool {
        self.kind == other.kind && self.blade.projective_distance(&other.blade) <= tol
    }

    pub fn params(&self) -> Result<Params> {
        Ok(params_with_tangents(self.kind, &self.blade, &[])?.0)
    }

    pub fn center(&self) -> Result<[f64; 3]> {
        Ok(self.params()?.center)
    }

    pub fn radius(&self) -> Result<f64> {
        if !self.kind.is_round() {
            return Err(Error::KindMismatch);
        }
        Ok(self.params()?.radius())
    }

    /// Unit normal (circles, planes) or direction (point pairs, lines).
    pub fn axis(&self) -> Result<[f64; 3]> {
        if !self.kind.has_axis() {
            return Err(Error::KindMismatch);
        }
        Ok(self.params()?.axis)
    }

    /// Project a conformal point onto the primitive: `(P ⌋ X) X⁻¹`.
    pub fn project(&self, p: &Multivector) -> Result<Multivector> {
        Ok(p.lc(&self.blade) * self.blade.inverse()?)
    }
}

/// Meet of two blades, `(X1* ∧ X2*)*`.
pub fn meet(a: &Multivector, b: &Multivector) -> Multivector {
    a.dual().wedge(&b.dual()).dual()
}

/// Derivative of a primitive's parameters along one blade direction.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ParamsDot {
    pub center: [f64; 3],
    pub log_radius: f64,
    pub axis: [f64; 3],
}

/// Center of a round from the point `X e∞ X` and its tangents.
fn round_center(x: &Multivector, dxs: &[Multivector]) -> Result<([f64; 3], Vec<[f64; 3]>)> {
    let einf = Multivector::einf();
    let pc = *x * einf * *x;
    let w = pc[Blade::E0];
    if w.abs() < IDENTITY_TOL * pc.max_abs().max(1.0) {
        return Err(Error::DegeneratePrimitive { measure: w.abs() });
    }
    let e = euclid(&pc);
    let c = [e[0] / w, e[1] / w, e[2] / w];
    let dc = dxs
        .iter()
        .map(|dx| {
            let dpc = *dx * einf * *x + *x * einf * *dx;
            let de = euclid(&dpc);
            let dw = dpc[Blade::E0];
            core::array::from_fn(|k| (de[k] - c[k] * dw) / w)
        })
        .collect();
    Ok((c, dc))
}

/// Log-radius of a round from `P∞ = (e∞ ⌋ X) X⁻¹`, `r = |P∞ reverse(P∞)|^(−1/2)`.
fn round_log_radius(x: &Multivector, dxs: &[Multivector]) -> Result<(f64, Vec<f64>)> {
    let einf = Multivector::einf();
    let xinv = x.inverse()?;
    let a = einf.lc(x);
    let p = a * xinv;
    let s = (p * p.reverse()).scalar_part();
    if s.abs() < IDENTITY_TOL {
        return Err(Error::DegeneratePrimitive { measure: s.abs() });
    }
    let dxinv = jacobian_inverse(x, dxs)?;
    let dl = dxs
        .iter()
        .zip(dxinv.iter())
        .map(|(dx, dxi)| {
            let dp = einf.lc(dx) * xinv + a * *dxi;
            let ds = 2.0 * (dp * p.reverse()).scalar_part();
            -0.5 * ds / s
        })
        .collect();
    Ok((-0.5 * ln(s.abs()), dl))
}

/// Unit axis from a Euclidean vector multivector and its tangents.
fn unit_axis(n: &Multivector, dns: &[Multivector], sign: f64) -> Result<([f64; 3], Vec<[f64; 3]>)> {
    let len2 = dot(euclid(n), euclid(n));
    if len2 < IDENTITY_TOL {
        return Err(Error::DegeneratePrimitive { measure: len2 });
    }
    let nn = n.normalized()?;
    let dn = jacobian_normalize(n, dns)?;
    let e = euclid(&nn);
    Ok((
        [sign * e[0], sign * e[1], sign * e[2]],
        dn.iter().map(|d| { let v = euclid(d); [sign * v[0], sign * v[1], sign * v[2]] }).collect(),
    ))
}

/// Euclidean part of a vector `π = n + δ e∞`, i.e. `π + (π ⌋ e0) e∞`.
fn euclidean_normal(pi: &Multivector) -> Multivector {
    let e = euclid(pi);
    Multivector::vector(e)
}

/// Normal of the plane `Π` (a 4-blade containing e∞), right-handed with the
/// order of the points that built it.
fn plane_normal(plane: &Multivector, dplanes: &[Multivector]) -> Result<([f64; 3], Vec<[f64; 3]>)> {
    let n = euclidean_normal(&plane.dual());
    let dn: Vec<Multivector> = dplanes.iter().map(|d| euclidean_normal(&d.dual())).collect();
    unit_axis(&n, &dn, 1.0)
}

/// Direction `e∞ ⌋ (e0 ⌋ L)` of a line blade.
fn line_direction(line: &Multivector, dlines: &[Multivector]) -> Result<([f64; 3], Vec<[f64; 3]>)> {
    let e0 = Multivector::e0();
    let einf = Multivector::einf();
    let d = einf.lc(&e0.lc(line));
    let dd: Vec<Multivector> = dlines.iter().map(|l| einf.lc(&e0.lc(l))).collect();
    unit_axis(&Multivector::vector(euclid(&d)), &dd.iter().map(|m| Multivector::vector(euclid(m))).collect::<Vec<_>>(), 1.0)
}

/// Point of a flat closest to the origin: projection `(e0 ⌋ F) F⁻¹`.
fn flat_foot(flat: &Multivector, dflats: &[Multivector]) -> Result<([f64; 3], Vec<[f64; 3]>)> {
    let e0 = Multivector::e0();
    let finv = flat.inverse()?;
    let a = e0.lc(flat);
    let p = a * finv;
    let w = p[Blade::E0];
    if w.abs() < IDENTITY_TOL {
        return Err(Error::DegeneratePrimitive { measure: w.abs() });
    }
    let e = euclid(&p);
    let c = [e[0] / w, e[1] / w, e[2] / w];
    let dfinv = jacobian_inverse(flat, dflats)?;
    let dc = dflats
        .iter()
        .zip(dfinv.iter())
        .map(|(df, dfi)| {
            let dp = e0.lc(df) * finv + a * *dfi;
            let de = euclid(&dp);
            let dw = dp[Blade::E0];
            core::array::from_fn(|k| (de[k] - c[k] * dw) / w)
        })
        .collect();
    Ok((c, dc))
}

/// Parameters of a primitive blade and their derivatives along `dxs`.
pub fn params_with_tangents(kind: Kind, x: &Multivector, dxs: &[Multivector]) -> Result<(Params, Vec<ParamsDot>)> {
    let m = dxs.len();
    let mut dots = alloc::vec![ParamsDot::default(); m];
    let mut params = Params { center: [0.0; 3], log_radius: 0.0, axis: [0.0; 3] };
    let einf = Multivector::einf();
    let carriers = |v: &Multivector| v.wedge(&einf);
    match kind {
        Kind::Point => {
            let w = x[Blade::E0];
            if w.abs() < IDENTITY_TOL {
                return Err(Error::DegeneratePoint);
            }
            let e = euclid(x);
            params.center = [e[0] / w, e[1] / w, e[2] / w];
            for (d, dx) in dots.iter_mut().zip(dxs) {
                let de = euclid(dx);
                let dw = dx[Blade::E0];
                d.center = core::array::from_fn(|k| (de[k] - params.center[k] * dw) / w);
            }
        }
        Kind::PointPair | Kind::Circle | Kind::Sphere => {
            let (c, dc) = round_center(x, dxs)?;
            let (lr, dlr) = round_log_radius(x, dxs)?;
            params.center = c;
            params.log_radius = lr;
            for k in 0..m {
                dots[k].center = dc[k];
                dots[k].log_radius = dlr[k];
            }
            if kind != Kind::Sphere {
                let carrier = carriers(x);
                let dcar: Vec<Multivector> = dxs.iter().map(carriers).collect();
                let (a, da) = if kind == Kind::Circle {
                    plane_normal(&carrier, &dcar)?
                } else {
                    line_direction(&carrier, &dcar)?
                };
                params.axis = a;
                for k in 0..m {
                    dots[k].axis = da[k];
                }
            }
        }
        Kind::Line | Kind::Plane => {
            let (a, da) = if kind == Kind::Plane { plane_normal(x, dxs)? } else { line_direction(x, dxs)? };
            let (c, dc) = flat_foot(x, dxs)?;
            params.axis = a;
            params.center = c;
            for k in 0..m {
                dots[k].axis = da[k];
                dots[k].center = dc[k];
            }
        }
    }
    Ok((params, dots))
}

/// Rotate a Euclidean vector by a rotor.
pub fn rotate(r: &Multivector, v: [f64; 3]) -> [f64; 3] {
    euclid(&r.sandwich(&Multivector::vector(v)))
}

/// Raw rotor `1 + a2 a1` taking unit vector a1 to a2 (before normalization).
fn raw_rotor(a1: [f64; 3], a2: [f64; 3]) -> Multivector {
    Multivector::ONE + Multivector::vector(a2) * Multivector::vector(a1)
}

/// Unit rotor taking unit vector `a1` onto `a2`.
pub fn rotor_between(a1: [f64; 3], a2: [f64; 3]) -> Result<Multivector> {
    if 1.0 + dot(a1, a2) < IDENTITY_TOL {
        return Err(Error::AntipodalNormals);
    }
    raw_rotor(a1, a2).normalized()
}

/// How `similarity_between_oriented` treats the orientation of the target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Orientation {
    /// Use the blade's own orientation; antipodal axes are an error.
    Strict,
    /// Flip the target axis when it is exactly antipodal to the source axis.
    FlipAntipodal,
    /// Choose the target axis sign closest to this reference (hysteresis),
    /// then flip if it is antipodal to the source axis.
    Follow([f64; 3]),
}

/// Result of matching two primitives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Match {
    pub versor: Multivector,
    /// The target axis sign actually used.
    pub axis: [f64; 3],
    /// Whether the target's own orientation was reversed.
    pub flipped: bool,
}

fn neg3(a: [f64; 3]) -> [f64; 3] {
    [-a[0], -a[1], -a[2]]
}

/// Versor `V = T R D` with `V X1 reverse(V) ∝ X2`.
pub fn similarity_between(x1: &Primitive, x2: &Primitive) -> Result<Multivector> {
    Ok(similarity_between_oriented(x1, x2, Orientation::Strict)?.versor)
}

pub fn similarity_between_oriented(x1: &Primitive, x2: &Primitive, orientation: Orientation) -> Result<Match> {
    if x1.kind != x2.kind {
        return Err(Error::KindMismatch);
    }
    let kind = x1.kind;
    let p1 = x1.params()?;
    let p2 = x2.params()?;
    let mut axis = p2.axis;
    let mut flipped = false;
    let mut rotor = Multivector::ONE;
    if kind.has_axis() {
        if let Orientation::Follow(reference) = orientation {
            if dot(axis, reference) < 0.0 {
                axis = neg3(axis);
                flipped = true;
            }
        }
        if 1.0 + dot(p1.axis, axis) < IDENTITY_TOL {
            if orientation == Orientation::Strict {
                return Err(Error::AntipodalNormals);
            }
            axis = neg3(axis);
            flipped = !flipped;
        }
        rotor = rotor_between(p1.axis, axis)?;
    }
    let (dilator, scale) = if kind.is_round() {
        let b = p2.log_radius - p1.log_radius;
        (exp_dilator(b), libm::exp(b))
    } else {
        (Multivector::ONE, 1.0)
    };
    let moved = rotate(&rotor, [scale * p1.center[0], scale * p1.center[1], scale * p1.center[2]]);
    let mut t: [f64; 3] = core::array::from_fn(|k| p2.center[k] - moved[k]);
    match kind {
        Kind::Line => {
            let along = dot(t, axis);
            t = core::array::from_fn(|k| t[k] - along * axis[k]);
        }
        Kind::Plane => {
            let along = dot(t, axis);
            t = core::array::from_fn(|k| along * axis[k]);
        }
        _ => {}
    }
    let versor = exp_translator(t) * rotor * dilator;
    Ok(Match { versor, axis, flipped })
}

/// Similarity from the unit primitive to `x` with derivatives along `dxs`.
/// Returns the versor, the axis sign used, and one tangent versor per direction.
pub fn similarity_from_unit_with_tangents(
    kind: Kind,
    x: &Multivector,
    dxs: &[Multivector],
    orientation: Orientation,
) -> Result<(Match, Vec<Multivector>)> {
    let (p, dp) = params_with_tangents(kind, x, dxs)?;
    let unit = kind.unit_axis();
    let mut axis = p.axis;
    let mut sign = 1.0;
    let mut flipped = false;
    let mut rotor = Multivector::ONE;
    let mut drotor = alloc::vec![Multivector::ZERO; dxs.len()];
    if kind.has_axis() {
        if let Orientation::Follow(reference) = orientation {
            if dot(axis, reference) < 0.0 {
                sign = -sign;
                flipped = true;
            }
        }
        if 1.0 + sign * dot(unit, axis) < IDENTITY_TOL {
            if orientation == Orientation::Strict {
                return Err(Error::AntipodalNormals);
            }
            sign = -sign;
            flipped = !flipped;
        }
        axis = [sign * axis[0], sign * axis[1], sign * axis[2]];
        let raw = raw_rotor(unit, axis);
        rotor = raw.normalized()?;
        let u = Multivector::vector(unit);
        let draw: Vec<Multivector> = dp
            .iter()
            .map(|d| Multivector::vector([sign * d.axis[0], sign * d.axis[1], sign * d.axis[2]]) * u)
            .collect();
        drotor = jacobian_normalize(&raw, &draw)?;
    }
    let (dilator, has_d) = if kind.is_round() { (exp_dilator(p.log_radius), true) } else { (Multivector::ONE, false) };
    let translator = exp_translator(p.center);
    let tr = translator * rotor;
    let rd = rotor * dilator;
    let e0inf = Multivector::basis(Blade::E0INF);
    let versor = tr * dilator;
    let tangents = dp
        .iter()
        .zip(drotor.iter())
        .map(|(d, dr)| {
            let dt = Multivector::from_terms(&[
                (Blade::E1INF, -0.5 * d.center[0]),
                (Blade::E2INF, -0.5 * d.center[1]),
                (Blade::E3INF, -0.5 * d.center[2]),
            ]);
            let mut dv = dt * rd + translator * *dr * dilator;
            if has_d {
                dv += tr * (e0inf * dilator).scale(0.5 * d.log_radius);
            }
            dv
        })
        .collect();
    Ok((Match { versor, axis, flipped }, tangents))
}

#[cfg(test)]
mod tests {
    use super::*;
    use libm::sqrt;
    use crate::algebra::extract_point;
    use crate::versor::{exp, exp_rotor};

    fn close3(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        (0..3).all(|k| (a[k] - b[k]).abs() <= tol)
    }

    #[test]
    fn unit_primitive_parameters() {
        let c = Primitive::unit(Kind::Circle).params().unwrap();
        assert!(close3(c.center, [0.0; 3], 1e-14));
        assert!(c.log_radius.abs() < 1e-14);
        assert!(close3(c.axis, [0.0, 0.0, 1.0], 1e-14));
        let s = Primitive::unit(Kind::Sphere).params().unwrap();
        assert!(s.log_radius.abs() < 1e-14 && close3(s.center, [0.0; 3], 1e-14));
        let pp = Primitive::unit(Kind::PointPair).params().unwrap();
        assert!(pp.log_radius.abs() < 1e-14 && close3(pp.axis, [0.0, 1.0, 0.0], 1e-14));
        let l = Primitive::unit(Kind::Line).params().unwrap();
        assert!(close3(l.axis, [0.0, 1.0, 0.0], 1e-14) && close3(l.center, [0.0; 3], 1e-14));
        let p = Primitive::unit(Kind::Plane).params().unwrap();
        assert!(close3(p.axis, [0.0, 0.0, 1.0], 1e-14) && close3(p.center, [0.0; 3], 1e-14));
    }

    // Brute-force circumcircle of three points.
    fn circumcircle(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> ([f64; 3], f64, [f64; 3]) {
        let ab: [f64; 3] = core::array::from_fn(|k| b[k] - a[k]);
        let ac: [f64; 3] = core::array::from_fn(|k| c[k] - a[k]);
        let n = [ab[1] * ac[2] - ab[2] * ac[1], ab[2] * ac[0] - ab[0] * ac[2], ab[0] * ac[1] - ab[1] * ac[0]];
        let n2 = dot(n, n);
        let cross = |u: [f64; 3], v: [f64; 3]| [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
        let t1 = cross(n, ab);
        let t2 = cross(ac, n);
        let center: [f64; 3] = core::array::from_fn(|k| a[k] + (dot(ac, ac) * t1[k] + dot(ab, ab) * t2[k]) / (2.0 * n2));
        let r = sqrt((0..3).map(|k| (center[k] - a[k]).powi(2)).sum());
        let nl = sqrt(n2);
        (center, r, [n[0] / nl, n[1] / nl, n[2] / nl])
    }

    #[test]
    fn circle_parameters_match_brute_force() {
        let pts = [[0.3, -0.2, 1.0], [1.5, 0.4, 0.7], [-0.4, 1.1, 0.2]];
        let (c, r, n) = circumcircle(pts[0], pts[1], pts[2]);
        let x = Primitive::from_points(Kind::Circle, &pts).unwrap();
        let p = x.params().unwrap();
        assert!(close3(p.center, c, 1e-12), "{:?} {:?}", p.center, c);
        assert!((p.radius() - r).abs() < 1e-12, "{} {}", p.radius(), r);
        assert!(close3(p.axis, n, 1e-12), "{:?} {:?}", p.axis, n);
    }

    #[test]
    fn point_pair_and_sphere_parameters() {
        let pp = Primitive::from_points(Kind::PointPair, &[[1.0, 2.0, 3.0], [1.0, 2.0, 7.0]]).unwrap();
        let p = pp.params().unwrap();
        assert!(close3(p.center, [1.0, 2.0, 5.0], 1e-12));
        assert!((p.radius() - 2.0).abs() < 1e-12);
        assert!(close3(p.axis, [0.0, 0.0, 1.0], 1e-12));
        let c = [0.5, -1.0, 2.0];
        let r = 1.7;
        let dirs = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-0.6, -0.8, 0.0]];
        let pts: Vec<[f64; 3]> = dirs.iter().map(|d| core::array::from_fn(|k| c[k] + r * d[k])).collect();
        let s = Primitive::from_points(Kind::Sphere, &pts).unwrap().params().unwrap();
        assert!(close3(s.center, c, 1e-12) && (s.radius() - r).abs() < 1e-12);
    }

    #[test]
    fn flat_parameters() {
        let l = Primitive::from_points(Kind::Line, &[[1.0, 1.0, 0.0], [1.0, 1.0, 2.0]]).unwrap();
        let p = l.params().unwrap();
        assert!(close3(p.axis, [0.0, 0.0, 1.0], 1e-12));
        assert!(close3(p.center, [1.0, 1.0, 0.0], 1e-12));
        let pl = Primitive::from_points(Kind::Plane, &[[0.0, 0.0, 2.0], [1.0, 0.0, 2.0], [0.0, 1.0, 2.0]]).unwrap();
        let q = pl.params().unwrap();
        assert!(close3(q.axis, [0.0, 0.0, 1.0], 1e-12));
        assert!(close3(q.center, [0.0, 0.0, 2.0], 1e-12));
    }

    #[test]
    fn circle_orientation_follows_point_order() {
        let a = Primitive::from_points(Kind::Circle, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]]).unwrap();
        let b = Primitive::from_points(Kind::Circle, &[[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        assert!(close3(a.axis().unwrap(), [0.0, 0.0, 1.0], 1e-14));
        assert!(close3(b.axis().unwrap(), [0.0, 0.0, -1.0], 1e-14));
        assert_eq!(similarity_between(&a, &b), Err(Error::AntipodalNormals));
        let m = similarity_between_oriented(&a, &b, Orientation::FlipAntipodal).unwrap();
        assert!(m.flipped);
        assert!(a.transformed(&m.versor).same_as(&b, 1e-12));
    }

    #[test]
    fn degenerate_inputs() {
        let e = Primitive::from_points(Kind::Circle, &[[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        assert!(matches!(e, Err(Error::DegeneratePrimitive { .. })));
        let e = Primitive::from_points(Kind::PointPair, &[[1.0; 3], [1.0; 3]]);
        assert!(matches!(e, Err(Error::DegeneratePrimitive { .. })));
        let e = Primitive::from_points(Kind::Sphere, &[[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]]);
        assert!(matches!(e, Err(Error::DegeneratePrimitive { .. })));
        let e = Primitive::from_conformal_points(Kind::Point, &[Multivector::einf()]);
        assert_eq!(e, Err(Error::DegeneratePoint));
    }

    #[test]
    fn projection_onto_flats() {
        let pl = Primitive::from_points(Kind::Plane, &[[0.0, 0.0, 2.0], [1.0, 0.0, 2.0], [0.0, 1.0, 2.0]]).unwrap();
        let q = pl.project(&embed_point([0.3, -0.4, 5.0])).unwrap();
        assert!(close3(extract_point(&q).unwrap(), [0.3, -0.4, 2.0], 1e-12));
        let l = Primitive::from_points(Kind::Line, &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        let q = l.project(&embed_point([0.7, 2.0, -1.0])).unwrap();
        assert!(close3(extract_point(&q).unwrap(), [0.7, 0.0, 0.0], 1e-12));
    }

    #[test]
    fn meet_of_two_planes_is_a_line() {
        let a = Primitive::from_points(Kind::Plane, &[[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let b = Primitive::from_points(Kind::Plane, &[[0.0; 3], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let l = Primitive { kind: Kind::Line, blade: meet(&a.blade, &b.blade) };
        let expected = Primitive::from_points(Kind::Line, &[[0.0; 3], [0.0, 1.0, 0.0]]).unwrap();
        assert!(l.same_as(&expected, 1e-12));
    }

    #[test]
    fn similarity_between_maps_every_kind() {
        let v = exp(Group::Similarity, &[0.4, -0.3, 0.8, 0.35, 0.2, -1.1, 0.6]).unwrap();
        for kind in Kind::ALL {
            let x1 = Primitive::unit(kind);
            let moved = Primitive::from_points(
                kind,
                &[[0.3, 0.1, -0.2], [1.2, 0.5, 0.3], [0.2, 1.4, 0.9], [-0.5, 0.3, 1.1]][..kind.point_count()],
            )
            .unwrap();
            for x2 in [x1.transformed(&v), moved] {
                let s = similarity_between(&x1, &x2).unwrap();
                assert!(x1.transformed(&s).same_as(&x2, 1e-8), "{kind:?}");
            }
        }
    }

    #[test]
    fn similarity_between_general_source() {
        let a = Primitive::from_points(Kind::Circle, &[[1.0, 0.2, 0.3], [0.1, 1.0, 0.0], [-0.8, 0.1, 0.5]]).unwrap();
        let b = a.transformed(&(exp_translator([0.5, -1.0, 2.0]) * exp_rotor([0.2, 0.1, -0.4]) * exp_dilator(0.3)));
        let s = similarity_between(&a, &b).unwrap();
        assert!(a.transformed(&s).same_as(&b, 1e-8));
        let l1 = Primitive::from_points(Kind::Line, &[[1.0, 0.0, 0.0], [1.0, 1.0, 1.0]]).unwrap();
        let l2 = Primitive::from_points(Kind::Line, &[[0.0, 2.0, 0.0], [1.0, 2.0, 3.0]]).unwrap();
        let s = similarity_between(&l1, &l2).unwrap();
        assert!(l1.transformed(&s).same_as(&l2, 1e-8));
    }

    #[test]
    fn tangents_match_central_differences() {
        let pts = [[0.3, -0.2, 1.0], [1.5, 0.4, 0.7], [-0.4, 1.1, 0.2], [0.2, 0.2, -0.6]];
        let h = 1e-6;
        for kind in Kind::ALL {
            let n = kind.point_count();
            let build = |p: &[[f64; 3]]| Primitive::from_points(kind, p).unwrap().blade;
            let x = build(&pts[..n]);
            let mut dirs = Vec::new();
            let mut fd = Vec::new();
            for i in 0..n {
                for k in 0..3 {
                    let mut pp = pts;
                    pp[i][k] += h;
                    let mut pm = pts;
                    pm[i][k] -= h;
                    let xp = build(&pp[..n]);
                    let xm = build(&pm[..n]);
                    dirs.push((xp - xm).scale(0.5 / h));
                    let vp = similarity_from_unit_with_tangents(kind, &xp, &[], Orientation::Strict).unwrap().0.versor;
                    let vm = similarity_from_unit_with_tangents(kind, &xm, &[], Orientation::Strict).unwrap().0.versor;
                    fd.push((vp - vm).scale(0.5 / h));
                }
            }
            let (_, an) = similarity_from_unit_with_tangents(kind, &x, &dirs, Orientation::Strict).unwrap();
            let num: f64 = an.iter().zip(&fd).map(|(a, b)| (*a - *b).coeff_norm().powi(2)).sum();
            let den: f64 = fd.iter().map(|b| b.coeff_norm().powi(2)).sum();
            assert!(sqrt(num / den) < 1e-6, "{kind:?}: {}", sqrt(num / den));
        }
    }

    #[test]
    fn from_unit_agrees_with_similarity_between() {
        let x = Primitive::from_points(Kind::Circle, &[[0.3, -0.2, 1.0], [1.5, 0.4, 0.7], [-0.4, 1.1, 0.2]]).unwrap();
        let a = similarity_between(&Primitive::unit(Kind::Circle), &x).unwrap();
        let (b, _) = similarity_from_unit_with_tangents(Kind::Circle, &x.blade, &[], Orientation::Strict).unwrap();
        assert!(a.approx_eq(&b.versor, 1e-14));
    }
}
