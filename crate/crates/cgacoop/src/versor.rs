//! Rotors, translators, dilators, motors and similarity versors.
//!
//! Bivector coordinates are always seven numbers in the order
//! (e23, e13, e12, e0∞, e1∞, e2∞, e3∞): three rotation, one dilation and
//! three translation coordinates. Exponentials use the split form
//! `exp(B_T) exp(B_R) exp(B_D)`; logarithms invert it factor by factor.
//!
//! Rotation and translation follow `V = exp(−½B)`: `exp(θ e12)` turns e1
//! towards e2 by θ and `exp(t ∧ e∞)` translates by t. The dilator uses
//! `exp(b e0∞) = cosh(b/2) + sinh(b/2) e0∞`, which scales distances from the
//! origin by `e^b`, so `B_D = ln(d) e0∞` and d > 1 enlarges.

use libm::{atan2, atanh, cosh, sinh, sqrt};
use nalgebra::DMatrix;

use crate::algebra::{Blade, Multivector, DEGENERACY_TOL, IDENTITY_TOL};
use crate::error::{Error, Result};

/// Seven bivector coordinates (e23, e13, e12, e0∞, e1∞, e2∞, e3∞).
pub type Bivector = [f64; 7];

/// Blades of the seven bivector coordinates, in coordinate order.
pub const BIVECTOR_BLADES: [Blade; 7] = [
    Blade::E23,
    Blade::E13,
    Blade::E12,
    Blade::E0INF,
    Blade::E1INF,
    Blade::E2INF,
    Blade::E3INF,
];

/// Blades spanned by similarity versors: scalar, seven bivectors, four quadvectors.
pub const SIMILARITY_BLADES: [Blade; 12] = [
    Blade::SCALAR,
    Blade::E23,
    Blade::E13,
    Blade::E12,
    Blade::E0INF,
    Blade::E1INF,
    Blade::E2INF,
    Blade::E3INF,
    Blade::E012INF,
    Blade::E013INF,
    Blade::E023INF,
    Blade::E123INF,
];

/// Renormalize a composed versor after this many compositions.
pub const RENORMALIZE_EVERY: u32 = 16;

/// The versor groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Group {
    Rotor,
    Translator,
    Dilator,
    Motor,
    Similarity,
}

impl Group {
    /// Bivector coordinates that belong to the group's Lie algebra.
    pub fn coordinate_mask(self) -> [bool; 7] {
        match self {
            Group::Rotor => [true, true, true, false, false, false, false],
            Group::Translator => [false, false, false, false, true, true, true],
            Group::Dilator => [false, false, false, true, false, false, false],
            Group::Motor => [true, true, true, false, true, true, true],
            Group::Similarity => [true; 7],
        }
    }

    /// Blades a versor of the group may have nonzero coefficients on.
    pub fn support(self) -> &'static [Blade] {
        match self {
            Group::Rotor => &[Blade::SCALAR, Blade::E23, Blade::E13, Blade::E12],
            Group::Translator => &[Blade::SCALAR, Blade::E1INF, Blade::E2INF, Blade::E3INF],
            Group::Dilator => &[Blade::SCALAR, Blade::E0INF],
            Group::Motor => &[
                Blade::SCALAR,
                Blade::E23,
                Blade::E13,
                Blade::E12,
                Blade::E1INF,
                Blade::E2INF,
                Blade::E3INF,
                Blade::E123INF,
            ],
            Group::Similarity => &SIMILARITY_BLADES,
        }
    }

    /// Smallest group containing the product of elements of both groups.
    pub fn join(self, other: Group) -> Group {
        use Group::*;
        match (self, other) {
            (a, b) if a == b => a,
            (Similarity, _) | (_, Similarity) | (Dilator, _) | (_, Dilator) => Similarity,
            _ => Motor,
        }
    }
}

/// Multivector form of bivector coordinates.
pub fn bivector_mv(b: &Bivector) -> Multivector {
    let mut m = Multivector::ZERO;
    for (k, blade) in BIVECTOR_BLADES.iter().enumerate() {
        m[*blade] = b[k];
    }
    m
}

/// Bivector coordinates of a multivector (other blades are ignored).
pub fn bivector_coords(m: &Multivector) -> Bivector {
    let mut b = [0.0; 7];
    for (k, blade) in BIVECTOR_BLADES.iter().enumerate() {
        b[k] = m[*blade];
    }
    b
}

/// Rotation bivector coordinates (e23, e13, e12) for a rotation of `angle`
/// about the unit axis `axis` (right-hand rule).
pub fn rotation_bivector(axis: [f64; 3], angle: f64) -> [f64; 3] {
    [axis[0] * angle, -axis[1] * angle, axis[2] * angle]
}

/// Axis-angle vector ω (|ω| = angle) of rotation coordinates (e23, e13, e12).
pub fn rotation_axis_vector(b: [f64; 3]) -> [f64; 3] {
    [b[0], -b[1], b[2]]
}

fn check_support(v: &Multivector, group: Group) -> Result<()> {
    let support = group.support();
    let scale = v.max_abs().max(1.0);
    let mut residual = 0.0f64;
    for i in 0..32 {
        if !support.contains(&Blade(i)) {
            residual = residual.max(v.0[i].abs());
        }
    }
    if residual > DEGENERACY_TOL * scale {
        return Err(Error::NotInGroup { residual });
    }
    Ok(())
}

fn check_coordinates(b: &Bivector, group: Group) -> Result<()> {
    let mask = group.coordinate_mask();
    let residual = (0..7).filter(|&k| !mask[k]).fold(0.0f64, |m, k| m.max(b[k].abs()));
    if residual > 0.0 {
        return Err(Error::NotInGroup { residual });
    }
    Ok(())
}

/// `sin(θ/2)/θ` with its series near zero.
fn half_sinc(theta: f64) -> f64 {
    if theta < 1e-6 {
        0.5 - theta * theta / 48.0
    } else {
        libm::sin(0.5 * theta) / theta
    }
}

/// `exp` of rotation coordinates (e23, e13, e12).
pub fn exp_rotor(b: [f64; 3]) -> Multivector {
    let theta = sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
    let s = half_sinc(theta);
    Multivector::from_terms(&[
        (Blade::SCALAR, libm::cos(0.5 * theta)),
        (Blade::E23, -s * b[0]),
        (Blade::E13, -s * b[1]),
        (Blade::E12, -s * b[2]),
    ])
}

/// `exp(t ∧ e∞) = 1 − ½ t e∞`.
pub fn exp_translator(t: [f64; 3]) -> Multivector {
    Multivector::from_terms(&[
        (Blade::SCALAR, 1.0),
        (Blade::E1INF, -0.5 * t[0]),
        (Blade::E2INF, -0.5 * t[1]),
        (Blade::E3INF, -0.5 * t[2]),
    ])
}

/// `exp(b e0∞) = cosh(b/2) + sinh(b/2) e0∞`; scales by `e^b`.
pub fn exp_dilator(b: f64) -> Multivector {
    Multivector::from_terms(&[(Blade::SCALAR, cosh(0.5 * b)), (Blade::E0INF, sinh(0.5 * b))])
}

/// Translation part (coordinates 4..7) of a bivector.
pub fn translation_of(b: &Bivector) -> [f64; 3] {
    [b[4], b[5], b[6]]
}

/// Rotation part (coordinates 0..3) of a bivector.
pub fn rotation_of(b: &Bivector) -> [f64; 3] {
    [b[0], b[1], b[2]]
}

/// Group exponential in split form.
pub fn exp(group: Group, b: &Bivector) -> Result<Multivector> {
    check_coordinates(b, group)?;
    let r = exp_rotor(rotation_of(b));
    let t = exp_translator(translation_of(b));
    let d = exp_dilator(b[3]);
    Ok(match group {
        Group::Rotor => r,
        Group::Translator => t,
        Group::Dilator => d,
        Group::Motor => t * r,
        Group::Similarity => t * r * d,
    })
}

/// Rotor logarithm; `RotationSingularity` where the rotor approaches −1.
pub fn log_rotor(r: &Multivector) -> Result<[f64; 3]> {
    let r0 = r[Blade::SCALAR];
    let bv = [r[Blade::E23], r[Blade::E13], r[Blade::E12]];
    let n = sqrt(bv[0] * bv[0] + bv[1] * bv[1] + bv[2] * bv[2]);
    let scale = sqrt(r0 * r0 + n * n);
    if scale < IDENTITY_TOL {
        return Err(Error::NullMultivector);
    }
    if n < IDENTITY_TOL * scale {
        return Ok([0.0; 3]);
    }
    if r0 <= -(1.0 - DEGENERACY_TOL) * scale {
        return Err(Error::RotationSingularity);
    }
    let f = -2.0 * atan2(n, r0) / n;
    Ok([f * bv[0], f * bv[1], f * bv[2]])
}

/// Translator logarithm `−2⟨T⟩₂` (after scaling the scalar part to one).
pub fn log_translator(t: &Multivector) -> Result<[f64; 3]> {
    let s = t[Blade::SCALAR];
    if s.abs() < IDENTITY_TOL {
        return Err(Error::NullMultivector);
    }
    Ok([
        -2.0 * t[Blade::E1INF] / s,
        -2.0 * t[Blade::E2INF] / s,
        -2.0 * t[Blade::E3INF] / s,
    ])
}

/// Dilator logarithm; the sign follows the e0∞ coefficient.
pub fn log_dilator(d: &Multivector) -> Result<f64> {
    let c = d[Blade::SCALAR];
    let s = d[Blade::E0INF];
    if c <= 0.0 || s.abs() >= c {
        return Err(Error::NotInGroup { residual: s.abs() - c });
    }
    Ok(2.0 * atanh(s / c))
}

/// Factors of a similarity versor `V = T R D` (each unit, `R` with the sign of `⟨V⟩₀`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityFactors {
    pub translator: Multivector,
    pub rotor: Multivector,
    pub dilator: Multivector,
    /// Translation vector of `translator`.
    pub t: [f64; 3],
    /// Dilation exponent of `dilator`.
    pub b: f64,
}

fn rotor_dilator_part(v: &Multivector) -> Multivector {
    let mut y = Multivector::ZERO;
    for blade in [
        Blade::SCALAR,
        Blade::E23,
        Blade::E13,
        Blade::E12,
        Blade::E0INF,
        Blade::E012INF,
        Blade::E013INF,
        Blade::E023INF,
    ] {
        y[blade] = v[blade];
    }
    y
}

/// Decompose a (possibly unnormalized) similarity versor into `T R D`.
pub fn decompose(v: &Multivector) -> Result<SimilarityFactors> {
    let a = [v[Blade::SCALAR], v[Blade::E23], v[Blade::E13], v[Blade::E12]];
    let c = sqrt(a.iter().map(|x| x * x).sum());
    if c < IDENTITY_TOL {
        return Err(Error::NotInGroup { residual: c });
    }
    let rotor = Multivector::from_terms(&[
        (Blade::SCALAR, a[0] / c),
        (Blade::E23, a[1] / c),
        (Blade::E13, a[2] / c),
        (Blade::E12, a[3] / c),
    ]);
    let d_raw = rotor.reverse() * rotor_dilator_part(v);
    let b = log_dilator(&d_raw)?;
    let dilator = exp_dilator(b);
    let t_raw = *v * dilator.reverse() * rotor.reverse();
    let t = log_translator(&t_raw)?;
    Ok(SimilarityFactors { translator: exp_translator(t), rotor, dilator, t, b })
}

/// Split-form logarithm in the given group.
pub fn log(group: Group, v: &Multivector) -> Result<Bivector> {
    check_support(v, group)?;
    let mut out = [0.0; 7];
    match group {
        Group::Rotor => {
            let r = log_rotor(&v.normalized()?)?;
            out[..3].copy_from_slice(&r);
        }
        Group::Translator => {
            let t = log_translator(v)?;
            out[4..].copy_from_slice(&t);
        }
        Group::Dilator => {
            out[3] = log_dilator(&v.normalized()?)?;
        }
        Group::Motor | Group::Similarity => {
            let f = decompose(v)?;
            let r = log_rotor(&f.rotor)?;
            out[..3].copy_from_slice(&r);
            out[3] = f.b;
            out[4..].copy_from_slice(&f.t);
        }
    }
    Ok(out)
}

/// Logarithm of the relative versor `reverse(V_c) V_d`, taking the
/// representative whose rotor part has a non-negative scalar (shortest rotation).
pub fn error_bivector(current: &Multivector, desired: &Multivector) -> Result<Bivector> {
    let mut e = current.reverse() * *desired;
    if e[Blade::SCALAR] < 0.0 {
        e = -e;
    }
    log(Group::Similarity, &e)
}

/// Forward-mode derivative of the similarity logarithm at `v` along `dv`.
pub fn log_tangent(v: &Multivector, dv: &Multivector) -> Result<Bivector> {
    // Rotor factor.
    let a = [v[Blade::SCALAR], v[Blade::E23], v[Blade::E13], v[Blade::E12]];
    let da = [dv[Blade::SCALAR], dv[Blade::E23], dv[Blade::E13], dv[Blade::E12]];
    let c = sqrt(a.iter().map(|x| x * x).sum());
    if c < IDENTITY_TOL {
        return Err(Error::NotInGroup { residual: c });
    }
    let dc = (0..4).map(|k| a[k] * da[k]).sum::<f64>() / c;
    let rc: [f64; 4] = core::array::from_fn(|k| a[k] / c);
    let drc: [f64; 4] = core::array::from_fn(|k| da[k] / c - a[k] * dc / (c * c));
    let rotor = Multivector::from_terms(&[
        (Blade::SCALAR, rc[0]),
        (Blade::E23, rc[1]),
        (Blade::E13, rc[2]),
        (Blade::E12, rc[3]),
    ]);
    let drotor = Multivector::from_terms(&[
        (Blade::SCALAR, drc[0]),
        (Blade::E23, drc[1]),
        (Blade::E13, drc[2]),
        (Blade::E12, drc[3]),
    ]);

    // Dilator factor.
    let y = rotor_dilator_part(v);
    let dy = rotor_dilator_part(dv);
    let d_raw = rotor.reverse() * y;
    let dd_raw = drotor.reverse() * y + rotor.reverse() * dy;
    let (dc0, ds0) = (d_raw[Blade::SCALAR], d_raw[Blade::E0INF]);
    let (ddc0, dds0) = (dd_raw[Blade::SCALAR], dd_raw[Blade::E0INF]);
    let b = log_dilator(&d_raw)?;
    let db = 2.0 * (dds0 * dc0 - ds0 * ddc0) / (dc0 * dc0 - ds0 * ds0);
    let dil = exp_dilator(b);
    let ddil = (Multivector::basis(Blade::E0INF) * dil).scale(0.5 * db);

    // Translator factor.
    let t_raw = *v * dil.reverse() * rotor.reverse();
    let dt_raw = *dv * dil.reverse() * rotor.reverse()
        + *v * ddil.reverse() * rotor.reverse()
        + *v * dil.reverse() * drotor.reverse();
    let s = t_raw[Blade::SCALAR];
    let ds = dt_raw[Blade::SCALAR];
    if s.abs() < IDENTITY_TOL {
        return Err(Error::NullMultivector);
    }
    let mut out = [0.0; 7];
    for (k, blade) in [Blade::E1INF, Blade::E2INF, Blade::E3INF].into_iter().enumerate() {
        out[4 + k] = -2.0 * (dt_raw[blade] * s - t_raw[blade] * ds) / (s * s);
    }
    out[3] = db;

    // Rotor logarithm B = −2 f(n, r0) bv with f = atan2(n, r0)/n.
    let r0 = rc[0];
    let dr0 = drc[0];
    let bv = [rc[1], rc[2], rc[3]];
    let dbv = [drc[1], drc[2], drc[3]];
    let n = sqrt(bv.iter().map(|x| x * x).sum());
    if r0 <= -(1.0 - DEGENERACY_TOL) {
        return Err(Error::RotationSingularity);
    }
    let rho2 = r0 * r0 + n * n;
    let (f, g) = if n < 1e-3 * r0.abs() {
        let r3 = r0 * r0 * r0;
        (1.0 / r0 - n * n / (3.0 * r3), -2.0 / (3.0 * r3) + 0.8 * n * n / (r3 * r0 * r0))
    } else {
        let phi = atan2(n, r0);
        (phi / n, (r0 * n / rho2 - phi) / (n * n * n))
    };
    let df_dr0 = -1.0 / rho2;
    let bv_dbv: f64 = (0..3).map(|k| bv[k] * dbv[k]).sum();
    for k in 0..3 {
        out[k] = -2.0 * ((g * bv_dbv + df_dr0 * dr0) * bv[k] + f * dbv[k]);
    }
    Ok(out)
}

/// Coefficients of a multivector on the twelve similarity blades.
pub fn similarity_coeffs(v: &Multivector) -> [f64; 12] {
    core::array::from_fn(|k| v[SIMILARITY_BLADES[k]])
}

/// 7×12 Jacobian of the similarity logarithm with respect to the twelve
/// versor coefficients, by central differences with step `h`.
pub fn log_jacobian_fd(v: &Multivector, h: f64) -> Result<DMatrix<f64>> {
    let mut j = DMatrix::zeros(7, 12);
    for (col, blade) in SIMILARITY_BLADES.iter().enumerate() {
        let mut plus = *v;
        plus[*blade] += h;
        let mut minus = *v;
        minus[*blade] -= h;
        let lp = log(Group::Similarity, &plus)?;
        let lm = log(Group::Similarity, &minus)?;
        for row in 0..7 {
            j[(row, col)] = (lp[row] - lm[row]) / (2.0 * h);
        }
    }
    Ok(j)
}

/// Analytic 7×12 Jacobian of the similarity logarithm.
pub fn log_jacobian(v: &Multivector) -> Result<DMatrix<f64>> {
    let mut j = DMatrix::zeros(7, 12);
    for (col, blade) in SIMILARITY_BLADES.iter().enumerate() {
        let d = log_tangent(v, &Multivector::basis(*blade))?;
        for row in 0..7 {
            j[(row, col)] = d[row];
        }
    }
    Ok(j)
}

/// A group element that tracks how many compositions produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Versor {
    pub mv: Multivector,
    pub group: Group,
    compositions: u32,
}

impl Versor {
    pub fn identity(group: Group) -> Self {
        Versor { mv: Multivector::ONE, group, compositions: 0 }
    }

    /// Wrap a multivector after checking its support.
    pub fn new(group: Group, mv: Multivector) -> Result<Self> {
        check_support(&mv, group)?;
        Ok(Versor { mv, group, compositions: 0 })
    }

    pub fn exp(group: Group, b: &Bivector) -> Result<Self> {
        Ok(Versor { mv: exp(group, b)?, group, compositions: 0 })
    }

    pub fn log(&self) -> Result<Bivector> {
        log(self.group, &self.mv)
    }

    /// Product `self * rhs`, renormalized every [`RENORMALIZE_EVERY`] compositions.
    pub fn compose(&self, rhs: &Versor) -> Versor {
        let mut mv = self.mv * rhs.mv;
        let mut compositions = self.compositions.max(rhs.compositions) + 1;
        if compositions >= RENORMALIZE_EVERY {
            if let Ok(n) = mv.normalized() {
                mv = n;
            }
            compositions = 0;
        }
        Versor { mv, group: self.group.join(rhs.group), compositions }
    }

    pub fn reverse(&self) -> Versor {
        Versor { mv: self.mv.reverse(), ..*self }
    }

    /// Sandwich `V X reverse(V)`.
    pub fn apply(&self, x: &Multivector) -> Multivector {
        self.mv.sandwich(x)
    }

    pub fn compositions(&self) -> u32 {
        self.compositions
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::embed_point;
    use core::f64::consts::PI;

    #[test]
    fn half_turn_about_e12() {
        let r = exp(Group::Rotor, &[0.0, 0.0, PI, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(r.approx_eq(&Multivector::term(Blade::E12, -1.0), 1e-15));
        let x = r.sandwich(&Multivector::e1());
        assert!(x.approx_eq(&Multivector::term(Blade::E1, -1.0), 1e-15));
    }

    #[test]
    fn rotation_direction_is_right_handed() {
        let r = exp_rotor(rotation_bivector([0.0, 0.0, 1.0], PI / 2.0));
        assert!(r.sandwich(&Multivector::e1()).approx_eq(&Multivector::e2(), 1e-15));
        let ry = exp_rotor(rotation_bivector([0.0, 1.0, 0.0], PI / 2.0));
        assert!(ry.sandwich(&Multivector::e3()).approx_eq(&Multivector::e1(), 1e-15));
        let rx = exp_rotor(rotation_bivector([1.0, 0.0, 0.0], PI / 2.0));
        assert!(rx.sandwich(&Multivector::e2()).approx_eq(&Multivector::e3(), 1e-15));
    }

    #[test]
    fn unit_translation_along_e1() {
        let t = exp(Group::Translator, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let expected = Multivector::from_terms(&[(Blade::SCALAR, 1.0), (Blade::E1INF, -0.5)]);
        assert_eq!(t, expected);
        assert_eq!(t.sandwich(&Multivector::e0()), embed_point([1.0, 0.0, 0.0]));
    }

    #[test]
    fn dilator_convention() {
        let d = exp_dilator(-1.0);
        assert!((libm::exp(-1.0) - 0.3679).abs() < 1e-4);
        let p = d.sandwich(&embed_point([1.0, 2.0, -0.5]));
        let x = crate::algebra::extract_point(&p).unwrap();
        let s = libm::exp(-1.0);
        for (k, v) in [1.0, 2.0, -0.5].iter().enumerate() {
            assert!((x[k] - s * v).abs() < 1e-14);
        }
        let b = log(Group::Dilator, &exp_dilator(libm::log(0.3679))).unwrap();
        assert!((b[3] + 1.0).abs() < 1e-4);
        assert!(log(Group::Dilator, &exp_dilator(2.0)).unwrap()[3] > 0.0);
    }

    #[test]
    fn identity_logs_are_exactly_zero() {
        for g in [Group::Rotor, Group::Translator, Group::Dilator, Group::Motor, Group::Similarity] {
            assert_eq!(log(g, &Multivector::ONE).unwrap(), [0.0; 7]);
        }
        let mut r = Multivector::ONE;
        r[Blade::E12] = 1e-13;
        assert_eq!(log_rotor(&r).unwrap(), [0.0; 3]);
    }

    #[test]
    fn rotor_near_minus_one_is_singular() {
        let r = exp_rotor([0.0, 0.0, 2.0 * PI - 1e-6]);
        assert_eq!(log_rotor(&r), Err(Error::RotationSingularity));
    }

    #[test]
    fn small_rotation_log_is_accurate() {
        let b = [3e-7, -1e-7, 2e-7];
        let l = log_rotor(&exp_rotor(b)).unwrap();
        for k in 0..3 {
            assert!((l[k] - b[k]).abs() < 1e-20 + 1e-12 * b[k].abs());
        }
    }

    #[test]
    fn wrong_group_is_rejected() {
        let t = exp_translator([1.0, 0.0, 0.0]);
        assert!(matches!(log(Group::Rotor, &t), Err(Error::NotInGroup { .. })));
        assert!(matches!(exp(Group::Rotor, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]), Err(Error::NotInGroup { .. })));
    }

    #[test]
    fn group_join() {
        assert_eq!(Group::Rotor.join(Group::Translator), Group::Motor);
        assert_eq!(Group::Motor.join(Group::Dilator), Group::Similarity);
        assert_eq!(Group::Rotor.join(Group::Rotor), Group::Rotor);
    }

    #[test]
    fn similarity_round_trip() {
        let b = [0.3, -0.7, 1.1, 0.4, 1.5, -2.0, 0.25];
        let v = exp(Group::Similarity, &b).unwrap();
        let l = log(Group::Similarity, &v).unwrap();
        for k in 0..7 {
            assert!((l[k] - b[k]).abs() < 1e-12, "{k}: {} vs {}", l[k], b[k]);
        }
        let f = decompose(&v).unwrap();
        assert!((f.translator * f.rotor * f.dilator).approx_eq(&v, 1e-14));
    }

    #[test]
    fn error_bivector_picks_short_rotation() {
        let a = exp(Group::Similarity, &[0.0, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let b = -exp(Group::Similarity, &[0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let e = error_bivector(&a, &b).unwrap();
        assert!((e[2] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn compose_renormalizes() {
        let step = Versor::exp(Group::Rotor, &[0.01, 0.02, 0.03, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let mut v = Versor::identity(Group::Rotor);
        for k in 1..=40u32 {
            v = v.compose(&step);
            assert_eq!(v.compositions(), k % RENORMALIZE_EVERY);
        }
        assert!((v.mv.squared_norm().unwrap() - 1.0).abs() < 1e-14);
        let direct = exp_rotor([0.4, 0.8, 1.2]);
        assert!(v.mv.approx_eq(&direct, 1e-12));
    }

    #[test]
    fn log_jacobians_agree() {
        let v = exp(Group::Similarity, &[0.3, -0.2, 0.9, -0.3, 0.5, 0.1, -0.7]).unwrap();
        let a = log_jacobian(&v).unwrap();
        let f = log_jacobian_fd(&v, 1e-7).unwrap();
        let rel = (&a - &f).norm() / f.norm();
        assert!(rel < 1e-5, "{rel}");
    }

    #[test]
    fn log_tangent_small_angle_branch() {
        let v = exp(Group::Similarity, &[1e-5, 2e-5, -1e-5, 0.1, 0.2, 0.0, 0.1]).unwrap();
        let a = log_jacobian(&v).unwrap();
        let f = log_jacobian_fd(&v, 1e-7).unwrap();
        assert!((&a - &f).norm() / f.norm() < 1e-5);
    }
}
