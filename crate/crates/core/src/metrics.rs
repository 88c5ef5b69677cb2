//! Grasp-matrix dexterity measures for a dual-arm pair of parallel-jaw
//! grasps (four point contacts with friction).
//!
//! * stability `ω = ‖G c‖₂` with `c` the stacked friction-cone axes,
//! * force-closure relaxation `G Gᵀ ⪰ ε I`,
//! * minimum singular value `σ_m` of `G`,
//! * `θ_G`, the angle between the force-ellipsoid major axis (eigenvector of the
//!   smallest eigenvalue of `G Gᵀ`) and the gravity wrench,
//! * normalized scores and their weighted combination.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::antipodal::Grasp;
use crate::error::{Error, Result};
use crate::geom::{Mat3, Vec3};

pub type Mat6 = SMatrix<f64, 6, 6>;
pub type Vec6 = SVector<f64, 6>;
pub type Mat6x12 = SMatrix<f64, 6, 12>;
pub type Vec12 = SVector<f64, 12>;

/// Pure downward force, zero torque.
pub fn gravity_wrench() -> Vec6 {
    Vec6::new(0.0, 0.0, -1.0, 0.0, 0.0, 0.0)
}

/// Four contacts ordered `[l1, l2, r1, r2]` with inward cone axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactSet {
    pub points: [Vec3; 4],
    pub cone_axes: [Vec3; 4],
    pub mu: f64,
    pub rho: f64,
}

impl ContactSet {
    pub fn new(points: [Vec3; 4], cone_axes: [Vec3; 4], mu: f64, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("rho {rho} must be positive")));
        }
        if let Some(a) = cone_axes.iter().find(|a| (a.norm() - 1.0).abs() > 1e-9) {
            return Err(Error::InvalidArgument(format!("cone axis {a:?} is not unit length")));
        }
        if points.iter().any(|p| !p.iter().all(|x| x.is_finite())) {
            return Err(Error::InvalidArgument("non-finite contact point".into()));
        }
        Ok(Self {
            points,
            cone_axes,
            mu,
            rho,
        })
    }

    /// Contacts of grasp `a` (left) then grasp `b` (right); cone axes are
    /// the inward surface normals.
    pub fn from_pair(a: &Grasp, b: &Grasp, mu: f64, rho: f64) -> Result<Self> {
        Self::new(
            [a.contacts[0], a.contacts[1], b.contacts[0], b.contacts[1]],
            [-a.normals[0], -a.normals[1], -b.normals[0], -b.normals[1]],
            mu,
            rho,
        )
    }

    pub fn stacked_axes(&self) -> Vec12 {
        Vec12::from_iterator(self.cone_axes.iter().flat_map(|a| a.iter().copied()))
    }
}

pub fn skew(p: &Vec3) -> Mat3 {
    Mat3::new(0.0, -p.z, p.y, p.z, 0.0, -p.x, -p.y, p.x, 0.0)
}

/// `G = [G_l1, G_l2, G_r1, G_r2]`, `G_i = [I₃; ⌊p_i/ρ⌋ₓᵀ]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraspMatrix(pub Mat6x12);

impl GraspMatrix {
    pub fn gram(&self) -> Mat6 {
        self.0 * self.0.transpose()
    }

    /// Eigenvalues (ascending) and eigenvectors of `G Gᵀ`.
    pub fn gram_eigen(&self) -> (Vec6, Mat6) {
        symmetric_eigen(&self.gram())
    }
}

pub fn build_grasp_matrix(contacts: &ContactSet) -> GraspMatrix {
    let mut g = Mat6x12::zeros();
    for (k, p) in contacts.points.iter().enumerate() {
        let c = 3 * k;
        g.fixed_view_mut::<3, 3>(0, c).copy_from(&Mat3::identity());
        g.fixed_view_mut::<3, 3>(3, c).copy_from(&skew(&(p / contacts.rho)).transpose());
    }
    GraspMatrix(g)
}

pub fn stability_omega(g: &GraspMatrix, contacts: &ContactSet) -> f64 {
    (g.0 * contacts.stacked_axes()).norm()
}

/// Minimum eigenvalue of `G Gᵀ` is at least `epsilon`.
pub fn force_closure_feasible(g: &GraspMatrix, epsilon: f64) -> bool {
    g.gram_eigen().0[0] >= epsilon
}

/// Smallest of the six singular values of `G`.
pub fn min_singular_value(g: &GraspMatrix) -> f64 {
    g.0.svd(false, false).singular_values.min().max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipsoidAngle {
    pub theta: f64,
    pub major_axis: Vec6,
    /// All six eigenvalues coincide; `theta` is reported as π/2.
    pub degenerate: bool,
}

/// Angle in `[0, π/2]` between the gravity wrench and the eigenvector of
/// the smallest eigenvalue of `G Gᵀ`.
pub fn force_ellipsoid_angle(g: &GraspMatrix, gravity: &Vec6) -> Result<EllipsoidAngle> {
    let gn = gravity.norm();
    if !(gn > 0.0 && gn.is_finite()) {
        return Err(Error::InvalidArgument("gravity wrench must be nonzero".into()));
    }
    let (vals, vecs) = g.gram_eigen();
    let tol = 1e-12 * vals[5].abs().max(1.0);
    if vals[5] - vals[0] <= tol {
        return Ok(EllipsoidAngle {
            theta: FRAC_PI_2,
            major_axis: vecs.column(0).into(),
            degenerate: true,
        });
    }
    let abs_lex_gt = |a: &Vec6, b: &Vec6| {
        for k in 0..6 {
            let (x, y) = (a[k].abs(), b[k].abs());
            if x != y {
                return x > y;
            }
        }
        false
    };
    let mut major: Vec6 = vecs.column(0).into();
    for k in 1..6 {
        if vals[k] - vals[0] > tol {
            break;
        }
        let v: Vec6 = vecs.column(k).into();
        if abs_lex_gt(&v, &major) {
            major = v;
        }
    }
    let c = (major.normalize().dot(&(gravity / gn))).abs().min(1.0);
    Ok(EllipsoidAngle {
        theta: c.acos(),
        major_axis: major,
        degenerate: false,
    })
}

/// Weights of the combined score; the third is named `gamma_w` to keep it
/// apart from the sampling threshold γ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_w: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            alpha: 0.4,
            beta: 0.5,
            gamma_w: 0.1,
        }
    }
}

impl ScoreWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.alpha, self.beta, self.gamma_w];
        if w.iter().any(|x| !(*x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::BadWeights(w));
        }
        Ok(())
    }
}

pub fn combined_score(q_for: f64, q_dex: f64, q_tor: f64, w: &ScoreWeights) -> Result<f64> {
    w.validate()?;
    for (name, q) in [("q_for", q_for), ("q_dex", q_dex), ("q_tor", q_tor)] {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidArgument(format!("{name} = {q} outside [0, 1]")));
        }
    }
    Ok(w.alpha * q_for + w.beta * q_dex + w.gamma_w * q_tor)
}

pub fn q_for_from_omega(omega: f64) -> f64 {
    (1.0 - omega / 4.0).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DexterityLabel {
    pub omega: f64,
    pub sigma_min: f64,
    pub theta_g: f64,
    pub q_for: f64,
    /// Set by the dataset-wide normalization pass.
    pub q_dex: Option<f64>,
    pub q_tor: f64,
    pub q_score: Option<f64>,
    pub epsilon_ok: bool,
}

impl DexterityLabel {
    /// Checks the label's internal identities; returns the first violation.
    pub fn check(&self) -> std::result::Result<(), String> {
        if !(self.omega >= 0.0) || !self.omega.is_finite() {
            return Err(format!("omega {} must be finite and >= 0", self.omega));
        }
        if !(self.sigma_min >= 0.0) || !self.sigma_min.is_finite() {
            return Err(format!("sigma_min {} must be finite and >= 0", self.sigma_min));
        }
        if !(0.0..=FRAC_PI_2).contains(&self.theta_g) {
            return Err(format!("theta_g {} outside [0, pi/2]", self.theta_g));
        }
        if self.q_for != q_for_from_omega(self.omega) {
            return Err(format!("q_for {} != clamp(1 - omega/4)", self.q_for));
        }
        if self.q_tor != self.theta_g.cos() {
            return Err(format!("q_tor {} != cos(theta_g)", self.q_tor));
        }
        if let Some(d) = self.q_dex {
            if !(0.0..=1.0).contains(&d) {
                return Err(format!("q_dex {d} outside [0, 1]"));
            }
        }
        match (self.q_dex, self.q_score) {
            (Some(_), Some(s)) if !(0.0..=1.0).contains(&s) => Err(format!("q_score {s} outside [0, 1]")),
            (None, Some(_)) => Err("q_score present without q_dex".into()),
            _ => Ok(()),
        }
    }

    /// `q_score == α q_for + β q_dex + γ q_tor` within 1e-12.
    pub fn check_score(&self, w: &ScoreWeights) -> std::result::Result<(), String> {
        if let (Some(d), Some(s)) = (self.q_dex, self.q_score) {
            let expect = w.alpha * self.q_for + w.beta * d + w.gamma_w * self.q_tor;
            if (s - expect).abs() > 1e-12 {
                return Err(format!("q_score {s} != weighted sum {expect}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabelParams {
    pub rho: f64,
    pub mu: f64,
    pub gravity: Vec6,
    pub epsilon: f64,
}

/// Labels a pair: ω, σ_m, θ_G, force-closure flag, q_for and q_tor.
pub fn label_pair(a: &Grasp, b: &Grasp, p: &LabelParams) -> Result<DexterityLabel> {
    if !(p.epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon {} must be > 0", p.epsilon)));
    }
    let contacts = ContactSet::from_pair(a, b, p.mu, p.rho)?;
    let g = build_grasp_matrix(&contacts);
    let omega = stability_omega(&g, &contacts);
    let sigma_min = min_singular_value(&g);
    let theta_g = force_ellipsoid_angle(&g, &p.gravity)?.theta;
    Ok(DexterityLabel {
        omega,
        sigma_min,
        theta_g,
        q_for: q_for_from_omega(omega),
        q_dex: None,
        q_tor: theta_g.cos(),
        q_score: None,
        epsilon_ok: force_closure_feasible(&g, p.epsilon),
    })
}

/// Cyclic Jacobi eigen-decomposition of a symmetric 6×6 matrix.
/// Eigenvalues ascending; eigenvectors are the matching columns.
pub fn symmetric_eigen(m: &Mat6) -> (Vec6, Mat6) {
    let mut a = (m + m.transpose()) * 0.5;
    let mut v = Mat6::identity();
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let off: f64 = (0..6)
            .flat_map(|i| (0..6).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..5 {
            for q in p + 1..6 {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..6 {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..6 {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..6 {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..6).collect();
    idx.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));
    let vals = Vec6::from_iterator(idx.iter().map(|&i| a[(i, i)]));
    let mut vecs = Mat6::zeros();
    for (c, &i) in idx.iter().enumerate() {
        vecs.set_column(c, &v.column(i));
    }
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Transform;

    fn cross_set(a: f64) -> ContactSet {
        let p = [
            Vec3::new(a, 0.0, 0.0),
            Vec3::new(-a, 0.0, 0.0),
            Vec3::new(0.0, a, 0.0),
            Vec3::new(0.0, -a, 0.0),
        ];
        let c = [-Vec3::x(), Vec3::x(), -Vec3::y(), Vec3::y()];
        ContactSet::new(p, c, 0.4, 1.0).unwrap()
    }

    #[test]
    fn bottom_block_is_transposed_skew() {
        let a = 0.3;
        let set = ContactSet::new([Vec3::new(a, 0.0, 0.0); 4], [Vec3::z(); 4], 0.4, 1.0).unwrap();
        let g = build_grasp_matrix(&set);
        let bottom = g.0.fixed_view::<3, 3>(3, 0).into_owned();
        let expect = Mat3::new(0.0, 0.0, 0.0, 0.0, 0.0, a, 0.0, -a, 0.0);
        assert_eq!(bottom, expect);
        assert_eq!(g.0.fixed_view::<3, 3>(0, 3).into_owned(), Mat3::identity());
    }

    #[test]
    fn contacts_at_origin() {
        let set = ContactSet::new([Vec3::zeros(); 4], [Vec3::z(); 4], 0.4, 1.0).unwrap();
        let g = build_grasp_matrix(&set);
        for k in 0..4 {
            assert_eq!(g.0.fixed_view::<3, 3>(3, 3 * k).into_owned(), Mat3::zeros());
        }
        let w = g.0 * set.stacked_axes();
        assert_eq!(w, Vec6::new(0.0, 0.0, 4.0, 0.0, 0.0, 0.0));
        assert_eq!(stability_omega(&g, &set), 4.0);
        assert!(!force_closure_feasible(&g, 1e-3));
        assert!(min_singular_value(&g) < 1e-12);
    }

    #[test]
    fn cross_contacts_closed_form() {
        let a = 0.4;
        let set = cross_set(a);
        let g = build_grasp_matrix(&set);
        let mut expect = Mat6::zeros();
        for k in 0..3 {
            expect[(k, k)] = 4.0;
        }
        expect[(3, 3)] = 2.0 * a * a;
        expect[(4, 4)] = 2.0 * a * a;
        expect[(5, 5)] = 4.0 * a * a;
        assert!((g.gram() - expect).abs().max() < 1e-12);
        assert!(stability_omega(&g, &set) < 1e-15);
        assert!((min_singular_value(&g) - 2f64.sqrt() * a).abs() < 1e-12);
        assert!(force_closure_feasible(&g, 1e-3));
        let e = force_ellipsoid_angle(&g, &gravity_wrench()).unwrap();
        assert!((e.theta - FRAC_PI_2).abs() < 1e-12);
        assert!(e.theta.cos().abs() < 1e-12);
    }

    #[test]
    fn collinear_contacts_are_singular() {
        let p = [0.1, -0.2, 0.3, -0.05].map(|x| Vec3::new(x, 0.0, 0.0));
        let c = [Vec3::x(), -Vec3::x(), Vec3::x(), -Vec3::x()];
        let set = ContactSet::new(p, c, 0.4, 1.0).unwrap();
        let g = build_grasp_matrix(&set);
        assert!(!force_closure_feasible(&g, 1e-3));
        assert!(min_singular_value(&g) < 1e-12);
    }

    #[test]
    fn gravity_aligned_major_axis() {
        // make the force-z direction the weakest by hand
        let mut m = Mat6x12::zeros();
        for k in 0..6 {
            m[(k, k)] = if k == 2 { 0.5 } else { 2.0 };
        }
        let e = force_ellipsoid_angle(&GraspMatrix(m), &gravity_wrench()).unwrap();
        assert!(e.theta.abs() < 1e-12);
        assert!(!e.degenerate);
    }

    #[test]
    fn isotropic_is_flagged() {
        let mut m = Mat6x12::zeros();
        for k in 0..6 {
            m[(k, k)] = 1.0;
        }
        let e = force_ellipsoid_angle(&GraspMatrix(m), &gravity_wrench()).unwrap();
        assert!(e.degenerate);
        assert_eq!(e.theta, FRAC_PI_2);
        assert!(force_ellipsoid_angle(&GraspMatrix(m), &Vec6::zeros()).is_err());
    }

    #[test]
    fn jacobi_matches_reconstruction() {
        let set = ContactSet::new(
            [
                Vec3::new(0.3, 0.1, -0.2),
                Vec3::new(-0.25, 0.05, 0.1),
                Vec3::new(0.05, 0.4, 0.02),
                Vec3::new(-0.1, -0.35, 0.2),
            ],
            [Vec3::x(), Vec3::y(), Vec3::z(), -Vec3::x()],
            0.4,
            0.5,
        )
        .unwrap();
        let g = build_grasp_matrix(&set).gram();
        let (vals, vecs) = symmetric_eigen(&g);
        let recon = vecs * Mat6::from_diagonal(&vals) * vecs.transpose();
        assert!((recon - g).abs().max() < 1e-12);
        assert!((vecs.transpose() * vecs - Mat6::identity()).abs().max() < 1e-12);
        for k in 0..5 {
            assert!(vals[k] <= vals[k + 1]);
        }
    }

    #[test]
    fn combined_score_examples() {
        let w = ScoreWeights::default();
        assert!((combined_score(1.0, 1.0, 1.0, &w).unwrap() - 1.0).abs() < 1e-15);
        let w2 = ScoreWeights { alpha: 0.2, beta: 0.3, gamma_w: 0.5 };
        assert!((combined_score(0.5, 0.5, 0.5, &w2).unwrap() - 0.5).abs() < 1e-15);
        assert!((combined_score(0.9, 1.0, 0.8, &w).unwrap() - 0.94).abs() < 1e-15);
        let bad = ScoreWeights { alpha: 0.5, beta: 0.5, gamma_w: 0.1 };
        assert!(matches!(combined_score(0.5, 0.5, 0.5, &bad), Err(Error::BadWeights(_))));
        let neg = ScoreWeights { alpha: 1.2, beta: -0.3, gamma_w: 0.1 };
        assert!(matches!(neg.validate(), Err(Error::BadWeights(_))));
    }

    fn grasp(p1: Vec3, p2: Vec3) -> Grasp {
        let d = (p2 - p1).normalize();
        Grasp {
            pose: crate::antipodal::grasp_pose_from_contacts(&p1, &p2, 0.0).unwrap(),
            contacts: [p1, p2],
            normals: [-d, d],
        }
    }

    #[test]
    fn mirrored_plate_pair_cancels() {
        let a = grasp(Vec3::new(0.3, 0.0, -0.02), Vec3::new(0.3, 0.0, 0.02));
        let b = grasp(Vec3::new(-0.3, 0.0, -0.02), Vec3::new(-0.3, 0.0, 0.02));
        let p = LabelParams { rho: 0.45, mu: 0.4, gravity: gravity_wrench(), epsilon: 1e-3 };
        let l = label_pair(&a, &b, &p).unwrap();
        assert!(l.omega < 1e-12);
        assert!((l.q_for - 1.0).abs() < 1e-12);
        l.check().unwrap();
    }

    #[test]
    fn coincident_pair_is_redundant() {
        let a = grasp(Vec3::new(0.3, 0.1, -0.02), Vec3::new(0.3, 0.1, 0.02));
        let p = LabelParams { rho: 0.45, mu: 0.4, gravity: gravity_wrench(), epsilon: 1e-3 };
        let l = label_pair(&a, &a, &p).unwrap();
        assert!(l.sigma_min < 1e-9);
        assert!(!l.epsilon_ok);
    }

    #[test]
    fn rotation_invariance_example() {
        let set = cross_set(0.3);
        let r = Transform::from_axis_angle(&Vec3::new(0.2, -1.0, 0.7), 1.1).rotation;
        let rot = ContactSet::new(set.points.map(|p| r * p), set.cone_axes.map(|c| r * c), 0.4, 1.0).unwrap();
        let (g0, g1) = (build_grasp_matrix(&set), build_grasp_matrix(&rot));
        assert!((stability_omega(&g0, &set) - stability_omega(&g1, &rot)).abs() < 1e-9);
        assert!((min_singular_value(&g0) - min_singular_value(&g1)).abs() < 1e-9);
    }
}
