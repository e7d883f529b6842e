//! Planar fixed-base serial chains with revolute joints.
//!
//! The chain lives in the world (x, z) plane. Joint angles are relative, so
//! link `k` points along the absolute angle `φ_k = q_0 + … + q_k`, and the
//! direction of a link at absolute angle `φ` is `(−sin φ, cos φ)`: `q = 0`
//! points straight up, `q_0 = −π/2` stretches the chain along +x and
//! `q_0 = −π` lets it hang down. Gravity defaults to `(0, −9.81)`.
//!
//! Every link is modelled as a point mass sitting `com_offset` along the link
//! from its proximal joint, with no rotational inertia and no joint friction.
//! All derivatives are closed-form.

use nalgebra::{DMatrix, DVector, Vector2};
use thiserror::Error;

use crate::scalar::{lit, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("a chain needs at least one link")]
    Empty,
    #[error("link {index}: {what} must be strictly positive")]
    NonPositive { index: usize, what: &'static str },
    #[error("link {index}: com offset must lie in [0, length]")]
    ComOffset { index: usize },
    #[error("expected {expected} joint values, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Link<T> {
    pub length: T,
    pub mass: T,
    /// Distance of the point mass from the proximal joint.
    pub com_offset: T,
}

impl<T: Real> Link<T> {
    /// Link with its mass concentrated at the distal end.
    pub fn tip_mass(length: T, mass: T) -> Self {
        Self { length, mass, com_offset: length }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanarChain<T> {
    links: Vec<Link<T>>,
    gravity: Vector2<T>,
}

/// Joint positions and velocities of a chain.
#[derive(Clone, Debug, PartialEq)]
pub struct KinematicState<T: Real> {
    pub q: DVector<T>,
    pub qdot: DVector<T>,
}

impl<T: Real> KinematicState<T> {
    pub fn new(q: DVector<T>, qdot: DVector<T>) -> Result<Self, ModelError> {
        if q.len() != qdot.len() {
            return Err(ModelError::Dimension { expected: q.len(), got: qdot.len() });
        }
        check_finite(&q, "q")?;
        check_finite(&qdot, "qdot")?;
        Ok(Self { q, qdot })
    }
}

/// Second derivatives of a vector-valued function of `q`: `slices[d] = ∇²f_d`.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskHessian<T: Real> {
    pub slices: Vec<DMatrix<T>>,
}

impl<T: Real> TaskHessian<T> {
    pub fn dim(&self) -> usize {
        self.slices.len()
    }

    /// Largest `|H[d] − H[d]ᵀ|` entry over all slices.
    pub fn asymmetry(&self) -> T {
        self.slices
            .iter()
            .map(|h| (h - h.transpose()).amax())
            .fold(T::zero(), |a, b| a.max(b))
    }
}

fn check_finite<T: Real>(v: &DVector<T>, what: &'static str) -> Result<(), ModelError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(ModelError::NonFinite(what))
    }
}

#[inline]
fn direction<T: Real>(phi: T) -> Vector2<T> {
    Vector2::new(-phi.sin(), phi.cos())
}

/// Derivative of [`direction`] with respect to the angle.
#[inline]
fn direction_prime<T: Real>(phi: T) -> Vector2<T> {
    Vector2::new(-phi.cos(), -phi.sin())
}

impl<T: Real> PlanarChain<T> {
    pub fn new(links: Vec<Link<T>>, gravity: Vector2<T>) -> Result<Self, ModelError> {
        if links.is_empty() {
            return Err(ModelError::Empty);
        }
        for (index, l) in links.iter().enumerate() {
            if !(l.length.is_finite() && l.mass.is_finite() && l.com_offset.is_finite()) {
                return Err(ModelError::NonFinite("link parameters"));
            }
            if l.length <= T::zero() {
                return Err(ModelError::NonPositive { index, what: "length" });
            }
            if l.mass <= T::zero() {
                return Err(ModelError::NonPositive { index, what: "mass" });
            }
            if l.com_offset < T::zero() || l.com_offset > l.length {
                return Err(ModelError::ComOffset { index });
            }
        }
        if !(gravity.x.is_finite() && gravity.y.is_finite()) {
            return Err(ModelError::NonFinite("gravity"));
        }
        Ok(Self { links, gravity })
    }

    /// `n` links of unit length and unit mass, masses at the link tips.
    pub fn uniform(n: usize) -> Result<Self, ModelError> {
        let links = (0..n).map(|_| Link::tip_mass(T::one(), T::one())).collect();
        Self::new(links, Self::default_gravity())
    }

    pub fn default_gravity() -> Vector2<T> {
        Vector2::new(T::zero(), lit(-9.81))
    }

    pub fn dof(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link<T>] {
        &self.links
    }

    pub fn gravity(&self) -> Vector2<T> {
        self.gravity
    }

    pub fn total_mass(&self) -> T {
        self.links.iter().fold(T::zero(), |acc, l| acc + l.mass)
    }

    fn validate(&self, q: &DVector<T>) -> Result<(), ModelError> {
        if q.len() != self.dof() {
            return Err(ModelError::Dimension { expected: self.dof(), got: q.len() });
        }
        check_finite(q, "q")
    }

    fn absolute_angles(&self, q: &DVector<T>) -> Vec<T> {
        let mut acc = T::zero();
        q.iter()
            .map(|&qi| {
                acc += qi;
                acc
            })
            .collect()
    }

    fn absolute_rates(&self, qdot: &DVector<T>) -> Vec<T> {
        self.absolute_angles(qdot)
    }

    /// Positions of the joints followed by the tip (`n + 1` points, base first).
    pub fn joint_positions(&self, q: &DVector<T>) -> Result<Vec<Vector2<T>>, ModelError> {
        self.validate(q)?;
        let phi = self.absolute_angles(q);
        let mut p = Vector2::zeros();
        let mut out = Vec::with_capacity(self.dof() + 1);
        out.push(p);
        for (link, &a) in self.links.iter().zip(&phi) {
            p += direction(a) * link.length;
            out.push(p);
        }
        Ok(out)
    }

    pub fn forward_kinematics(&self, q: &DVector<T>) -> Result<Vector2<T>, ModelError> {
        Ok(*self.joint_positions(q)?.last().expect("at least the base"))
    }

    /// `J` with `d(tip)/dt = J q̇`.
    pub fn task_jacobian(&self, q: &DVector<T>) -> Result<DMatrix<T>, ModelError> {
        self.validate(q)?;
        let phi = self.absolute_angles(q);
        let n = self.dof();
        let mut jac = DMatrix::zeros(2, n);
        let mut suffix = Vector2::zeros();
        for k in (0..n).rev() {
            suffix += direction_prime(phi[k]) * self.links[k].length;
            jac.set_column(k, &suffix);
        }
        Ok(jac)
    }

    /// `J̇ = Σ_i (∂J/∂q_i) q̇_i`.
    pub fn jacobian_time_derivative(
        &self,
        q: &DVector<T>,
        qdot: &DVector<T>,
    ) -> Result<DMatrix<T>, ModelError> {
        self.validate(q)?;
        self.validate(qdot)?;
        let phi = self.absolute_angles(q);
        let rates = self.absolute_rates(qdot);
        let n = self.dof();
        let mut jd = DMatrix::zeros(2, n);
        let mut suffix = Vector2::zeros();
        for k in (0..n).rev() {
            suffix -= direction(phi[k]) * (self.links[k].length * rates[k]);
            jd.set_column(k, &suffix);
        }
        Ok(jd)
    }

    /// Analytic tip Hessian, `O(n²)` via suffix sums: `∂²f/∂q_i∂q_j = −Σ_{k ≥ max(i,j)} l_k dir(φ_k)`.
    pub fn task_hessian(&self, q: &DVector<T>) -> Result<TaskHessian<T>, ModelError> {
        self.validate(q)?;
        let phi = self.absolute_angles(q);
        let n = self.dof();
        let mut suffix = vec![Vector2::zeros(); n];
        let mut acc = Vector2::zeros();
        for k in (0..n).rev() {
            acc -= direction(phi[k]) * self.links[k].length;
            suffix[k] = acc;
        }
        let slices = (0..2)
            .map(|d| DMatrix::from_fn(n, n, |i, j| suffix[i.max(j)][d]))
            .collect();
        Ok(TaskHessian { slices })
    }

    /// Position of every point mass.
    fn mass_positions(&self, phi: &[T]) -> Vec<Vector2<T>> {
        let mut p = Vector2::zeros();
        self.links
            .iter()
            .zip(phi)
            .map(|(link, &a)| {
                let r = p + direction(a) * link.com_offset;
                p += direction(a) * link.length;
                r
            })
            .collect()
    }

    /// Jacobian of point mass `i` (zero columns beyond joint `i`).
    fn mass_jacobian(&self, phi: &[T], i: usize) -> DMatrix<T> {
        let n = self.dof();
        let mut jac = DMatrix::zeros(2, n);
        let mut acc = direction_prime(phi[i]) * self.links[i].com_offset;
        jac.set_column(i, &acc);
        for k in (0..i).rev() {
            acc += direction_prime(phi[k]) * self.links[k].length;
            jac.set_column(k, &acc);
        }
        jac
    }

    /// `J̇_i q̇` for point mass `i`: the centripetal acceleration at zero `q̈`.
    fn mass_bias_acceleration(&self, phi: &[T], rates: &[T], i: usize) -> Vector2<T> {
        let mut a = direction(phi[i]) * (-self.links[i].com_offset * rates[i] * rates[i]);
        for k in 0..i {
            a -= direction(phi[k]) * (self.links[k].length * rates[k] * rates[k]);
        }
        a
    }

    pub fn mass_matrix(&self, q: &DVector<T>) -> Result<DMatrix<T>, ModelError> {
        self.validate(q)?;
        let phi = self.absolute_angles(q);
        let n = self.dof();
        let mut m = DMatrix::zeros(n, n);
        for (i, link) in self.links.iter().enumerate() {
            let ji = self.mass_jacobian(&phi, i);
            m += ji.transpose() * &ji * link.mass;
        }
        Ok(m)
    }

    /// Coriolis, centrifugal and gravity terms so that `M q̈ + N = τ`.
    pub fn bias_forces(&self, q: &DVector<T>, qdot: &DVector<T>) -> Result<DVector<T>, ModelError> {
        self.validate(q)?;
        self.validate(qdot)?;
        let phi = self.absolute_angles(q);
        let rates = self.absolute_rates(qdot);
        let mut out = DVector::zeros(self.dof());
        for (i, link) in self.links.iter().enumerate() {
            let ji = self.mass_jacobian(&phi, i);
            let a = self.mass_bias_acceleration(&phi, &rates, i) - self.gravity;
            out += ji.transpose() * a * link.mass;
        }
        Ok(out)
    }

    /// Kinetic plus potential energy. Potential is zero when every mass sits at
    /// the height of the base.
    pub fn total_energy(&self, q: &DVector<T>, qdot: &DVector<T>) -> Result<T, ModelError> {
        let m = self.mass_matrix(q)?;
        self.validate(qdot)?;
        let kinetic = (qdot.transpose() * m * qdot)[0] * lit(0.5);
        let phi = self.absolute_angles(q);
        let potential = self
            .mass_positions(&phi)
            .iter()
            .zip(&self.links)
            .fold(T::zero(), |acc, (r, l)| acc - l.mass * self.gravity.dot(r));
        Ok(kinetic + potential)
    }

    /// Horizontal coordinate of the center of mass.
    pub fn com_x(&self, q: &DVector<T>) -> Result<T, ModelError> {
        self.validate(q)?;
        let phi = self.absolute_angles(q);
        let weighted = self
            .mass_positions(&phi)
            .iter()
            .zip(&self.links)
            .fold(T::zero(), |acc, (r, l)| acc + r.x * l.mass);
        Ok(weighted / self.total_mass())
    }

    /// Gradient of [`Self::com_x`] as a `1 × n` row.
    pub fn com_x_jacobian(&self, q: &DVector<T>) -> Result<DMatrix<T>, ModelError> {
        self.validate(q)?;
        let phi = self.absolute_angles(q);
        let mut row = DMatrix::zeros(1, self.dof());
        for (i, link) in self.links.iter().enumerate() {
            let ji = self.mass_jacobian(&phi, i);
            row += ji.row(0) * link.mass;
        }
        Ok(row / self.total_mass())
    }

    /// Hessian of [`Self::com_x`].
    pub fn com_x_hessian(&self, q: &DVector<T>) -> Result<DMatrix<T>, ModelError> {
        self.validate(q)?;
        let phi = self.absolute_angles(q);
        let n = self.dof();
        let mut h = DMatrix::zeros(n, n);
        for (i, link) in self.links.iter().enumerate() {
            // ∂²r_i/∂q_a∂q_b for a, b ≤ i, suffix over links max(a,b)..i
            let mut suffix = vec![T::zero(); i + 1];
            let mut acc = -direction(phi[i]).x * link.com_offset;
            suffix[i] = acc;
            for k in (0..i).rev() {
                acc -= direction(phi[k]).x * self.links[k].length;
                suffix[k] = acc;
            }
            for a in 0..=i {
                for b in 0..=i {
                    h[(a, b)] += suffix[a.max(b)] * link.mass;
                }
            }
        }
        Ok(h / self.total_mass())
    }
}
