use nalgebra::{DMatrix, DVector};

use super::ControlError;
use crate::robot_model::PlanarChain;
use crate::scalar::Real;

/// Robot the controller drives.
#[derive(Clone, Debug, PartialEq)]
pub enum Model<T: Real> {
    Chain(PlanarChain<T>),
    /// 1-D point mass without gravity; its "tip" is `q` itself.
    PointMass { mass: T },
}

/// Task function value and derivatives at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskKinematics<T: Real> {
    pub f: DVector<T>,
    pub j: DMatrix<T>,
    pub jdot: DMatrix<T>,
    /// `∇²f_d` per component.
    pub hessian: Vec<DMatrix<T>>,
}

impl<T: Real> Model<T> {
    pub fn dof(&self) -> usize {
        match self {
            Model::Chain(c) => c.dof(),
            Model::PointMass { .. } => 1,
        }
    }

    pub fn mass_matrix(&self, q: &DVector<T>) -> Result<DMatrix<T>, ControlError> {
        match self {
            Model::Chain(c) => Ok(c.mass_matrix(q)?),
            Model::PointMass { mass } => Ok(DMatrix::from_element(1, 1, *mass)),
        }
    }

    pub fn bias_forces(&self, q: &DVector<T>, qd: &DVector<T>) -> Result<DVector<T>, ControlError> {
        match self {
            Model::Chain(c) => Ok(c.bias_forces(q, qd)?),
            Model::PointMass { .. } => Ok(DVector::zeros(1)),
        }
    }

    pub fn total_energy(&self, q: &DVector<T>, qd: &DVector<T>) -> Result<T, ControlError> {
        match self {
            Model::Chain(c) => Ok(c.total_energy(q, qd)?),
            Model::PointMass { mass } => Ok(*mass * qd[0] * qd[0] * crate::scalar::lit(0.5)),
        }
    }

    pub fn tip(&self, q: &DVector<T>, qd: &DVector<T>) -> Result<TaskKinematics<T>, ControlError> {
        match self {
            Model::Chain(c) => {
                let p = c.forward_kinematics(q)?;
                Ok(TaskKinematics {
                    f: DVector::from_column_slice(p.as_slice()),
                    j: c.task_jacobian(q)?,
                    jdot: c.jacobian_time_derivative(q, qd)?,
                    hessian: c.task_hessian(q)?.slices,
                })
            }
            Model::PointMass { .. } => Ok(TaskKinematics {
                f: q.clone(),
                j: DMatrix::identity(1, 1),
                jdot: DMatrix::zeros(1, 1),
                hessian: vec![DMatrix::zeros(1, 1)],
            }),
        }
    }

    /// Horizontal center of mass (the position itself for a point mass).
    pub fn com(&self, q: &DVector<T>, qd: &DVector<T>) -> Result<TaskKinematics<T>, ControlError> {
        match self {
            Model::Chain(c) => {
                let h = c.com_x_hessian(q)?;
                let jdot = DMatrix::from_row_slice(1, qd.len(), (&h * qd).as_slice());
                Ok(TaskKinematics {
                    f: DVector::from_element(1, c.com_x(q)?),
                    j: c.com_x_jacobian(q)?,
                    jdot,
                    hessian: vec![h],
                })
            }
            Model::PointMass { .. } => self.tip(q, qd),
        }
    }
}
