//! Per-agent rigid-body model and RK4 written directly against nalgebra.

use nalgebra::{Matrix3, Quaternion, SVector, Vector3};
use swarmstep_core::dynamics::{QuadParams, WrenchCmd};
use swarmstep_core::state::AgentRow;

type State = SVector<f64, 13>;

/// One quadrotor as `[p, v, q(w,x,y,z), ω]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarQuad {
    pub x: State,
}

fn v3(v: swarmstep_core::state::Vec3) -> Vector3<f64> {
    Vector3::new(v.x, v.y, v.z)
}

impl ScalarQuad {
    pub fn from_row(row: &AgentRow) -> Self {
        let q = row.quat.to_array();
        let mut x = State::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&v3(row.pos));
        x.fixed_rows_mut::<3>(3).copy_from(&v3(row.vel));
        for k in 0..4 {
            x[6 + k] = q[k];
        }
        x.fixed_rows_mut::<3>(10).copy_from(&v3(row.omega));
        ScalarQuad { x }
    }

    pub fn pos(&self) -> Vector3<f64> {
        self.x.fixed_rows::<3>(0).into()
    }

    pub fn vel(&self) -> Vector3<f64> {
        self.x.fixed_rows::<3>(3).into()
    }

    pub fn quat(&self) -> Quaternion<f64> {
        Quaternion::new(self.x[6], self.x[7], self.x[8], self.x[9])
    }

    pub fn omega(&self) -> Vector3<f64> {
        self.x.fixed_rows::<3>(10).into()
    }

    /// All 13 components in row order, for comparison with a batch row.
    pub fn components(&self) -> [f64; 13] {
        let mut out = [0.0; 13];
        out.copy_from_slice(self.x.as_slice());
        out
    }

    /// Angular momentum in the inertial frame, `R(q)·I·ω`.
    pub fn angular_momentum(&self, params: &QuadParams) -> Vector3<f64> {
        let q = self.quat();
        let body = inertia(params) * self.omega();
        (q * Quaternion::from_imag(body) * q.conjugate()).imag() / q.norm_squared()
    }

    pub fn rk4(&mut self, wrench: WrenchCmd, params: &QuadParams, dt: f64) {
        let f = |x: &State| derivative(x, wrench, params);
        let k1 = f(&self.x);
        let k2 = f(&(self.x + k1 * (dt / 2.0)));
        let k3 = f(&(self.x + k2 * (dt / 2.0)));
        let k4 = f(&(self.x + k3 * dt));
        self.x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        let n = self.quat().norm();
        for k in 6..10 {
            self.x[k] /= n;
        }
    }
}

/// Components of a batch row in the same order as [`ScalarQuad::components`].
pub fn row_components(row: &AgentRow) -> [f64; 13] {
    ScalarQuad::from_row(row).components()
}

fn inertia(p: &QuadParams) -> Matrix3<f64> {
    Matrix3::from_diagonal(&v3(p.inertia))
}

fn derivative(x: &State, w: WrenchCmd, p: &QuadParams) -> State {
    let v: Vector3<f64> = x.fixed_rows::<3>(3).into();
    let q = Quaternion::new(x[6], x[7], x[8], x[9]);
    let omega: Vector3<f64> = x.fixed_rows::<3>(10).into();
    let tau = v3(w.tau);

    let thrust_body = Vector3::new(0.0, 0.0, w.f_c);
    let thrust_world = (q * Quaternion::from_imag(thrust_body) * q.conjugate()).imag() / q.norm_squared();
    let acc = thrust_world / p.mass - Vector3::new(0.0, 0.0, p.gravity);
    let dq = q * Quaternion::from_imag(omega) * 0.5;
    let i = inertia(p);
    let i_inv = i.try_inverse().expect("inertia is diagonal and positive");
    let domega = i_inv * (tau - omega.cross(&(i * omega)));

    let mut d = State::zeros();
    d.fixed_rows_mut::<3>(0).copy_from(&v);
    d.fixed_rows_mut::<3>(3).copy_from(&acc);
    d[6] = dq.w;
    d[7] = dq.i;
    d[8] = dq.j;
    d[9] = dq.k;
    d.fixed_rows_mut::<3>(10).copy_from(&domega);
    d
}
