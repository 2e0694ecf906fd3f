use super::{PidGains, RateSetpoint};
use crate::dynamics::WrenchCmd;
use crate::exec::{for_each_chunk, Parallelism};
use crate::state::Vec3;

/// Per-agent PID memory of the body-rate loop, stored column-wise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RatePidState {
    pub integral: Vec<Vec3>,
    pub prev_omega: Vec<Vec3>,
    pub primed: Vec<bool>,
}

impl RatePidState {
    pub fn new(n: usize) -> Self {
        RatePidState {
            integral: vec![Vec3::ZERO; n],
            prev_omega: vec![Vec3::ZERO; n],
            primed: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.integral.len()
    }

    pub fn is_empty(&self) -> bool {
        self.integral.is_empty()
    }

    /// Clears the memory of one agent, e.g. after a command-level switch.
    pub fn reset(&mut self, i: usize) {
        self.integral[i] = Vec3::ZERO;
        self.prev_omega[i] = Vec3::ZERO;
        self.primed[i] = false;
    }
}

/// Body-rate PID: `τ = kp·e + ki·∫e + kd·(−dω/dt)` with `e = ω_sp − ω`.
///
/// The integral state is clamped to `±i_limit`. The derivative acts on the
/// measurement and is zero on an agent's first step. Collective thrust passes
/// through from the setpoint. Dead rows output a zero wrench and keep their
/// PID memory.
#[allow(clippy::too_many_arguments)]
pub fn rate_pid_step(
    omega: &[Vec3],
    alive: &[bool],
    setpoints: &[RateSetpoint],
    gains: &PidGains,
    dt: f64,
    state: &mut RatePidState,
    out: &mut [WrenchCmd],
    par: Parallelism,
) {
    assert!(dt > 0.0, "dt must be positive");
    let inv_dt = 1.0 / dt;
    let g = *gains;
    for_each_chunk(
        par,
        (
            (omega, alive, setpoints),
            (&mut state.integral[..], &mut state.prev_omega[..], &mut state.primed[..]),
            out,
        ),
        &|((omega, alive, sp), (integral, prev, primed), out), _| {
            for i in 0..omega.len() {
                if !alive[i] {
                    out[i] = WrenchCmd::ZERO;
                    continue;
                }
                let w = omega[i];
                let e = sp[i].omega_sp - w;
                let integ = (integral[i] + e * dt).clamp_abs(g.i_limit);
                let d_meas = if primed[i] { (w - prev[i]) * inv_dt } else { Vec3::ZERO };
                let tau = g.kp.mul_elem(e) + g.ki.mul_elem(integ) - g.kd.mul_elem(d_meas);
                integral[i] = integ;
                prev[i] = w;
                primed[i] = true;
                out[i] = WrenchCmd { f_c: sp[i].f_c_sp, tau };
            }
        },
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gains(kp: f64, ki: f64, kd: f64, lim: f64) -> PidGains {
        PidGains { kp: Vec3::splat(kp), ki: Vec3::splat(ki), kd: Vec3::splat(kd), i_limit: Vec3::splat(lim) }
    }

    fn run(g: &PidGains, omega: Vec3, sp: RateSetpoint, steps: usize, dt: f64) -> (WrenchCmd, RatePidState) {
        let mut st = RatePidState::new(1);
        let mut out = [WrenchCmd::ZERO];
        for _ in 0..steps {
            rate_pid_step(&[omega], &[true], &[sp], g, dt, &mut st, &mut out, Parallelism::Sequential);
        }
        (out[0], st)
    }

    #[test]
    fn zero_error_gives_zero_torque() {
        let sp = RateSetpoint { omega_sp: Vec3::new(0.3, -0.2, 1.0), f_c_sp: 9.81 };
        let (w, _) = run(&PidGains::default(), sp.omega_sp, sp, 50, 0.01);
        assert_eq!(w.tau, Vec3::ZERO);
        assert_eq!(w.f_c, 9.81);
    }

    #[test]
    fn proportional_first_step() {
        let g = PidGains { kp: Vec3::new(0.1, 0.0, 0.0), ..gains(0.0, 0.0, 0.0, 1.0) };
        let sp = RateSetpoint { omega_sp: Vec3::new(1.0, 0.0, 0.0), f_c_sp: 0.0 };
        let (w, _) = run(&g, Vec3::ZERO, sp, 1, 0.01);
        assert!((w.tau.x - 0.1).abs() < 1e-15);
    }

    #[test]
    fn integrator_clamps_on_state() {
        // e_x = 1, dt = 0.1: integral 0.1, 0.2, then held at 0.2
        let g = PidGains { ki: Vec3::new(0.5, 0.0, 0.0), ..gains(0.0, 0.0, 0.0, 0.2) };
        let sp = RateSetpoint { omega_sp: Vec3::new(1.0, 0.0, 0.0), f_c_sp: 0.0 };
        let (w, st) = run(&g, Vec3::ZERO, sp, 10, 0.1);
        assert!((st.integral[0].x - 0.2).abs() < 1e-15);
        assert!((w.tau.x - 0.1).abs() < 1e-15);
        let (w2, _) = run(&g, Vec3::ZERO, sp, 1, 0.1);
        assert!((w2.tau.x - 0.05).abs() < 1e-15);
    }

    #[test]
    fn derivative_acts_on_measurement() {
        let g = gains(0.0, 0.0, 0.01, 1.0);
        let sp = RateSetpoint { omega_sp: Vec3::ZERO, f_c_sp: 0.0 };
        let mut st = RatePidState::new(1);
        let mut out = [WrenchCmd::ZERO];
        rate_pid_step(&[Vec3::ZERO], &[true], &[sp], &g, 0.1, &mut st, &mut out, Parallelism::Sequential);
        assert_eq!(out[0].tau, Vec3::ZERO);
        // setpoint jump does not kick, measurement change does
        let sp2 = RateSetpoint { omega_sp: Vec3::new(5.0, 0.0, 0.0), f_c_sp: 0.0 };
        rate_pid_step(&[Vec3::ZERO], &[true], &[sp2], &g, 0.1, &mut st, &mut out, Parallelism::Sequential);
        assert_eq!(out[0].tau, Vec3::ZERO);
        rate_pid_step(&[Vec3::new(1.0, 0.0, 0.0)], &[true], &[sp], &g, 0.1, &mut st, &mut out, Parallelism::Sequential);
        assert!((out[0].tau.x + 0.1).abs() < 1e-15);
    }

    #[test]
    fn dead_agents_get_zero_wrench_and_frozen_state() {
        let g = gains(1.0, 1.0, 0.0, 10.0);
        let sp = RateSetpoint { omega_sp: Vec3::splat(1.0), f_c_sp: 5.0 };
        let mut st = RatePidState::new(1);
        let mut out = [WrenchCmd::ZERO];
        rate_pid_step(&[Vec3::ZERO], &[true], &[sp], &g, 0.1, &mut st, &mut out, Parallelism::Sequential);
        let before = st.clone();
        rate_pid_step(&[Vec3::ZERO], &[false], &[sp], &g, 0.1, &mut st, &mut out, Parallelism::Sequential);
        assert_eq!(out[0], WrenchCmd::ZERO);
        assert_eq!(st, before);
    }
}
