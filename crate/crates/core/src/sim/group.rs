use super::{CommandBody, OverlayAction, SimError, UnicycleCmd, UnicycleParams};
use crate::control::{
    position_outer_loop, rate_pid_step, ControlLimits, OuterGains, PidGains, PosSetpoint,
    RatePidState, RateSetpoint,
};
use crate::dynamics::{rk4_step, Mixer, MotorThrusts, QuadParams, Rk4Scratch, WrenchCmd};
use crate::exec::{for_each_chunk, Parallelism};
use crate::sim::unicycle::unicycle_step;
use crate::state::{AgentBatch, Vec3};

/// Which command level currently drives a quadrotor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadMode {
    Position,
    Rate,
    Motor,
}

/// Controller configuration of a quadrotor type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSetup {
    pub params: QuadParams,
    pub rate_gains: PidGains,
    pub outer_gains: OuterGains,
    pub limits: ControlLimits,
}

impl QuadSetup {
    pub fn new(params: QuadParams) -> Self {
        QuadSetup {
            params,
            rate_gains: PidGains::default(),
            outer_gains: OuterGains::default(),
            limits: ControlLimits::for_params(&params),
        }
    }
}

impl Default for QuadSetup {
    fn default() -> Self {
        QuadSetup::new(QuadParams::default())
    }
}

/// Controller state and scratch columns of a quadrotor group.
#[derive(Debug, Clone)]
pub struct QuadGroup {
    setup: QuadSetup,
    mixer: Mixer,
    mode: Vec<QuadMode>,
    pos_sp: Vec<PosSetpoint>,
    rate_cmd: Vec<RateSetpoint>,
    motor_cmd: Vec<[f64; 4]>,
    non_position: usize,
    effective_sp: Vec<PosSetpoint>,
    overlay_active: bool,
    rate_sp: Vec<RateSetpoint>,
    wrench: Vec<WrenchCmd>,
    pid: RatePidState,
    rk4: Rk4Scratch,
}

impl QuadGroup {
    fn new(setup: QuadSetup, batch: &AgentBatch) -> Result<Self, SimError> {
        let mixer = Mixer::new(&setup.params)?;
        let n = batch.len();
        // hold the spawn pose until commanded
        let pos_sp = batch
            .rows()
            .map(|r| PosSetpoint::hold(r.pos, r.quat.yaw()))
            .collect();
        Ok(QuadGroup {
            setup,
            mixer,
            mode: vec![QuadMode::Position; n],
            pos_sp,
            rate_cmd: vec![RateSetpoint::default(); n],
            motor_cmd: vec![[0.0; 4]; n],
            non_position: 0,
            effective_sp: vec![PosSetpoint::default(); n],
            overlay_active: false,
            rate_sp: vec![RateSetpoint::default(); n],
            wrench: vec![WrenchCmd::ZERO; n],
            pid: RatePidState::new(n),
            rk4: Rk4Scratch::new(),
        })
    }

    pub fn setup(&self) -> &QuadSetup {
        &self.setup
    }

    pub fn mode(&self, row: usize) -> QuadMode {
        self.mode[row]
    }

    pub fn position_setpoint(&self, row: usize) -> PosSetpoint {
        self.pos_sp[row]
    }

    /// Wrench applied during the last step.
    pub fn last_wrench(&self) -> &[WrenchCmd] {
        &self.wrench
    }

    pub fn pid_state(&self) -> &RatePidState {
        &self.pid
    }

    fn set_mode(&mut self, row: usize, mode: QuadMode) {
        let old = self.mode[row];
        if old != mode {
            if old == QuadMode::Position {
                self.non_position += 1;
            }
            if mode == QuadMode::Position {
                self.non_position -= 1;
            }
            self.mode[row] = mode;
            self.pid.reset(row);
        }
    }

    fn apply(&mut self, row: usize, body: &CommandBody) -> bool {
        match *body {
            CommandBody::Position(sp) => {
                self.set_mode(row, QuadMode::Position);
                self.pos_sp[row] = sp;
            }
            CommandBody::Rate(sp) => {
                self.set_mode(row, QuadMode::Rate);
                self.rate_cmd[row] = sp;
            }
            CommandBody::Motor(rpm) => {
                self.set_mode(row, QuadMode::Motor);
                self.motor_cmd[row] = rpm;
            }
            CommandBody::Unicycle(_) => return false,
        }
        true
    }

    fn set_overlay(&mut self, rows: &[(usize, OverlayAction)]) {
        self.effective_sp.copy_from_slice(&self.pos_sp);
        for &(row, action) in rows {
            let sp = &mut self.effective_sp[row];
            match action {
                OverlayAction::VelocityOffset(v) => sp.v_sp += v,
                OverlayAction::Retarget(p) => {
                    sp.p_sp = p;
                    sp.v_sp = Vec3::ZERO;
                }
            }
        }
        self.overlay_active = true;
    }

    fn step(&mut self, batch: &mut AgentBatch, dt: f64, par: Parallelism) -> Vec<usize> {
        let p = self.setup.params;
        let sp = if self.overlay_active { &self.effective_sp } else { &self.pos_sp };
        position_outer_loop(batch, sp, p.mass, p.gravity, &self.setup.outer_gains, &self.setup.limits, &mut self.rate_sp, par);
        self.overlay_active = false;

        if self.non_position > 0 {
            for (i, m) in self.mode.iter().enumerate() {
                if *m == QuadMode::Rate {
                    self.rate_sp[i] = self.rate_cmd[i];
                }
            }
        }

        rate_pid_step(batch.omega(), batch.alive(), &self.rate_sp, &self.setup.rate_gains, dt, &mut self.pid, &mut self.wrench, par);

        let mixer = &self.mixer;
        let (k_t, omega_max) = (p.k_thrust, p.omega_max);
        for_each_chunk(
            par,
            (batch.alive(), &self.mode[..], &self.motor_cmd[..], &mut self.wrench[..]),
            &|(alive, mode, motor, wrench), _| {
                for i in 0..alive.len() {
                    if !alive[i] {
                        continue;
                    }
                    wrench[i] = match mode[i] {
                        QuadMode::Motor => {
                            let f = motor[i].map(|w| {
                                let w = if w.is_nan() { 0.0 } else { w.clamp(0.0, omega_max) };
                                k_t * w * w
                            });
                            mixer.forward(MotorThrusts(f))
                        }
                        _ => mixer.mix(wrench[i]).realized,
                    };
                }
            },
        );

        rk4_step(batch, &self.wrench, &p, dt, &mut self.rk4, par)
    }
}

#[derive(Debug, Clone)]
pub struct UnicycleGroup {
    params: UnicycleParams,
    cmds: Vec<UnicycleCmd>,
}

impl UnicycleGroup {
    pub fn params(&self) -> &UnicycleParams {
        &self.params
    }
}

#[derive(Debug, Clone)]
pub enum GroupModel {
    Quadrotor(Box<QuadGroup>),
    Unicycle(UnicycleGroup),
}

/// Model parameters of a group, used to build it.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroupSpec {
    Quadrotor(QuadSetup),
    Unicycle(UnicycleParams),
}

/// All agents of one type together with their model and controller state.
#[derive(Debug, Clone)]
pub struct AgentTypeGroup {
    batch: AgentBatch,
    model: GroupModel,
}

impl AgentTypeGroup {
    pub fn new(batch: AgentBatch, spec: GroupSpec) -> Result<Self, SimError> {
        let model = match spec {
            GroupSpec::Quadrotor(setup) => GroupModel::Quadrotor(Box::new(QuadGroup::new(setup, &batch)?)),
            GroupSpec::Unicycle(params) => {
                params.validate()?;
                GroupModel::Unicycle(UnicycleGroup { params, cmds: vec![UnicycleCmd::default(); batch.len()] })
            }
        };
        Ok(AgentTypeGroup { batch, model })
    }

    pub fn batch(&self) -> &AgentBatch {
        &self.batch
    }

    pub(crate) fn batch_mut(&mut self) -> &mut AgentBatch {
        &mut self.batch
    }

    pub fn model(&self) -> &GroupModel {
        &self.model
    }

    /// Stores a command for `row`, replacing any earlier one.
    ///
    /// Returns `false` if the command level does not fit this agent type.
    pub fn apply_command(&mut self, row: usize, body: &CommandBody) -> bool {
        match &mut self.model {
            GroupModel::Quadrotor(q) => q.apply(row, body),
            GroupModel::Unicycle(u) => match body {
                CommandBody::Unicycle(c) => {
                    u.cmds[row] = *c;
                    true
                }
                _ => false,
            },
        }
    }

    pub(crate) fn set_overlay(&mut self, rows: &[(usize, OverlayAction)]) {
        if let GroupModel::Quadrotor(q) = &mut self.model {
            q.set_overlay(rows);
        }
    }

    /// Advances the group by `dt`. Returns rows retired by numerical faults.
    pub fn step(&mut self, dt: f64, par: Parallelism) -> Vec<usize> {
        match &mut self.model {
            GroupModel::Quadrotor(q) => q.step(&mut self.batch, dt, par),
            GroupModel::Unicycle(u) => {
                unicycle_step(&mut self.batch, &u.cmds, &u.params, dt, par);
                Vec::new()
            }
        }
    }
}
