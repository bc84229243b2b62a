use super::EnvId;

/// Integrator sub-steps per control step.
pub const SUBSTEPS: usize = 4;
pub const STANDARD_GRAVITY: f64 = 9.8;

pub const BALL_RADIUS: f64 = 0.07;
/// Horizontal acceleration at full action, m/s^2.
const BALL_PUSH: f64 = 4.0;

/// Physical rod length, m.
pub const PENDULUM_LENGTH: f64 = 1.0;
const PENDULUM_TORQUE_MAX: f64 = 3.0;

pub const BLOCK_FORCE_MAX: f64 = 20.0;
pub(crate) const BLOCK_HALF_WIDTH: f64 = 0.08;

const SPEED_LIMIT: f64 = 20.0;
const SPIN_LIMIT: f64 = 50.0;

pub(super) fn integrate(env: EnvId, vars: &mut [f64], action: &[f64], params: &[f64], dt: f64) {
    let h = dt / SUBSTEPS as f64;
    for _ in 0..SUBSTEPS {
        match env {
            EnvId::BouncingBall => ball(vars, action[0], params, h),
            EnvId::DampedPendulum => pendulum(vars, action[0], params, h),
            EnvId::SlidingBlock => block(vars, action[0], params, h),
        }
    }
}

/// Reflects `pos` off `[lo, hi]`, scaling the normal velocity by `e`.
fn bounce(pos: &mut f64, vel: &mut f64, lo: f64, hi: f64, e: f64) {
    if *pos < lo {
        *pos = lo;
        if *vel < 0.0 {
            *vel *= -e;
        }
    } else if *pos > hi {
        *pos = hi;
        if *vel > 0.0 {
            *vel *= -e;
        }
    }
}

fn ball(v: &mut [f64], action: f64, p: &[f64], h: f64) {
    let (gravity, restitution) = (p[0], p[1]);
    v[2] = (v[2] + BALL_PUSH * action * h).clamp(-SPEED_LIMIT, SPEED_LIMIT);
    v[3] = (v[3] - gravity * h).clamp(-SPEED_LIMIT, SPEED_LIMIT);
    v[0] += v[2] * h;
    v[1] += v[3] * h;
    let (lo, hi) = (BALL_RADIUS, 1.0 - BALL_RADIUS);
    let (x, rest) = v.split_at_mut(1);
    let (y, vel) = rest.split_at_mut(1);
    let (vx, vy) = vel.split_at_mut(1);
    bounce(&mut x[0], &mut vx[0], lo, hi, restitution);
    bounce(&mut y[0], &mut vy[0], lo, hi, restitution);
}

fn pendulum(v: &mut [f64], action: f64, p: &[f64], h: f64) {
    let (mass, damping) = (p[0], p[1]);
    let inertia = mass * PENDULUM_LENGTH * PENDULUM_LENGTH;
    let accel =
        -(STANDARD_GRAVITY / PENDULUM_LENGTH) * v[0].sin() + (PENDULUM_TORQUE_MAX * action - damping * v[1]) / inertia;
    v[1] = (v[1] + accel * h).clamp(-SPIN_LIMIT, SPIN_LIMIT);
    v[0] += v[1] * h;
    // Keep the angle bounded without changing its meaning.
    if v[0].abs() > std::f64::consts::PI {
        v[0] -= std::f64::consts::TAU * (v[0] / std::f64::consts::TAU).round();
    }
}

fn block(v: &mut [f64], action: f64, p: &[f64], h: f64) {
    let (mu, mass) = (p[0], p[1]);
    let force = BLOCK_FORCE_MAX * action;
    let friction = mu * mass * STANDARD_GRAVITY;
    let vel = v[1];
    let new_vel = if vel == 0.0 {
        if force.abs() <= friction {
            0.0
        } else {
            (force - force.signum() * friction) / mass * h
        }
    } else {
        let next = vel + (force - vel.signum() * friction) / mass * h;
        // Kinetic friction stops the block; it cannot reverse it.
        if next.signum() != vel.signum() {
            0.0
        } else {
            next
        }
    };
    v[1] = new_vel.clamp(-SPEED_LIMIT, SPEED_LIMIT);
    v[0] += v[1] * h;
    let (lo, hi) = (BLOCK_HALF_WIDTH, 1.0 - BLOCK_HALF_WIDTH);
    if v[0] < lo || v[0] > hi {
        v[0] = v[0].clamp(lo, hi);
        v[1] = 0.0;
    }
}
