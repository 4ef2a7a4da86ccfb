//! The Boris rotation and the velocity update built on it.
//!
//! The implicit trapezoidal velocity update
//!
//! ```text
//! (v_new - v_old) / dt = alpha [E_mid + (v_new + v_old)/2 x B] + c
//! ```
//!
//! is split into a half kick, an exact rotation about `B` and a second half kick.
//! The extra acceleration `c` carries the SDC correction terms; it is zero for the
//! classical pusher.

use crate::Vec3;

/// Rotates `v_minus` by the angle encoded in `t = alpha B dt / 2`.
#[inline]
pub fn rotate(v_minus: &Vec3, t: &Vec3) -> Vec3 {
    let s = t * (2.0 / (1.0 + t.norm_squared()));
    let v_prime = v_minus + v_minus.cross(t);
    v_minus + v_prime.cross(&s)
}

/// Explicit solution of the trapezoidal velocity update.
///
/// For a position-dependent magnetic field `b_old` is the field at the start point and
/// `b_new` at the end point; the part of `v_old x b_old` not covered by the rotation about
/// `b_new` enters as the known acceleration `(alpha/2) v_old x (b_old - b_new)`.
#[inline]
pub fn boris_velocity_update(
    v_old: &Vec3,
    dt: f64,
    alpha: f64,
    e_mid: &Vec3,
    b_old: &Vec3,
    b_new: &Vec3,
    c_term: &Vec3,
) -> Vec3 {
    let kick = alpha * e_mid + c_term + 0.5 * alpha * v_old.cross(&(b_old - b_new));
    let v_minus = v_old + 0.5 * dt * kick;
    let t = (0.5 * alpha * dt) * b_new;
    rotate(&v_minus, &t) + 0.5 * dt * kick
}
