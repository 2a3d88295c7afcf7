//! Classical fourth-order Runge-Kutta stepping for the state types of the
//! full and reduced models.

pub trait Integrable: Sized {
    type Rate;

    /// Returns `self + h * rate`, with the clock advanced by `h`.
    fn advanced(&self, rate: &Self::Rate, h: f64) -> Self;
}

/// One RK4 step of size `dt`; `f` evaluates the time derivative at a state
/// (which carries its own clock).
pub fn rk4_step<S, F>(y: &S, dt: f64, mut f: F) -> S
where
    S: Integrable,
    F: FnMut(&S) -> S::Rate,
{
    let k1 = f(y);
    let k2 = f(&y.advanced(&k1, 0.5 * dt));
    let k3 = f(&y.advanced(&k2, 0.5 * dt));
    let k4 = f(&y.advanced(&k3, dt));
    y.advanced(&k1, dt / 6.0)
        .advanced(&k2, dt / 3.0)
        .advanced(&k3, dt / 3.0)
        .advanced(&k4, dt / 6.0)
}
