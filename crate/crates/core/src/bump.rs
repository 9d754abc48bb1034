//! Smooth plateau bumps built from the `exp(-1/t)` glue function.

fn glue(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// C-infinity step: 0 for `t <= 0`, 1 for `t >= 1`, strictly increasing in between.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = glue(t);
    let b = glue(1.0 - t);
    a / (a + b)
}

/// Even bump equal to 1 on `[-inner, inner]`, 0 outside `(-outer, outer)`.
pub fn plateau(s: f64, inner: f64, outer: f64) -> f64 {
    debug_assert!(0.0 <= inner && inner < outer);
    let a = s.abs();
    if a <= inner {
        1.0
    } else if a >= outer {
        0.0
    } else {
        smooth_step((outer - a) / (outer - inner))
    }
}

/// Cutoff profile of the explicit data: plateau on `[-2, 2]`, support `(-4, 4)`.
pub fn chi(s: f64) -> f64 {
    plateau(s, 2.0, 4.0)
}

/// Projection window profile: plateau on `[-1, 1]`, support `(-2, 2)`.
pub fn psi(s: f64) -> f64 {
    plateau(s, 1.0, 2.0)
}
