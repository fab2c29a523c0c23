//! The fixed cutoff used by the Hanzawa transform.
//!
//! `chi` is even, equal to 1 on `[-1/3, 1/3]`, 0 outside `(-2/3, 2/3)`, C² and
//! satisfies `|chi'| <= 4`. On the transition band its derivative is a
//! plateau with smoothstep shoulders: a quintic smoothstep over the full band
//! would peak at `45/8 > 4`.

const INNER: f64 = 1.0 / 3.0;
const OUTER: f64 = 2.0 / 3.0;
/// Fraction of the transition band used by each derivative shoulder.
const SHOULDER: f64 = 0.2;
/// Plateau height of the normalized derivative profile, `1 / (1 - SHOULDER)`.
const PLATEAU: f64 = 1.0 / (1.0 - SHOULDER);

/// Bound on `|chi'|` guaranteed by the construction.
pub const MAX_SLOPE: f64 = 3.0 * PLATEAU;

fn smoothstep(v: f64) -> f64 {
    v * v * (3.0 - 2.0 * v)
}

// Antiderivative of the smoothstep, zero at 0.
fn smoothstep_integral(v: f64) -> f64 {
    v * v * v - 0.5 * v * v * v * v
}

/// Normalized derivative profile on `t in [0, 1]`, integrating to 1.
fn profile(t: f64) -> f64 {
    if t <= SHOULDER {
        PLATEAU * smoothstep(t / SHOULDER)
    } else if t >= 1.0 - SHOULDER {
        PLATEAU * smoothstep((1.0 - t) / SHOULDER)
    } else {
        PLATEAU
    }
}

fn profile_integral(t: f64) -> f64 {
    if t <= SHOULDER {
        PLATEAU * SHOULDER * smoothstep_integral(t / SHOULDER)
    } else if t >= 1.0 - SHOULDER {
        1.0 - PLATEAU * SHOULDER * smoothstep_integral((1.0 - t) / SHOULDER)
    } else {
        PLATEAU * (0.5 * SHOULDER + (t - SHOULDER))
    }
}

pub fn chi(s: f64) -> f64 {
    let u = s.abs();
    if u <= INNER {
        1.0
    } else if u >= OUTER {
        0.0
    } else {
        1.0 - profile_integral((u - INNER) / (OUTER - INNER))
    }
}

pub fn chi_prime(s: f64) -> f64 {
    let u = s.abs();
    if u <= INNER || u >= OUTER {
        0.0
    } else {
        -s.signum() * profile((u - INNER) / (OUTER - INNER)) / (OUTER - INNER)
    }
}
