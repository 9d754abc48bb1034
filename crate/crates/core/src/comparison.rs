//! Riccati comparison system `Q' = cC`, `C' = cQC`, its reduced scalar form
//! `Q' = cκQ²`, and the Dini-band fit of a PDE series.

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};

/// Initial data and constants of the comparison flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonState {
    pub q: f64,
    pub c_amp: f64,
    pub c: f64,
    pub kappa: f64,
}

impl ComparisonState {
    pub fn new(q: f64, c_amp: f64, c: f64, kappa: f64) -> Result<Self> {
        let s = Self { q, c_amp, c, kappa };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("Q(0)", self.q),
            ("C(0)", self.c_amp),
            ("c", self.c),
            ("kappa", self.kappa),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidComparison(format!("{name} = {v} must be positive")));
            }
        }
        if self.c_amp < self.kappa * self.q * self.q {
            return Err(Error::InvalidComparison(format!(
                "initial dominance fails: C(0) = {} < kappa Q(0)^2 = {}",
                self.c_amp,
                self.kappa * self.q * self.q
            )));
        }
        Ok(())
    }

    /// `1 / (c κ Q(0))`.
    pub fn blowup_bound(&self) -> f64 {
        1.0 / (self.c * self.kappa * self.q)
    }

    /// Whether the dominance margin is provably nondecreasing, `κ ≤ c/(4C0)` with `C0 = c`.
    pub fn margin_preserving(&self) -> bool {
        self.kappa <= 0.25
    }
}

/// Which flow to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparisonMode {
    /// `Q' = cC`, `C' = cQC`.
    Coupled,
    /// `Q' = cκQ²` (C is slaved as `κQ²`).
    Reduced,
}

/// Accepted step of the comparison flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonPoint {
    pub t: f64,
    pub q: f64,
    pub c_amp: f64,
}

#[derive(Debug, Clone)]
pub struct ComparisonRun {
    pub mode: ComparisonMode,
    pub trajectory: Vec<ComparisonPoint>,
    /// Extrapolated blow-up time, `None` if `Q` stayed below the threshold up to `t_max`.
    pub blowup_time: Option<f64>,
    pub bound: f64,
    /// Smallest increment of `S = C - κQ²` between accepted steps (coupled mode).
    pub min_margin_increment: f64,
}

/// Relative slack granted to the extrapolated blow-up time when comparing with the bound.
pub const BOUND_SLACK: f64 = 1e-6;

impl ComparisonRun {
    /// `T ≤ 1/(cκQ(0))` up to [`BOUND_SLACK`]; the reduced flow attains the bound exactly.
    pub fn within_bound(&self) -> bool {
        self.blowup_time.is_some_and(|t| t <= self.bound * (1.0 + BOUND_SLACK))
    }
}

/// Threshold on `Q` that counts as blow-up.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

fn rhs(s: &ComparisonState, mode: ComparisonMode, y: [f64; 2]) -> [f64; 2] {
    match mode {
        ComparisonMode::Coupled => [s.c * y[1], s.c * y[0] * y[1]],
        ComparisonMode::Reduced => {
            let dq = s.c * s.kappa * y[0] * y[0];
            [dq, 2.0 * s.kappa * y[0] * dq]
        }
    }
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn dp_step(f: &impl Fn([f64; 2]) -> [f64; 2], y: [f64; 2], h: f64) -> ([f64; 2], f64) {
    let mut k = [[0.0; 2]; 7];
    k[0] = f(y);
    for s in 1..7 {
        let mut ys = y;
        for (j, kj) in k.iter().enumerate().take(s) {
            ys[0] += h * A[s - 1][j] * kj[0];
            ys[1] += h * A[s - 1][j] * kj[1];
        }
        k[s] = f(ys);
    }
    let mut y5 = y;
    let mut err = [0.0; 2];
    for s in 0..7 {
        for d in 0..2 {
            y5[d] += h * B5[s] * k[s][d];
            err[d] += h * (B5[s] - B4[s]) * k[s][d];
        }
    }
    let e = (0..2)
        .map(|d| err[d].abs() / (y[d].abs().max(y5[d].abs()) + 1e-300))
        .fold(0.0, f64::max);
    (y5, e)
}

/// Integrate up to `t_max` or until `Q > 10¹²`; the blow-up time is read off a
/// least-squares line through `1/Q(t)` over the last decade of `Q`.
pub fn integrate(s0: &ComparisonState, mode: ComparisonMode, t_max: f64, rtol: f64) -> Result<ComparisonRun> {
    s0.validate()?;
    if !(rtol > 0.0 && t_max > 0.0) {
        return Err(Error::InvalidComparison("rtol and t_max must be positive".into()));
    }
    let c0 = match mode {
        ComparisonMode::Coupled => s0.c_amp,
        ComparisonMode::Reduced => s0.kappa * s0.q * s0.q,
    };
    let f = |y: [f64; 2]| rhs(s0, mode, y);
    let mut y = [s0.q, c0];
    let mut t = 0.0;
    let mut h = rtol.powf(0.2) * 0.1 / (s0.c * (s0.c_amp / s0.q + s0.q)).max(1e-300);
    let mut traj = vec![ComparisonPoint {
        t,
        q: y[0],
        c_amp: y[1],
    }];
    let margin = |y: [f64; 2]| y[1] - s0.kappa * y[0] * y[0];
    let mut min_inc = f64::INFINITY;
    let mut rejects = 0usize;
    while t < t_max && y[0] <= BLOWUP_THRESHOLD {
        h = h.min(t_max - t);
        let (yn, e) = dp_step(&f, y, h);
        if !(e.is_finite() && yn.iter().all(|v| v.is_finite())) || e > rtol {
            let fac = if e.is_finite() {
                (0.9 * (rtol / e).powf(0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= fac;
            rejects += 1;
            if h < 1e-300 || rejects > 100_000 {
                return Err(Error::InvalidComparison("step size collapsed".into()));
            }
            continue;
        }
        min_inc = min_inc.min(margin(yn) - margin(y));
        t += h;
        y = yn;
        traj.push(ComparisonPoint {
            t,
            q: y[0],
            c_amp: y[1],
        });
        let fac = if e > 0.0 {
            (0.9 * (rtol / e).powf(0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= fac;
    }
    let blowup_time = (y[0] > BLOWUP_THRESHOLD).then(|| extrapolate_blowup(&traj));
    Ok(ComparisonRun {
        mode,
        trajectory: traj,
        blowup_time,
        bound: s0.blowup_bound(),
        min_margin_increment: if mode == ComparisonMode::Coupled { min_inc } else { 0.0 },
    })
}

/// Zero of the least-squares line through `(t, 1/Q)` over points with `Q ≥ Q_end/10`.
fn extrapolate_blowup(traj: &[ComparisonPoint]) -> f64 {
    let q_end = traj.last().map(|p| p.q).unwrap_or(f64::NAN);
    let pts: Vec<(f64, f64)> = traj
        .iter()
        .filter(|p| p.q >= q_end / 10.0)
        .map(|p| (p.t, 1.0 / p.q))
        .collect();
    let last = *traj.last().expect("nonempty trajectory");
    if pts.len() < 2 {
        return last.t;
    }
    let n = pts.len() as f64;
    let (st, sv) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mt, mv) = (st / n, sv / n);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |a, p| {
        (a.0 + (p.0 - mt) * (p.1 - mv), a.1 + (p.0 - mt).powi(2))
    });
    if sxx == 0.0 || sxy >= 0.0 {
        return last.t;
    }
    let slope = sxy / sxx;
    mt - mv / slope
}

/// Forward-difference Dini ratios `ΔQ / (Δt · C̄)` between consecutive records,
/// with `C̄` the mean of the two endpoint values.
pub fn dini_ratios(series: &[DiagnosticsRecord]) -> Vec<f64> {
    series
        .windows(2)
        .map(|w| {
            let dt = w[1].t - w[0].t;
            let c = 0.5 * (w[0].c + w[1].c);
            (w[1].q - w[0].q) / (dt * c)
        })
        .collect()
}

/// Measured Dini band and the dominance check it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiniFit {
    pub c_lower: f64,
    pub c0_upper: f64,
    pub kappa_max: f64,
    /// `C ≥ κ_max Q²` at every record.
    pub dominance_holds: bool,
    /// The band touches zero or is not finite.
    pub degenerate: bool,
}

/// Minimum and maximum Dini ratio over the series and `κ_max = c_lower / (4 C0_upper)`.
pub fn fit_constants(series: &[DiagnosticsRecord]) -> Result<DiniFit> {
    let usable = series.iter().filter(|r| r.c > 0.0).count();
    if series.len() < 10 || usable < 10 {
        return Err(Error::SeriesTooShort {
            need: 10,
            got: usable.min(series.len()),
        });
    }
    let ratios = dini_ratios(series);
    let c_lower = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let c0_upper = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let degenerate = !(c_lower > 0.0 && c0_upper.is_finite() && c_lower.is_finite());
    let kappa_max = if degenerate { 0.0 } else { c_lower / (4.0 * c0_upper) };
    let dominance_holds = !degenerate && series.iter().all(|r| r.c >= kappa_max * r.q * r.q);
    Ok(DiniFit {
        c_lower: c_lower.max(0.0),
        c0_upper,
        kappa_max,
        dominance_holds,
        degenerate,
    })
}
