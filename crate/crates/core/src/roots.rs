//! One-dimensional bracketing root finding: a coarse sign-change scan followed
//! by bisection with guarded false-position (Illinois) steps.

use crate::error::{Error, Result, ScanTrace, SolveLevel};

/// An interval on which the residual changes sign (or hits zero at an end).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

#[derive(Debug, Clone)]
pub struct Scan {
    pub trace: ScanTrace,
    pub brackets: Vec<Bracket>,
    /// First evaluation error, kept for reporting when nothing was evaluable.
    pub first_error: Option<String>,
}

impl Scan {
    pub fn bracket_bounds(&self) -> Vec<(f64, f64)> {
        self.brackets.iter().map(|b| (b.lo, b.hi)).collect()
    }

    /// True when every evaluable sample is zero to within `tol`.
    pub fn vanishes(&self, tol: f64) -> bool {
        let mut any = false;
        for v in self.trace.residual.iter().flatten() {
            any = true;
            if v.abs() > tol {
                return false;
            }
        }
        any
    }
}

/// Evaluate `f` on `points` evenly spaced samples of `[lo, hi]` and locate sign changes.
///
/// Samples where `f` fails are recorded as gaps; sign changes are only
/// detected between neighbouring evaluable samples. Sequential by design:
/// callers parallelize over independent solves instead.
pub fn scan<F>(f: F, lo: f64, hi: f64, points: usize) -> Scan
where
    F: Fn(f64) -> Result<f64>,
{
    let points = points.max(2);
    let xs: Vec<f64> = (0..points)
        .map(|i| {
            if i + 1 == points {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (points - 1) as f64
            }
        })
        .collect();
    let evals: Vec<Result<f64>> = xs.iter().map(|&x| f(x)).collect();
    let mut first_error = None;
    let residual: Vec<Option<f64>> = evals
        .into_iter()
        .map(|r| match r {
            Ok(v) if v.is_finite() => Some(v),
            Ok(_) => None,
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e.to_string());
                }
                None
            }
        })
        .collect();

    let mut brackets = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for (&x, v) in xs.iter().zip(&residual) {
        let Some(v) = *v else { continue };
        if let Some((px, pv)) = prev {
            // A zero sample closes a bracket once; the next interval starts from it.
            if (pv < 0.0 && v > 0.0) || (pv > 0.0 && v < 0.0) || (v == 0.0 && pv != 0.0) {
                brackets.push(Bracket {
                    lo: px,
                    hi: x,
                    f_lo: pv,
                    f_hi: v,
                });
            }
        } else if v == 0.0 {
            brackets.push(Bracket {
                lo: x,
                hi: x,
                f_lo: v,
                f_hi: v,
            });
        }
        prev = Some((x, v));
    }
    Scan {
        trace: ScanTrace {
            parameter: xs,
            residual,
        },
        brackets,
        first_error,
    }
}

/// Termination policy for [`refine`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RootOptions {
    /// Stop as soon as |f| is at or below this value.
    pub f_tol: f64,
    /// Stop when the bracket is narrower than this.
    pub x_tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

/// Shrink a sign-change bracket to a root.
///
/// False-position steps with the Illinois weight are taken while they shrink
/// the bracket by at least half; otherwise the step falls back to bisection.
/// When neither tolerance is met the loop stops once the bracket cannot be
/// split in floating point, returning the end with the smaller residual.
pub fn refine<F>(f: F, bracket: Bracket, opts: &RootOptions) -> Result<Root>
where
    F: Fn(f64) -> Result<f64>,
{
    let Bracket {
        lo: mut a,
        hi: mut b,
        f_lo: mut fa,
        f_hi: mut fb,
    } = bracket;
    if fa == 0.0 {
        return Ok(Root {
            x: a,
            fx: fa,
            iterations: 0,
        });
    }
    if fb == 0.0 {
        return Ok(Root {
            x: b,
            fx: fb,
            iterations: 0,
        });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NonConverged {
            what: format!("bracket [{a}, {b}] without sign change"),
            residual: fa.abs().min(fb.abs()),
        });
    }
    let best = |a: f64, fa: f64, b: f64, fb: f64| {
        if fa.abs() <= fb.abs() {
            (a, fa)
        } else {
            (b, fb)
        }
    };
    let mut side = 0i8;
    let mut use_bisection = false;
    for it in 1..=opts.max_iter {
        let width = (b - a).abs();
        let (bx, bf) = best(a, fa, b, fb);
        if bf.abs() <= opts.f_tol || width <= opts.x_tol {
            return Ok(Root {
                x: bx,
                fx: bf,
                iterations: it - 1,
            });
        }
        let mid = a + 0.5 * (b - a);
        if mid == a || mid == b {
            return Ok(Root {
                x: bx,
                fx: bf,
                iterations: it - 1,
            });
        }
        let mut x = mid;
        if !use_bisection {
            let s = b - fb * (b - a) / (fb - fa);
            if s.is_finite() && s > a.min(b) && s < a.max(b) {
                x = s;
            }
        }
        let fx = f(x)?;
        if !fx.is_finite() {
            return Err(Error::NonConverged {
                what: format!("non-finite residual at {x}"),
                residual: f64::NAN,
            });
        }
        if fx == 0.0 {
            return Ok(Root {
                x,
                fx,
                iterations: it,
            });
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        use_bisection = (b - a).abs() > 0.5 * width;
    }
    let (bx, bf) = best(a, fa, b, fb);
    if bf.abs() <= opts.f_tol {
        return Ok(Root {
            x: bx,
            fx: bf,
            iterations: opts.max_iter,
        });
    }
    Err(Error::NonConverged {
        what: format!("root refinement in [{a}, {b}]"),
        residual: bf.abs(),
    })
}

/// Scan, demand exactly one sign change, and refine it.
pub fn solve_unique<F>(
    f: F,
    lo: f64,
    hi: f64,
    points: usize,
    level: SolveLevel,
    opts: &RootOptions,
) -> Result<Root>
where
    F: Fn(f64) -> Result<f64>,
{
    let s = scan(&f, lo, hi, points);
    match s.brackets.len() {
        0 => Err(Error::NoRootInBracket {
            level,
            lo,
            hi,
            scan: s.trace,
            cause: s.first_error,
        }),
        1 => refine(&f, s.brackets[0], opts),
        _ => Err(Error::MultipleRoots {
            level,
            brackets: s.bracket_bounds(),
        }),
    }
}
