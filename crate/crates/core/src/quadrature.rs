//! Gauss-Legendre rules and a globally adaptive panel integrator.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1],
/// ascending in x.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for j in 2..=n {
        let j = j as f64;
        let p2 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (z * p - p0) / (z * z - 1.0);
    (p, d)
}

pub(crate) fn gl32() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(32))
}

/// Integration result with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

/// Settings for [`integrate_adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub rel_tol: f64,
    /// Absolute error below which a result is always accepted.
    pub abs_floor: f64,
    pub max_subdivisions: usize,
    /// Equal panels each interval starts with.
    pub initial_panels: usize,
    /// Panels narrower than this are no longer split when the integrand
    /// reports a degenerate sample; they fall back to a midpoint rule.
    pub min_width: f64,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_floor: 0.0,
            max_subdivisions: 4096,
            initial_panels: 4,
            min_width: 1e-6,
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    error: f64,
}

impl Panel {
    fn value(&self) -> f64 {
        self.left + self.right
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn rule<F>(f: &F, a: f64, b: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (x, w) = gl32();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        s += wi * f(mid + half * xi)?;
    }
    Ok(s * half)
}

/// Midpoint rule on `t = a + (b - a) s^2`, which tames an inverse square-root
/// singularity at `a`. Samples that still fail are dropped.
fn sliver<F>(f: &F, a: f64, b: f64) -> f64
where
    F: Fn(f64) -> Result<f64>,
{
    const N: usize = 64;
    let mut s = 0.0;
    for i in 0..N {
        let u = (i as f64 + 0.5) / N as f64;
        let t = a + (b - a) * u * u;
        if let Ok(v) = f(t) {
            s += v * 2.0 * (b - a) * u / N as f64;
        }
    }
    s
}

enum Build {
    Panel(Panel),
    /// Integrand hit a degenerate point somewhere inside.
    Degenerate(f64, f64),
}

fn build<F>(f: &F, a: f64, b: f64, whole: Option<f64>) -> Result<Build>
where
    F: Fn(f64) -> Result<f64>,
{
    let mid = 0.5 * (a + b);
    let attempt = || -> Result<Panel> {
        let whole = match whole {
            Some(v) => v,
            None => rule(f, a, b)?,
        };
        let left = rule(f, a, mid)?;
        let right = rule(f, mid, b)?;
        Ok(Panel {
            a,
            b,
            left,
            right,
            error: (whole - left - right).abs(),
        })
    };
    match attempt() {
        Ok(p) => Ok(Build::Panel(p)),
        Err(Error::DegenerateRoot { .. }) => Ok(Build::Degenerate(a, b)),
        Err(e) => Err(e),
    }
}

/// Integrates `f` over `[a, b]`, splitting first at every point in
/// `breakpoints` that lies strictly inside.
///
/// Panels use the 32-point Gauss-Legendre rule; a panel's error is the
/// difference between the rule on the whole panel and on its two halves, and
/// the worst panel is bisected until the summed error meets
/// `max(rel_tol * |I|, abs_floor)`.
pub fn integrate_adaptive<F>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: &AdaptiveOptions,
) -> Result<Estimate>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut cuts: Vec<f64> = std::iter::once(a)
        .chain(breakpoints.iter().copied().filter(|&c| c > a && c < b))
        .chain(std::iter::once(b))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    let mut pending: Vec<(f64, f64)> = Vec::new();
    for seg in cuts.windows(2) {
        let n = opts.initial_panels.max(1);
        let h = (seg[1] - seg[0]) / n as f64;
        for i in 0..n {
            let lo = seg[0] + i as f64 * h;
            let hi = if i + 1 == n { seg[1] } else { lo + h };
            pending.push((lo, hi));
        }
    }

    let mut fixed = 0.0; // contributions settled by the sliver rule
    let mut subdivisions = 0;
    let push = |heap: &mut BinaryHeap<Panel>,
                fixed: &mut f64,
                pending: &mut Vec<(f64, f64)>,
                lo: f64,
                hi: f64,
                whole: Option<f64>|
     -> Result<()> {
        match build(&f, lo, hi, whole)? {
            Build::Panel(p) => heap.push(p),
            Build::Degenerate(lo, hi) => {
                if hi - lo <= opts.min_width {
                    *fixed += sliver(&f, lo, hi);
                } else {
                    let m = 0.5 * (lo + hi);
                    pending.push((lo, m));
                    pending.push((m, hi));
                }
            }
        }
        Ok(())
    };

    while let Some((lo, hi)) = pending.pop() {
        push(&mut heap, &mut fixed, &mut pending, lo, hi, None)?;
    }

    loop {
        let value: f64 = fixed + heap.iter().map(Panel::value).sum::<f64>();
        let error: f64 = heap.iter().map(|p| p.error).sum();
        if error <= (opts.rel_tol * value.abs()).max(opts.abs_floor) {
            return Ok(Estimate {
                value,
                error,
                subdivisions,
            });
        }
        if subdivisions >= opts.max_subdivisions {
            return Err(Error::QuadratureFailure {
                tol: opts.rel_tol,
                max_subdivisions: opts.max_subdivisions,
                estimate: value,
                error,
            });
        }
        let worst = heap.pop().expect("non-zero error implies a panel");
        subdivisions += 1;
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // Cannot split further in floating point; accept as is.
            fixed += worst.value();
            continue;
        }
        push(
            &mut heap,
            &mut fixed,
            &mut pending,
            worst.a,
            m,
            Some(worst.left),
        )?;
        push(
            &mut heap,
            &mut fixed,
            &mut pending,
            m,
            worst.b,
            Some(worst.right),
        )?;
        while let Some((lo, hi)) = pending.pop() {
            push(&mut heap, &mut fixed, &mut pending, lo, hi, None)?;
        }
    }
}
