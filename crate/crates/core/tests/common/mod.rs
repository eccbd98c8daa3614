//! Test-side oracles. Nothing here calls into the library's numerics: each
//! reference value is computed by a different route (enumeration, numerical
//! integration or a closed form).
#![allow(dead_code, clippy::too_many_arguments)]

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use debatesim_core::persistence::RunStore;
use debatesim_core::{ExperimentPlan, ToxicityLevel};

// ---------------------------------------------------------------- binomial

/// Exact `C(n, k)` for small `n`.
pub fn choose(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}

pub fn binom_pmf(k: u64, n: u64, p: f64) -> f64 {
    choose(n, k) as f64 * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

/// Two-sided p-value by full enumeration: the total probability of every
/// outcome at most as likely as the observed one.
pub fn binom_p_enumerated(k: u64, n: u64, p: f64) -> f64 {
    let observed = binom_pmf(k, n, p);
    (0..=n)
        .map(|j| binom_pmf(j, n, p))
        .filter(|&q| q <= observed * (1.0 + 1e-7))
        .sum::<f64>()
        .min(1.0)
}

/// Central interval `[lo, hi]` holding at least `level` of Bin(n, p), with at
/// most `(1 - level) / 2` cut from each tail. Uses log-space pmf recursion.
pub fn binom_central_interval(n: u64, p: f64, level: f64) -> (u64, u64) {
    let mut pmf = vec![0.0f64; n as usize + 1];
    pmf[0] = (n as f64 * (1.0 - p).ln()).exp();
    for k in 1..=n as usize {
        pmf[k] = pmf[k - 1] * (n as f64 - k as f64 + 1.0) / k as f64 * p / (1.0 - p);
    }
    let tail = (1.0 - level) / 2.0;
    let mut acc = 0.0;
    let mut lo = 0;
    while acc + pmf[lo] <= tail {
        acc += pmf[lo];
        lo += 1;
    }
    acc = 0.0;
    let mut hi = n as usize;
    while acc + pmf[hi] <= tail {
        acc += pmf[hi];
        hi -= 1;
    }
    (lo as u64, hi as u64)
}

// ------------------------------------------------------ numerical integration

/// Adaptive Simpson quadrature.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Two-sided Student-t tail by integrating the density. With
/// `x = sqrt(df) tan(theta)` the density becomes proportional to
/// `cos(theta)^(df - 1)` on `(-pi/2, pi/2)`, so no gamma function is needed.
pub fn t_two_sided_integrated(t: f64, df: f64) -> f64 {
    assert!(df >= 1.0);
    let g = |th: f64| th.cos().max(0.0).powf(df - 1.0);
    let theta = (t.abs() / df.sqrt()).atan();
    let total = simpson(&g, 0.0, FRAC_PI_2, 1e-14);
    let tail = simpson(&g, theta, FRAC_PI_2, 1e-14);
    tail / total
}

/// `int_lo^hi u^(a-1) (1-u)^(b-1) du` with the endpoint singularities
/// removed by `u = v^2` below one half and `1 - u = w^2` above it.
fn beta_integral(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    let mut sum = 0.0;
    let left_hi = hi.min(0.5);
    if lo < left_hi {
        let f = |v: f64| 2.0 * v.powf(2.0 * a - 1.0) * (1.0 - v * v).powf(b - 1.0);
        sum += simpson(&f, lo.sqrt(), left_hi.sqrt(), 1e-15);
    }
    let right_lo = lo.max(0.5);
    if right_lo < hi {
        let f = |w: f64| 2.0 * w.powf(2.0 * b - 1.0) * (1.0 - w * w).powf(a - 1.0);
        sum += simpson(&f, (1.0 - hi).sqrt(), (1.0 - right_lo).sqrt(), 1e-15);
    }
    sum
}

/// Upper tail of F(d1, d2) by integrating the density. `u = d1 F / (d1 F + d2)`
/// maps it onto a Beta(d1/2, d2/2) variable.
pub fn f_upper_integrated(f: f64, d1: f64, d2: f64) -> f64 {
    let (a, b) = (d1 / 2.0, d2 / 2.0);
    assert!(a >= 0.5 && b >= 0.5);
    let u0 = d1 * f / (d1 * f + d2);
    beta_integral(a, b, u0, 1.0) / beta_integral(a, b, 0.0, 1.0)
}

// ------------------------------------------------------------- sample stats

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Student's pooled two-sample t statistic, straight from the textbook formula.
pub fn pooled_t(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let sp2 = ((na - 1.0) * var(a) + (nb - 1.0) * var(b)) / (na + nb - 2.0);
    (mean(a) - mean(b)) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt()
}

// -------------------------------------------------------- synthetic model

/// Hazard as the model defines it, restated here independently.
pub fn hazard(q0: f64, s: f64, a: f64, b: f64, opp_started: bool, opp_toxic: bool, floor: f64, ceil: f64) -> f64 {
    let raw = q0 * s + if opp_started { a } else { 0.0 } + if opp_toxic { b } else { 0.0 };
    raw.clamp(floor, ceil)
}

/// Outcome law of one debate by direct survival products:
/// `P(end at t) = h_t * prod_{s < t} (1 - h_s)`, with the turn-2 refusal
/// folded in as an extra survival factor.
pub struct ExactLaw {
    pub concede: Vec<f64>,
    pub refused: f64,
    pub capped: f64,
}

pub fn exact_law(h_starter: f64, h_responder: f64, refusal: f64, min_rounds: u32, cap: u32) -> ExactLaw {
    let h_at = |t: u32| {
        if t < min_rounds {
            0.0
        } else if t % 2 == 1 {
            h_starter
        } else {
            h_responder
        }
    };
    let survive_through = |t: u32| -> f64 {
        let mut s: f64 = (1..=t).map(|u| 1.0 - h_at(u)).product();
        if t >= 2 {
            s *= 1.0 - refusal;
        }
        s
    };
    let concede = (1..=cap)
        .map(|t| {
            let before = survive_through(t - 1) * if t == 2 { 1.0 - refusal } else { 1.0 };
            before * h_at(t)
        })
        .collect();
    let refused = if cap >= 2 { (1.0 - h_at(1)) * refusal } else { 0.0 };
    ExactLaw {
        concede,
        refused,
        capped: survive_through(cap),
    }
}

/// `E[T_conv | converged]` for a constant hazard `q`: a geometric number of
/// opportunities starting at turn `max(min_rounds, 1)`, truncated at the cap.
pub fn truncated_geometric_mean(q: f64, min_rounds: u32, cap: u32) -> f64 {
    let first = min_rounds.max(1);
    let k = f64::from(cap - first + 1);
    let tail = (1.0 - q).powf(k);
    f64::from(first - 1) + 1.0 / q - k * tail / (1.0 - tail)
}

/// Mode of the same law: the pmf `q (1-q)^(t-first)` is strictly
/// decreasing, so the mode is the first opportunity.
pub fn truncated_geometric_mode(q: f64, min_rounds: u32) -> u32 {
    assert!(q > 0.0 && q < 1.0);
    min_rounds.max(1)
}

// ------------------------------------------------------------------ runs

pub fn synthetic_plan(n: u64, seed: u64, levels: &[ToxicityLevel]) -> ExperimentPlan {
    let mut plan = ExperimentPlan::synthetic(debatesim_core::topics::bundled(), n, seed);
    plan.levels = levels.to_vec();
    plan
}

pub fn quick_store(dir: &Path) -> RunStore {
    let mut store = RunStore::open(dir).expect("open store");
    store.set_sync(false);
    store
}

/// Every regular file under `root`, as `(relative path, bytes)`, sorted.
pub fn snapshot(root: &Path, skip: &[&str]) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, skip: &[&str], out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let rel = path.strip_prefix(base).unwrap().to_string_lossy().into_owned();
            if skip.contains(&rel.as_str()) {
                continue;
            }
            if path.is_dir() {
                walk(base, &path, skip, out);
            } else {
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, skip, &mut out);
    out.sort();
    out
}

/// Asserts two stores hold the same files with the same bytes, naming the
/// first difference instead of dumping contents.
pub fn assert_same_files(a: &Path, b: &Path, skip: &[&str]) {
    let (sa, sb) = (snapshot(a, skip), snapshot(b, skip));
    let names = |s: &[(String, Vec<u8>)]| s.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    assert_eq!(names(&sa), names(&sb), "file sets differ");
    for ((name, x), (_, y)) in sa.iter().zip(&sb) {
        if x != y {
            let at = x
                .iter()
                .zip(y)
                .position(|(p, q)| p != q)
                .unwrap_or(x.len().min(y.len()));
            panic!("{name} differs at byte {at} (sizes {} and {})", x.len(), y.len());
        }
    }
}
