//! Independent re-statement of the metric definitions, shared by the
//! metric tests and the acceptance runner.

#![allow(clippy::needless_range_loop)]

use mirrorbench::color::ColorLabel;
use mirrorbench::metrics::{EpisodeMetrics, EpisodeTrace, ProtocolFlags, StepRecord};
use mirrorbench::protocol::SelfColor;
use mirrorbench::world::{Action, Condition, Heading, Pose};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn step(t: u32, action: Action, m: bool, ident: SelfColor, sel: Option<ColorLabel>) -> StepRecord {
    StepRecord {
        t,
        action: Some(action),
        m,
        visible_fraction: if m { 0.5 } else { 0.0 },
        mirror_surface_in_view: m,
        identification: ident,
        selected_cube: sel,
        pose: Pose::new(0.0, 0.0, Heading::NORTH),
        bumped: false,
        flags: ProtocolFlags::default(),
    }
}

/// Builds a consistent trace header around `steps`.
pub fn finish(condition: Condition, c_star: ColorLabel, steps: Vec<StepRecord>) -> EpisodeTrace {
    let done = steps.iter().find(|s| s.action == Some(Action::Done)).map(|s| s.t);
    let n = steps.len() as u32;
    let tau = done.unwrap_or(n);
    let final_decision = done.and_then(|d| {
        let s = &steps[d as usize - 1];
        if condition.is_cube_task() {
            s.selected_cube
        } else {
            s.identification.color()
        }
    });
    EpisodeTrace {
        condition,
        c_star,
        steps_taken: n,
        terminated: done.is_some(),
        tau,
        steps,
        final_decision,
        scenario_seed: 0,
        backend: "fixture".into(),
        proximity_violation: false,
    }
}

/// Literal re-reading of the definitions, indexing `m[t]`, `c_hat[t]` with
/// t = 1..=T. No shared helpers with the library.
pub fn brute_force(tr: &EpisodeTrace) -> EpisodeMetrics {
    let big_t = tr.steps.len();
    let mut m = vec![false; big_t + 1];
    let mut c_hat: Vec<Option<ColorLabel>> = vec![None; big_t + 1];
    let mut done_at = None;
    for (i, s) in tr.steps.iter().enumerate() {
        let t = i + 1;
        m[t] = s.m;
        c_hat[t] = match s.identification {
            SelfColor::Unknown => None,
            SelfColor::Color(c) => Some(c),
        };
        if done_at.is_none() && s.action == Some(Action::Done) {
            done_at = Some(t);
        }
    }
    let terminated = done_at.is_some();
    let tau = done_at.unwrap_or(big_t);
    let z = done_at.and_then(|d| {
        let s = &tr.steps[d - 1];
        if tr.condition == Condition::E5 {
            c_hat[d]
        } else {
            s.selected_cube
        }
    });

    let tsa = z == Some(tr.c_star);
    let mut mcr = false;
    for t in 1..tau {
        mcr |= m[t];
    }
    let mut caal = false;
    for t in 1..tau {
        caal |= c_hat[t] == Some(tr.c_star);
    }
    let mut t_claim = None;
    let mut t_mirror_pre = None;
    for t in (1..tau).rev() {
        if c_hat[t].is_some() {
            t_claim = Some(t);
        }
        if m[t] {
            t_mirror_pre = Some(t);
        }
    }
    let cr = match t_claim {
        None => false,
        Some(c) => t_mirror_pre.is_none_or(|tm| c < tm),
    };
    let mut mgd = 0;
    for t in 1..=big_t {
        mgd += u32::from(m[t]);
    }

    let t_mirror = (1..=big_t).find(|&t| m[t]);
    let t_guess = t_mirror.and_then(|tm| (1..tm).find(|&t| c_hat[t].is_some()));
    let a = match (t_mirror, t_guess) {
        (Some(_), Some(g)) => c_hat[g] != Some(tr.c_star),
        _ => false,
    };
    let tau_tilde = if terminated { tau } else { big_t };
    let sc = if a {
        let tm = t_mirror.unwrap();
        Some((tm..=tau_tilde).any(|t| c_hat[t] == Some(tr.c_star)))
    } else {
        None
    };

    EpisodeMetrics {
        tsa,
        ttd: tau as u32,
        mcr,
        mtato: if tsa { Some(mcr) } else { None },
        caal,
        cr,
        mgd,
        sc,
        ar_sc_applicable: a,
        completed: terminated,
    }
}

pub fn random_trace(rng: &mut ChaCha8Rng) -> EpisodeTrace {
    let condition = Condition::ALL[rng.gen_range(0..5)];
    let palette = ColorLabel::ALL;
    // A small pool keeps correct guesses and matches frequent.
    let pool = &palette[..rng.gen_range(2..=4)];
    let c_star = pool[rng.gen_range(0..pool.len())];
    let len = rng.gen_range(1..=40u32);
    let p_m = rng.gen_range(0.0..0.6);
    let p_claim = rng.gen_range(0.0..0.7);
    let p_done = rng.gen_range(0.0..0.15);
    let steps = (1..=len)
        .map(|t| {
            let m = rng.gen_bool(p_m);
            let ident = if rng.gen_bool(p_claim) {
                SelfColor::Color(pool[rng.gen_range(0..pool.len())])
            } else {
                SelfColor::Unknown
            };
            let action = if rng.gen_bool(p_done) {
                Action::Done
            } else {
                Action::MOVES[rng.gen_range(0..4)]
            };
            let sel = (action == Action::Done && condition.is_cube_task() && rng.gen_bool(0.9))
                .then(|| pool[rng.gen_range(0..pool.len())]);
            step(t, action, m, ident, sel)
        })
        .collect();
    finish(condition, c_star, steps)
}

pub fn fuzzed(n: usize) -> Vec<EpisodeTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    (0..n).map(|_| random_trace(&mut rng)).collect()
}

/// Exact mean and SEM from integer sums: mean = S/n and
/// SEM^2 = (n*Q - S^2) / (n^2 (n-1)), Q the sum of squares.
pub fn exact_summary(xs: &[i64]) -> (f64, Option<f64>) {
    let n = xs.len() as i128;
    let s: i128 = xs.iter().map(|&x| i128::from(x)).sum();
    let q: i128 = xs.iter().map(|&x| i128::from(x) * i128::from(x)).sum();
    let mean = s as f64 / n as f64;
    let sem = (n > 1).then(|| ((n * q - s * s) as f64 / (n * n * (n - 1)) as f64).sqrt());
    (mean, sem)
}

