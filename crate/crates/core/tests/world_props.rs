mod common;

use common::{cube, pose, room_scenario, state_at};
use mirrorbench::world::{
    apply_action, cube_within_reach, distractor_action, generate_scenario, reach_threshold,
    step_distractors, quantize, Action, Condition, DistractorSpec, Heading, ScenarioConfig, WorldState,
    BODY_RADIUS, MAX_STEPS, OCCLUDER_THICKNESS, STEP_LEN,
};
use mirrorbench::color::ColorLabel;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn heading_gap(a: Heading, b: Heading) -> u16 {
    let d = (i32::from(a.degrees()) - i32::from(b.degrees())).rem_euclid(360) as u16;
    d.min(360 - d)
}

fn inside(s: &ScenarioConfig, x: f64, y: f64) -> bool {
    x.abs() < s.room.width / 2.0 - BODY_RADIUS && y.abs() < s.room.depth / 2.0 - BODY_RADIUS
}

/// Fraction of the mirror width hidden behind the panels' mid-planes, seen
/// from the room center.
fn occluded_width_fraction(s: &ScenarioConfig) -> f64 {
    let m = s.room.mirror.as_ref().unwrap();
    let plane = m.wall.plane_offset();
    let tangent_x = m.wall.tangent_is_x();
    let mut intervals: Vec<(f64, f64)> = s
        .room
        .occluders
        .iter()
        .map(|o| {
            // Mid-plane segment endpoints (tangent coordinate, normal coordinate).
            let (a, b, n) = if tangent_x {
                (o.min[0], o.max[0], 0.5 * (o.min[1] + o.max[1]))
            } else {
                (o.min[1], o.max[1], 0.5 * (o.min[0] + o.max[0]))
            };
            let scale = plane / n;
            let (pa, pb) = (a * scale, b * scale);
            (pa.min(pb).max(m.u_min), pa.max(pb).min(m.u_max))
        })
        .filter(|(a, b)| b > a)
        .collect();
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut covered = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for (a, b) in intervals {
        cur = match cur {
            Some((ca, cb)) if a <= cb => Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                covered += cb - ca;
                Some((a, b))
            }
            None => Some((a, b)),
        };
    }
    if let Some((a, b)) = cur {
        covered += b - a;
    }
    covered / (m.u_max - m.u_min)
}

#[test]
fn generated_scenarios_satisfy_invariants_over_many_seeds() {
    let mut collisions_e4 = 0;
    for seed in 0..10_000u64 {
        for cond in Condition::ALL {
            let s = generate_scenario(cond, seed);
            s.validate().unwrap_or_else(|e| panic!("{cond} seed {seed}: {e}"));
            assert_eq!(s.room.mirror.is_some(), cond != Condition::E2);
            if cond != Condition::E5 {
                assert_eq!(s.candidates().filter(|c| c.color == s.ego_color).count(), 1);
                assert_eq!(s.candidates().count(), 3);
            }
            if let Some(m) = &s.room.mirror {
                assert!(heading_gap(s.ego_start.heading, m.wall.facing_heading()) >= 90);
            }
            assert!(inside(&s, s.ego_start.x, s.ego_start.y));
            match cond {
                Condition::E3 => {
                    let w = s.wrong_color.expect("E3 has a wrong color");
                    assert_ne!(w, s.ego_color);
                }
                Condition::E4 => {
                    assert!((1..=6).contains(&s.distractors.len()));
                    if s.distractors.iter().any(|d| d.color == s.ego_color) {
                        collisions_e4 += 1;
                    }
                }
                Condition::E5 => {
                    assert!((1..=6).contains(&s.distractors.len()));
                    assert!((2..=5).contains(&s.cubes.len()));
                    assert!((1..=3).contains(&s.room.occluders.len()));
                    let f = occluded_width_fraction(&s);
                    assert!((0.3 - 1e-9..=0.7 + 1e-9).contains(&f), "seed {seed}: coverage {f}");
                    for o in &s.room.occluders {
                        let thin = (o.max[0] - o.min[0]).min(o.max[1] - o.min[1]);
                        assert!((thin - OCCLUDER_THICKNESS).abs() < 1e-9);
                    }
                }
                _ => {}
            }
        }
    }
    // Recoloring happens with probability one half.
    let rate = f64::from(collisions_e4) / 10_000.0;
    assert!((rate - 0.5).abs() < 0.03, "E4 collision rate {rate}");
}

#[test]
fn e2_is_e1_without_the_mirror() {
    for seed in 0..500u64 {
        let e1 = generate_scenario(Condition::E1, seed);
        let e2 = generate_scenario(Condition::E2, seed);
        assert!(e2.room.mirror.is_none());
        assert_eq!(e1.cubes, e2.cubes);
        assert_eq!(e1.ego_start, e2.ego_start);
        assert_eq!(e1.ego_color, e2.ego_color);
    }
}

#[test]
fn generation_is_deterministic() {
    for seed in [0u64, 1, 42, u64::MAX] {
        for cond in Condition::ALL {
            let a = serde_json::to_string(&generate_scenario(cond, seed)).unwrap();
            let b = serde_json::to_string(&generate_scenario(cond, seed)).unwrap();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn ego_stays_inside_over_random_action_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let scenario = room_scenario(None, Vec::new(), pose(0.0, 0.0, 0));
    let moves = Action::MOVES;
    let mut restored = 0u32;
    for _ in 0..100_000 {
        let x = quantize(rng.gen_range(-4.6..4.6));
        let y = quantize(rng.gen_range(-4.6..4.6));
        let h = rng.gen_range(0..12u16) * 30;
        let mut state = state_at(pose(x, y, h));
        for _ in 0..rng.gen_range(1..=20) {
            let a = moves[rng.gen_range(0..4)];
            let before = state.ego;
            let (next, bumped) = apply_action(&state, a, &scenario.room);
            assert!(inside(&scenario, next.ego.x, next.ego.y));
            assert_eq!(next.t, state.t + 1);
            if bumped {
                assert_eq!(next.ego, before);
            }
            // Move then unmove restores the exact pose.
            if a == Action::Forward && !bumped {
                let (back, b2) = apply_action(&next, Action::Backward, &scenario.room);
                if !b2 {
                    assert_eq!(back.ego, before);
                    restored += 1;
                }
            }
            state = next;
        }
    }
    assert!(restored > 10_000);
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn twelve_left_turns_are_identity(k in 0u16..12, x in -4.0f64..4.0, y in -4.0f64..4.0) {
        let scenario = room_scenario(None, Vec::new(), pose(0.0, 0.0, 0));
        let start = state_at(pose(x, y, k * 30));
        let mut s = start.clone();
        for _ in 0..12 {
            s = apply_action(&s, Action::TurnLeft, &scenario.room).0;
        }
        prop_assert_eq!(s.ego, start.ego);
    }

    #[test]
    fn forward_then_back_restores_pose(k in 0u16..12, x in -4.0f64..4.0, y in -4.0f64..4.0) {
        let scenario = room_scenario(None, Vec::new(), pose(0.0, 0.0, 0));
        let start = state_at(pose(quantize(x), quantize(y), k * 30));
        let (mid, b1) = apply_action(&start, Action::Forward, &scenario.room);
        let (end, b2) = apply_action(&mid, Action::Backward, &scenario.room);
        prop_assert!(!b1 && !b2);
        prop_assert_eq!(end.ego, start.ego);
    }
}

#[test]
fn action_examples() {
    let scenario = room_scenario(None, Vec::new(), pose(0.0, 0.0, 0));
    let (s, bumped) = apply_action(&state_at(pose(0.0, 0.0, 0)), Action::TurnLeft, &scenario.room);
    assert_eq!((s.ego, bumped), (pose(0.0, 0.0, 30), false));
    let (s, bumped) = apply_action(&state_at(pose(0.0, 0.0, 0)), Action::Forward, &scenario.room);
    assert_eq!((s.ego.x, s.ego.y, bumped), (STEP_LEN, 0.0, false));
    // Body surface 0.1 m from the east wall.
    let near = pose(5.0 - BODY_RADIUS - 0.1, 0.0, 0);
    let (s, bumped) = apply_action(&state_at(near), Action::Forward, &scenario.room);
    assert_eq!((s.ego, bumped), (near, true));
}

#[test]
fn reach_rule() {
    let c = cube(ColorLabel::Red, 0.0, 0.0);
    assert!(cube_within_reach(&state_at(pose(0.4, 0.0, 0)), &c));
    assert!(!cube_within_reach(&state_at(pose(4.5, 4.5, 0)), &c));
    let edge = STEP_LEN + c.edge / 2.0 + BODY_RADIUS;
    assert_eq!(reach_threshold(&c), edge);
    assert!(cube_within_reach(&state_at(pose(edge, 0.0, 0)), &c));
    assert!(!cube_within_reach(&state_at(pose(edge + 1e-9, 0.0, 0)), &c));
}

#[test]
fn distractors_follow_their_own_streams() {
    let e1 = generate_scenario(Condition::E1, 3);
    let st = e1.initial_state();
    assert_eq!(step_distractors(&st, &e1), st);

    let e4 = generate_scenario(Condition::E4, 3);
    let st = e4.initial_state();
    assert_eq!(step_distractors(&st, &e4), step_distractors(&st, &e4));

    // A distractor facing the wall it touches cannot move forward.
    let t = (1..200).find(|&t| distractor_action(99, t) == Action::Forward).unwrap();
    let mut s = e4.clone();
    let wall_pose = pose(5.0 - BODY_RADIUS - 0.1, 0.0, 0);
    s.distractors = vec![DistractorSpec { color: ColorLabel::Green, initial_pose: wall_pose, motion_seed: 99 }];
    let state = WorldState { t, ego: s.ego_start, distractors: vec![wall_pose], bumped_last: false };
    assert_eq!(step_distractors(&state, &s).distractors[0], wall_pose);
}

#[test]
fn distractor_action_weights() {
    let mut counts = [0u32; 4];
    let n = 200_000u32;
    for i in 0..n {
        let a = distractor_action(u64::from(i / 100), i % 100 + 1);
        let k = Action::MOVES.iter().position(|&m| m == a).unwrap();
        counts[k] += 1;
    }
    let freq: Vec<f64> = counts.iter().map(|&c| f64::from(c) / f64::from(n)).collect();
    let expected = |a: Action| match a {
        Action::Forward => 0.5,
        Action::TurnLeft | Action::TurnRight => 0.2,
        Action::Backward => 0.1,
        Action::Done => 0.0,
    };
    for (i, a) in Action::MOVES.iter().enumerate() {
        assert!((freq[i] - expected(*a)).abs() < 0.01, "{a:?}: {}", freq[i]);
    }
}

#[test]
fn step_cap_constant() {
    assert_eq!(MAX_STEPS, 100);
}

#[test]
fn unknown_condition_is_rejected() {
    assert!("E6".parse::<Condition>().is_err());
    assert_eq!("E3".parse::<Condition>().unwrap(), Condition::E3);
}
