//! Kinematic pick-and-place world with a scripted expert controller.
//!
//! All transitions are pure functions of their inputs, so rollouts are
//! exactly reproducible and safe to run from any number of workers.

use crate::rng::SeedStream;

/// Workspace box for the end-effector.
pub const WS_XY: (f64, f64) = (-0.5, 0.5);
pub const WS_Z: (f64, f64) = (0.02, 0.5);
/// Per-axis displacement limit in meters.
pub const MAX_DPOS: f64 = 0.05;
/// Cube half-side of the object; its resting height.
pub const OBJ_REST_Z: f64 = 0.025;
/// Radius within which an open->closed transition grasps the object.
pub const GRASP_RADIUS: f64 = 0.02;
/// Object-to-goal distance that counts as task success.
pub const SUCCESS_RADIUS: f64 = 0.04;
/// Hover height used by the expert while translating.
pub const HOVER_Z: f64 = 0.15;
/// Episode step cap.
pub const MAX_STEPS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldState {
    pub ee_pos: [f64; 3],
    pub gripper_closed: bool,
    pub grasped: bool,
    pub obj_pos: [f64; 3],
    pub goal_xy: [f64; 2],
    pub t: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub dpos: [f64; 3],
    pub grip: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectConfig {
    pub obj_xy: [f64; 2],
    pub goal_xy: [f64; 2],
    pub seed: u64,
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn clip(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

/// Rejection-sample an object/goal placement with separation >= 0.15 m.
/// Aborts after 1000 rejections (practically unreachable).
pub fn sample_object_config(rng: &mut SeedStream) -> ObjectConfig {
    let seed = rng.fork_seed();
    for _ in 0..1000 {
        let obj_xy = [rng.gen_range(-0.35..=0.35), rng.gen_range(-0.35..=0.35)];
        let goal_xy = [rng.gen_range(-0.35..=0.35), rng.gen_range(-0.35..=0.35)];
        if dist2(obj_xy, goal_xy) >= 0.15 {
            return ObjectConfig { obj_xy, goal_xy, seed };
        }
    }
    panic!("sample_object_config: 1000 rejections without a valid placement");
}

pub fn reset(cfg: &ObjectConfig) -> WorldState {
    WorldState {
        ee_pos: [0.0, 0.0, 0.3],
        gripper_closed: false,
        grasped: false,
        obj_pos: [cfg.obj_xy[0], cfg.obj_xy[1], OBJ_REST_Z],
        goal_xy: cfg.goal_xy,
        t: 0,
    }
}

pub fn step(s: &WorldState, a: &Action) -> WorldState {
    let d = [
        clip(a.dpos[0], -MAX_DPOS, MAX_DPOS),
        clip(a.dpos[1], -MAX_DPOS, MAX_DPOS),
        clip(a.dpos[2], -MAX_DPOS, MAX_DPOS),
    ];
    let ee = [
        clip(s.ee_pos[0] + d[0], WS_XY.0, WS_XY.1),
        clip(s.ee_pos[1] + d[1], WS_XY.0, WS_XY.1),
        clip(s.ee_pos[2] + d[2], WS_Z.0, WS_Z.1),
    ];
    let mut grasped = s.grasped;
    if a.grip && !s.gripper_closed && !s.grasped && dist3(ee, s.obj_pos) <= GRASP_RADIUS {
        grasped = true;
    }
    if !a.grip && s.grasped {
        grasped = false;
    }
    let obj_pos = if grasped {
        [ee[0], ee[1], ee[2] - 0.04]
    } else if s.grasped {
        // just released: drop to the table
        [s.obj_pos[0], s.obj_pos[1], OBJ_REST_Z]
    } else {
        s.obj_pos
    };
    WorldState {
        ee_pos: ee,
        gripper_closed: a.grip,
        grasped,
        obj_pos,
        goal_xy: s.goal_xy,
        t: s.t + 1,
    }
}

pub fn is_success(s: &WorldState) -> bool {
    !s.gripper_closed
        && !s.grasped
        && dist2([s.obj_pos[0], s.obj_pos[1]], s.goal_xy) <= SUCCESS_RADIUS
}

fn toward(ee: [f64; 3], target: [f64; 3]) -> [f64; 3] {
    [
        clip(target[0] - ee[0], -MAX_DPOS, MAX_DPOS),
        clip(target[1] - ee[1], -MAX_DPOS, MAX_DPOS),
        clip(target[2] - ee[2], -MAX_DPOS, MAX_DPOS),
    ]
}

/// Phase-based pick-and-place controller. Hover over the object, descend,
/// grasp, carry at hover height to the goal, descend, release.
pub fn expert_action(s: &WorldState) -> Action {
    let ee = s.ee_pos;
    let gp = s.obj_pos;
    let pp = [s.goal_xy[0], s.goal_xy[1], 0.05];
    if !s.grasped {
        let h = dist2([ee[0], ee[1]], [gp[0], gp[1]]);
        if h > 0.01 {
            // (A) move over the object at hover height
            Action { dpos: toward(ee, [gp[0], gp[1], HOVER_Z]), grip: false }
        } else if dist3(ee, gp) > 0.015 {
            // (B) descend to the grasp point
            Action { dpos: toward(ee, gp), grip: false }
        } else {
            // (C) close the gripper
            Action { dpos: [0.0; 3], grip: true }
        }
    } else {
        let h = dist2([ee[0], ee[1]], s.goal_xy);
        if h > 0.01 {
            // (D) carry toward the goal at hover height
            Action { dpos: toward(ee, [s.goal_xy[0], s.goal_xy[1], HOVER_Z]), grip: true }
        } else if dist3(ee, pp) > 0.015 {
            // (E) descend to the place point
            Action { dpos: toward(ee, pp), grip: true }
        } else {
            // (F) release
            Action { dpos: [0.0; 3], grip: false }
        }
    }
}

/// Roll out the expert from `reset(cfg)`; returns the visited states
/// (excluding the terminal one) and whether success was reached.
pub fn expert_rollout(cfg: &ObjectConfig) -> (Vec<WorldState>, bool) {
    let mut s = reset(cfg);
    let mut states = Vec::new();
    for _ in 0..MAX_STEPS {
        states.push(s);
        let a = expert_action(&s);
        s = step(&s, &a);
        if is_success(&s) {
            return (states, true);
        }
    }
    (states, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    #[test]
    fn sample_is_deterministic_and_separated() {
        let a = sample_object_config(&mut SeedStream::new(7, "cfg", 0));
        let b = sample_object_config(&mut SeedStream::new(7, "cfg", 0));
        assert_eq!(a, b);
        assert!(dist2(a.obj_xy, a.goal_xy) >= 0.15);
        for k in 0..200 {
            let c = sample_object_config(&mut SeedStream::new(3, "cfg", k));
            assert!(dist2(c.obj_xy, c.goal_xy) >= 0.15);
            assert!(c.obj_xy.iter().chain(c.goal_xy.iter()).all(|v| v.abs() <= 0.35));
        }
    }

    #[test]
    fn reset_matches_definition() {
        let cfg = ObjectConfig { obj_xy: [0.2, 0.1], goal_xy: [-0.2, -0.1], seed: 0 };
        let s = reset(&cfg);
        assert_eq!(s.ee_pos, [0.0, 0.0, 0.3]);
        assert_eq!(s.obj_pos, [0.2, 0.1, 0.025]);
        assert_eq!(s.goal_xy, [-0.2, -0.1]);
        assert_eq!(s.t, 0);
        assert!(!s.gripper_closed && !s.grasped);
        assert_eq!(reset(&cfg), reset(&cfg));
    }

    #[test]
    fn step_additive_and_clipped() {
        let cfg = ObjectConfig { obj_xy: [0.2, 0.1], goal_xy: [-0.2, -0.1], seed: 0 };
        let s = reset(&cfg);
        let s1 = step(&s, &Action { dpos: [0.05, 0.0, 0.0], grip: false });
        assert_eq!(s1.ee_pos, [0.05, 0.0, 0.3]);
        assert_eq!(s1.t, 1);
        let mut near_edge = s;
        near_edge.ee_pos = [0.48, 0.0, 0.3];
        let s2 = step(&near_edge, &Action { dpos: [0.05, 0.0, 0.0], grip: false });
        assert_eq!(s2.ee_pos, [0.5, 0.0, 0.3]);
    }

    #[test]
    fn grasp_and_release_rules() {
        let cfg = ObjectConfig { obj_xy: [0.1, 0.0], goal_xy: [-0.2, 0.0], seed: 0 };
        let mut s = reset(&cfg);
        s.ee_pos = [0.1, 0.0, 0.035];
        let g = step(&s, &Action { dpos: [0.0; 3], grip: true });
        assert!(g.grasped && g.gripper_closed);
        // object follows while grasped
        let g2 = step(&g, &Action { dpos: [0.02, 0.0, 0.05], grip: true });
        assert_eq!(g2.obj_pos, [g2.ee_pos[0], g2.ee_pos[1], g2.ee_pos[2] - 0.04]);
        // release drops it to the table
        let r = step(&g2, &Action { dpos: [0.0; 3], grip: false });
        assert!(!r.grasped);
        assert_eq!(r.obj_pos[2], OBJ_REST_Z);
        // no grasp when too far
        let mut far = reset(&cfg);
        far.ee_pos = [0.2, 0.0, 0.3];
        let f = step(&far, &Action { dpos: [0.0; 3], grip: true });
        assert!(!f.grasped);
    }

    #[test]
    fn success_definition() {
        let cfg = ObjectConfig { obj_xy: [0.1, 0.0], goal_xy: [0.1, 0.0], seed: 0 };
        let mut s = reset(&cfg);
        s.obj_pos = [0.1, 0.0, OBJ_REST_Z];
        assert!(is_success(&s));
        s.grasped = true;
        s.gripper_closed = true;
        assert!(!is_success(&s));
        s.grasped = false;
        s.gripper_closed = false;
        s.obj_pos = [0.15, 0.0, OBJ_REST_Z];
        assert!(!is_success(&s));
    }

    #[test]
    fn expert_phases() {
        let cfg = ObjectConfig { obj_xy: [0.2, 0.1], goal_xy: [-0.2, -0.1], seed: 0 };
        let s = reset(&cfg);
        let a = expert_action(&s);
        assert_eq!(a.dpos, [0.05, 0.05, -0.05]);
        assert!(!a.grip);
        let mut c = s;
        c.ee_pos = [0.2, 0.1, 0.03];
        let a = expert_action(&c);
        assert_eq!(a.dpos, [0.0; 3]);
        assert!(a.grip);
        let mut f = s;
        f.grasped = true;
        f.gripper_closed = true;
        f.ee_pos = [-0.2, -0.1, 0.055];
        f.obj_pos = [-0.2, -0.1, 0.015];
        let a = expert_action(&f);
        assert!(!a.grip);
    }

    #[test]
    fn expert_completes_sampled_tasks() {
        let mut ok = 0;
        for k in 0..100 {
            let cfg = sample_object_config(&mut SeedStream::new(11, "cfg", k));
            let (_, success) = expert_rollout(&cfg);
            if success {
                ok += 1;
            }
        }
        assert!(ok >= 99, "expert solved only {ok}/100");
    }

    #[test]
    fn workspace_containment_under_random_actions() {
        let cfg = ObjectConfig { obj_xy: [0.0, 0.0], goal_xy: [0.3, 0.0], seed: 0 };
        let mut rng = SeedStream::new(5, "act", 0);
        let mut s = reset(&cfg);
        for _ in 0..500 {
            let a = Action {
                dpos: [
                    rng.gen_range(-0.1..0.1),
                    rng.gen_range(-0.1..0.1),
                    rng.gen_range(-0.1..0.1),
                ],
                grip: rng.gen_range(0..2) == 1,
            };
            s = step(&s, &a);
            assert!(s.ee_pos[0] >= WS_XY.0 && s.ee_pos[0] <= WS_XY.1);
            assert!(s.ee_pos[1] >= WS_XY.0 && s.ee_pos[1] <= WS_XY.1);
            assert!(s.ee_pos[2] >= WS_Z.0 && s.ee_pos[2] <= WS_Z.1);
            if !s.grasped {
                assert_eq!(s.obj_pos[2], OBJ_REST_Z);
            }
            assert!(!s.grasped || s.gripper_closed);
        }
    }
}
