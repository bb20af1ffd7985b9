use crate::geometry::{Vec3, UP};
use crate::planner::{pitch_of, Mode, PlanContext, Trajectory};

fn with_pitch(d: &Vec3, pitch: f64) -> Vec3 {
    let h = Vec3::new(d.x, 0.0, d.z);
    let h = if h.norm() > 1e-9 { h.normalize() } else { Vec3::z() };
    h * pitch.cos() + UP * pitch.sin()
}

/// Copies of `base` with every view pitched up, keeping camera centers.
///
/// The extra pitch is reduced in fixed steps while the new view ray hits the mesh closer
/// than the near limit.
pub fn plan_aerial(ctx: &PlanContext, base: &[Trajectory]) -> Vec<Trajectory> {
    let cfg = ctx.config;
    let add = cfg.aerial_pitch_deg.to_radians();
    let step = cfg.aerial_step_deg.to_radians().max(1e-6);
    let max_pitch = 89f64.to_radians();
    let mut out = Vec::new();
    for t in base {
        let mut centers = Vec::with_capacity(t.frames.len());
        let mut lookats = Vec::with_capacity(t.frames.len());
        for f in &t.frames {
            let c = f.center();
            let v = f.lookat - c;
            let dist = v.norm().max(1e-6);
            let d = if v.norm() > 1e-9 {
                v / v.norm()
            } else {
                f.camera.forward()
            };
            let p0 = pitch_of(&d);
            let mut extra = add;
            let dir = loop {
                let dir = with_pitch(&d, (p0 + extra).min(max_pitch));
                if extra <= 0.0 || ctx.index.raycast_within(&c, &dir, cfg.aerial_near_limit).is_none() {
                    break dir;
                }
                extra = (extra - step).max(0.0);
            };
            centers.push(c);
            lookats.push(c + dir * dist);
        }
        let t = Trajectory {
            mode: Mode::Aerial,
            frames: ctx.frames(&centers, &lookats),
            landmark_id: None,
            iterative: false,
        };
        if let Some(t) = ctx.finish(t) {
            out.push(t);
        }
    }
    out
}
