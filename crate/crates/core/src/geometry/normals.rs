use crate::error::Result;
use crate::geometry::{Camera, DepthMap, NormalMap, Vec3};

// neighbor offset pairs whose cross product matches dP/du x dP/dv
const QUADRANTS: [((i64, i64), (i64, i64)); 4] = [
    ((1, 0), (0, 1)),
    ((0, 1), (-1, 0)),
    ((-1, 0), (0, -1)),
    ((0, -1), (1, 0)),
];

/// Camera-frame normals from a z-depth map.
///
/// Each pixel back-projects itself and its four neighbors; every quadrant with two valid
/// neighbors gives a cross-product estimate. The component-wise median of the valid
/// estimates is renormalized and flipped to face the camera.
pub fn depth_to_normal(depth: &DepthMap, cam: &Camera) -> Result<NormalMap> {
    depth.same_size(cam.width, cam.height)?;
    let (w, h) = (depth.width as i64, depth.height as i64);
    let point = |u: i64, v: i64| -> Option<Vec3> {
        if u < 0 || v < 0 || u >= w || v >= h {
            return None;
        }
        depth
            .get(u as u32, v as u32)
            .map(|d| cam.unproject_camera(u as f64 + 0.5, v as f64 + 0.5, d))
    };
    let mut out = NormalMap::empty(depth.width, depth.height);
    let mut est: Vec<Vec3> = Vec::with_capacity(4);
    for v in 0..h {
        for u in 0..w {
            let Some(p) = point(u, v) else { continue };
            est.clear();
            for ((au, av), (bu, bv)) in QUADRANTS {
                if let (Some(a), Some(b)) = (point(u + au, v + av), point(u + bu, v + bv)) {
                    let n = (a - p).cross(&(b - p));
                    let len = n.norm();
                    if len > 1e-15 {
                        est.push(n / len);
                    }
                }
            }
            if est.is_empty() {
                continue;
            }
            let mut n = Vec3::new(
                median(est.iter().map(|e| e.x)),
                median(est.iter().map(|e| e.y)),
                median(est.iter().map(|e| e.z)),
            );
            if n.dot(&p) > 0.0 {
                n = -n;
            }
            out.set_index(depth.index(u as u32, v as u32), n);
        }
    }
    Ok(out)
}

fn median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> Camera {
        Camera::from_intrinsics(50.0, 50.0, 32.0, 24.0, 64, 48).unwrap()
    }

    #[test]
    fn fronto_parallel_plane_faces_camera() {
        let c = cam();
        let d = DepthMap::from_fn(64, 48, |_, _| Some(3.0));
        let n = depth_to_normal(&d, &c).unwrap();
        assert_eq!(n.valid_count(), 64 * 48);
        for v in &n.vectors {
            assert!((v - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn slanted_plane_matches_analytic_normal() {
        // plane z = 1 + 0.1 x; along a ray x = a z so z = 1 / (1 - 0.1 a)
        let c = cam();
        let d = DepthMap::from_fn(64, 48, |u, _| {
            let a = (u as f64 + 0.5 - c.cx) / c.fx;
            Some(1.0 / (1.0 - 0.1 * a))
        });
        let n = depth_to_normal(&d, &c).unwrap();
        let truth = Vec3::new(0.1, 0.0, -1.0).normalize();
        for v in 1..47 {
            for u in 1..63 {
                let e = n.get(u, v).unwrap();
                assert!(e.dot(&truth).clamp(-1.0, 1.0).acos().to_degrees() < 1.0);
            }
        }
    }

    #[test]
    fn isolated_pixel_is_invalid() {
        let c = cam();
        let d = DepthMap::from_fn(64, 48, |u, v| (u == 10 && v == 10).then_some(2.0));
        let n = depth_to_normal(&d, &c).unwrap();
        assert_eq!(n.valid_count(), 0);
    }

    #[test]
    fn size_mismatch_rejected() {
        let d = DepthMap::empty(3, 3);
        assert!(depth_to_normal(&d, &cam()).is_err());
    }
}
