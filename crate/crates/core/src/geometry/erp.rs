//! Equirectangular (ERP) panorama mapping.
//!
//! Longitude `lon` in `[-pi, pi)` maps to `u = (lon / 2pi + 0.5) * W` and latitude `lat` in
//! `[-pi/2, pi/2]` maps to `v = (0.5 - lat / pi) * H`, so the top row looks up. Longitude 0 at
//! latitude 0 is the world `+z` axis, positive longitude turns toward `+x`.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::geometry::{yaw_pitch_rotation, Camera, DepthMap, PanoramaImage, RgbImage, Vec3};

/// Unit direction for a longitude/latitude pair.
#[inline]
pub fn direction(lon: f64, lat: f64) -> Vec3 {
    let (sl, cl) = lon.sin_cos();
    let (sp, cp) = lat.sin_cos();
    Vec3::new(cp * sl, -sp, cp * cl)
}

/// Longitude and latitude of a (not necessarily unit) direction.
#[inline]
pub fn lon_lat(d: &Vec3) -> (f64, f64) {
    let n = d.norm();
    let lon = d.x.atan2(d.z);
    let lat = (-d.y / n).clamp(-1.0, 1.0).asin();
    (lon, lat)
}

/// Continuous ERP coordinates of a direction.
#[inline]
pub fn direction_to_pixel(d: &Vec3, width: u32, height: u32) -> (f64, f64) {
    let (lon, lat) = lon_lat(d);
    let u = (lon / TAU + 0.5) * width as f64;
    let v = (0.5 - lat / PI) * height as f64;
    (u.rem_euclid(width as f64), v)
}

/// Direction through continuous ERP coordinates.
#[inline]
pub fn pixel_direction(u: f64, v: f64, width: u32, height: u32) -> Vec3 {
    let lon = (u / width as f64 - 0.5) * TAU;
    let lat = (0.5 - v / height as f64) * PI;
    direction(lon, lat)
}

/// Bilinear sample with horizontal wrap-around and vertical clamping; pixel centers at `+0.5`.
pub fn sample_bilinear(img: &RgbImage, u: f64, v: f64) -> [f64; 3] {
    let (w, h) = (img.width as i64, img.height as i64);
    let x = u - 0.5;
    let y = (v - 0.5).clamp(0.0, (h - 1) as f64);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let x0 = x0 as i64;
    let y0 = y0 as i64;
    let at = |xi: i64, yi: i64| {
        let xi = xi.rem_euclid(w) as u32;
        let yi = yi.clamp(0, h - 1) as u32;
        img.get(xi, yi)
    };
    let (a, b, c, d) = (at(x0, y0), at(x0 + 1, y0), at(x0, y0 + 1), at(x0 + 1, y0 + 1));
    let mut out = [0.0; 3];
    for k in 0..3 {
        let top = a[k] * (1.0 - fx) + b[k] * fx;
        let bot = c[k] * (1.0 - fx) + d[k] * fx;
        out[k] = top * (1.0 - fy) + bot * fy;
    }
    out
}

/// Nearest-pixel lookup into an ERP depth map.
pub fn sample_depth_nearest(depth: &DepthMap, dir: &Vec3) -> Option<f64> {
    let (u, v) = direction_to_pixel(dir, depth.width, depth.height);
    let pu = (u.floor() as u32).min(depth.width - 1);
    let pv = (v.floor().max(0.0) as u32).min(depth.height - 1);
    depth.get(pu, pv)
}

/// Square-pixel perspective camera centered at `center` with the given view angles.
pub fn perspective_camera(yaw: f64, pitch: f64, fov_x: f64, out_size: (u32, u32), center: Vec3) -> Result<Camera> {
    if !(fov_x > 0.0 && fov_x < PI) {
        return Err(Error::invalid(format!("fov_x must lie in (0, pi), got {fov_x}")));
    }
    let yaw = wrap_angle(yaw);
    Camera::with_fov(fov_x, out_size.0, out_size.1, yaw_pitch_rotation(yaw, pitch), center)
}

/// Resamples a pinhole view from the panorama by spherical lookup with bilinear interpolation.
pub fn erp_to_perspective(
    pano: &PanoramaImage,
    yaw: f64,
    pitch: f64,
    fov_x: f64,
    out_size: (u32, u32),
) -> Result<(RgbImage, Camera)> {
    let cam = perspective_camera(yaw, pitch, fov_x, out_size, Vec3::zeros())?;
    let src = pano.image();
    let img = RgbImage::from_fn(out_size.0, out_size.1, |x, y| {
        let d = cam.ray_direction(x as f64 + 0.5, y as f64 + 0.5);
        let (u, v) = direction_to_pixel(&d, src.width, src.height);
        sample_bilinear(src, u, v)
    });
    Ok((img, cam))
}

/// Samples ERP depth (nearest pixel) into a perspective view; values stay radial distances.
pub fn erp_depth_view(depth: &DepthMap, cam: &Camera) -> DepthMap {
    DepthMap::from_fn(cam.width, cam.height, |x, y| {
        let d = cam.ray_direction(x as f64 + 0.5, y as f64 + 0.5);
        sample_depth_nearest(depth, &d)
    })
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Linear cross-fade of the left and right borders so the panorama wraps seamlessly.
///
/// Column `k` and its mirror `W - 1 - k` (for `k < band`) are mixed with weight
/// `0.5 * (1 - k / band)`: the outermost columns become their mean and the mixing fades out
/// linearly over `band` columns on each side of the seam.
pub fn erp_seam_blend(pano: &PanoramaImage, band: u32) -> Result<PanoramaImage> {
    let src = pano.image();
    let w = src.width;
    if band == 0 || band >= w / 4 {
        return Err(Error::invalid(format!(
            "seam band must lie in [1, {}), got {band}",
            w / 4
        )));
    }
    let mut out = src.clone();
    for v in 0..src.height {
        for k in 0..band {
            let wgt = 0.5 * (1.0 - k as f64 / band as f64);
            let l = src.get(k, v);
            let r = src.get(w - 1 - k, v);
            let li = out.index(k, v);
            let ri = out.index(w - 1 - k, v);
            for c in 0..3 {
                out.pixels[li][c] = (1.0 - wgt) * l[c] + wgt * r[c];
                out.pixels[ri][c] = (1.0 - wgt) * r[c] + wgt * l[c];
            }
        }
        // the outermost pair must be bit-identical, not merely close
        let li = out.index(0, v);
        let ri = out.index(w - 1, v);
        out.pixels[ri] = out.pixels[li];
    }
    PanoramaImage::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx_eq::*;

    mod approx_eq {
        pub fn close(a: f64, b: f64, tol: f64) -> bool {
            (a - b).abs() <= tol
        }
    }

    fn gradient_pano(w: u32, h: u32) -> PanoramaImage {
        PanoramaImage::new(RgbImage::from_fn(w, h, |u, v| {
            [u as f64 / w as f64, v as f64 / h as f64, 0.5]
        }))
        .unwrap()
    }

    #[test]
    fn pixel_direction_round_trip() {
        for &(u, v) in &[(0.5, 0.5), (100.25, 40.0), (255.5, 127.5), (17.0, 64.0)] {
            let d = pixel_direction(u, v, 256, 128);
            let (pu, pv) = direction_to_pixel(&d, 256, 128);
            assert!(close(pu, u, 1e-9) && close(pv, v, 1e-9));
        }
        let fwd = pixel_direction(128.0, 64.0, 256, 128);
        assert!((fwd - Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn forward_view_center_hits_pano_center() {
        let cam = perspective_camera(0.0, 0.0, PI / 2.0, (65, 65), Vec3::zeros()).unwrap();
        let d = cam.ray_direction(32.5, 32.5);
        let (u, v) = direction_to_pixel(&d, 512, 256);
        assert!(close(u, 256.0, 1e-9) && close(v, 128.0, 1e-9));
        let pano = gradient_pano(512, 256);
        let (img, _) = erp_to_perspective(&pano, 0.0, 0.0, PI / 2.0, (65, 65)).unwrap();
        let expect = sample_bilinear(pano.image(), 256.0, 128.0);
        assert_eq!(img.get(32, 32), expect);
    }

    #[test]
    fn corner_direction_matches_closed_form() {
        // 90 degree view: the image corner ray is (1, 1, 1) in the camera frame
        let cam = perspective_camera(0.0, 0.0, PI / 2.0, (64, 64), Vec3::zeros()).unwrap();
        let d = cam.ray_direction(64.0, 64.0);
        let (lon, lat) = lon_lat(&d);
        assert!(close(lon, 1f64.atan2(1.0), 1e-6));
        assert!(close(lat, -(1.0 / 3f64.sqrt()).asin(), 1e-6));
    }

    #[test]
    fn three_views_tile_the_circle() {
        let fov = TAU / 3.0;
        let mut covered = [false; 360];
        for k in 0..3 {
            let yaw = k as f64 * TAU / 3.0;
            let cam = perspective_camera(yaw, 0.0, fov, (240, 120), Vec3::zeros()).unwrap();
            for x in 0..=960 {
                let d = cam.ray_direction(x as f64 / 4.0, 60.0);
                let (lon, _) = lon_lat(&d);
                let deg = (lon.to_degrees().rem_euclid(360.0)).floor() as usize % 360;
                covered[deg] = true;
            }
        }
        assert!(covered.iter().all(|c| *c));
    }

    #[test]
    fn yaw_is_periodic() {
        let pano = gradient_pano(128, 64);
        let (a, _) = erp_to_perspective(&pano, 0.4, 0.1, 1.2, (32, 24)).unwrap();
        let (b, _) = erp_to_perspective(&pano, 0.4 + TAU, 0.1, 1.2, (32, 24)).unwrap();
        for (p, q) in a.pixels.iter().zip(&b.pixels) {
            for c in 0..3 {
                assert!(close(p[c], q[c], 1e-9));
            }
        }
        assert!(erp_to_perspective(&pano, 0.0, 0.0, 0.0, (8, 8)).is_err());
        assert!(erp_to_perspective(&pano, 0.0, 0.0, PI, (8, 8)).is_err());
    }

    #[test]
    fn seam_blend_contracts() {
        // mirror-symmetric about the seam: a function of cos(lon)
        let sym = PanoramaImage::new(RgbImage::from_fn(64, 32, |u, v| {
            let lon = ((u as f64 + 0.5) / 64.0 - 0.5) * TAU;
            [0.5 + 0.4 * lon.cos(), v as f64 / 32.0, 0.2]
        }))
        .unwrap();
        let out = erp_seam_blend(&sym, 8).unwrap();
        for (p, q) in out.image().pixels.iter().zip(&sym.image().pixels) {
            for c in 0..3 {
                assert!(close(p[c], q[c], 1e-6));
            }
        }

        let halves = PanoramaImage::new(RgbImage::from_fn(
            64,
            32,
            |u, _| if u < 32 { [0.2; 3] } else { [0.8; 3] },
        ))
        .unwrap();
        let out = erp_seam_blend(&halves, 8).unwrap();
        let img = out.image();
        for v in 0..32 {
            assert_eq!(img.get(0, v), img.get(63, v));
            assert!(close(img.get(0, v)[0], 0.5, 1e-12));
            // the ramp is linear and reaches the untouched value past the band
            assert!(close(img.get(4, v)[0], 0.2 + 0.6 * 0.25, 1e-12));
            assert_eq!(img.get(8, v), [0.2; 3]);
        }
        assert!(erp_seam_blend(&halves, 16).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        assert!(close(wrap_angle(3.0 * PI), -PI, 1e-12));
        assert!(close(wrap_angle(0.5 + TAU), 0.5, 1e-12));
        assert!(wrap_angle(PI) < PI);
    }
}
