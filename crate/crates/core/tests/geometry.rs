use proptest::prelude::*;

use worldkit::geometry::erp::{direction_to_pixel, pixel_direction};
use worldkit::geometry::{
    box_mesh, intersect_triangle, raycast, voxel_downsample, yaw_pitch_rotation, Camera, MeshIndex, PointCloud, Vec3,
};

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

proptest! {
    #[test]
    fn project_inverts_unproject(yaw in -3.1f64..3.1, pitch in -1.4f64..1.4, t in vec3(5.0),
                                 u in 0.0f64..64.0, v in 0.0f64..48.0, z in 0.1f64..50.0) {
        let cam = Camera::with_fov(1.1, 64, 48, yaw_pitch_rotation(yaw, pitch), t).unwrap();
        let p = cam.unproject(u, v, z);
        let (pu, pv, pz) = cam.project(&p).unwrap();
        prop_assert!((pu - u).abs() < 1e-8 && (pv - v).abs() < 1e-8 && (pz - z).abs() < 1e-8);
        prop_assert!((cam.rotation.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn erp_pixel_round_trip(u in 0.0f64..256.0, v in 0.01f64..127.99) {
        let d = pixel_direction(u, v, 256, 128);
        prop_assert!((d.norm() - 1.0).abs() < 1e-12);
        let (pu, pv) = direction_to_pixel(&d, 256, 128);
        let du = (pu - u).abs();
        prop_assert!(du.min(256.0 - du) < 1e-7 && (pv - v).abs() < 1e-7);
    }

    #[test]
    fn voxel_downsample_keeps_one_point_per_voxel(pts in prop::collection::vec(vec3(2.0), 0..300), voxel in 0.05f64..1.0) {
        let pc = PointCloud::from_positions(pts.clone());
        let out = voxel_downsample(&pc, voxel).unwrap();
        prop_assert!(out.len() <= pts.len());
        let key = |p: &Vec3| [(p.x / voxel).floor() as i64, (p.y / voxel).floor() as i64, (p.z / voxel).floor() as i64];
        let mut occupied: Vec<[i64; 3]> = pts.iter().map(key).collect();
        occupied.sort();
        occupied.dedup();
        prop_assert_eq!(out.len(), occupied.len());
        // centroids stay inside the box of their members
        if let (Some(a), Some(b)) = (pc.bounds(), out.bounds()) {
            prop_assert!((0..3).all(|k| b.min[k] >= a.min[k] - 1e-12 && b.max[k] <= a.max[k] + 1e-12));
        }
    }

    #[test]
    fn indexed_raycast_matches_brute_force(o in vec3(0.9), d in vec3(1.0)) {
        prop_assume!(d.norm() > 1e-3);
        let d = d.normalize();
        let mut mesh = box_mesh(Vec3::repeat(-1.0), Vec3::repeat(1.0), true);
        mesh.append(&box_mesh(Vec3::new(0.2, 0.2, 0.2), Vec3::new(0.5, 0.6, 0.7), false));
        let index = MeshIndex::new(&mesh);
        let a = index.raycast(&o, &d).map(|h| h.t);
        let b = raycast(&mesh, &o, &d).map(|h| h.t);
        match (a, b) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9),
            (a, b) => prop_assert_eq!(a.is_some(), b.is_some()),
        }
    }
}

#[test]
fn triangle_hit_from_both_sides() {
    let tri = [
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(1.0, 0.0, 1.0),
        Vec3::new(0.0, 1.0, 1.0),
    ];
    let t = intersect_triangle(&Vec3::new(0.2, 0.2, 0.0), &Vec3::z(), &tri).unwrap();
    assert!((t - 1.0).abs() < 1e-12);
    let back = intersect_triangle(&Vec3::new(0.2, 0.2, 2.0), &-Vec3::z(), &tri).unwrap();
    assert!((back - 1.0).abs() < 1e-12);
    assert!(intersect_triangle(&Vec3::new(0.8, 0.8, 0.0), &Vec3::z(), &tri).is_none());
}

#[test]
fn mesh_distance_and_free_space() {
    let mesh = box_mesh(Vec3::repeat(-1.0), Vec3::repeat(1.0), true);
    let index = MeshIndex::new(&mesh);
    assert!((index.distance(&Vec3::new(0.5, 0.0, 0.0)) - 0.5).abs() < 1e-12);
    assert!(index.point_in_free_space(&Vec3::zeros()));
    assert!(index.segment_blocked(&Vec3::zeros(), &Vec3::new(3.0, 0.0, 0.0)));
    assert!(!index.segment_blocked(&Vec3::zeros(), &Vec3::new(0.5, 0.0, 0.0)));
}
