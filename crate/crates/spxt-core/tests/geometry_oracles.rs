//! Geometric oracles: lattice spacing, ray/detector incidence, fill distance,
//! and a Monte-Carlo check of the solid-angle formula.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spxt_core::geometry::{
    generate_rays, generate_sources, solid_angle_fraction, DetectorSpec,
};
use spxt_core::vec3::{add, cross, dot, norm, normalize, scale, sub, Vec3};

#[test]
fn fibonacci_lattice_spacing() {
    let count = 100;
    let set = generate_sources(count, 3.0).unwrap();
    let mut min_angle = f64::INFINITY;
    for i in 0..count {
        for j in (i + 1)..count {
            let a = normalize(set.positions()[i]);
            let b = normalize(set.positions()[j]);
            let angle = dot(a, b).clamp(-1.0, 1.0).acos();
            min_angle = min_angle.min(angle);
        }
    }
    let expected_spacing = (4.0 * PI / count as f64).sqrt();
    assert!(
        min_angle > 0.5 * expected_spacing,
        "min angle {min_angle} vs half uniform spacing {}",
        0.5 * expected_spacing
    );
}

/// The documented detector frame: reference axis least aligned with the
/// viewing direction, first on ties.
fn detector_frame(axis: Vec3) -> (Vec3, Vec3) {
    let abs = [axis[0].abs(), axis[1].abs(), axis[2].abs()];
    let mut least = 0;
    if abs[1] < abs[least] {
        least = 1;
    }
    if abs[2] < abs[least] {
        least = 2;
    }
    let mut e = [0.0; 3];
    e[least] = 1.0;
    let u = normalize(cross(e, axis));
    (u, cross(axis, u))
}

/// Every ray, extended as a line, must hit the detector square.
#[test]
fn rays_intersect_detector_square() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let dir: Vec3 = normalize([
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
        ]);
        let radius = 2.5 + 2.0 * rng.random::<f64>();
        let source = scale(dir, radius);
        let side = 4.0 + 2.0 * rng.random::<f64>();
        let distance = 4.0 + 2.0 * rng.random::<f64>();
        let m = 1 + rng.random_range(0..6usize);
        let det = DetectorSpec::new(distance, side, m).unwrap();
        if det.check_cone_containment(radius).is_err() {
            continue;
        }
        let bundle = generate_rays(source, &det).unwrap();
        assert_eq!(bundle.ray_count(), m * m);

        let axis = normalize(scale(source, -1.0));
        let plane_point = add(source, scale(axis, distance));
        let (u, v) = detector_frame(axis);
        for d in &bundle.directions {
            // intersect the ray with the detector plane
            let denom = dot(*d, axis);
            assert!(denom > 0.0, "ray parallel to or facing away from the detector");
            let t = dot(sub(plane_point, source), axis) / denom;
            let hit = add(source, scale(*d, t));
            let offset = sub(hit, plane_point);
            assert!(dot(offset, axis).abs() < 1e-9);
            let cu = dot(offset, u).abs();
            let cv = dot(offset, v).abs();
            assert!(cu <= side / 2.0 + 1e-9 && cv <= side / 2.0 + 1e-9, "({cu}, {cv})");
        }
    }
}

/// Cell-centered m×m sampling: the farthest point of the square from the
/// sample set is a cell corner, so doubling m halves the fill distance.
#[test]
fn fill_distance_halves_when_m_doubles() {
    let side = 4.0f64;
    let fill = |m: usize| {
        let cell = side / m as f64;
        let sample = |p: usize| (p as f64 + 0.5) * cell - side / 2.0;
        let corner = |p: usize| p as f64 * cell - side / 2.0;
        let mut worst: f64 = 0.0;
        for cx in 0..=m {
            for cy in 0..=m {
                let mut best = f64::INFINITY;
                for sx in 0..m {
                    for sy in 0..m {
                        let dx = corner(cx) - sample(sx);
                        let dy = corner(cy) - sample(sy);
                        best = best.min((dx * dx + dy * dy).sqrt());
                    }
                }
                worst = worst.max(best);
            }
        }
        worst
    };
    for m in [2usize, 3, 5, 8] {
        let f1 = fill(m);
        let f2 = fill(2 * m);
        assert!((f1 / f2 - 2.0).abs() < 1e-12, "m = {m}: {f1} vs {f2}");
        // and the closed form: half the cell diagonal
        let expected = side / m as f64 * (0.5f64).sqrt();
        assert!((f1 - expected).abs() < 1e-12);
    }
}

/// Monte-Carlo oracle for the rectangular-pyramid solid angle: fraction of
/// uniformly random directions whose ray from the source hits the square.
#[test]
fn solid_angle_matches_monte_carlo() {
    let det = DetectorSpec::new(6.0, 4.0, 1).unwrap();
    let exact = solid_angle_fraction(&det);

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let samples = 10_000_000usize;
    let mut hits = 0usize;
    // source on the x-axis: detector plane x = source_x - distance
    for _ in 0..samples {
        let d = loop {
            let v: Vec3 = [
                rng.sample(rand_distr::StandardNormal),
                rng.sample(rand_distr::StandardNormal),
                rng.sample(rand_distr::StandardNormal),
            ];
            if norm(v) > 1e-9 {
                break normalize(v);
            }
        };
        if d[0] >= 0.0 {
            continue;
        }
        let t = -det.distance / d[0];
        let y = t * d[1];
        let z = t * d[2];
        if y.abs() <= det.side / 2.0 && z.abs() <= det.side / 2.0 {
            hits += 1;
        }
    }
    let mc = hits as f64 / samples as f64;
    assert!(
        (mc - exact).abs() < 5e-4,
        "monte carlo {mc} vs exact {exact} (3 significant digits)"
    );
    // the formula itself, written out
    let alpha = (2.0f64 / 6.0).atan();
    let omega = 4.0 * (alpha.sin() * alpha.sin()).asin();
    assert!((exact - omega / (4.0 * PI)).abs() < 1e-15);
}
