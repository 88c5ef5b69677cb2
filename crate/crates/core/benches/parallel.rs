use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dualgrasp::antipodal::{generate_grasps, AntipodalParams, GripperModel};
use dualgrasp::geom::Vec3;
use dualgrasp::mesh::{primitives, rescale_to_target};
use dualgrasp::metrics::{gravity_wrench, LabelParams};
use dualgrasp::pairs::{enumerate_pairs, label_pairs};
use dualgrasp::par::Exec;
use dualgrasp::scene::{render_world, CameraModel, Intrinsics};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn bench(c: &mut Criterion) {
    let (mesh, _) = rescale_to_target(&primitives::square_stool(0.36, 0.04, 0.6, 0.02), 1.2).unwrap();
    let gripper = GripperModel::default();
    let params = AntipodalParams { seed: 3, ..AntipodalParams::default() };

    let mut g = c.benchmark_group("generate_grasps");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| generate_grasps(&mesh, 150, &params, &gripper, exec).unwrap())
        });
    }
    g.finish();

    let grasps = generate_grasps(&mesh, 150, &params, &gripper, Exec::Sequential).unwrap().grasps;
    let pairs = enumerate_pairs(&grasps, &gripper, Exec::Sequential);
    let label = LabelParams { rho: 1.0, mu: 0.4, gravity: gravity_wrench(), epsilon: 1e-3 };
    let mut g = c.benchmark_group("label_pairs");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| label_pairs(&grasps, &pairs, &label, exec).unwrap())
        });
    }
    g.finish();

    let k = Intrinsics { width: 320, height: 240, fx: 275.0, fy: 275.0, cx: 160.0, cy: 120.0 };
    let cam = CameraModel::look_at(k, Vec3::new(1.6, 0.4, 1.1), Vec3::new(0.0, 0.0, 0.3), Vec3::z()).unwrap();
    let mut g = c.benchmark_group("render_world");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| render_world(&mesh, &cam, exec)));
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
