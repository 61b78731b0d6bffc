use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use cwave::decay::lp_norm_with;
use cwave::flux::{DiffusionTensor, FluxLaw};
use cwave::grid::ChannelGrid;
use cwave::kernel::{Ghosts, Operator, Scheme, Stepper};
use cwave::par::Exec;
use cwave::profiles::PNorm;

fn setup(n1: usize, n2: usize, exec: Exec) -> (ChannelGrid, Stepper, Vec<f64>, Vec<f64>, Vec<f64>) {
    let grid = ChannelGrid::new(400.0, n1, vec![n2]).unwrap();
    let a = DiffusionTensor::new(&[vec![1.0, 0.1], vec![0.1, 1.0]]).unwrap();
    let op = Operator::new(
        grid.layout(),
        grid.spacings3(),
        vec![FluxLaw::ConvexDegenerate, FluxLaw::Burgers],
        0.0,
        &a,
        Scheme::Central,
        exec,
    )
    .unwrap();
    let m = grid.row_len();
    let u: Vec<f64> = (0..grid.len())
        .map(|k| (grid.x1(k / m) / 40.0).tanh() + 1e-3 * ((k % m) as f64).sin())
        .collect();
    let left = vec![-1.0; 2 * m];
    let right = vec![1.0; 2 * m];
    (grid, Stepper::new(op), u, left, right)
}

fn heun(c: &mut Criterion) {
    let mut g = c.benchmark_group("heun_step");
    for &(n1, n2) in &[(512, 16), (2048, 64)] {
        for exec in [Exec::Sequential, Exec::Parallel] {
            let (_, mut st, mut u, l, r) = setup(n1, n2, exec);
            let dt = st.op.stable_dt(&u);
            g.bench_with_input(BenchmarkId::new(format!("{exec:?}"), format!("{n1}x{n2}")), &(), |b, _| {
                b.iter(|| {
                    let gh = Ghosts::Dirichlet { left: &l, right: &r };
                    st.heun_step(black_box(&mut u), 0.0, dt, &gh, &gh, None);
                })
            });
        }
    }
    g.finish();
}

fn norms(c: &mut Criterion) {
    let mut g = c.benchmark_group("lp_norm");
    for exec in [Exec::Sequential, Exec::Parallel] {
        let (grid, _, u, _, _) = setup(2048, 64, exec);
        g.bench_function(format!("{exec:?}/L2"), |b| {
            b.iter(|| lp_norm_with(exec, black_box(&u), PNorm::Finite(2.0), &grid).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, heun, norms);
criterion_main!(benches);
