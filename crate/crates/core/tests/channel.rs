use cwave::ansatz::build_ansatz;
use cwave::cell::{Mode, ZeroCell};
use cwave::channel::{ghost_rows, simulate, ChannelSolver, FieldSnapshot, SimulationSetup, SimulationTrace};
use cwave::flux::{DiffusionTensor, FluxLaw, FluxSpec, TransverseFluxSet};
use cwave::grid::ChannelGrid;
use cwave::kernel::Scheme;
use cwave::par::Exec;
use cwave::profiles::{ProfileSet, WaveEndpoints};
use cwave::Error;

fn tensor() -> DiffusionTensor {
    DiffusionTensor::new(&[vec![1.0, 0.1], vec![0.1, 1.0]]).unwrap()
}

fn profiles() -> ProfileSet {
    ProfileSet::new(WaveEndpoints::new(-1.0, 1.0).unwrap(), FluxSpec::convex(), 1.0).unwrap()
}

fn setup(n1: usize, m: usize, half_width: f64, t_end: f64) -> SimulationSetup {
    let n = (t_end / 0.5).round() as usize;
    SimulationSetup {
        profiles: profiles(),
        transverse: TransverseFluxSet::burgers(2),
        diffusion: tensor(),
        grid: ChannelGrid::new(half_width, n1, vec![m]).unwrap(),
        cell_n1: 1,
        modes: vec![Mode::cos(vec![0, 1], 1.0), Mode::sin(vec![0, 2], 0.5)],
        epsilon: Some(0.01),
        t_end,
        record_times: (0..=n).map(|k| k as f64 * t_end / n as f64).collect(),
        snapshot_times: vec![t_end],
        scheme: Scheme::Central,
        exec: Exec::Parallel,
        dt_scale: 1.0,
        collapse_tol: Some(1e-13),
    }
}

fn run(s: &SimulationSetup) -> cwave::Result<SimulationTrace> {
    simulate(s, &mut |_| Ok(()))
}

#[test]
fn heun_step_changes_mass_by_boundary_flux_only() {
    let ps = profiles();
    let grid = ChannelGrid::new(20.0, 81, vec![6]).unwrap();
    let mut solver =
        ChannelSolver::new(&grid, vec![FluxLaw::ConvexDegenerate, FluxLaw::Burgers], &tensor(), Scheme::Central, Exec::Sequential)
            .unwrap();
    let state = build_ansatz(0.0, &ps, &ZeroCell, &ZeroCell, &grid).unwrap();
    let m = grid.row_len();
    let mut u: Vec<f64> = state
        .ubar
        .iter()
        .enumerate()
        .map(|(k, v)| v + 0.05 * ((k % m) as f64).sin() * (-grid.x1(k / m).powi(2) / 20.0).exp())
        .collect();
    let (dt, t) = (0.5 * solver.stable_dt(&u), 0.0);
    let g0 = ghost_rows(&grid, &ps, &ZeroCell, &ZeroCell, t);
    let g1 = ghost_rows(&grid, &ps, &ZeroCell, &ZeroCell, t + dt);
    let (m0, f0) = solver.mass_and_boundary_flux(&u, (&g0.0, &g0.1));
    let mut k = vec![0.0; u.len()];
    solver.rhs(&u, (&g0.0, &g0.1), &mut k);
    let stage: Vec<f64> = u.iter().zip(&k).map(|(a, b)| a + dt * b).collect();
    let (_, f1) = solver.mass_and_boundary_flux(&stage, (&g1.0, &g1.1));
    solver.step(&mut u, t, dt, (&g0.0, &g0.1), (&g1.0, &g1.1), None);
    let (m1, _) = solver.mass_and_boundary_flux(&u, (&g1.0, &g1.1));
    let predicted = 0.5 * dt * (f0 + f1);
    assert!((m1 - m0 - predicted).abs() < 1e-12, "{} vs {predicted}", m1 - m0);
}

#[test]
fn oversized_step_is_reported_with_its_step_index() {
    let mut s = setup(128, 8, 40.0, 5.0);
    s.dt_scale = 6.0;
    match run(&s) {
        Err(Error::Instability { step, .. }) | Err(Error::MaximumPrinciple { step, .. }) => {
            assert!(step >= 1 && step < 10_000, "step {step}");
        }
        other => panic!("expected a blow-up, got {:?}", other.map(|t| t.steps)),
    }
}

#[test]
fn boundary_values_match_background() {
    let mut s = setup(256, 8, 90.0, 20.0);
    s.snapshot_times = vec![0.05, 1.0, 10.0, 20.0];
    let mut worst = 0.0f64;
    let mut seen = 0;
    let mut sink = |f: FieldSnapshot| {
        let m = f.grid.row_len();
        let n1 = f.grid.n1;
        for j in 0..m {
            worst = worst.max(f.phi[j].abs()).max(f.phi[(n1 - 1) * m + j].abs());
        }
        seen += 1;
        Ok(())
    };
    let trace = simulate(&s, &mut sink).unwrap();
    assert_eq!(seen, 4);
    assert!(worst < 1e-6, "boundary phi {worst:e}");
    let dx = trace.get("boundary_dx1").unwrap();
    assert!(dx.values.iter().all(|&v| v < 1e-6));
}

#[test]
fn sequential_and_parallel_runs_are_bit_identical() {
    let mut s = setup(128, 8, 40.0, 4.0);
    s.exec = Exec::Sequential;
    let a = run(&s).unwrap();
    s.exec = Exec::Parallel;
    let b = run(&s).unwrap();
    assert_eq!(a.steps, b.steps);
    for (x, y) in a.series.iter().zip(&b.series) {
        assert_eq!(x.values, y.values);
    }
}

#[test]
fn refinement_leaves_main_norm_stable() {
    let at_end = |n1: usize| {
        let trace = run(&setup(n1, 8, 130.0, 50.0)).unwrap();
        *trace.get("u_minus_uhat_inf").unwrap().values.last().unwrap()
    };
    let (coarse, fine) = (at_end(1024), at_end(2048));
    assert!((coarse - fine).abs() / fine < 0.03, "{coarse} vs {fine}");
}

#[test]
fn transverse_content_collapses_and_decays() {
    let trace = run(&setup(256, 8, 60.0, 20.0)).unwrap();
    let t = trace.collapsed_at.expect("transverse modes should die out");
    assert!(t < 5.0);
    let dn = trace.get("dnphi_l2").unwrap();
    assert!(dn.values[1] < dn.values[0].max(1e-3));
    assert!(dn.values.last().copied().unwrap() == 0.0);
    assert!(trace.q2.iter().all(|q| q.parts().iter().all(|&p| p >= 0.0)));
    assert!(trace.monitor_min >= trace.monitor_lower && trace.monitor_max <= trace.monitor_upper);
}
