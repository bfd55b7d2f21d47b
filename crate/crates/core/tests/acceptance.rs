//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use swe_barrier::barrier::{ghost_state, redistribute, redistribution_target, rotate, rotate_back, Frame};
use swe_barrier::driver::{run, Discretization, ScenarioConfig, Simulation};
use swe_barrier::geometry::{clip_cells, intersect_barrier, BarrierGeometry, Grid, Side};
use swe_barrier::riemann::{bathymetry_source, minmod, solve_edge, Axis};
use swe_barrier::solver::BoundaryConditions;
use swe_barrier::study::{compare_effectiveness, convergence_study};
use swe_barrier::{AverageKind, ConservedState, Order};

const G: f64 = 9.81;
const FUZZ_CASES: usize = 10_000;

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {criterion} [{verdict}] {name}: {detail}").unwrap();
}

fn wet(rng: &mut ChaCha8Rng) -> ConservedState {
    let h = rng.gen_range(0.05..4.0);
    ConservedState::new(h, h * rng.gen_range(-2.0..2.0), h * rng.gen_range(-2.0..2.0))
}

fn fuzz_fwave(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..FUZZ_CASES {
        let (ql, qr) = (wet(rng), wet(rng));
        let (bl, br) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let axis = if rng.gen_bool(0.5) { Axis::X } else { Axis::Y };
        let e = solve_edge(ql, qr, bl, br, axis, AverageKind::Roe, G).unwrap();
        let (fl, fr) = (axis.flux(ql, G), axis.flux(qr, G));
        let psi = bathymetry_source(ql, qr, bl, br, axis, G);
        for k in 0..3 {
            worst = worst.max((e.minus[k] + e.plus[k] - (fr[k] - fl[k] - psi[k])).abs());
        }
    }
    worst
}

fn fuzz_rotation(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..FUZZ_CASES {
        let q = ConservedState::new(rng.gen_range(0.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let frame = Frame::from_normal([angle.cos(), angle.sin()]);
        let back = rotate_back(rotate(q, &frame).to_array(), &frame);
        for (b, a) in back.iter().zip(q.to_array()) {
            worst = worst.max((b - a).abs());
        }
    }
    worst
}

fn fuzz_redistribution(rng: &mut ChaCha8Rng) -> (f64, usize) {
    let (mut worst, mut solved): (f64, usize) = (0.0, 0);
    for _ in 0..FUZZ_CASES {
        let (ql, qu) = (wet(rng), wet(rng));
        let beta = rng.gen_range(0.0..3.0);
        let ghost = ghost_state(ql, qu, beta, 0.0);
        if let Ok(r) = redistribute(ql, qu, &ghost, 0.0, 0.0, G) {
            solved += 1;
            let t = redistribution_target(ql, qu, &ghost, 0.0, 0.0, G);
            for k in 0..3 {
                worst = worst.max((r.plus[k] + r.minus[k] - t[k]).abs());
            }
        }
    }
    (worst, solved)
}

fn fuzz_limiter(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..FUZZ_CASES {
        let theta = 10f64.powf(rng.gen_range(-6.0..6.0));
        worst = worst.max((minmod(1.0 / theta) - minmod(theta) / theta).abs());
    }
    worst
}

fn fuzz_partition(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..FUZZ_CASES {
        let vertices = if rng.gen_bool(0.5) {
            vec![[0.0, rng.gen_range(0.05..0.95)], [1.0, rng.gen_range(0.05..0.95)]]
        } else {
            vec![
                [0.0, rng.gen_range(0.05..0.95)],
                [rng.gen_range(0.2..0.8), rng.gen_range(0.05..0.95)],
                [1.0, rng.gen_range(0.05..0.95)],
            ]
        };
        let n = rng.gen_range(4..40);
        let t = clip_cells(Grid::square(n), &BarrierGeometry { vertices, beta: 1.0 }).unwrap();
        let cell = t.grid.cell_area();
        for c in &t.cells {
            worst = worst.max((c.lower().area + c.upper().area - cell).abs() / cell);
        }
    }
    worst
}

#[test]
fn criterion_1_kernel_invariants() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let fwave = fuzz_fwave(&mut rng);
    let rotation = fuzz_rotation(&mut rng);
    let (redistribution, solved) = fuzz_redistribution(&mut rng);
    let limiter = fuzz_limiter(&mut rng);
    let partition = fuzz_partition(&mut rng);
    let elapsed = start.elapsed().as_secs_f64();
    let pass = fwave <= 1e-12
        && rotation <= 1e-15
        && redistribution <= 1e-11
        && solved >= FUZZ_CASES / 2
        && limiter <= 1e-15
        && partition <= 1e-12
        && elapsed < 60.0;
    report(
        1,
        "kernel invariants",
        pass,
        &format!(
            "{FUZZ_CASES} cases each; f-wave {fwave:.1e}, rotation {rotation:.1e}, redistribution {redistribution:.1e} \
             ({solved} solved), limiter {limiter:.1e}, partition {partition:.1e}; {elapsed:.1}s"
        ),
    );
    assert!(pass);
}

fn lake_at_rest_deviation(config: ScenarioConfig) -> f64 {
    let mut sim = Simulation::new(config).unwrap();
    let h0: Vec<f64> = sim.q.iter().map(|q| q.h).collect();
    for _ in 0..100 {
        sim.step().unwrap();
    }
    let n = sim.mesh().n_interior;
    (0..n).map(|v| (sim.q[v].h - h0[v]).abs()).fold(0.0, f64::max)
}

#[test]
fn criterion_2_lake_at_rest() {
    let mut flat = ScenarioConfig::linear_dam_break(50, 1.5);
    flat.barrier = None;
    flat.initial.dam = None;
    flat.boundary = BoundaryConditions::walls();
    let mut island = ScenarioConfig::island(50);
    island.barrier = None;
    island.initial.dam = None;
    island.boundary = BoundaryConditions::walls();
    let (a, b) = (lake_at_rest_deviation(flat), lake_at_rest_deviation(island));
    let pass = a <= 1e-12 && b <= 1e-12;
    report(2, "lake at rest", pass, &format!("100 steps; flat {a:.1e}, island {b:.1e}"));
    assert!(pass);
}

#[test]
fn criterion_3_mapped_identity() {
    let n = 50;
    let mut config = ScenarioConfig::linear_dam_break(n, 1.5);
    config.barrier = None;
    let mut cart = Simulation::new(config.clone()).unwrap();
    let mut mapped = Simulation::new(ScenarioConfig { discretization: Discretization::Mapped, ..config }).unwrap();
    for _ in 0..10 {
        let dt = cart.compute_dt().unwrap();
        cart.step_with(dt, dt).unwrap();
        mapped.step_with(dt, dt).unwrap();
    }
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let c = cart.q[cart.mesh().cell_volumes[j * n + i][Side::Lower.index()].unwrap()];
            let m = mapped.q[j * n + i];
            assert_eq!(mapped.mesh().volumes[j * n + i].cell, (i, j));
            for (a, b) in c.to_array().iter().zip(m.to_array()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    let pass = worst <= 1e-12;
    report(3, "mapped identity", pass, &format!("{n}x{n}, 10 steps, max difference {worst:.1e}"));
    assert!(pass);
}

#[test]
fn criterion_4_conservation() {
    let mut config = ScenarioConfig::linear_dam_break(100, 1.5);
    config.boundary = BoundaryConditions::walls();
    let mut sim = Simulation::new(config).unwrap();
    let m0 = sim.total_mass();
    let mut worst: f64 = 0.0;
    while sim.t < 1.0 {
        let dt = sim.compute_dt().unwrap();
        let step = dt.min(1.0 - sim.t);
        sim.step_with(step, dt).unwrap();
        if 1.0 - sim.t < 1e-12 {
            sim.t = 1.0;
        }
        worst = worst.max((sim.total_mass() - m0).abs() / m0);
    }
    let pass = worst <= 1e-10 && sim.drywet_mass == 0.0;
    report(4, "conservation", pass, &format!("{} steps to t = 1, max relative drift {worst:.1e}", sim.steps));
    assert!(pass);
}

#[test]
fn criterion_5_symmetry() {
    let mut config = ScenarioConfig::v_dam_break(200, 1.5);
    config.params.cfl_target = 0.3;
    let out = run(&config).unwrap();
    let mut worst: f64 = 0.0;
    for (a, b) in [(0, 1), (2, 3)] {
        let (ga, gb) = (&out.gauges[a], &out.gauges[b]);
        assert_eq!(ga.samples.len(), gb.samples.len());
        for (x, y) in ga.samples.iter().zip(&gb.samples) {
            assert_eq!(x.0, y.0);
            worst = worst.max((x.1.h - y.1.h).abs());
        }
    }
    let pass = worst <= 1e-10;
    report(
        5,
        "V symmetry",
        pass,
        &format!("200x200, cfl 0.3, {} samples per gauge, max pair difference {worst:.1e}", out.gauges[0].samples.len()),
    );
    assert!(pass);
}

#[test]
fn criterion_6_convergence() {
    let start = Instant::now();
    let times: Vec<f64> = (0..=14).map(|k| k as f64 / 10.0).collect();
    let grids = [25, 50, 100];
    let study = |order: Order| {
        let mut c = ScenarioConfig::linear_dam_break(25, 1.5);
        c.params.order = order;
        convergence_study(&c, &grids, 300, &times).unwrap()
    };
    let (second, first) = std::thread::scope(|s| {
        let a = s.spawn(|| study(Order::Second));
        let b = s.spawn(|| study(Order::First));
        (a.join().unwrap(), b.join().unwrap())
    });
    let mut pass = true;
    let mut detail = Vec::new();
    for gauge in 0..2 {
        let ratios2: Vec<f64> = second.gauge_rows(gauge).iter().filter_map(|r| r.ratio).collect();
        let ratios1: Vec<f64> = first.gauge_rows(gauge).iter().filter_map(|r| r.ratio).collect();
        let rate = second.sweep_order(gauge).unwrap();
        pass &= ratios2.iter().all(|&r| r >= 2.5) && ratios1.iter().all(|&r| r >= 1.8) && rate >= 1.5;
        let errors: Vec<String> = second.gauge_rows(gauge).iter().map(|r| format!("{:.2e}", r.l1_error)).collect();
        detail.push(format!(
            "gauge {} second-order errors [{}] ratios {:.2?} rate {rate:.2}, first-order ratios {:.2?}",
            gauge + 1,
            errors.join(", "),
            ratios2,
            ratios1
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    pass &= elapsed <= 900.0;
    report(6, "convergence", pass, &format!("{}; {elapsed:.0}s", detail.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_7_blocking() {
    let out = run(&ScenarioConfig::linear_dam_break(100, 5.0)).unwrap();
    let protected = &out.gauges[0];
    assert_eq!(protected.side, Some(Side::Upper));
    let worst = protected.samples.iter().map(|(_, q)| (q.h - 1.2).abs()).fold(0.0, f64::max);
    let pass = worst <= 1e-8;
    report(7, "blocking", pass, &format!("gauge (0.5, 0.8) max deviation from 1.2: {worst:.1e}"));
    assert!(pass);
}

#[test]
fn criterion_8_island_effectiveness() {
    let e = compare_effectiveness(&ScenarioConfig::island(100)).unwrap();
    let relative = (e.linear_peak - e.v_peak).abs() / e.linear_peak.max(e.v_peak);
    let pass = e.linear_peak <= 0.1 * e.no_barrier_peak && relative <= 0.2;
    report(
        8,
        "island effectiveness",
        pass,
        &format!(
            "peaks: none {:.4}, linear {:.4} ({:.1}% of none), V {:.4}; linear vs V {:.1}%",
            e.no_barrier_peak,
            e.linear_peak,
            100.0 * e.linear_peak / e.no_barrier_peak,
            e.v_peak,
            100.0 * relative
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_9_small_cell() {
    let n = 50;
    let dy = 1.0 / n as f64;
    let scenario = |y: f64| {
        let mut c = ScenarioConfig::linear_dam_break(n, 1.5);
        c.barrier = Some(BarrierGeometry { vertices: vec![[0.0, y], [1.0, y]], beta: 1.5 });
        c.end_time = 0.5;
        c.sample_times.clear();
        c
    };
    let (cut, plain) = (scenario(0.5 + 5e-4 * dy), scenario(0.5));
    let table = intersect_barrier(Grid::square(n), cut.barrier.as_ref().unwrap()).unwrap();
    let smallest = table
        .cells
        .iter()
        .flat_map(|c| [c.lower().area, c.upper().area])
        .fold(f64::INFINITY, f64::min)
        / table.grid.cell_area();
    let plain_cells = intersect_barrier(Grid::square(n), plain.barrier.as_ref().unwrap()).unwrap().cells.len();
    let (a, b) = (run(&cut).unwrap(), run(&plain).unwrap());
    let finite = a.gauges.iter().all(|g| g.samples.iter().all(|(_, q)| q.to_array().iter().all(|v| v.is_finite())));
    let ratio = a.stats.min_dt / b.stats.min_dt;
    let pass = smallest <= 1e-3 && plain_cells == 0 && finite && (ratio - 1.0).abs() <= 0.01;
    report(
        9,
        "small cell",
        pass,
        &format!(
            "smallest area fraction {smallest:.1e}, cfl 0.45; min dt {:.4e} vs {:.4e} without cut cells (ratio {ratio:.4})",
            a.stats.min_dt, b.stats.min_dt
        ),
    );
    assert!(pass);
}
