#![allow(dead_code)]

use std::f64::consts::PI;

use impasse_core::algebraic::{residuals, AlgebraicState, PowerSystem};
use impasse_core::devices::{Dispatch, GeneratorParams, GeneratorState, MotorParams, MotorState, StaticLoad};
use impasse_core::linalg::C64;
use impasse_core::{Bus, BusKind, Line, NetworkCase};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const OMEGA_B: f64 = 2.0 * PI * 60.0;

pub fn machine(bus: usize, x2: f64, dispatch: Dispatch) -> GeneratorParams {
    GeneratorParams {
        bus,
        r_a: 0.0,
        x_d: 0.9,
        x_d1: 0.2,
        x_d2: x2,
        x_q: 0.85,
        x_q1: 0.25,
        x_q2: x2,
        t_d01: 6.0,
        t_d02: 0.03,
        t_q01: 0.5,
        t_q02: 0.05,
        m: 12.0,
        d: 2.0,
        omega_b: OMEGA_B,
        dispatch,
    }
}

pub fn motor(bus: usize) -> MotorParams {
    MotorParams {
        bus,
        r_s: 0.01,
        x_s: 0.15,
        r_r: 0.05,
        x_r: 0.15,
        x_m: 3.0,
        h: 0.5,
        a: 0.3,
        b: 0.0,
        c: 0.0,
        omega_b: OMEGA_B,
        in_service: true,
    }
}

/// Random connected network: a random spanning tree plus a few extra
/// branches, all inductive so that every `B̃_ij` is positive. Generators sit
/// on the first `g` buses; every bus carries a static load and, when asked,
/// the last bus a motor.
pub fn random_case(rng: &mut impl Rng, n: usize, g: usize, with_motor: bool, lossless: bool) -> NetworkCase {
    let mut lines = Vec::new();
    let branch = |rng: &mut dyn rand::RngCore, a: usize, b: usize| {
        let x = rng.gen_range(0.05..0.4);
        let r = if lossless { 0.0 } else { rng.gen_range(0.0..0.3) * x };
        Line { from: a, to: b, y: C64::new(r, x).inv() }
    };
    for k in 2..=n {
        let parent = rng.gen_range(1..k);
        lines.push(branch(rng, parent, k));
    }
    for _ in 0..n / 2 {
        let a = rng.gen_range(1..=n);
        let b = rng.gen_range(1..=n);
        if a != b {
            lines.push(branch(rng, a, b));
        }
    }
    let buses = (1..=n)
        .map(|id| Bus {
            id,
            kind: if id <= g { BusKind::Terminal } else { BusKind::LoadOnly },
            shunt: if lossless {
                C64::new(0.0, 0.0)
            } else {
                C64::new(0.0, rng.gen_range(0.0..0.2))
            },
        })
        .collect();
    let generators = (1..=g)
        .map(|bus| {
            let mut m = machine(bus, rng.gen_range(0.08..0.18), Dispatch { p: 0.5, v: 1.02, slack: bus == 1 });
            if !lossless {
                m.r_a = rng.gen_range(0.0..0.01);
            }
            m
        })
        .collect();
    let static_loads = (1..=n)
        .map(|bus| StaticLoad {
            bus,
            p0: rng.gen_range(0.1..0.8),
            q0: rng.gen_range(0.0..0.3),
            alpha: rng.gen_range(0.0..2.0),
            beta: rng.gen_range(0.0..2.0),
        })
        .collect();
    let motors = if with_motor { vec![motor(n)] } else { vec![] };
    NetworkCase {
        buses,
        lines,
        generators,
        motors,
        static_loads,
        base_mva: 100.0,
        base_freq: 60.0,
    }
}

/// Random machine states and bus voltages (not necessarily consistent).
pub fn random_point(rng: &mut impl Rng, sys: &PowerSystem) -> (Vec<f64>, AlgebraicState) {
    let mut x = vec![0.0; sys.layout.len];
    for r in &sys.layout.generators {
        let s = GeneratorState {
            delta: rng.gen_range(-1.0..1.0),
            omega: 1.0 + rng.gen_range(-0.01..0.01),
            e_d1: rng.gen_range(-0.3..0.3),
            e_q1: rng.gen_range(0.7..1.2),
            e_d2: rng.gen_range(-0.4..0.4),
            e_q2: rng.gen_range(0.7..1.2),
        };
        x[r.clone()].copy_from_slice(&s.to_array());
    }
    for r in &sys.layout.motors {
        let s = MotorState {
            sigma: rng.gen_range(0.005..0.3),
            e_d: rng.gen_range(0.5..0.9),
            e_q: rng.gen_range(-0.3..0.3),
        };
        x[r.clone()].copy_from_slice(&s.to_array());
    }
    let n = sys.n();
    let y = AlgebraicState {
        theta: (0..n).map(|_| rng.gen_range(-0.6..0.6)).collect(),
        v: (0..n).map(|_| rng.gen_range(0.7..1.2)).collect(),
    };
    (x, y)
}

/// Random point made consistent by choosing each bus's static load so that
/// the power-flow residual vanishes. Needs a static load at every bus.
pub fn random_point_on_manifold(rng: &mut impl Rng, case: &NetworkCase) -> (PowerSystem, Vec<f64>, AlgebraicState) {
    let sys = PowerSystem::new(case.clone()).unwrap();
    let (x, y) = random_point(rng, &sys);
    (fit_loads(case, &x, &y), x, y)
}

/// The system obtained from `case` by refitting every static load's
/// `p0`/`q0` so that `(x, y)` lies on `g = 0`.
pub fn fit_loads(case: &NetworkCase, x: &[f64], y: &AlgebraicState) -> PowerSystem {
    let mut bare = case.clone();
    for l in &mut bare.static_loads {
        l.p0 = 0.0;
        l.q0 = 0.0;
    }
    let r = residuals(&PowerSystem::new(bare).unwrap(), x, y).unwrap();
    let n = case.n();
    let mut case = case.clone();
    for l in &mut case.static_loads {
        let i = l.bus - 1;
        l.p0 = -r[i] / y.v[i].powf(l.alpha);
        l.q0 = -r[n + i] / y.v[i].powf(l.beta);
    }
    PowerSystem::new(case).unwrap()
}

/// Three-machine nine-bus network (standard WSCC line data) with constant-
/// current-ish static loads and, optionally, a motor at bus 8.
pub fn nine_bus(with_motor: bool) -> NetworkCase {
    let raw = [
        (1, 4, 0.0, 0.0576, 0.0),
        (4, 5, 0.010, 0.085, 0.176),
        (5, 7, 0.032, 0.161, 0.306),
        (3, 6, 0.0, 0.0586, 0.0),
        (6, 9, 0.039, 0.170, 0.358),
        (8, 9, 0.0119, 0.1008, 0.209),
        (7, 8, 0.0085, 0.072, 0.149),
        (2, 7, 0.0, 0.0625, 0.0),
        (4, 6, 0.017, 0.092, 0.158),
    ];
    let mut buses: Vec<Bus> = (1..=9)
        .map(|id| Bus {
            id,
            kind: if id <= 3 { BusKind::Terminal } else { BusKind::LoadOnly },
            shunt: C64::new(0.0, 0.0),
        })
        .collect();
    let mut lines = Vec::new();
    for &(a, b, r, x, bc) in &raw {
        lines.push(Line { from: a, to: b, y: C64::new(r, x).inv() });
        buses[a - 1].shunt += C64::new(0.0, bc / 2.0);
        buses[b - 1].shunt += C64::new(0.0, bc / 2.0);
    }
    let generators = vec![
        machine(1, 0.04, Dispatch { p: 0.0, v: 1.04, slack: true }),
        machine(2, 0.09, Dispatch { p: 1.63, v: 1.025, slack: false }),
        machine(3, 0.1, Dispatch { p: 0.85, v: 1.025, slack: false }),
    ];
    let mut generators = generators;
    generators[0].x_d1 = 0.0608;
    generators[0].x_q1 = 0.0969;
    generators[0].x_d = 0.146;
    generators[0].x_q = 0.1069;
    generators[0].m = 47.28;
    let static_loads = vec![
        StaticLoad { bus: 5, p0: 1.25, q0: 0.5, alpha: 1.0, beta: 2.0 },
        StaticLoad { bus: 6, p0: 0.9, q0: 0.3, alpha: 1.0, beta: 2.0 },
        StaticLoad { bus: 8, p0: if with_motor { 0.7 } else { 1.0 }, q0: 0.35, alpha: 1.0, beta: 2.0 },
    ];
    let motors = if with_motor { vec![motor(8)] } else { vec![] };
    NetworkCase {
        buses,
        lines,
        generators,
        motors,
        static_loads,
        base_mva: 100.0,
        base_freq: 60.0,
    }
}

/// The nine-bus case used for the collapse scenarios: motors at buses 6 and 8
/// on top of the static components. Mirrors `cases/ieee9.json`.
pub fn ieee9() -> NetworkCase {
    let mut c = nine_bus(false);
    c.static_loads = vec![
        StaticLoad { bus: 5, p0: 1.25, q0: 0.5, alpha: 0.1, beta: 0.6 },
        StaticLoad { bus: 6, p0: 0.45, q0: 0.1, alpha: 1.0, beta: 1.0 },
        StaticLoad { bus: 8, p0: 0.25, q0: 0.1, alpha: 0.4, beta: 0.4 },
    ];
    let mut m6 = motor(6);
    m6.a = 0.45;
    m6.h = 0.3;
    let mut m8 = motor(8);
    m8.a = 0.75;
    m8.h = 0.3;
    c.motors = vec![m6, m8];
    c
}

/// Fault at bus 8 from 1.0 s to 1.1 s through 0.05 p.u., with an optional
/// shunt at bus 8 from the start.
pub fn bus8_fault(b0: f64) -> impasse_core::simulator::Scenario {
    use impasse_core::simulator::{Event, EventKind, Scenario};
    let mut ev = vec![
        Event::at(1.0, EventKind::ApplyFault { bus: 8, reactance: 0.05 }),
        Event::at(1.1, EventKind::ClearFault),
    ];
    if b0 != 0.0 {
        ev.push(Event::at(0.0, EventKind::InstallShunt { bus: 8, b0 }));
    }
    Scenario::new(format!("b0={b0}"), ev)
}
