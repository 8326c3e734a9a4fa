use flightcell::model::{simulate, Cell, MeshSpec, Region, SimOptions, SolverOptions, VoltageTrace};
use flightcell::profiles::{constant_current, CurrentProfile};
use flightcell::{DegradationToggles, Electrode, ParameterSet};

fn fresh_params() -> ParameterSet {
    let mut p = ParameterSet::default();
    p.degradation.toggles = DegradationToggles::all_off();
    p
}

fn cell(soc: f64) -> Cell {
    Cell::new(fresh_params(), MeshSpec::default(), SolverOptions::default(), soc).unwrap()
}

fn total_lithium(c: &Cell) -> f64 {
    let (s, e) = c.lithium_inventory();
    s + e
}

#[test]
fn rest_from_equilibrium_is_a_fixed_point() {
    let mut c = cell(0.6);
    let before = c.state.clone();
    let ocv = c.open_circuit_voltage().unwrap();
    for _ in 0..20 {
        c.step(0.0, 10.0).unwrap();
    }
    for (a, b) in before.c_s_neg.iter().zip(&c.state.c_s_neg) {
        assert!((a - b).abs() < 1e-6 * a.abs().max(1.0));
    }
    for (a, b) in before.c_e.iter().zip(&c.state.c_e) {
        assert!((a - b).abs() < 1e-6 * a);
    }
    assert!((c.state.v_cell - ocv).abs() < 1e-6, "{} vs {ocv}", c.state.v_cell);
}

#[test]
fn temperature_relaxes_monotonically_at_rest() {
    let mut c = cell(0.5);
    let t_amb = c.params.t_amb;
    c.state.temperature = t_amb + 10.0;
    let mut gap = 10.0;
    for _ in 0..50 {
        c.step(0.0, 20.0).unwrap();
        let g = (c.state.temperature - t_amb).abs();
        assert!(g < gap, "gap {g} did not shrink from {gap}");
        gap = g;
    }
    assert!(gap < 10.0);
}

#[test]
fn discharge_voltage_sits_below_open_circuit() {
    let mut c = cell(0.9);
    let i = c.params.q_rated;
    for _ in 0..30 {
        c.step(i, 10.0).unwrap();
        let ocv = c.open_circuit_voltage().unwrap();
        assert!(c.state.v_cell < ocv, "{} !< {ocv}", c.state.v_cell);
    }
}

#[test]
fn lithium_conserved_per_step() {
    let mut c = cell(1.0);
    let i = c.params.q_rated;
    let mut prev = total_lithium(&c);
    for _ in 0..40 {
        c.step(i, 5.0).unwrap();
        let now = total_lithium(&c);
        assert!(((now - prev) / prev).abs() < 1e-8);
        prev = now;
    }
}

#[test]
fn interfacial_current_balances_applied_current() {
    let mut c = cell(0.8);
    let i = 2.0 * c.params.q_rated;
    c.step(i, 2.0).unwrap();
    let target = i / c.params.a_cell;
    for (e, sign) in [(Electrode::Neg, 1.0), (Electrode::Pos, -1.0)] {
        let region = if e == Electrode::Neg { Region::Neg } else { Region::Pos };
        let a = c.params.surface_area(e);
        let total: f64 = (0..c.mesh.n_x())
            .filter(|&k| c.mesh.region[k] == region)
            .map(|k| a * c.mesh.dx[k] * c.state.i_loc[k])
            .sum();
        assert!((sign * total - target).abs() < 1e-6 * target, "{e:?}: {total} vs {target}");
    }
}

#[test]
fn state_stays_physical_through_high_rate_pulses() {
    let mut c = cell(1.0);
    let q = c.params.q_rated;
    let mut energy = 0.0;
    for k in 0..40 {
        let i = if k % 2 == 0 { 8.0 * q } else { -q };
        if !c.advance(i, 5.0, &mut energy).unwrap() {
            break;
        }
        for (e, v) in [(Electrode::Neg, &c.state.c_s_neg), (Electrode::Pos, &c.state.c_s_pos)] {
            let cmax = c.params.c_max(e);
            assert!(v.iter().all(|&x| (0.0..=cmax).contains(&x)));
        }
        assert!(c.state.c_e.iter().all(|&x| x > 0.0));
        assert!(c.state.temperature > 0.0);
    }
}

#[test]
fn zero_profile_keeps_voltage_flat() {
    let profile = CurrentProfile::new(1.0, vec![0.0; 100], None).unwrap();
    let mut opts = SimOptions::default();
    opts.initial_soc = 0.7;
    let trace = simulate(&fresh_params(), &profile, &opts).unwrap();
    assert_eq!(trace.len(), 100);
    let v0 = trace.cell_voltage[0];
    assert!(trace.cell_voltage.iter().all(|v| (v - v0).abs() < 1e-3));
}

#[test]
fn pack_voltage_is_exactly_series_multiple() {
    let p = fresh_params();
    assert_eq!(p.n_series, 4);
    let samples: Vec<f64> = (0..300).map(|k| 10.0 + 8.0 * ((k as f64) * 0.3).sin()).collect();
    let profile = CurrentProfile::new(2.0, samples, None).unwrap();
    let trace = simulate(&p, &profile, &SimOptions::default()).unwrap();
    for (pack, cellv) in trace.pack_voltage.iter().zip(&trace.cell_voltage) {
        assert_eq!(*pack, 4.0 * cellv);
    }
    assert!(trace.times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn long_discharge_truncates_at_cutoff() {
    let p = fresh_params();
    let profile = constant_current(2.0 * p.q_rated, 3600.0, 1.0).unwrap();
    let trace = simulate(&p, &profile, &SimOptions::default()).unwrap();
    assert!(trace.truncated);
    assert!(trace.len() < profile.len());
    let last = *trace.cell_voltage.last().unwrap();
    assert!(last < 2.55, "last voltage {last}");
    let delivered = trace.len() as f64 * 2.0 * p.q_rated / 3600.0;
    assert!(delivered > 0.8 * p.q_rated && delivered < 1.05 * p.q_rated, "{delivered} Ah");
}

fn max_gap(a: &VoltageTrace, b: &VoltageTrace) -> f64 {
    assert_eq!(a.len(), b.len());
    a.cell_voltage
        .iter()
        .zip(&b.cell_voltage)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn two_c_run(p: &ParameterSet, mesh: MeshSpec, dt_max: f64) -> VoltageTrace {
    let profile = constant_current(2.0 * p.q_rated, 1500.0, 0.1).unwrap();
    let mut o = SimOptions::default();
    o.mesh = mesh;
    o.solver.dt_max = dt_max;
    simulate(p, &profile, &o).unwrap()
}

#[test]
fn spatial_refinement_converges() {
    let p = fresh_params();
    let m0 = MeshSpec::default();
    let m1 = m0.clone().refined();
    let m2 = m1.clone().refined();
    let reference = two_c_run(&p, m2, 0.625);
    let e0 = max_gap(&two_c_run(&p, m0, 0.625), &reference);
    let e1 = max_gap(&two_c_run(&p, m1, 0.625), &reference);
    assert!(e1 < 0.5 * e0, "{e1} vs {e0}");
}

#[test]
fn temporal_refinement_converges() {
    let p = fresh_params();
    let reference = two_c_run(&p, MeshSpec::default(), 1.25);
    let e10 = max_gap(&two_c_run(&p, MeshSpec::default(), 10.0), &reference);
    let e5 = max_gap(&two_c_run(&p, MeshSpec::default(), 5.0), &reference);
    assert!(e5 < 0.75 * e10, "{e5} vs {e10}");
}

#[test]
fn trace_csv_round_trips() {
    let p = fresh_params();
    let profile = constant_current(5.0, 30.0, 1.0).unwrap();
    let trace = simulate(&p, &profile, &SimOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    trace.save_csv(&path).unwrap();
    let back = VoltageTrace::load_csv(&path).unwrap();
    assert_eq!(back.n_series, 4);
    assert_eq!(back.times, trace.times);
    assert_eq!(back.cell_voltage, trace.cell_voltage);
    assert_eq!(back.pack_voltage, trace.pack_voltage);
}
