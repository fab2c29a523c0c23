use super::*;
use crate::geometry::HeightField;
use std::f64::consts::PI;

fn geom(w: f64, dp: f64, dm: f64) -> ContainerGeometry {
    ContainerGeometry::new(w, dp, dm).unwrap()
}

fn max_err(a: impl IntoIterator<Item = f64>) -> f64 {
    a.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Largest deviation of the flat-interface solution from the cosh profile
/// `cos(kx) cosh(κ(d - s)) / cosh(κ d)` with `κ² = η + k²`.
fn flat_profile_error(n: usize, shift: f64) -> f64 {
    let g = geom(1.0, 1.0, 0.8);
    let grid = EllipticGrid::square(n).unwrap();
    let k = g.wavenumber(1);
    let kappa = (shift + k * k).sqrt();
    let data: Vec<f64> = g.nodes(n).iter().map(|x| (k * x).cos()).collect();
    let spec = EllipticProblemSpec::new(g, grid, data).with_shift(shift);
    let mu = solve_two_phase(&spec).unwrap();
    let mut err: f64 = 0.0;
    for phase in [Phase::Upper, Phase::Lower] {
        let d = match phase {
            Phase::Upper => g.depth_plus(),
            Phase::Lower => g.depth_minus(),
        };
        let ds = grid.spacing(&g, phase);
        let field = mu.phase(phase);
        for ((i, j), v) in field.indexed_iter() {
            let x = (j as f64 + 0.5) * g.node_spacing(n);
            let s = i as f64 * ds;
            let exact = (k * x).cos() * (kappa * (d - s)).cosh() / (kappa * d).cosh();
            err = err.max((v - exact).abs());
        }
    }
    err
}

#[test]
fn flat_cosine_data_gives_cosh_profile_at_second_order() {
    let coarse = flat_profile_error(32, 0.0);
    let fine = flat_profile_error(64, 0.0);
    assert!(fine < 5e-4, "fine error {fine:e}");
    let order = (coarse / fine).log2();
    assert!((order - 2.0).abs() < 0.2, "order {order}");
}

#[test]
fn shifted_problem_uses_shifted_decay_rate() {
    let coarse = flat_profile_error(32, 4.0);
    let fine = flat_profile_error(64, 4.0);
    assert!(fine < 1e-3, "fine error {fine:e}");
    let order = (coarse / fine).log2();
    assert!((order - 2.0).abs() < 0.2, "order {order}");
}

#[test]
fn constant_data_gives_constant_potential_and_zero_jump() {
    let g = geom(1.5, 1.0, 0.7);
    let grid = EllipticGrid::new(24, 16, 12).unwrap();
    let spec = EllipticProblemSpec::new(g, grid, vec![2.5; 24]);
    let mu = solve_two_phase(&spec).unwrap();
    assert!(mu.upper.iter().chain(mu.lower.iter()).all(|v| (v - 2.5).abs() < 1e-12));
    let map = HanzawaMap::identity(g, grid);
    let jump = jump_conormal(&mu, &map).unwrap();
    assert!(max_err(jump) < 1e-10);
}

#[test]
fn flat_jump_matches_tanh_formula() {
    let g = geom(1.0, 1.0, 0.6);
    let n = 128;
    let grid = EllipticGrid::square(n).unwrap();
    let k = g.wavenumber(1);
    let data: Vec<f64> = g.nodes(n).iter().map(|x| (k * x).cos()).collect();
    let mu = solve_two_phase(&EllipticProblemSpec::new(g, grid, data.clone())).unwrap();
    let jump = jump_conormal(&mu, &HanzawaMap::identity(g, grid)).unwrap();
    let factor = -k * ((k * g.depth_plus()).tanh() + (k * g.depth_minus()).tanh());
    for (j, v) in jump.iter().enumerate() {
        let exact = factor * data[j];
        assert!((v - exact).abs() <= 0.01 * factor.abs(), "column {j}: {v} vs {exact}");
    }
}

#[test]
fn deep_container_approaches_half_space_jump() {
    let w = 1.0;
    let k = PI / w;
    let depth = 10.0 / k;
    let g = geom(w, depth, depth);
    let grid = EllipticGrid::new(128, 1024, 1024).unwrap();
    let data: Vec<f64> = g.nodes(128).iter().map(|x| (k * x).cos()).collect();
    let mu = solve_two_phase(&EllipticProblemSpec::new(g, grid, data.clone())).unwrap();
    let jump = jump_conormal(&mu, &HanzawaMap::identity(g, grid)).unwrap();
    for (v, d) in jump.iter().zip(&data) {
        assert!((v + 2.0 * k * d).abs() < 1e-4 * 2.0 * k, "{v} vs {}", -2.0 * k * d);
    }
}

#[test]
fn solvers_agree_on_flat_and_curved_interfaces() {
    let g = geom(1.0, 1.0, 0.8);
    let grid = EllipticGrid::new(16, 12, 10).unwrap();
    let data: Vec<f64> = g.nodes(16).iter().map(|x| (3.0 * x).sin() + 0.3).collect();
    let bound = g.admissibility_bound();
    let h = HeightField::from_fn(g, 16, |x| 0.6 * bound * (PI * x).cos()).unwrap();
    let curved = HanzawaMap::new(&h, &grid).unwrap();
    let flat = HanzawaMap::identity(g, grid);
    for map in [&flat, &curved] {
        let base = EllipticProblemSpec::new(g, grid, data.clone())
            .with_hanzawa(map)
            .with_shift(0.5);
        let direct = solve_two_phase(&base.clone().with_solver(SolverKind::Direct)).unwrap();
        let iterative =
            solve_two_phase(&base.clone().with_solver(SolverKind::Iterative { tolerance: 1e-12 })).unwrap();
        let auto = solve_two_phase(&base).unwrap();
        assert!(direct.residual < 1e-12, "direct residual {}", direct.residual);
        for other in [&iterative, &auto] {
            let diff = max_err(
                direct.upper.iter().zip(other.upper.iter()).chain(direct.lower.iter().zip(other.lower.iter())).map(|(a, b)| a - b),
            );
            assert!(diff < 1e-9, "solutions differ by {diff:e}");
        }
    }
}

/// Harmonic functions with zero flux through the top and side walls, one per
/// phase, and their gradients.
fn upper_harmonic(g: &ContainerGeometry, x: f64, y: f64) -> (f64, [f64; 2]) {
    let k = g.wavenumber(1);
    let d = g.depth_plus();
    let u = (k * x).cos() * (k * (d - y)).cosh();
    let grad = [-k * (k * x).sin() * (k * (d - y)).cosh(), -k * (k * x).cos() * (k * (d - y)).sinh()];
    (u, grad)
}

fn lower_harmonic(g: &ContainerGeometry, x: f64, y: f64) -> (f64, [f64; 2]) {
    let k = g.wavenumber(1);
    let d = g.depth_minus();
    let u = (k * x).cos() * (k * (d + y)).cosh();
    let grad = [-k * (k * x).sin() * (k * (d + y)).cosh(), k * (k * x).cos() * (k * (d + y)).sinh()];
    (u, grad)
}

/// Solves with the trace of a physical harmonic function on a curved
/// interface and returns the errors of the pulled-back solution and of the
/// conormal derivative in the phase where the function is exact.
fn curved_errors(n: usize, phase: Phase, amp: f64) -> (f64, f64) {
    let g = geom(1.0, 1.0, 0.8);
    let grid = EllipticGrid::square(n).unwrap();
    let k = g.wavenumber(1);
    assert!(amp < g.admissibility_bound());
    let h = HeightField::from_fn(g, n, |x| amp * (k * x).cos()).unwrap();
    let map = HanzawaMap::new(&h, &grid).unwrap();
    let exact = |x: f64, y: f64| match phase {
        Phase::Upper => upper_harmonic(&g, x, y),
        Phase::Lower => lower_harmonic(&g, x, y),
    };
    let xs = g.nodes(n);
    let data: Vec<f64> = xs.iter().map(|&x| exact(x, amp * (k * x).cos()).0).collect();
    let spec = EllipticProblemSpec::new(g, grid, data).with_hanzawa(&map);
    let mu = solve_two_phase(&spec).unwrap();

    let ds = grid.spacing(&g, phase);
    let mut field_err: f64 = 0.0;
    for ((i, j), v) in mu.phase(phase).indexed_iter() {
        let y = map.inverse(xs[j], phase.orientation() * i as f64 * ds);
        field_err = field_err.max((v - exact(xs[j], y).0).abs());
    }

    let conormal = conormal_derivative(&mu, &map, phase).unwrap();
    let mut flux_err: f64 = 0.0;
    for (j, &x) in xs.iter().enumerate() {
        let slope = -amp * k * (k * x).sin();
        let (_, grad) = exact(x, amp * (k * x).cos());
        let expected = (-slope * grad[0] + grad[1]) / (1.0 + slope * slope).sqrt();
        flux_err = flux_err.max((conormal[j] - expected).abs());
    }
    (field_err, flux_err)
}

#[test]
fn curved_interface_reproduces_physical_harmonic_functions() {
    for phase in [Phase::Upper, Phase::Lower] {
        let (f_coarse, c_coarse) = curved_errors(64, phase, 0.05);
        let (f_fine, c_fine) = curved_errors(128, phase, 0.05);
        assert!(f_fine < 1e-3 && c_fine < 2e-2, "{phase:?}: field {f_fine:e}, flux {c_fine:e}");
        let field_order = (f_coarse / f_fine).log2();
        let flux_order = (c_coarse / c_fine).log2();
        assert!(field_order > 1.8, "{phase:?} field order {field_order}");
        assert!(flux_order > 1.8, "{phase:?} flux order {flux_order}");
    }
}

#[test]
fn steep_admissible_interface_stays_accurate() {
    // close to the admissibility limit the map varies sharply across the
    // cutoff band; accuracy is coarser but still well below a percent
    let g = geom(1.0, 1.0, 0.8);
    let amp = 0.15;
    for (phase, scale) in [
        (Phase::Upper, (g.wavenumber(1) * g.depth_plus()).cosh()),
        (Phase::Lower, (g.wavenumber(1) * g.depth_minus()).cosh()),
    ] {
        let (field, flux) = curved_errors(64, phase, amp);
        assert!(field < 0.01 * scale, "{phase:?}: field {field:e}");
        assert!(flux < 0.01 * g.wavenumber(1) * scale, "{phase:?}: flux {flux:e}");
    }
}

#[test]
fn jump_converges_at_second_order() {
    let g = geom(1.0, 1.0, 0.6);
    let k = g.wavenumber(2);
    let exact = -k * ((k * g.depth_plus()).tanh() + (k * g.depth_minus()).tanh());
    let errors: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let grid = EllipticGrid::square(n).unwrap();
            let data: Vec<f64> = g.nodes(n).iter().map(|x| (k * x).cos()).collect();
            let mu = solve_two_phase(&EllipticProblemSpec::new(g, grid, data.clone())).unwrap();
            let jump = jump_conormal(&mu, &HanzawaMap::identity(g, grid)).unwrap();
            max_err(jump.iter().zip(&data).map(|(v, d)| v - exact * d))
        })
        .collect();
    for pair in errors.windows(2) {
        let order = (pair[0] / pair[1]).log2();
        assert!((order - 2.0).abs() < 0.25, "order {order} from {errors:?}");
    }
}

#[test]
fn source_term_with_quadratic_profile() {
    // u = cos(kx)(s - d)² with zero Dirichlet offset removed: trace cos(kx) d²
    let g = geom(1.0, 1.0, 1.0);
    let n = 48;
    let grid = EllipticGrid::square(n).unwrap();
    let k = g.wavenumber(1);
    let shift = 1.5;
    let ds = grid.spacing(&g, Phase::Upper);
    let xs = g.nodes(n);
    let profile = |x: f64, s: f64| (k * x).cos() * (s - 1.0).powi(2);
    let f = Array2::from_shape_fn((n + 1, n), |(i, j)| {
        let s = i as f64 * ds;
        (k * xs[j]).cos() * ((shift + k * k) * (s - 1.0).powi(2) - 2.0)
    });
    let data: Vec<f64> = xs.iter().map(|&x| profile(x, 0.0)).collect();
    let spec = EllipticProblemSpec::new(g, grid, data)
        .with_shift(shift)
        .with_source(f.clone(), f);
    let mu = solve_two_phase(&spec).unwrap();
    let err = max_err(mu.upper.indexed_iter().map(|((i, j), v)| v - profile(xs[j], i as f64 * ds)));
    assert!(err < 1e-3, "error {err:e}");
}

#[test]
fn linearized_operator_annihilates_constants() {
    let g = geom(2.0, 1.0, 0.75);
    let op = LinearizedOperator::new(g, 16, EllipticGrid::square(32).unwrap()).unwrap();
    let out = apply_a0(&op, &[0.3; 16]).unwrap();
    assert!(max_err(out) < 1e-12);
}

#[test]
fn linearized_operator_matches_strip_symbol_on_cosines() {
    let g = geom(2.0, 1.0, 0.75);
    let n = 16;
    let op = LinearizedOperator::new(g, n, EllipticGrid::square(128).unwrap()).unwrap();
    for mode in 1..=4 {
        let k = g.wavenumber(mode);
        let symbol = k.powi(3) * ((k * g.depth_plus()).tanh() + (k * g.depth_minus()).tanh());
        let basis: Vec<f64> = g.nodes(n).iter().map(|x| (k * x).cos()).collect();
        let out = apply_a0(&op, &basis).unwrap();
        for (o, b) in out.iter().zip(&basis) {
            assert!((o - symbol * b).abs() <= 0.02 * symbol, "mode {mode}: {o} vs {}", symbol * b);
        }
    }
}

#[test]
fn linearized_operator_is_linear_with_mean_zero_range() {
    let g = geom(2.0, 1.0, 0.75);
    let n = 12;
    let op = LinearizedOperator::new(g, n, EllipticGrid::new(24, 16, 16).unwrap()).unwrap();
    let a: Vec<f64> = (0..n).map(|j| ((j * 7 + 3) % 5) as f64 - 2.0).collect();
    let b: Vec<f64> = (0..n).map(|j| (j as f64 * 0.37).sin()).collect();
    let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
    let (fa, fb, fc) = (op.apply(&a).unwrap(), op.apply(&b).unwrap(), op.apply(&combo).unwrap());
    let scale = max_err(fa.iter().copied()).max(1.0);
    for j in 0..n {
        assert!((fc[j] - (2.0 * fa[j] - 0.5 * fb[j])).abs() < 1e-10 * scale);
    }
    let mean: f64 = fa.iter().sum::<f64>() / n as f64;
    assert!(mean.abs() < 1e-10 * scale, "mean {mean:e}");
}

#[test]
fn discrete_symbols_are_positive_and_increasing() {
    let g = geom(2.0, 1.0, 0.75);
    let op = LinearizedOperator::new(g, 8, EllipticGrid::square(32).unwrap()).unwrap();
    let table = op.discrete_symbols().unwrap();
    assert_eq!(table.rate(0), 0.0);
    for pair in table.rates()[1..].windows(2) {
        assert!(pair[0] > 0.0 && pair[1] > pair[0]);
    }
}

#[test]
fn rejects_mismatched_inputs() {
    let g = geom(1.0, 1.0, 1.0);
    let grid = EllipticGrid::square(16).unwrap();
    assert!(matches!(
        solve_two_phase(&EllipticProblemSpec::new(g, grid, vec![0.0; 15])),
        Err(Error::ShapeMismatch { .. })
    ));
    assert!(solve_two_phase(&EllipticProblemSpec::new(g, grid, vec![0.0; 16]).with_shift(-1.0)).is_err());
    assert!(EllipticGrid::new(4, 16, 16).is_err());
    let other = HanzawaMap::identity(g, EllipticGrid::square(8).unwrap());
    assert!(solve_two_phase(&EllipticProblemSpec::new(g, grid, vec![0.0; 16]).with_hanzawa(&other)).is_err());

    let mut mu = solve_two_phase(&EllipticProblemSpec::new(g, grid, vec![1.0; 16])).unwrap();
    mu.upper[[0, 3]] += 1e-3;
    assert!(matches!(
        jump_conormal(&mu, &HanzawaMap::identity(g, grid)),
        Err(Error::InconsistentField(_))
    ));
}

