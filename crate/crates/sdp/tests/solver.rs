use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use ratecert_sdp::{
    adjoint, check_kkt, feasibility, min_eigenvalue, solve, Constraint, SdpProblem, SolverOptions,
    SparseSym, Status, Verdict,
};

fn sym(dim: usize, entries: &[(usize, usize, f64)]) -> SparseSym {
    let mut s = SparseSym::new(dim);
    for &(i, j, v) in entries {
        s.push(i, j, v);
    }
    s
}

fn row(blocks: Vec<(usize, SparseSym)>, free: Vec<(usize, f64)>, rhs: f64) -> Constraint {
    Constraint { blocks, free, rhs }
}

#[test]
fn scalar_equality() {
    let mut p = SdpProblem::new(vec![1], 0);
    p.objective[0].push(0, 0, 1.0);
    p.constraints.push(row(vec![(0, sym(1, &[(0, 0, 1.0)]))], vec![], 2.0));
    let s = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.x[0][(0, 0)] - 2.0).abs() < 1e-7);
}

/// min trace X, X11 + X22 = 1, X12 = c. PSD needs X11 X22 >= c^2 and the
/// largest product with X11 + X22 = 1 is 1/4, so feasibility iff |c| <= 1/2.
fn trace_problem(c: f64) -> SdpProblem {
    let mut p = SdpProblem::new(vec![2], 0);
    p.objective[0] = sym(2, &[(0, 0, 1.0), (1, 1, 1.0)]);
    p.constraints.push(row(vec![(0, sym(2, &[(0, 0, 1.0), (1, 1, 1.0)]))], vec![], 1.0));
    p.constraints.push(row(vec![(0, sym(2, &[(0, 1, 0.5)]))], vec![], c));
    p
}

#[test]
fn two_by_two_feasible_case() {
    let p = trace_problem(0.4);
    let s = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.primal_obj - 1.0).abs() < 1e-7);
    let k = check_kkt(&p, &s);
    assert!(k.primal_residual < 1e-7 && k.relative_gap < 1e-7 && k.min_eig_x > -1e-8);
}

#[test]
fn two_by_two_infeasible_case_has_ray() {
    let p = trace_problem(0.6);
    let s = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(s.status, Status::Infeasible);
    let w = s.witness.expect("ray");
    assert!(w.b_dot_y > 0.0);
    assert!(w.max_eig <= 1e-8);
    let aty = adjoint(&p, &w.y);
    assert!(aty.iter().all(|m| -min_eigenvalue(&(-m)) <= 1e-8));
}

/// Find P >= I with A^T P + P A <= -2 c P for A = diag(-1, -2): feasible
/// exactly when c <= 1, the slowest decay rate.
fn lyapunov_lmi(c: f64) -> SdpProblem {
    let a = [-1.0, -2.0];
    // free u = (p11, p12, p22); block 0: P - I, block 1: -(A^T P + P A + 2cP)
    let mut p = SdpProblem::new(vec![2, 2], 3);
    let idx = [(0usize, 0usize, 0usize), (0, 1, 1), (1, 1, 2)];
    for &(i, j, l) in &idx {
        let half = if i == j { 1.0 } else { 0.5 };
        let id = if i == j { 1.0 } else { 0.0 };
        p.constraints.push(row(vec![(0, sym(2, &[(i, j, half)]))], vec![(l, -1.0)], -id));
        // (A^T P + P A)_ij = (a_i + a_j) p_ij
        let coeff = a[i] + a[j] + 2.0 * c;
        p.constraints.push(row(vec![(1, sym(2, &[(i, j, half)]))], vec![(l, coeff)], 0.0));
    }
    p
}

#[test]
fn lyapunov_rate_threshold() {
    let opts = SolverOptions::default();
    let ok = feasibility(&lyapunov_lmi(0.99), &opts).unwrap();
    assert_eq!(ok.verdict, Verdict::Feasible, "tau = {}", ok.tau);
    let bad = feasibility(&lyapunov_lmi(1.01), &opts).unwrap();
    assert_eq!(bad.verdict, Verdict::Infeasible, "tau = {}", bad.tau);
    let w = bad.witness.unwrap();
    assert!(w.b_dot_y > 0.0 && w.max_eig <= 1e-8, "{w:?}");
}

#[test]
fn free_only_rows_are_enforced() {
    // u0 + u1 = 1 and u0 - u1 = 0 alone fix u; X = u0 adds the cone.
    let mut p = SdpProblem::new(vec![1], 2);
    p.objective[0].push(0, 0, 1.0);
    p.constraints.push(row(vec![], vec![(0, 1.0), (1, 1.0)], 1.0));
    p.constraints.push(row(vec![], vec![(0, 1.0), (1, -1.0)], 0.0));
    p.constraints.push(row(vec![(0, sym(1, &[(0, 0, 1.0)]))], vec![(0, -1.0)], 0.0));
    let s = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.u[0] - 0.5).abs() < 1e-7 && (s.u[1] - 0.5).abs() < 1e-7);
    assert!((s.x[0][(0, 0)] - 0.5).abs() < 1e-7);
}

#[test]
fn kkt_detects_perturbations() {
    let p = trace_problem(0.4);
    let s = solve(&p, &SolverOptions::default()).unwrap();
    let base = check_kkt(&p, &s);
    let mut sx = s.clone();
    sx.x[0][(0, 0)] += 1e-3;
    let px = check_kkt(&p, &sx);
    // ||b|| = sqrt(1 + 0.16), one row changes by 1e-3
    let expect = 1e-3 / (1.0 + (1.16f64).sqrt());
    assert!((px.primal_residual - expect).abs() < 1e-6, "{px:?}");
    let mut sy = s.clone();
    sy.y[0] += 1e-3;
    assert!(check_kkt(&p, &sy).dual_residual > base.dual_residual + 1e-4);
}

#[test]
fn deterministic_iterates() {
    let p = lyapunov_lmi(0.5);
    let a = feasibility(&p, &SolverOptions::default()).unwrap();
    let b = feasibility(&p, &SolverOptions::default()).unwrap();
    assert_eq!(a.tau.to_bits(), b.tau.to_bits());
    assert_eq!(a.solution.history, b.solution.history);
}

#[test]
fn sdpa_roundtrip_preserves_optimum() {
    let p = lyapunov_lmi(0.5);
    let mut q = p.clone();
    q.free_objective = vec![1.0, 0.0, 1.0];
    let text = q.to_sdpa();
    let back = SdpProblem::from_sdpa(&text).unwrap();
    let opts = SolverOptions::default();
    let a = solve(&q, &opts).unwrap();
    let b = solve(&back, &opts).unwrap();
    assert_eq!(a.status, Status::Optimal);
    assert_eq!(b.status, Status::Optimal);
    // SDPA is in maximization form of the same problem.
    assert!((a.primal_obj - b.primal_obj).abs() < 1e-6, "{} {}", a.primal_obj, b.primal_obj);
}

/// Random instance with a known strictly feasible primal and dual point.
fn random_problem(seed: &[f64], n: usize, m: usize) -> SdpProblem {
    let mut it = seed.iter().cycle().copied();
    let mut next = move || it.next().unwrap();
    let mut rand_sym = |n: usize| {
        let mut s = SparseSym::new(n);
        for i in 0..n {
            for j in i..n {
                s.push(i, j, next());
            }
        }
        s
    };
    let x0 = DMatrix::<f64>::identity(n, n) + {
        let g = rand_sym(n).to_dense() * 0.3;
        &g * g.transpose()
    };
    let mut p = SdpProblem::new(vec![n], 0);
    let mut y0 = DVector::zeros(m);
    for i in 0..m {
        let a = rand_sym(n);
        let b = a.dot(&x0);
        p.constraints.push(row(vec![(0, a)], vec![], b));
        y0[i] = 0.1 * (i as f64 + 1.0);
    }
    let aty = adjoint(&p, &y0);
    let c = &aty[0] + DMatrix::identity(n, n);
    let mut cs = SparseSym::new(n);
    for i in 0..n {
        for j in i..n {
            cs.push(i, j, c[(i, j)]);
        }
    }
    p.objective[0] = cs;
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn random_feasible_instances_solve(
        seed in prop::collection::vec(-1.0f64..1.0, 40),
        n in 2usize..5,
        m in 1usize..5,
    ) {
        let p = random_problem(&seed, n, m);
        let s = solve(&p, &SolverOptions::default()).unwrap();
        prop_assert!(matches!(s.status, Status::Optimal | Status::NearOptimal));
        let k = check_kkt(&p, &s);
        prop_assert!(k.primal_residual < 1e-6 && k.dual_residual < 1e-6 && k.relative_gap < 1e-6);
        let scale = 1.0 + s.primal_obj.abs();
        prop_assert!(s.primal_obj >= s.dual_obj - 1e-9 * scale);
        for it in &s.history {
            prop_assert!(it.complementarity >= 0.0);
        }
    }
}
