use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use lyapstab::dense::DenseLu;
use lyapstab::lp::{read_mps, write_mps, SolveOptions, SolveStatus};
use lyapstab::sparse::CsrMatrix;
use lyapstab::spectral::{spectral_radius, PowerIterationOptions};
use lyapstab::stabilization::{assemble_primal, solve_dual, solve_stabilization, StabilizationLP, Tolerances};
use lyapstab::synthesis::{extract_policy, policy_cost, ControlPolicy};
use lyapstab::systems::{explicit_matrix_system, standard_map, StandardMapParams};

/// Row-stochastic matrices over `cells + 1` states with the last absorbing
/// and every other row leaking at least a quarter of its mass into it.
fn family_strategy() -> impl Strategy<Value = (usize, Vec<Vec<Vec<f64>>>)> {
    (2usize..=5, 1usize..=3).prop_flat_map(|(cells, actions)| {
        let n = cells + 1;
        let row = prop::collection::vec(prop_oneof![Just(0.0), 0.05f64..1.0], n);
        let mat = prop::collection::vec(row, cells);
        prop::collection::vec(mat, actions).prop_map(move |mats| {
            let full = mats
                .into_iter()
                .map(|rows| {
                    let mut out: Vec<Vec<f64>> = rows
                        .into_iter()
                        .map(|mut r| {
                            // at most 0.75 stays outside the attractor, so rho(P_u) <= 0.75
                            let s: f64 = r[..n - 1].iter().sum();
                            let f = if s > 0.75 { 0.75 / s } else { 1.0 };
                            r[..n - 1].iter_mut().for_each(|v| *v *= f);
                            let rest: f64 = r[..n - 1].iter().sum();
                            r[n - 1] = 1.0 - rest;
                            r
                        })
                        .collect();
                    let mut last = vec![0.0; n];
                    last[n - 1] = 1.0;
                    out.push(last);
                    out
                })
                .collect();
            (cells, full)
        })
    })
}

fn instance_strategy() -> impl Strategy<Value = StabilizationLP> {
    (family_strategy(), prop_oneof![Just(1.05), Just(1.2)], any::<u64>()).prop_map(|((cells, mats), gamma, seed)| {
        let labels = (0..mats.len()).map(|a| a.to_string()).collect();
        let fam = explicit_matrix_system(&mats, labels).unwrap().family;
        let mut state = seed | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            0.1 + (state % 1000) as f64 / 1000.0
        };
        let costs = (0..mats.len()).map(|_| (0..cells).map(|_| next()).collect()).collect();
        StabilizationLP::new(gamma, vec![1.0 / (cells + 1) as f64; cells], costs, &fam).unwrap()
    })
}

fn nalgebra_radius(p: &CsrMatrix) -> f64 {
    let d = p.to_dense();
    let m = DMatrix::from_fn(p.rows(), p.cols(), |i, j| d[i][j]);
    m.schur().complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn strong_duality_holds(spec in instance_strategy()) {
        let sol = solve_stabilization(&spec, &SolveOptions::default(), None).unwrap();
        // every row leaks mass to the attractor, so each policy is transient
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        let (status, v, dual) = solve_dual(&spec, &SolveOptions::default()).unwrap();
        prop_assert_eq!(status, SolveStatus::Optimal);
        prop_assert_eq!(v.len(), spec.n_cells());
        prop_assert!((sol.primal_objective - dual).abs() <= Tolerances::default().duality_tol * (1.0 + dual.abs()));
        prop_assert!(sol.kkt.passes(&Tolerances::default()));
    }

    #[test]
    fn policy_is_invariant_under_cost_scaling(spec in instance_strategy(), c in 0.1f64..50.0) {
        let tol = Tolerances::default().theta_support_tol;
        let base = solve_stabilization(&spec, &SolveOptions::default(), None).unwrap();
        prop_assert_eq!(base.status, SolveStatus::Optimal);
        let mut scaled = spec.clone();
        for row in &mut scaled.costs {
            row.iter_mut().for_each(|g| *g *= c);
        }
        let s = solve_stabilization(&scaled, &SolveOptions::default(), None).unwrap();
        prop_assert_eq!(s.status, SolveStatus::Optimal);
        prop_assert!((s.primal_objective - c * base.primal_objective).abs() <= 1e-9 * (1.0 + s.primal_objective.abs()));
        let p0 = extract_policy(&spec, &base, tol).unwrap();
        let p1 = extract_policy(&scaled, &s, tol).unwrap();
        // ties may resolve differently, but both policies must be optimal for the original costs
        let c0 = policy_cost(&spec, &p0).unwrap();
        let c1 = policy_cost(&spec, &ControlPolicy::from_actions(&spec, p1.action_of).unwrap()).unwrap();
        prop_assert!((c0 - c1).abs() <= 1e-9 * (1.0 + c0.abs()));
    }

    #[test]
    fn spectral_radius_matches_eigenvalues((_, mats) in family_strategy(), pick in any::<u64>()) {
        let n = mats[0].len() - 1;
        let rows: Vec<Vec<f64>> = (0..n).map(|i| mats[(pick as usize + i) % mats.len()][i][..n].to_vec()).collect();
        let p = CsrMatrix::from_dense(&rows);
        let est = spectral_radius(&p, PowerIterationOptions::default());
        prop_assert!(est.converged);
        if est.nilpotent {
            // Schur is inaccurate on a defective zero eigenvalue; check A^n = 0 instead
            let d = p.to_dense();
            let a = DMatrix::from_fn(n, n, |i, j| d[i][j]);
            prop_assert!(a.pow(n as u32).iter().all(|&v| v == 0.0));
            prop_assert_eq!(est.radius, 0.0);
        } else {
            let want = nalgebra_radius(&p);
            prop_assert!((est.radius - want).abs() < 1e-7, "{} vs {}", est.radius, want);
        }
    }

    #[test]
    fn lu_matches_nalgebra(n in 1usize..8, seed in any::<u64>()) {
        let mut state = seed | 1;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a: Vec<f64> = (0..n * n).map(|k| next() + if k % (n + 1) == 0 { n as f64 } else { 0.0 }).collect();
        let b: Vec<f64> = (0..n).map(|_| next()).collect();
        let lu = DenseLu::factor(n, a.clone()).unwrap();
        let m = DMatrix::from_row_slice(n, n, &a);
        let want = m.clone().lu().solve(&DVector::from_vec(b.clone())).unwrap();
        let want_t = m.transpose().lu().solve(&DVector::from_vec(b.clone())).unwrap();
        for (x, y) in lu.solve(&b).iter().zip(want.iter()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
        for (x, y) in lu.solve_transpose(&b).iter().zip(want_t.iter()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn mps_round_trip(spec in instance_strategy()) {
        let lp = assemble_primal(&spec).unwrap();
        let mut buf = Vec::new();
        write_mps(&lp, &mut buf).unwrap();
        let back = read_mps(buf.as_slice()).unwrap();
        prop_assert_eq!(back.objective, lp.objective);
        prop_assert_eq!(back.columns, lp.columns);
        prop_assert_eq!(back.rhs, lp.rhs);
        prop_assert_eq!(back.row_kinds, lp.row_kinds);
        prop_assert_eq!(back.var_kinds, lp.var_kinds);
        prop_assert_eq!(back.sense, lp.sense);
    }

    #[test]
    fn standard_map_evaluation_is_pure(x in 0.0f64..1.0, y in 0.0f64..1.0, u in -0.5f64..0.5) {
        let sys = standard_map(StandardMapParams::default()).unwrap();
        let a = sys.evaluate(&[x, y], &[u]).unwrap();
        let b = sys.evaluate(&[x, y], &[u]).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn zero_control_keeps_momentum(x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let sys = standard_map(StandardMapParams::default()).unwrap();
        let next = sys.evaluate(&[x, y], &[0.0]).unwrap();
        prop_assert_eq!(next[1], y);
        prop_assert!(((next[0] - (x + y)).rem_euclid(1.0)).min((x + y - next[0]).rem_euclid(1.0)) < 1e-12);
    }
}
