use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use std::f64::consts::{PI, SQRT_2};

use weakmeter_core::algebra::{fractional_fourier, generator, verify_sl2, GeneratorKind};
use weakmeter_core::fock::{coherent_ket, evolve_unitary, expectation, ladder_operators};
use weakmeter_core::weak::{
    annihilator_shift, first_order_shift, symmetric_qp_shifts, weak_value_of, Readout,
    ShiftExperiment, SystemSpec,
};
use weakmeter_core::{Basis, FockConfig, Ket, Operator, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn complex() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(r, i)| c(r, i))
}

fn small_cfg() -> FockConfig {
    FockConfig::new(24, 1e-12, 6).unwrap()
}

/// Unit meter supported on the lowest six levels.
fn meter() -> impl Strategy<Value = Ket> {
    prop::collection::vec(complex(), 6)
        .prop_filter("non-zero", |v| v.iter().map(|x| x.norm_sqr()).sum::<f64>() > 1e-3)
        .prop_map(|v| {
            let mut amps = DVector::zeros(24);
            for (k, x) in v.into_iter().enumerate() {
                amps[k] = x;
            }
            Ket::new(amps, Basis::Fock).normalized().unwrap()
        })
}

fn hermitian(dim: usize) -> impl Strategy<Value = Operator> {
    prop::collection::vec(complex(), dim * dim).prop_map(move |v| {
        let m = DMatrix::from_row_slice(dim, dim, &v);
        Operator::new((&m + m.adjoint()) * c(0.5, 0.0)).unwrap()
    })
}

fn sigma_x() -> Operator {
    Operator::new(DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]))
        .unwrap()
}

/// Qubit system whose σ_x weak value is `w`.
fn qubit_for(w: C64) -> SystemSpec {
    let theta = w.norm().atan();
    let phi = -w.arg();
    let pre = Ket::from_vec(vec![c(1., 0.), c(0., 0.)], Basis::System);
    let post = Ket::from_vec(
        vec![c(theta.cos(), 0.), C64::from_polar(theta.sin(), phi)],
        Basis::System,
    );
    SystemSpec::new(sigma_x(), pre, post).unwrap()
}

/// `⟨z₁|z₂⟩` for untruncated coherent states.
fn coherent_overlap(z1: C64, z2: C64) -> C64 {
    (c(-0.5 * z1.norm_sqr() - 0.5 * z2.norm_sqr(), 0.0) + z1.conj() * z2).exp()
}

/// `Δa` for R = N on a coherent meter: the branches `|z e^{−iεo_j}⟩` interfere.
fn coherent_oracle(sys: &SystemSpec, z: C64, eps: f64) -> C64 {
    let beta = sys.post().amplitudes();
    let alpha = sys.pre().amplitudes();
    // σ_x eigenpairs
    let s = 1.0 / SQRT_2;
    let branches = [(1.0, [c(s, 0.), c(s, 0.)]), (-1.0, [c(s, 0.), c(-s, 0.)])];
    let terms: Vec<(C64, C64)> = branches
        .iter()
        .map(|(o, v)| {
            let b = beta[0].conj() * v[0] + beta[1].conj() * v[1];
            let a = v[0].conj() * alpha[0] + v[1].conj() * alpha[1];
            (b * a, z * C64::from_polar(1.0, -eps * o))
        })
        .collect();
    let (mut num, mut den) = (c(0., 0.), c(0., 0.));
    for (ck, zk) in &terms {
        for (cj, zj) in &terms {
            let w = ck.conj() * cj * coherent_overlap(*zk, *zj);
            num += w * zj;
            den += w;
        }
    }
    num / den - z
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn annihilator_form_matches_general_formula(psi in meter(), w in complex(), eps in 0.0..0.5f64) {
        let cfg = small_cfg();
        let (a, _) = ladder_operators(&cfg);
        let n = generator(&GeneratorKind::N, &cfg).unwrap();
        let general = first_order_shift(&a, &n, w, &psi, eps).unwrap();
        let special = annihilator_shift(w, &psi, eps, &cfg).unwrap();
        prop_assert!((general - special).norm() < 1e-12 * (1.0 + general.norm()));
    }

    #[test]
    fn weak_value_is_linear(
        a in hermitian(3), b in hermitian(3),
        x in -2.0..2.0f64, y in -2.0..2.0f64,
        pre in prop::collection::vec(complex(), 3), post in prop::collection::vec(complex(), 3),
    ) {
        let pre = Ket::from_vec(pre, Basis::System);
        let post = Ket::from_vec(post, Basis::System);
        prop_assume!(pre.norm_sqr() > 1e-2 && post.norm_sqr() > 1e-2);
        let pre = pre.normalized().unwrap();
        let post = post.normalized().unwrap();
        prop_assume!(post.inner(&pre).unwrap().norm() > 1e-2);
        let combo = &a.scaled(c(x, 0.)) + &b.scaled(c(y, 0.));
        let wa = weak_value_of(&a, &pre, &post).unwrap().value;
        let wb = weak_value_of(&b, &pre, &post).unwrap().value;
        let wc = weak_value_of(&combo, &pre, &post).unwrap().value;
        prop_assert!((wc - (wa * x + wb * y)).norm() < 1e-9 * (1.0 + wc.norm()));
        // a complex combination splits through the Hermitian parts
        let bnh = &a + &b.scaled(c(0., 1.));
        let (cp, dp) = bnh.hermitian_parts();
        let lhs = weak_value_of(&bnh, &pre, &post).unwrap().value;
        let rhs = weak_value_of(&cp, &pre, &post).unwrap().value
            + c(0., 1.) * weak_value_of(&dp, &pre, &post).unwrap().value;
        prop_assert!((lhs - rhs).norm() < 1e-9 * (1.0 + lhs.norm()));
    }

    #[test]
    fn non_hermitian_shift_is_additive(
        psi in meter(), w in complex(), eps in 0.001..0.2f64,
        m_re in prop::collection::vec(complex(), 4),
    ) {
        prop_assume!(w.norm() > 1e-3);
        let cfg = small_cfg();
        let (a, a_dag) = ladder_operators(&cfg);
        let n = generator(&GeneratorKind::N, &cfg).unwrap();
        let b = &(&(&a.scaled(m_re[0]) + &(&a * &a).scaled(m_re[1])) + &a_dag.scaled(m_re[2]))
            + &n.scaled(m_re[3]);
        let (cp, dp) = b.hermitian_parts();
        let run = |op: &Operator| {
            ShiftExperiment::new(qubit_for(w), psi.clone(), GeneratorKind::N, Readout::Custom(op.clone()), cfg)
                .unwrap()
                .shift(eps)
                .unwrap()
        };
        let (rb, rc, rd) = (run(&b), run(&cp), run(&dp));
        let i = c(0., 1.);
        let scale = 1.0 + rb.exact_shift.norm();
        prop_assert!((rb.exact_shift - (rc.exact_shift + i * rd.exact_shift)).norm() < 1e-12 * scale);
        prop_assert!((rb.first_order - (rc.first_order + i * rd.first_order)).norm() < 1e-12 * scale);
    }

    #[test]
    fn main_result_matches_coherent_oracle(
        r in 0.2..2.0f64, arg in 0.0..(2.0 * PI), w in complex(), eps in 0.001..0.2f64,
    ) {
        prop_assume!(w.norm() > 1e-2);
        let z = C64::from_polar(r, arg);
        let cfg = FockConfig::auto(r, 1e-12).unwrap();
        let sys = qubit_for(w);
        let meter = coherent_ket(z, &cfg).unwrap();
        let exp = ShiftExperiment::new(sys.clone(), meter, GeneratorKind::N, Readout::A, cfg).unwrap();
        let rep = exp.shift(eps).unwrap();
        let oracle = coherent_oracle(&sys, z, eps);
        prop_assert!((rep.exact_shift - oracle).norm() < 1e-9 * (1.0 + oracle.norm()),
            "matrix {} oracle {}", rep.exact_shift, oracle);
        // first order is −iεzO_w
        let linear = c(0., -1.) * z * w * eps;
        prop_assert!((rep.first_order - linear).norm() < 1e-10 * (1.0 + linear.norm()));
    }

    #[test]
    fn symmetric_pair_from_first_order(r in 0.1..3.0f64, w in complex(), eps in 0.0..0.1f64) {
        let z = c(0., r);
        let cfg = FockConfig::auto(r, 1e-12).unwrap();
        let meter = coherent_ket(z, &cfg).unwrap();
        let (dq, dp) = symmetric_qp_shifts(r, eps, w);
        let da = annihilator_shift(w, &meter, eps, &cfg).unwrap();
        // Q = √2 Re a, P = √2 Im a
        prop_assert!((SQRT_2 * da.re - dq).abs() < 1e-10);
        prop_assert!((SQRT_2 * da.im - dp).abs() < 1e-10);
    }

    #[test]
    fn rotation_covariance_of_exact_shift(
        r in 0.2..2.0f64, arg in 0.0..(2.0 * PI), theta in -PI..PI, w in complex(), eps in 0.001..0.1f64,
    ) {
        let z = C64::from_polar(r, arg);
        let cfg = FockConfig::auto(r, 1e-12).unwrap();
        let meter = coherent_ket(z, &cfg).unwrap();
        let turned = fractional_fourier(theta, &cfg).apply(&meter).unwrap();
        let turned = Ket::new(turned.amplitudes().clone(), Basis::Fock);
        let shift = |m: Ket| {
            ShiftExperiment::new(qubit_for(w), m, GeneratorKind::N, Readout::A, cfg)
                .unwrap()
                .shift(eps)
                .unwrap()
                .exact_shift
        };
        let (s0, s1) = (shift(meter), shift(turned));
        prop_assert!((s1 - C64::from_polar(1.0, theta) * s0).norm() < 1e-10 * (1.0 + s0.norm()));
    }

    #[test]
    fn evolution_is_unitary(h in hermitian(12), s in -3.0..3.0f64) {
        let u = evolve_unitary(&h, s).unwrap();
        let id = Operator::identity(12);
        prop_assert!((&u.adjoint() * &u).max_abs_diff(&id) < 1e-10);
    }

    #[test]
    fn coherent_moments_and_eigenket(r in 0.0..5.0f64, arg in 0.0..(2.0 * PI)) {
        let z = C64::from_polar(r, arg);
        let cfg = FockConfig::auto(r, 1e-12).unwrap();
        let psi = coherent_ket(z, &cfg).unwrap();
        let n = generator(&GeneratorKind::N, &cfg).unwrap();
        let bound = 10.0 * cfg.truncation_tol * (1.0 + r.powi(4));
        let mean = expectation(&n, &psi).unwrap().re;
        prop_assert!((mean - r * r).abs() < bound.max(1e-12 * (1.0 + r * r)));
        let var = weakmeter_core::fock::variance(&n, &psi).unwrap();
        prop_assert!((var - r * r).abs() < bound.max(1e-11 * (1.0 + r.powi(4))));
        let (a, _) = ladder_operators(&cfg);
        let diff = a.apply(&psi).unwrap().amplitudes() - psi.amplitudes() * z;
        prop_assert!(diff.norm() < 10.0 * cfg.truncation_tol.sqrt());
    }

    #[test]
    fn post_selection_probabilities_complete(psi in meter(), w in complex(), eps in 0.0..0.3f64) {
        prop_assume!(w.norm() > 1e-3);
        let cfg = small_cfg();
        let sys = qubit_for(w);
        let beta = sys.post().amplitudes();
        let perp = Ket::from_vec(vec![-beta[1].conj(), beta[0].conj()], Basis::System);
        let other = SystemSpec::new(sys.observable().clone(), sys.pre().clone(), perp).unwrap();
        let p = |s: SystemSpec| {
            ShiftExperiment::new(s, psi.clone(), GeneratorKind::N, Readout::A, cfg)
                .unwrap()
                .shift(eps)
                .unwrap()
                .post_prob
        };
        let total = p(sys) + p(other);
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn sl2_holds_across_dimensions() {
    for d in [12usize, 20, 33, 64] {
        let cfg = FockConfig::new(d, 1e-12, 4).unwrap();
        for rep in verify_sl2(&cfg) {
            assert!(rep.pass, "D = {d}: {} residual {}", rep.relation, rep.residual);
        }
    }
}
