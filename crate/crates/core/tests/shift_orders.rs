use nalgebra::DMatrix;

use weakmeter_core::algebra::GeneratorKind;
use weakmeter_core::fock::coherent_ket;
use weakmeter_core::weak::{Readout, ShiftExperiment, SystemSpec};
use weakmeter_core::{Basis, FockConfig, Ket, Operator, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// σ_x with post-selection giving O_w = 1 + 2i.
fn system() -> SystemSpec {
    let w = c(1.0, 2.0);
    let theta = w.norm().atan();
    let sx = Operator::new(DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]))
        .unwrap();
    let pre = Ket::from_vec(vec![c(1., 0.), c(0., 0.)], Basis::System);
    let post = Ket::from_vec(vec![c(theta.cos(), 0.), C64::from_polar(theta.sin(), -w.arg())], Basis::System);
    SystemSpec::new(sx, pre, post).unwrap()
}

#[test]
fn residual_is_at_least_second_order_for_every_pair() {
    let cfg = FockConfig::auto(1.5, 1e-12).unwrap();
    let meters = [
        ("vacuum", Ket::vacuum(&cfg)),
        ("one", Ket::fock(1, &cfg).unwrap()),
        ("coherent", coherent_ket(c(0.8, 0.6), &cfg).unwrap()),
    ];
    let readouts = [Readout::Q, Readout::P, Readout::N, Readout::A, Readout::G, Readout::K];
    let generators = [
        GeneratorKind::Q,
        GeneratorKind::P,
        GeneratorKind::N,
        GeneratorKind::G,
        GeneratorKind::K,
    ];
    let (e1, e2) = (1e-2, 1e-3);
    let mut checked = 0;
    for (name, meter) in &meters {
        for m in &readouts {
            for r in generators.iter().cloned().chain([GeneratorKind::Custom(
                weakmeter_core::algebra::generator(&GeneratorKind::N, &cfg).unwrap(),
            )]) {
                let label = format!("{name} M={} R={}", m.label(), r.label());
                let exp = ShiftExperiment::new(system(), meter.clone(), r, m.clone(), cfg).unwrap();
                let floor = exp.residual_floor().unwrap();
                let pts = exp.sweep(&[e1, e2]).unwrap();
                // C fitted at ε₁ must bound the residual at ε₂
                let constant = pts[0].residual / (e1 * e1);
                assert!(
                    pts[1].residual <= 1.5 * constant * e2 * e2 + 10.0 * floor,
                    "{label}: residuals {:e} {:e}",
                    pts[0].residual,
                    pts[1].residual
                );
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 3 * 6 * 6);
}
