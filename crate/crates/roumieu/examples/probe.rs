use num_complex::Complex64 as C64;
use roumieu::bump::element::Element;
use roumieu::diffop::{exchange_check, ExchangeConfig, UltradiffOperator};
use roumieu::poly::Poly1;
use roumieu::ultradist::{convolve, ConvolveConfig, ConvolutionUnits, Ultradistribution};

fn main() -> roumieu::Result<()> {
    let phi = Element::standard_bump(&[0.0], &[1.0])?;
    let ddelta = Ultradistribution::delta_derivative(C64::new(0.0, 1.0), &[1], &[-0.3])?;
    let delta_a = Ultradistribution::delta(&[0.4])?;
    let poly = Ultradistribution::zero(1).with_poly(C64::new(1.0, 0.0), &[Poly1::from_coeffs(vec![0.0, 1.0])])?;
    let cfg = ConvolveConfig::default();

    let t0 = std::time::Instant::now();
    let r1 = convolve(&ddelta, &delta_a, std::slice::from_ref(&phi), &cfg)?;
    println!(
        "ddelta*delta: convolvable={} value={:?} spread={:.3e}  [{:?}]",
        r1.convolvable,
        r1.per_phi[0].agreed_value,
        r1.worst_spread,
        t0.elapsed()
    );

    let t0 = std::time::Instant::now();
    let r2 = convolve(&delta_a, &poly, std::slice::from_ref(&phi), &cfg)?;
    println!(
        "delta*poly: convolvable={} value={:?} spread={:.3e}  [{:?}]",
        r2.convolvable,
        r2.per_phi[0].agreed_value,
        r2.worst_spread,
        t0.elapsed()
    );

    // exchange on the new pair kinds with P = D and P = 1 + D^2
    let op_d = UltradiffOperator::explicit(1, &[(vec![1], C64::new(1.0, 0.0))])?;
    let op_1d2 = UltradiffOperator::explicit(
        1,
        &[(vec![0], C64::new(1.0, 0.0)), (vec![2], C64::new(1.0, 0.0))],
    )?;
    let units = ConvolutionUnits::plateau_family(1, 8)?;
    let xcfg = ExchangeConfig::default();
    for (name, s, t) in [
        ("ddelta*delta", &ddelta, &delta_a),
        ("delta*poly", &delta_a, &poly),
    ] {
        for (opname, op) in [("D", &op_d), ("1+D^2", &op_1d2)] {
            let t0 = std::time::Instant::now();
            let r = exchange_check(op, s, t, &phi, &units, &xcfg)?;
            println!(
                "exchange {name} {opname}: all_converged={} spread={:?} within={} [{:?}]",
                r.all_converged, r.spread, r.within, t0.elapsed()
            );
        }
    }
    Ok(())
}
