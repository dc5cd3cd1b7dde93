use ecg_gaf::gaf::{self, encode_series, EncoderConfig, GafKind, Reduction};
use proptest::prelude::*;

/// Independent min-max rescale to [-1, 1] (constant series → zeros).
fn oracle_rescale(x: &[f64]) -> Vec<f64> {
    let min = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return vec![0.0; x.len()];
    }
    x.iter()
        .map(|&v| (2.0 * v - max - min) / (max - min))
        .map(|v| v.clamp(-1.0, 1.0))
        .collect()
}

/// Summation field through the algebraic identity
/// `cos(a + b) = cos a cos b − sin a sin b` with `cos φ = x̃`.
fn oracle_gasf_algebraic(xt: &[f64]) -> Vec<f64> {
    let n = xt.len();
    let s: Vec<f64> = xt.iter().map(|v| (1.0 - v * v).max(0.0).sqrt()).collect();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = xt[i] * xt[j] - s[i] * s[j];
        }
    }
    out
}

fn series() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 2..48)
}

proptest! {
    #[test]
    fn gasf_symmetric_with_known_diagonal(x in series()) {
        let ns = gaf::rescale(&x).unwrap();
        let m = gaf::gasf(&ns);
        let n = m.size();
        for i in 0..n {
            let xt = ns.values()[i];
            prop_assert!((m.get(i, i) - (2.0 * xt * xt - 1.0)).abs() < 1e-12);
            for j in 0..n {
                prop_assert_eq!(m.get(i, j), m.get(j, i));
                prop_assert!(m.get(i, j).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn gasf_matches_algebraic_form(x in series()) {
        let got = gaf::gasf(&gaf::rescale(&x).unwrap());
        let want = oracle_gasf_algebraic(&oracle_rescale(&x));
        for (a, b) in got.entries().iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn invariant_under_positive_affine_maps(
        x in series(),
        scale in 0.01f64..100.0,
        shift in -50.0f64..50.0,
    ) {
        let y: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
        for kind in [GafKind::Gasf, GafKind::Gadf] {
            let cfg = EncoderConfig { kind, target_size: 8, ..Default::default() };
            let a = encode_series(&x, &cfg).unwrap();
            let b = encode_series(&y, &cfg).unwrap();
            for (p, q) in a.pixels().iter().zip(b.pixels()) {
                prop_assert!((p - q).abs() <= 1e-9, "{p} vs {q}");
            }
        }
    }

    #[test]
    fn encoding_is_deterministic_and_bounded(x in series(), size in 2usize..40) {
        for reduction in [Reduction::Bilinear, Reduction::Paa] {
            if reduction == Reduction::Paa && size > x.len() {
                continue;
            }
            let cfg = EncoderConfig { reduction, target_size: size, ..Default::default() };
            let a = encode_series(&x, &cfg).unwrap();
            let b = encode_series(&x, &cfg).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!((a.height(), a.width(), a.channels()), (size, size, 3));
            prop_assert!(a.pixels().iter().all(|v| (-1.0..=1.0).contains(v)));
            prop_assert_eq!(a.plane(0), a.plane(2));
        }
    }
}

#[test]
fn constant_series_gives_flat_field() {
    let img = encode_series(&[0.4; 187], &EncoderConfig::default()).unwrap();
    // x̃ = 0 everywhere, so cos(π/2 + π/2) = -1
    assert!(img.pixels().iter().all(|v| (v + 1.0).abs() < 1e-12));
}
