use crate::error::{Error, Result};

/// Piecewise aggregate approximation to `m` segments of length `N / m`.
///
/// Sample `i` spans `[i, i + 1)` and segment `j` spans `[j·N/m, (j+1)·N/m)`;
/// each output is the overlap-weighted mean of the samples it covers. The
/// overlaps are computed in integer units of `1/m`, so the weights are exact.
pub fn paa(series: &[f64], m: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if m == 0 || m > n {
        return Err(Error::Argument(format!(
            "PAA segment count {m} out of range 1..={n}"
        )));
    }
    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        // segment j in units of 1/m: [j·n, (j+1)·n)
        let (seg_lo, seg_hi) = (j * n, (j + 1) * n);
        let first = seg_lo / m;
        let last = (seg_hi - 1) / m;
        let mut acc = 0.0;
        for (i, &x) in series.iter().enumerate().take(last + 1).skip(first) {
            let lo = (i * m).max(seg_lo);
            let hi = ((i + 1) * m).min(seg_hi);
            acc += (hi - lo) as f64 * x;
        }
        out.push(acc / n as f64);
    }
    Ok(out)
}

/// Bilinear resize of a row-major `h × w` matrix with half-pixel centres
/// (align-corners off). Source coordinates are clamped to the image.
pub fn resize_bilinear(
    image: &[f64],
    h: usize,
    w: usize,
    out_h: usize,
    out_w: usize,
) -> Result<Vec<f64>> {
    if h < 2 || w < 2 || out_h < 1 || out_w < 1 {
        return Err(Error::Argument(format!(
            "cannot resize {h}x{w} to {out_h}x{out_w}"
        )));
    }
    if image.len() != h * w {
        return Err(Error::Argument(format!(
            "{} values do not form a {h}x{w} matrix",
            image.len()
        )));
    }
    let taps = |out: usize, len: usize| -> Vec<(usize, usize, f64)> {
        let scale = len as f64 / out as f64;
        (0..out)
            .map(|o| {
                let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
                let i0 = src.floor() as usize;
                let i1 = (i0 + 1).min(len - 1);
                (i0, i1, src - i0 as f64)
            })
            .collect()
    };
    let rows = taps(out_h, h);
    let cols = taps(out_w, w);
    let mut out = Vec::with_capacity(out_h * out_w);
    for &(y0, y1, ty) in &rows {
        for &(x0, x1, tx) in &cols {
            let a = image[y0 * w + x0];
            let b = image[y0 * w + x1];
            let c = image[y1 * w + x0];
            let d = image[y1 * w + x1];
            let top = a + (b - a) * tx;
            let bottom = c + (d - c) * tx;
            out.push(top + (bottom - top) * ty);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent route: repeat every sample `m` times, then average
    /// consecutive blocks of `N`.
    fn paa_by_repetition(series: &[f64], m: usize) -> Vec<f64> {
        let n = series.len();
        let expanded: Vec<f64> = series
            .iter()
            .flat_map(|&x| std::iter::repeat_n(x, m))
            .collect();
        expanded
            .chunks(n)
            .map(|c| c.iter().sum::<f64>() / n as f64)
            .collect()
    }

    #[test]
    fn exact_halves() {
        assert_eq!(paa(&[1.0, 2.0, 3.0, 4.0], 2).unwrap(), vec![1.5, 3.5]);
    }

    #[test]
    fn fractional_overlap() {
        // the first segment holds all of sample 1 and half of sample 2
        let got = paa(&[1.0, 2.0, 3.0], 2).unwrap();
        let oracle = paa_by_repetition(&[1.0, 2.0, 3.0], 2);
        assert!((oracle[0] - 4.0 / 3.0).abs() < 1e-15);
        assert!((oracle[1] - 8.0 / 3.0).abs() < 1e-15);
        for (g, o) in got.iter().zip(&oracle) {
            assert!((g - o).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_when_m_equals_n() {
        let s = [0.3, -1.0, 2.5, 7.0, 0.0];
        assert_eq!(paa(&s, 5).unwrap(), s.to_vec());
    }

    #[test]
    fn paa_range_errors() {
        assert!(paa(&[1.0, 2.0], 0).is_err());
        assert!(paa(&[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn constant_resizes_to_constant() {
        let img = vec![0.25; 7 * 5];
        for (oh, ow) in [(1, 1), (3, 9), (14, 10)] {
            let out = resize_bilinear(&img, 7, 5, oh, ow).unwrap();
            assert_eq!(out.len(), oh * ow);
            assert!(out.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        }
    }

    #[test]
    fn same_size_is_identity() {
        let img: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).cos()).collect();
        let out = resize_bilinear(&img, 4, 5, 4, 5).unwrap();
        for (a, b) in out.iter().zip(&img) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn checkerboard_halves_to_grey() {
        // each 2x2 output samples the centre of a 2x2 block: weights 1/4 each
        let img: Vec<f64> = (0..16).map(|k| ((k / 4 + k % 4) % 2) as f64).collect();
        let out = resize_bilinear(&img, 4, 4, 2, 2).unwrap();
        assert_eq!(out, vec![0.5; 4]);
    }

    #[test]
    fn resize_argument_errors() {
        assert!(resize_bilinear(&[1.0; 3], 1, 3, 1, 1).is_err());
        assert!(resize_bilinear(&[1.0; 4], 2, 2, 0, 1).is_err());
        assert!(resize_bilinear(&[1.0; 5], 2, 2, 1, 1).is_err());
    }

    proptest! {
        #[test]
        fn paa_matches_repetition_and_keeps_mean(
            series in prop::collection::vec(-100.0f64..100.0, 1..80),
            m_seed in any::<usize>(),
        ) {
            let m = m_seed % series.len() + 1;
            let got = paa(&series, m).unwrap();
            prop_assert_eq!(got.len(), m);
            let oracle = paa_by_repetition(&series, m);
            for (g, o) in got.iter().zip(&oracle) {
                prop_assert!((g - o).abs() < 1e-9);
            }
            let mean_in = series.iter().sum::<f64>() / series.len() as f64;
            let mean_out = got.iter().sum::<f64>() / m as f64;
            prop_assert!((mean_in - mean_out).abs() < 1e-9);
        }

        #[test]
        fn resize_stays_within_input_range(
            h in 2usize..12, w in 2usize..12, oh in 1usize..20, ow in 1usize..20,
            seed in any::<u64>(),
        ) {
            let img: Vec<f64> = (0..h * w)
                .map(|k| (((seed.wrapping_add(k as u64 * 0x9E37_79B9)) % 2001) as f64 - 1000.0) / 1000.0)
                .collect();
            let lo = img.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = img.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in resize_bilinear(&img, h, w, oh, ow).unwrap() {
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }
}
