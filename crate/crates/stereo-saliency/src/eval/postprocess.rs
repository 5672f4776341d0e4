//! Report-time conditioning shared by all compared models: blur, center
//! prior mixing, and histogram matching against the gaze maps.

use crate::error::{Error, Result};
use crate::eval::baselines::{center_map, default_center_sigma};
use crate::eval::metrics::auc_judd;
use crate::raster::{gaussian_blur, normalize01, RasterMap};

/// Center-weight grid searched during tuning.
pub const TUNE_CENTER_WEIGHTS: [f64; 6] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
/// Blur-sigma grid searched during tuning, in pixels.
pub const TUNE_BLUR_SIGMAS: [f64; 5] = [0.0, 15.0, 30.0, 60.0, 90.0];

/// Blur the map, mix in the center prior, rescale to [0, 1]:
/// `normalize01((1 - w) * blur(sal, sigma) + w * center)`.
pub fn postprocess(sal: &RasterMap, center_weight: f64, blur_sigma: f64) -> Result<RasterMap> {
    if !(0.0..=1.0).contains(&center_weight) || !center_weight.is_finite() {
        return Err(Error::invalid(format!(
            "center weight must lie in [0, 1], got {center_weight}"
        )));
    }
    let (w, h) = sal.dims();
    let blurred = gaussian_blur(sal, blur_sigma)?;
    let center = center_map(w, h, default_center_sigma(w, h))?;
    let mixed = blurred.zip_map(&center, |b, c| {
        ((1.0 - center_weight) * f64::from(b) + center_weight * f64::from(c)) as f32
    })?;
    normalize01(&mixed)
}

/// Grid search over [`TUNE_CENTER_WEIGHTS`] x [`TUNE_BLUR_SIGMAS`]
/// maximizing mean fixation ROC area over the training frames. Frames
/// without fixations are skipped; ties keep the smallest weight, then the
/// smallest sigma. Returns `(center_weight, blur_sigma)`.
pub fn tune_postprocess(
    sals: &[RasterMap],
    fixations: &[Vec<(f32, f32)>],
) -> Result<(f64, f64)> {
    if sals.len() != fixations.len() {
        return Err(Error::dims(format!(
            "{} maps vs {} fixation lists",
            sals.len(),
            fixations.len()
        )));
    }
    let mut totals = [[0f64; TUNE_BLUR_SIGMAS.len()]; TUNE_CENTER_WEIGHTS.len()];
    let mut scored_frames = 0usize;
    for (sal, fix) in sals.iter().zip(fixations) {
        if fix.is_empty() {
            continue;
        }
        scored_frames += 1;
        let (w, h) = sal.dims();
        let center = center_map(w, h, default_center_sigma(w, h))?;
        for (si, &sigma) in TUNE_BLUR_SIGMAS.iter().enumerate() {
            let blurred = gaussian_blur(sal, sigma)?;
            for (wi, &cw) in TUNE_CENTER_WEIGHTS.iter().enumerate() {
                // The ROC area only sees the ranking, so the final
                // rescale in `postprocess` can be skipped here.
                let mixed = blurred.zip_map(&center, |b, c| {
                    ((1.0 - cw) * f64::from(b) + cw * f64::from(c)) as f32
                })?;
                totals[wi][si] += auc_judd(&mixed, fix)?;
            }
        }
    }
    if scored_frames == 0 {
        return Err(Error::MissingInput(
            "tuning needs at least one frame with fixations".into(),
        ));
    }
    let mut best = (0usize, 0usize);
    for wi in 0..TUNE_CENTER_WEIGHTS.len() {
        for si in 0..TUNE_BLUR_SIGMAS.len() {
            if totals[wi][si] > totals[best.0][best.1] {
                best = (wi, si);
            }
        }
    }
    Ok((TUNE_CENTER_WEIGHTS[best.0], TUNE_BLUR_SIGMAS[best.1]))
}

/// Remap the map's values so their empirical distribution becomes the
/// reference's, preserving the saliency ordering exactly: the r-th
/// smallest output value is the r-th smallest reference value, with ties
/// in the input broken by pixel index.
pub fn histogram_match(sal: &RasterMap, reference: &RasterMap) -> Result<RasterMap> {
    if sal.dims() != reference.dims() {
        return Err(Error::dims(format!(
            "map {}x{} vs reference {}x{}",
            sal.width(),
            sal.height(),
            reference.width(),
            reference.height()
        )));
    }
    let order = sal.argsort();
    let mut ref_sorted = reference.as_slice().to_vec();
    ref_sorted.sort_by(f32::total_cmp);
    let mut out = vec![0f32; sal.len()];
    for (rank, &idx) in order.iter().enumerate() {
        out[idx] = ref_sorted[rank];
    }
    RasterMap::from_vec(sal.width(), sal.height(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::baselines::chance_map;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spanning_map(w: usize, h: usize, seed: u64) -> RasterMap {
        let mut m = chance_map(w, h, seed);
        m.set(0, 0, 0.0);
        m.set(w - 1, h - 1, 1.0);
        m
    }

    #[test]
    fn no_blur_no_center_is_the_identity_on_a_spanning_map() {
        let m = spanning_map(48, 36, 1);
        assert_eq!(postprocess(&m, 0.0, 0.0).unwrap(), m);
    }

    #[test]
    fn full_center_weight_ignores_the_input() {
        let m = spanning_map(48, 36, 2);
        let out = postprocess(&m, 1.0, 17.0).unwrap();
        let center = center_map(48, 36, default_center_sigma(48, 36)).unwrap();
        assert_eq!(out, center);
    }

    #[test]
    fn blur_only_matches_the_rescaled_blur() {
        let m = spanning_map(40, 40, 3);
        let out = postprocess(&m, 0.0, 2.5).unwrap();
        let expected = normalize01(&gaussian_blur(&m, 2.5).unwrap()).unwrap();
        assert_eq!(out, expected);
    }

    #[test]
    fn invalid_knobs_are_rejected() {
        let m = spanning_map(16, 16, 4);
        assert!(postprocess(&m, -0.1, 0.0).is_err());
        assert!(postprocess(&m, 1.1, 0.0).is_err());
        assert!(postprocess(&m, 0.2, -1.0).is_err());
    }

    #[test]
    fn tuning_on_center_biased_gazes_buys_the_center_prior() {
        let (w, h) = (60, 45);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut normal = move || {
            let u1: f64 = 1.0 - rng.random::<f64>();
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        };
        let sals: Vec<RasterMap> = (0..10).map(|i| chance_map(w, h, 100 + i)).collect();
        let fixations: Vec<Vec<(f32, f32)>> = (0..10)
            .map(|_| {
                (0..10)
                    .map(|_| {
                        let x = (30.0 + 8.0 * normal()).clamp(1.0, w as f64 - 2.0);
                        let y = (22.0 + 8.0 * normal()).clamp(1.0, h as f64 - 2.0);
                        (x as f32, y as f32)
                    })
                    .collect()
            })
            .collect();
        let (cw, sigma) = tune_postprocess(&sals, &fixations).unwrap();
        assert!(cw > 0.0, "picked weight {cw}");
        assert!(TUNE_CENTER_WEIGHTS.contains(&cw));
        assert!(TUNE_BLUR_SIGMAS.contains(&sigma));
    }

    #[test]
    fn tuning_without_fixations_is_missing_input() {
        let sals = vec![chance_map(16, 16, 0)];
        let fixations = vec![Vec::new()];
        assert!(matches!(
            tune_postprocess(&sals, &fixations),
            Err(Error::MissingInput(_))
        ));
    }

    #[test]
    fn matching_a_map_to_itself_changes_nothing() {
        let m = chance_map(37, 23, 6);
        assert_eq!(histogram_match(&m, &m).unwrap(), m);
    }

    #[test]
    fn matched_output_takes_exactly_the_reference_values() {
        let sal = chance_map(30, 20, 7);
        let reference = chance_map(30, 20, 8);
        let out = histogram_match(&sal, &reference).unwrap();
        let mut got = out.as_slice().to_vec();
        let mut want = reference.as_slice().to_vec();
        got.sort_by(f32::total_cmp);
        want.sort_by(f32::total_cmp);
        assert_eq!(got, want);
    }

    #[test]
    fn matching_preserves_the_saliency_ordering_even_with_ties() {
        // Heavily quantized input forces long runs of equal values.
        let sal = RasterMap::from_fn(25, 18, |x, y| ((x + y) % 5) as f32 / 4.0);
        let reference = chance_map(25, 18, 9);
        let out = histogram_match(&sal, &reference).unwrap();
        assert_eq!(out.argsort(), sal.argsort());
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = chance_map(10, 10, 1);
        let b = chance_map(12, 10, 1);
        assert!(histogram_match(&a, &b).is_err());
    }
}
