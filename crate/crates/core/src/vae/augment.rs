use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{mse, Result, VaeError, VaeModel};
use crate::motion::{MotionError, MotionFrame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Candidates drawn per frame; the closest to ground truth is kept.
    pub best_of: usize,
    /// Radius of the position ball around ground truth, meters.
    pub d_p: f64,
    /// Velocity ratio band.
    pub d_v: f64,
    /// Scale applied to the encoder's sigma (0 gives the mean latent).
    pub noise_scale: f64,
    /// Apply the position/velocity clamps (rotations are always renormalized).
    pub refine: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            best_of: 2,
            d_p: 0.15,
            d_v: 2.0,
            noise_scale: 1.0,
            refine: true,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.best_of == 0 {
            return Err(VaeError::Config("best_of must be at least 1".into()));
        }
        if !(self.d_p > 0.0) {
            return Err(VaeError::Config("d_p must be positive".into()));
        }
        if !(self.d_v > 1.0) {
            return Err(VaeError::Config("d_v must exceed 1".into()));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(VaeError::Config("noise_scale must be non-negative".into()));
        }
        Ok(())
    }
}

const ZERO_VEL: f64 = 1e-6;

/// Pull a generated frame back into a band around ground truth and
/// renormalize its rotation blocks.
pub fn refine_frame(
    pred: &MotionFrame,
    gt: &MotionFrame,
    d_p: f64,
    d_v: f64,
) -> std::result::Result<MotionFrame, MotionError> {
    let mut out = pred.clone();
    for off in MotionFrame::position_offsets() {
        let g = gt.vec3(off);
        let d = out.vec3(off) - g;
        let n = d.norm();
        if n > d_p {
            out.set_vec3(off, &(g + d * (d_p / n)));
        }
    }
    for off in MotionFrame::velocity_offsets() {
        for i in off..off + 3 {
            let v = gt.as_slice()[i];
            let (lo, hi) = if v.abs() < ZERO_VEL {
                (-ZERO_VEL * d_v, ZERO_VEL * d_v)
            } else {
                let (a, b) = (v * d_v, v / d_v);
                (a.min(b), a.max(b))
            };
            let x = &mut out.as_mut_slice()[i];
            *x = x.clamp(lo, hi);
        }
    }
    out.renormalize_rotations()?;
    Ok(out)
}

/// Generate a variant of `reference` frame by frame, guided by it.
///
/// The first frame is copied. At step `t` the model encodes the ground
/// truth `x_t` against the previous generated frame, decodes `best_of`
/// latent draws from the same condition, keeps the candidate with the
/// lowest MSE to `x_t`, and refines it.
pub fn augment_sequence<R: Rng>(
    model: &VaeModel,
    reference: &[MotionFrame],
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<Vec<MotionFrame>> {
    cfg.validate()?;
    if model.trained_epochs == 0 {
        return Err(VaeError::Untrained);
    }
    if reference.len() < 2 {
        return Err(VaeError::Motion(MotionError::TooShort {
            need: 2,
            got: reference.len(),
        }));
    }
    let latent = model.config.latent_dim;
    let mut out = Vec::with_capacity(reference.len());
    out.push(reference[0].clone());
    for gt in &reference[1..] {
        let prev = out.last().expect("non-empty").as_slice().to_vec();
        let (mu, sigma) = model.encode(gt.as_slice(), &prev)?;
        let z = Array2::from_shape_fn((cfg.best_of, latent), |(_, j)| {
            let eta: f64 = rng.sample(StandardNormal);
            mu[j] + cfg.noise_scale * sigma[j] * eta
        });
        let (cands, _) = model.decode_batch(&z, &prev)?;
        let best = cands
            .into_iter()
            .map(|c| (mse(&c, gt.as_slice()), c))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("best_of >= 1")
            .1;
        let best = MotionFrame::from_vec(best)?;
        let frame = if cfg.refine {
            refine_frame(&best, gt, cfg.d_p, cfg.d_v)?
        } else {
            let mut f = best;
            f.renormalize_rotations()?;
            f
        };
        out.push(frame);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{build_frames, gen_synthetic_motion, MotionKind, Skeleton};
    use crate::rotmath::sixd_to_rot;
    use crate::vae::tests::tiny_config;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reference(n_sec: f64) -> Vec<MotionFrame> {
        let skel = Skeleton::smpl_default();
        let seq = gen_synthetic_motion(MotionKind::Walk, n_sec, 5, &skel).unwrap();
        build_frames(&skel, &seq).unwrap()
    }

    fn fitted_model() -> VaeModel {
        let mut m = VaeModel::new(tiny_config()).unwrap();
        m.normalizer = crate::vae::Normalizer::fit(reference(1.0).iter());
        m.trained_epochs = 1;
        m
    }

    #[test]
    fn untrained_and_short_inputs_fail() {
        let mut m = fitted_model();
        let r = reference(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            augment_sequence(&m, &r[..1], &AugmentConfig::default(), &mut rng),
            Err(VaeError::Motion(MotionError::TooShort { .. }))
        ));
        m.trained_epochs = 0;
        assert!(matches!(
            augment_sequence(&m, &r, &AugmentConfig::default(), &mut rng),
            Err(VaeError::Untrained)
        ));
    }

    #[test]
    fn deterministic_collapse_without_noise() {
        let m = fitted_model();
        let r = reference(0.3);
        let cfg = AugmentConfig {
            best_of: 1,
            noise_scale: 0.0,
            refine: false,
            ..AugmentConfig::default()
        };
        let out = augment_sequence(&m, &r, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let again = augment_sequence(&m, &r, &cfg, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        assert_eq!(out, again);
        // replay with the mean latent
        let mut prev = r[0].clone();
        for t in 1..r.len() {
            let (mu, _) = m.encode(r[t].as_slice(), prev.as_slice()).unwrap();
            let mut f = MotionFrame::from_vec(m.decode(&mu, prev.as_slice()).unwrap()).unwrap();
            f.renormalize_rotations().unwrap();
            assert_eq!(f, out[t]);
            prev = f;
        }
    }

    #[test]
    fn refined_output_respects_bands() {
        let m = fitted_model();
        let r = reference(0.5);
        let out = augment_sequence(
            &m,
            &r,
            &AugmentConfig::default(),
            &mut ChaCha8Rng::seed_from_u64(2),
        )
        .unwrap();
        assert_eq!(out.len(), r.len());
        for (o, g) in out.iter().zip(&r) {
            for off in MotionFrame::position_offsets() {
                assert!((o.vec3(off) - g.vec3(off)).norm() <= 0.15 + 1e-12);
            }
            for off in MotionFrame::rotation_offsets() {
                assert!(sixd_to_rot(&o.sixd(off)).unwrap().orthonormality_error() < 1e-9);
                let s = o.sixd(off).0;
                let c1 = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
                assert!((c1 - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn larger_best_of_lowers_mean_error() {
        let m = fitted_model();
        let r = reference(0.2);
        let prev = r[3].as_slice();
        let gt = r[4].as_slice();
        let (mu, sigma) = m.encode(gt, prev).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut draw = |n: usize| {
            let z = Array2::from_shape_fn((n, 4), |(_, j)| {
                let e: f64 = rng.sample(StandardNormal);
                mu[j] + sigma[j] * e
            });
            let (c, _) = m.decode_batch(&z, prev).unwrap();
            c.iter().map(|c| mse(c, gt)).fold(f64::INFINITY, f64::min)
        };
        let trials = 300;
        let one: f64 = (0..trials).map(|_| draw(1)).sum::<f64>() / trials as f64;
        let four: f64 = (0..trials).map(|_| draw(4)).sum::<f64>() / trials as f64;
        assert!(four <= one, "{four} > {one}");
    }

    #[test]
    fn velocity_band_examples() {
        let mut gt = MotionFrame::zeros();
        gt.as_mut_slice()[3] = 1.0;
        gt.as_mut_slice()[4] = -1.0;
        let mut p = MotionFrame::zeros();
        p.as_mut_slice()[3] = 5.0;
        p.as_mut_slice()[4] = 0.1;
        p.as_mut_slice()[5] = 0.3;
        for off in MotionFrame::rotation_offsets() {
            gt.set_sixd(off, &crate::rotmath::SixD::identity());
            p.set_sixd(off, &crate::rotmath::SixD::identity());
        }
        let r = refine_frame(&p, &gt, 0.15, 2.0).unwrap();
        assert_eq!(r.as_slice()[3], 2.0);
        assert_eq!(r.as_slice()[4], -0.5);
        assert_eq!(r.as_slice()[5], 2e-6);
    }

    proptest! {
        #[test]
        fn refinement_bounds_hold(vals in proptest::collection::vec(-3.0f64..3.0, 240), gts in proptest::collection::vec(-1.0f64..1.0, 240)) {
            let mut p = MotionFrame::from_vec(vals).unwrap();
            let mut g = MotionFrame::from_vec(gts).unwrap();
            // keep the 6D blocks away from degeneracy
            for off in MotionFrame::rotation_offsets() {
                p.as_mut_slice()[off] += 5.0;
                p.as_mut_slice()[off + 4] += 5.0;
                g.as_mut_slice()[off] += 5.0;
                g.as_mut_slice()[off + 4] += 5.0;
            }
            let r = refine_frame(&p, &g, 0.15, 2.0).unwrap();
            for off in MotionFrame::position_offsets() {
                prop_assert!((r.vec3(off) - g.vec3(off)).norm() <= 0.15 + 1e-12);
            }
            for off in MotionFrame::velocity_offsets() {
                for i in off..off + 3 {
                    let (v, x) = (g.as_slice()[i], r.as_slice()[i]);
                    if v.abs() >= 1e-6 {
                        prop_assert!(x.abs() >= v.abs() / 2.0 - 1e-15 && x.abs() <= 2.0 * v.abs() + 1e-15);
                        prop_assert!(x * v > 0.0);
                    }
                }
            }
            for off in MotionFrame::rotation_offsets() {
                prop_assert!(sixd_to_rot(&r.sixd(off)).unwrap().orthonormality_error() < 1e-9);
            }
        }
    }
}
