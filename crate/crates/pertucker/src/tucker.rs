//! Standard Tucker decomposition: HOSVD initialization refined by HOOI
//! (higher-order orthogonal iteration), plus the two single-decomposition
//! baselines built from it (one shared decomposition of all sources, one
//! decomposition per source).
//!
//! [`ModalTucker`] factors only a subset of modes and leaves the others
//! untouched (an implicit identity factor). That is how sample modes are
//! handled throughout: per-sample structure lives in the core.

use crate::error::{Error, Result};
use crate::linalg::{top_eigvecs, FactorMatrix};
use crate::tensor::Tensor;

pub const DEFAULT_HOOI_SWEEPS: usize = 50;
pub const DEFAULT_HOOI_TOL: f64 = 1e-8;

/// Tucker model over every mode of the decomposed tensor.
#[derive(Debug, Clone)]
pub struct TuckerModel {
    pub factors: Vec<FactorMatrix>,
    pub core: Tensor,
}

/// Tucker model over a subset of modes; the remaining modes pass through.
#[derive(Debug, Clone)]
pub struct ModalTucker {
    /// Decomposed modes, strictly increasing.
    pub modes: Vec<usize>,
    /// One factor per entry of `modes`, `factors[i].rows() == dims[modes[i]]`.
    pub factors: Vec<FactorMatrix>,
    pub core: Tensor,
}

impl ModalTucker {
    pub fn reconstruct(&self) -> Result<Tensor> {
        let mut acc = self.core.clone();
        for (f, &mode) in self.factors.iter().zip(&self.modes) {
            acc = acc.mode_product(f.matrix(), mode)?;
        }
        Ok(acc)
    }

    /// Project `y` onto the factors, i.e. the optimal core for this basis.
    pub fn project(&self, y: &Tensor) -> Result<Tensor> {
        let mut acc = y.clone();
        for (f, &mode) in self.factors.iter().zip(&self.modes) {
            acc = acc.mode_product(&f.t(), mode)?;
        }
        Ok(acc)
    }
}

fn check_ranks(y: &Tensor, ranks: &[usize], modes: &[usize]) -> Result<()> {
    if ranks.len() != modes.len() {
        return Err(Error::arg("one rank per decomposed mode required"));
    }
    let mut prev: Option<usize> = None;
    for (&r, &m) in ranks.iter().zip(modes) {
        if m >= y.ndim() {
            return Err(Error::arg(format!("mode {} out of range", m)));
        }
        if let Some(p) = prev {
            if m <= p {
                return Err(Error::arg("modes must be strictly increasing"));
            }
        }
        prev = Some(m);
        if r == 0 || r > y.dims()[m] {
            return Err(Error::arg(format!(
                "rank {} out of range for mode {} of length {}",
                r, m, y.dims()[m]
            )));
        }
    }
    Ok(())
}

/// HOSVD restricted to `modes`: factor for mode k is the top-rank_k
/// eigenbasis of the unfolding Gram matrix, the core is the projection.
pub fn hosvd_on_modes(y: &Tensor, ranks: &[usize], modes: &[usize]) -> Result<ModalTucker> {
    check_ranks(y, ranks, modes)?;
    let mut factors = Vec::with_capacity(modes.len());
    for (&r, &mode) in ranks.iter().zip(modes) {
        let unfolded = y.unfold(mode)?;
        let (f, _) = top_eigvecs(&unfolded.gram(), r)?;
        factors.push(f);
    }
    let mut model = ModalTucker {
        modes: modes.to_vec(),
        factors,
        core: Tensor::zeros(vec![1]),
    };
    model.core = model.project(y)?;
    Ok(model)
}

/// HOOI restricted to `modes`: alternating eigen-updates starting from
/// HOSVD. The reconstruction error is nonincreasing across sweeps; stops
/// when the relative error improves by less than `tol` or after
/// `max_sweeps`.
pub fn hooi_on_modes(
    y: &Tensor,
    ranks: &[usize],
    modes: &[usize],
    max_sweeps: usize,
    tol: f64,
) -> Result<ModalTucker> {
    let mut model = hosvd_on_modes(y, ranks, modes)?;
    let norm_sq = y.frob_norm_sq();
    if norm_sq == 0.0 {
        return Ok(model);
    }
    let mut prev_err = rel_err(norm_sq, model.core.frob_norm_sq());
    for _ in 0..max_sweeps {
        for i in 0..model.modes.len() {
            let mode = model.modes[i];
            let mut w = y.clone();
            for (j, &other) in model.modes.iter().enumerate() {
                if j != i {
                    w = w.mode_product(&model.factors[j].t(), other)?;
                }
            }
            let unfolded = w.unfold(mode)?;
            let (f, _) = top_eigvecs(&unfolded.gram(), ranks[i])?;
            model.factors[i] = f;
        }
        model.core = model.project(y)?;
        let err = rel_err(norm_sq, model.core.frob_norm_sq());
        if prev_err - err < tol {
            break;
        }
        prev_err = err;
    }
    Ok(model)
}

/// For orthonormal factors, ‖Y − reconstruction‖² = ‖Y‖² − ‖core‖².
fn rel_err(norm_sq: f64, core_sq: f64) -> f64 {
    ((norm_sq - core_sq).max(0.0) / norm_sq).sqrt()
}

/// HOSVD over every mode.
pub fn hosvd(y: &Tensor, ranks: &[usize]) -> Result<TuckerModel> {
    let modes: Vec<usize> = (0..y.ndim()).collect();
    let m = hosvd_on_modes(y, ranks, &modes)?;
    Ok(TuckerModel {
        factors: m.factors,
        core: m.core,
    })
}

/// HOOI over every mode.
pub fn hooi(y: &Tensor, ranks: &[usize], max_sweeps: usize, tol: f64) -> Result<TuckerModel> {
    let modes: Vec<usize> = (0..y.ndim()).collect();
    let m = hooi_on_modes(y, ranks, &modes, max_sweeps, tol)?;
    Ok(TuckerModel {
        factors: m.factors,
        core: m.core,
    })
}

pub fn reconstruct(m: &TuckerModel) -> Result<Tensor> {
    let mut acc = m.core.clone();
    for (k, f) in m.factors.iter().enumerate() {
        acc = acc.mode_product(f.matrix(), k)?;
    }
    Ok(acc)
}

/// Shared-decomposition baseline: concatenate the sources along the sample
/// mode and fit one Tucker over the data modes.
pub fn global_tucker(
    sources: &[Tensor],
    ranks: &[usize],
    max_sweeps: usize,
    tol: f64,
) -> Result<ModalTucker> {
    let refs: Vec<&Tensor> = sources.iter().collect();
    let all = Tensor::concat_last(&refs)?;
    let modes: Vec<usize> = (0..all.ndim() - 1).collect();
    hooi_on_modes(&all, ranks, &modes, max_sweeps, tol)
}

/// Per-source baseline: one independent Tucker per source over its data
/// modes.
pub fn local_tucker(
    sources: &[Tensor],
    ranks: &[usize],
    max_sweeps: usize,
    tol: f64,
) -> Result<Vec<ModalTucker>> {
    sources
        .iter()
        .map(|y| {
            let modes: Vec<usize> = (0..y.ndim() - 1).collect();
            hooi_on_modes(y, ranks, &modes, max_sweeps, tol)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormalize;
    use crate::tensor::Matrix;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_tensor(dims: &[usize], rng: &mut ChaCha12Rng) -> Tensor {
        let len = dims.iter().product();
        let data = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Tensor::new(dims.to_vec(), data).unwrap()
    }

    fn random_low_rank(dims: &[usize], ranks: &[usize], rng: &mut ChaCha12Rng) -> Tensor {
        let core = random_tensor(ranks, rng);
        let mut acc = core;
        for (k, (&d, &r)) in dims.iter().zip(ranks).enumerate() {
            let f = orthonormalize(&Matrix::from_fn(d, r, |_, _| rng.gen_range(-1.0..1.0)))
                .unwrap();
            acc = acc.mode_product(f.matrix(), k).unwrap();
        }
        acc
    }

    #[test]
    fn hosvd_recovers_exact_low_rank() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let y = random_low_rank(&[6, 5, 4], &[2, 3, 2], &mut rng);
        let m = hosvd(&y, &[2, 3, 2]).unwrap();
        let err = reconstruct(&m).unwrap().sub(&y).unwrap().frob_norm();
        assert!(err <= 1e-9 * y.frob_norm());
    }

    #[test]
    fn hosvd_full_ranks_is_lossless() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let y = random_tensor(&[4, 3, 5], &mut rng);
        let m = hosvd(&y, &[4, 3, 5]).unwrap();
        let err = reconstruct(&m).unwrap().sub(&y).unwrap().frob_norm();
        assert!(err <= 1e-10 * y.frob_norm());
    }

    #[test]
    fn hosvd_rejects_rank_overflow() {
        let y = Tensor::zeros(vec![3, 3]);
        assert!(hosvd(&y, &[4, 2]).is_err());
        assert!(hosvd(&y, &[2]).is_err());
    }

    #[test]
    fn hosvd_beats_random_factor_draws() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let y = random_tensor(&[6, 5, 4], &mut rng);
        let ranks = [3, 3, 3];
        let m = hosvd(&y, &ranks).unwrap();
        let base = reconstruct(&m).unwrap().sub(&y).unwrap().frob_norm();
        for _ in 0..100 {
            let mut competitor = ModalTucker {
                modes: vec![0, 1, 2],
                factors: (0..3)
                    .map(|k| {
                        orthonormalize(&Matrix::from_fn(y.dims()[k], ranks[k], |_, _| {
                            rng.gen_range(-1.0..1.0)
                        }))
                        .unwrap()
                    })
                    .collect(),
                core: Tensor::zeros(vec![1]),
            };
            competitor.core = competitor.project(&y).unwrap();
            let err = competitor
                .reconstruct()
                .unwrap()
                .sub(&y)
                .unwrap()
                .frob_norm();
            assert!(base <= err + 1e-9);
        }
    }

    #[test]
    fn hooi_converges_immediately_on_exact_input() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let y = random_low_rank(&[6, 5, 4], &[2, 2, 2], &mut rng);
        let m = hooi(&y, &[2, 2, 2], 1, 1e-8).unwrap();
        let err = reconstruct(&m).unwrap().sub(&y).unwrap().frob_norm();
        assert!(err <= 1e-9 * y.frob_norm());
    }

    #[test]
    fn hooi_error_nonincreasing_and_beats_hosvd() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let y = random_tensor(&[8, 8, 8], &mut rng);
        let ranks = [2, 2, 2];

        let hosvd_model = hosvd(&y, &ranks).unwrap();
        let hosvd_err = reconstruct(&hosvd_model).unwrap().sub(&y).unwrap().frob_norm();

        // sweep-by-sweep errors via increasing sweep caps
        let mut prev = hosvd_err;
        for sweeps in 1..=5 {
            let m = hooi(&y, &ranks, sweeps, 0.0).unwrap();
            let err = reconstruct(&m).unwrap().sub(&y).unwrap().frob_norm();
            assert!(err <= prev + 1e-10, "sweep {}: {} > {}", sweeps, err, prev);
            prev = err;
        }
        assert!(prev <= hosvd_err + 1e-10);
    }

    #[test]
    fn projected_core_beats_perturbed_cores() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let y = random_tensor(&[5, 4, 3], &mut rng);
        let m = hosvd(&y, &[2, 2, 2]).unwrap();
        let base = reconstruct(&m).unwrap().sub(&y).unwrap().frob_norm();
        for _ in 0..100 {
            let noise = random_tensor(m.core.dims(), &mut rng).scale(0.1);
            let perturbed = TuckerModel {
                factors: m.factors.clone(),
                core: m.core.add(&noise).unwrap(),
            };
            let err = reconstruct(&perturbed).unwrap().sub(&y).unwrap().frob_norm();
            assert!(base <= err + 1e-9);
        }
    }

    #[test]
    fn reconstruct_edge_cases() {
        let core = Tensor::zeros(vec![2, 2]);
        let m = TuckerModel {
            factors: vec![
                FactorMatrix::identity(4, 2).unwrap(),
                FactorMatrix::identity(3, 2).unwrap(),
            ],
            core,
        };
        assert!(reconstruct(&m).unwrap().data().iter().all(|&v| v == 0.0));

        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let core = random_tensor(&[3, 3], &mut rng);
        let m = TuckerModel {
            factors: vec![
                FactorMatrix::identity(3, 3).unwrap(),
                FactorMatrix::identity(3, 3).unwrap(),
            ],
            core: core.clone(),
        };
        assert_eq!(reconstruct(&m).unwrap(), core);
    }

    #[test]
    fn modal_tucker_leaves_sample_mode_alone() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let y = random_tensor(&[6, 5, 7], &mut rng);
        let m = hooi_on_modes(&y, &[2, 2], &[0, 1], 10, 1e-8).unwrap();
        assert_eq!(m.core.dims(), &[2, 2, 7]);
        assert_eq!(m.reconstruct().unwrap().dims(), y.dims());
    }
}
