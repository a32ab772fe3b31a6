//! End-to-end acceptance checks, one test per criterion.
//!
//! Every oracle here is computed independently of the library code it
//! checks: direct window sums for SSIM, the naive DFT for the FFT, a dense
//! eigendecomposition for PCA, central differences for gradients and full
//! enumeration for the rank tests.

use std::f64::consts::TAU;
use std::fs;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use oodbench::artifacts::{
    add_black_stripe, add_circle, bias_field, elastic_deform, ghosting, motion_artifact,
    noise_artifact, patch_swap, spike, ArtifactFamily, ArtifactResult, BiasDraw,
};
use oodbench::dataset::{generate_subjects, PhantomConfig, Role};
use oodbench::evaluation::{
    mann_whitney_u_with, pr_curve, spearman_rho, wilcoxon_signed_rank_with, TestMethod,
};
use oodbench::fourier::{fft2_real, ifft2};
use oodbench::metrics::{ssim_maps, SsimConfig};
use oodbench::pipeline::{paper_suite, run_experiment, Results};
use oodbench::reconstructors::{
    fit_linear_ae, fit_pca, fit_pca_images, loss_and_gradient, mean_loss, select_checkpoint,
    CheckpointPolicy, LinearAeModel, Loss, ReconstructorConfig,
};
use oodbench::rng::SplitMix64;
use oodbench::{Image, Mask2D};

fn verdict(n: usize, name: &str, elapsed: Duration, failures: &[String]) {
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    println!(
        "criterion {n} [{status}] {name} ({:.1} s)",
        elapsed.as_secs_f64()
    );
    for f in failures {
        println!("  {f}");
    }
    assert!(
        failures.is_empty(),
        "criterion {n} failed:\n{}",
        failures.join("\n")
    );
}

fn random_image(rng: &mut SplitMix64, w: usize, h: usize) -> Image {
    Image::from_fn(w, h, |_, _| rng.next_f64())
}

fn phantoms(size: usize, n: usize, seed: u64) -> Vec<Image> {
    let cfg = PhantomConfig {
        size,
        seed,
        n_subjects: n,
        slices_per_subject: 1,
    };
    let subjects: Vec<usize> = (0..n).collect();
    generate_subjects(&cfg, Role::Train, &subjects)
        .unwrap()
        .images
}

// ---------------------------------------------------------------- SSIM

fn mirror(i: isize, n: usize) -> usize {
    // scipy-style "mirror": ... 2 1 | 0 1 2 ... n-1 | n-2 ...
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

/// Contrast, luminance, structure and SSIM at one pixel from the raw window.
fn ssim_at(x: &Image, y: &Image, px: usize, py: usize, cfg: &SsimConfig) -> [f64; 4] {
    let r = (cfg.window / 2) as isize;
    let (w, h) = x.dims();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            let qx = mirror(px as isize + dx, w);
            let qy = mirror(py as isize + dy, h);
            a.push(x.get(qx, qy));
            b.push(y.get(qx, qy));
        }
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let va = a.iter().map(|v| (v - ma).powi(2)).sum::<f64>() / n;
    let vb = b.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / n;
    let cov = (a
        .iter()
        .zip(&b)
        .map(|(p, q)| (p - ma) * (q - mb))
        .sum::<f64>()
        / n)
        .max(0.0);
    let (sa, sb) = (va.sqrt(), vb.sqrt());
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    let c = clamp((2.0 * sa * sb + cfg.c2) / (va + vb + cfg.c2));
    let l = clamp((2.0 * ma * mb + cfg.c1) / (ma * ma + mb * mb + cfg.c1));
    let s = clamp((cov + cfg.c3) / (sa * sb + cfg.c3));
    [c, l, s, c * l * s]
}

#[test]
fn criterion_1_ssim_matches_direct_window_evaluation() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let cfg = SsimConfig::default();
    let mut rng = SplitMix64::new(11);
    let mut worst: f64 = 0.0;
    for pair in 0..50 {
        let x = random_image(&mut rng, 16, 16);
        // half the pairs are correlated
        let y = if pair % 2 == 0 {
            random_image(&mut rng, 16, 16)
        } else {
            let jitter = random_image(&mut rng, 16, 16);
            x.zip_map(&jitter, |v, j| 0.8 * v + 0.2 * j).unwrap()
        };
        let maps = ssim_maps(&x, &y, &cfg).unwrap();
        for py in 0..16 {
            for px in 0..16 {
                let want = ssim_at(&x, &y, px, py, &cfg);
                let got = [
                    maps.contrast.get(px, py),
                    maps.luminance.get(px, py),
                    maps.structure.get(px, py),
                    maps.ssim.get(px, py),
                ];
                for (g, w) in got.iter().zip(&want) {
                    worst = worst.max((g - w).abs());
                }
            }
        }
        let own = ssim_maps(&x, &x, &cfg).unwrap();
        let off = own
            .ssim
            .data()
            .iter()
            .map(|v| (v - 1.0).abs())
            .fold(0.0, f64::max);
        if off > 1e-9 {
            failures.push(format!(
                "pair {pair}: ssim(x, x) deviates from 1 by {off:e}"
            ));
        }
    }
    if worst > 1e-10 {
        failures.push(format!(
            "largest deviation from the window oracle {worst:e}"
        ));
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(5) {
        failures.push(format!("took {elapsed:?}"));
    }
    verdict(1, "SSIM window oracle", elapsed, &failures);
}

// ----------------------------------------------------------------- FFT

#[test]
fn criterion_2_fft_matches_naive_dft() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut rng = SplitMix64::new(22);

    let n = 8;
    let img = random_image(&mut rng, n, n);
    let k = fft2_real(&img).unwrap();
    let mut worst: f64 = 0.0;
    for v in 0..n {
        for u in 0..n {
            let (mut re, mut im) = (0.0, 0.0);
            for y in 0..n {
                for x in 0..n {
                    let angle = -TAU * ((u * x) as f64 / n as f64 + (v * y) as f64 / n as f64);
                    re += img.get(x, y) * angle.cos();
                    im += img.get(x, y) * angle.sin();
                }
            }
            let got = k.get(u, v);
            worst = worst.max((got.re - re).abs()).max((got.im - im).abs());
        }
    }
    if worst > 1e-9 {
        failures.push(format!("8x8 DFT deviation {worst:e}"));
    }

    let (mut trip, mut parseval): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let img = random_image(&mut rng, 64, 64);
        let k = fft2_real(&img).unwrap();
        let back = ifft2(&k).unwrap();
        for (i, v) in img.data().iter().enumerate() {
            trip = trip.max((back.re()[i] - v).abs()).max(back.im()[i].abs());
        }
        let spatial: f64 = img.data().iter().map(|v| v * v).sum();
        let spectral = k.energy() / (64.0 * 64.0);
        parseval = parseval.max((spatial - spectral).abs() / spatial);
    }
    if trip > 1e-9 {
        failures.push(format!("round-trip deviation {trip:e}"));
    }
    if parseval > 1e-9 {
        failures.push(format!("relative Parseval deviation {parseval:e}"));
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(10) {
        failures.push(format!("took {elapsed:?}"));
    }
    verdict(2, "FFT oracle", elapsed, &failures);
}

// ------------------------------------------------------- reconstructors

/// Largest sine of the principal angles between two column spaces.
fn max_principal_sine(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let residual = &qa - &qb * (qb.transpose() * &qa);
    residual.singular_values().max()
}

fn pca_subspace_error() -> f64 {
    // d = 64 pixels, 200 samples, spectrum with a clear gap after k = 5
    let (w, h, k, n) = (8, 8, 5, 200);
    let d = w * h;
    let mut rng = SplitMix64::new(33);
    let basis: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.normal()).collect())
        .collect();
    let images: Vec<Image> = (0..n)
        .map(|_| {
            let coef: Vec<f64> = (0..k)
                .map(|j| rng.normal() * (3.0 - 0.4 * j as f64))
                .collect();
            let data = (0..d)
                .map(|p| {
                    0.5 + (0..k).map(|j| coef[j] * basis[j][p]).sum::<f64>() * 0.05
                        + rng.normal() * 0.002
                })
                .collect();
            Image::new(w, h, data).unwrap()
        })
        .collect();
    let model = fit_pca_images(&images, k, 1).unwrap();

    let mean: Vec<f64> = (0..d)
        .map(|p| images.iter().map(|i| i.data()[p]).sum::<f64>() / n as f64)
        .collect();
    let x = DMatrix::from_fn(n, d, |r, c| images[r].data()[c] - mean[c]);
    let cov = x.transpose() * &x / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let top = DMatrix::from_fn(d, k, |r, c| eig.eigenvectors[(r, order[c])]);
    let atoms = DMatrix::from_fn(d, k, |r, c| model.decoder_atom(c)[r]);
    max_principal_sine(&top, &atoms)
}

fn gradient_error() -> f64 {
    let (w, h, k) = (6, 6, 3);
    let d = w * h;
    let mut rng = SplitMix64::new(44);
    let batch: Vec<Image> = (0..5).map(|_| random_image(&mut rng, w, h)).collect();
    let model = LinearAeModel {
        width: w,
        height: h,
        latent_dim: k,
        mean: (0..d).map(|_| rng.uniform(0.3, 0.7)).collect(),
        encoder: (0..k * d).map(|_| rng.normal() * 0.2).collect(),
        decoder: (0..k * d).map(|_| rng.normal() * 0.2).collect(),
        epoch: 0,
        train_losses: Vec::new(),
        val_losses: Vec::new(),
    };
    let (_, grad) = loss_and_gradient(&model, &batch, Loss::L2).unwrap();
    let eps = 1e-6;
    let loss = |m: &LinearAeModel| loss_and_gradient(m, &batch, Loss::L2).unwrap().0;
    let (mut num, mut den) = (0.0, 0.0);
    for which in 0..2 {
        for i in 0..k * d {
            let mut plus = model.clone();
            let mut minus = model.clone();
            let (p, m, g) = if which == 0 {
                (&mut plus.encoder, &mut minus.encoder, grad.encoder[i])
            } else {
                (&mut plus.decoder, &mut minus.decoder, grad.decoder[i])
            };
            p[i] += eps;
            m[i] -= eps;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * eps);
            num += (g - fd).powi(2);
            den += fd * fd;
        }
    }
    (num / den).sqrt()
}

#[test]
fn criterion_3_reconstructors_match_their_oracles() {
    let start = Instant::now();
    let mut failures = Vec::new();

    let images = phantoms(32, 80, 3);
    let ids: Vec<String> = (0..80).map(|i| format!("s{i}")).collect();
    let train =
        oodbench::dataset::Corpus::new(Role::Train, ids[..64].to_vec(), images[..64].to_vec())
            .unwrap();
    let val = oodbench::dataset::Corpus::new(Role::Val, ids[64..].to_vec(), images[64..].to_vec())
        .unwrap();
    let pca = fit_pca(&train, 8, 5).unwrap();
    let store = fit_linear_ae(
        &train,
        &val,
        &ReconstructorConfig {
            latent_dim: 8,
            epochs: 500,
            seed: 5,
            ..ReconstructorConfig::default()
        },
    )
    .unwrap();
    let ae = select_checkpoint(&store, CheckpointPolicy::Final).unwrap();
    let pca_mse = mean_loss(&pca, &train.images, Loss::L2).unwrap();
    let ae_mse = mean_loss(&ae, &train.images, Loss::L2).unwrap();
    println!(
        "  AE train MSE {ae_mse:.6e}, PCA {pca_mse:.6e}, ratio {:.4}",
        ae_mse / pca_mse
    );
    if ae_mse > 1.05 * pca_mse {
        failures.push(format!(
            "AE MSE {ae_mse:e} exceeds 1.05 x PCA MSE {pca_mse:e}"
        ));
    }

    let sine = pca_subspace_error();
    println!("  PCA principal angle {sine:e}");
    if sine > 1e-6 {
        failures.push(format!("PCA subspace principal angle {sine:e}"));
    }

    let rel = gradient_error();
    println!("  gradient relative error {rel:e}");
    if rel > 1e-4 {
        failures.push(format!("gradient relative error {rel:e}"));
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(60) {
        failures.push(format!("took {elapsed:?}"));
    }
    verdict(3, "reconstructor oracles", elapsed, &failures);
}

// ------------------------------------------------------------ artifacts

type Apply = fn(&Image, u64) -> ArtifactResult;

fn changed(before: &Image, after: &Image) -> Vec<bool> {
    before
        .data()
        .iter()
        .zip(after.data())
        .map(|(a, b)| a != b)
        .collect()
}

#[test]
fn criterion_4_artifact_identity_limits_and_exact_masks() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let images = phantoms(64, 20, 4);

    let identity: [(&str, f64, Apply); 6] = [
        ("ghosting i=0", 1e-6, |img, s| {
            ghosting(img, 2, 0.0, s).unwrap()
        }),
        ("spike i=1e-12", 1e-6, |img, s| {
            spike(img, 2, 1e-12, s).unwrap()
        }),
        ("motion (0, 0)", 1e-6, |img, s| {
            motion_artifact(img, 0.0, 0.0, s).unwrap()
        }),
        ("noise sigma=0", 1e-9, |img, s| {
            noise_artifact(img, 0.0, s).unwrap()
        }),
        ("elastic d=0", 1e-9, |img, s| {
            elastic_deform(img, 7, 0.0, s).unwrap()
        }),
        ("bias n=0", 1e-9, |img, s| {
            bias_field(img, 0.0, BiasDraw::Uniform, s).unwrap()
        }),
    ];
    for (name, tol, apply) in identity {
        let worst = images
            .iter()
            .enumerate()
            .map(|(i, img)| apply(img, 100 + i as u64).image.max_abs_diff(img).unwrap())
            .fold(0.0, f64::max);
        if worst > tol {
            failures.push(format!("{name}: deviation {worst:e} > {tol:e}"));
        }
    }

    let local: [(ArtifactFamily, Apply); 4] = [
        (ArtifactFamily::CircleHard, |img, s| {
            add_circle(img, 6.0, 0.9, false, s).unwrap()
        }),
        (ArtifactFamily::CircleSmooth, |img, s| {
            add_circle(img, 6.0, 0.1, true, s).unwrap()
        }),
        (ArtifactFamily::BlackStripe, |img, s| {
            add_black_stripe(img, 2, s).unwrap()
        }),
        (ArtifactFamily::PatchSwap, |img, s| {
            patch_swap(img, 8, s).unwrap()
        }),
    ];
    for (family, apply) in local {
        for (i, img) in images.iter().enumerate() {
            let out = apply(img, 7 + 13 * i as u64);
            let want = changed(img, &out.image);
            let got: &Mask2D = &out.gt_mask;
            if got.bits() != want.as_slice() {
                let diff = got.bits().iter().zip(&want).filter(|(a, b)| a != b).count();
                failures.push(format!(
                    "{family} case {i}: {diff} pixels disagree with the changed set"
                ));
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(30) {
        failures.push(format!("took {elapsed:?}"));
    }
    verdict(4, "artifact identity limits and masks", elapsed, &failures);
}

// ----------------------------------------------------------- evaluation

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if n < k {
        return Vec::new();
    }
    let mut out = combinations(n - 1, k);
    for mut c in combinations(n - 1, k - 1) {
        c.push(n - 1);
        out.push(c);
    }
    out
}

fn ranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|v| {
            let below = values.iter().filter(|w| *w < v).count() as f64;
            let equal = values.iter().filter(|w| *w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// P(rank sum of a random size-|b| subset >= observed rank sum of b).
fn mann_whitney_enumerated(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let r = ranks(&pooled);
    let observed: f64 = r[a.len()..].iter().sum();
    let all = combinations(pooled.len(), b.len());
    let hits = all
        .iter()
        .filter(|c| c.iter().map(|&i| r[i]).sum::<f64>() >= observed - 1e-9)
        .count();
    hits as f64 / all.len() as f64
}

/// P(W+ >= observed) over all 2^n sign flips of the nonzero differences.
fn wilcoxon_enumerated(pairs: &[(f64, f64)]) -> f64 {
    let d: Vec<f64> = pairs
        .iter()
        .map(|(b, a)| a - b)
        .filter(|v| *v != 0.0)
        .collect();
    let r = ranks(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let observed: f64 = r
        .iter()
        .zip(&d)
        .filter(|(_, v)| **v > 0.0)
        .map(|(r, _)| r)
        .sum();
    let n = d.len();
    let hits = (0u32..1 << n)
        .filter(|mask| {
            (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| r[i])
                .sum::<f64>()
                >= observed - 1e-9
        })
        .count();
    hits as f64 / (1u64 << n) as f64
}

fn spearman_brute(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[test]
fn criterion_5_evaluation_matches_enumeration() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut rng = SplitMix64::new(55);

    // AUPRC: perfect predictor and constant maps
    let (w, h) = (32, 32);
    let mut maps = Vec::new();
    let mut masks = Vec::new();
    let mut positives = 0usize;
    for _ in 0..10 {
        let mask = Mask2D::from_fn(w, h, |_, _| rng.next_f64() < 0.1);
        positives += mask.count();
        maps.push(mask.to_image::<f64>());
        masks.push(mask);
    }
    let prevalence = positives as f64 / (10 * w * h) as f64;
    let perfect = pr_curve(&maps, &masks).unwrap().auprc;
    if (perfect - 1.0).abs() > 1e-12 {
        failures.push(format!("perfect predictor AUPRC {perfect}"));
    }
    for c in [0.0, 0.37, 1.0] {
        let constant: Vec<Image> = masks.iter().map(|_| Image::filled(w, h, c)).collect();
        let auprc = pr_curve(&constant, &masks).unwrap().auprc;
        if (auprc - prevalence).abs() > 0.02 {
            failures.push(format!(
                "constant {c} AUPRC {auprc} vs prevalence {prevalence}"
            ));
        }
    }

    // exact tests against enumeration, including tied values
    let mut worst_exact: f64 = 0.0;
    for trial in 0..40 {
        let na = 1 + trial % 8;
        let nb = 1 + (trial / 5) % 8;
        let draw = |rng: &mut SplitMix64| {
            if trial % 3 == 0 {
                rng.below(5) as f64
            } else {
                rng.next_f64()
            }
        };
        let a: Vec<f64> = (0..na).map(|_| draw(&mut rng)).collect();
        let b: Vec<f64> = (0..nb).map(|_| draw(&mut rng) + 0.3).collect();
        let got = mann_whitney_u_with(&a, &b, Some(TestMethod::Exact))
            .unwrap()
            .p_value;
        worst_exact = worst_exact.max((got - mann_whitney_enumerated(&a, &b)).abs());

        let n = 1 + trial % 8;
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| (draw(&mut rng), draw(&mut rng) + 0.2))
            .collect();
        if pairs.iter().all(|(b, a)| a == b) {
            continue;
        }
        let got = wilcoxon_signed_rank_with(&pairs, Some(TestMethod::Exact))
            .unwrap()
            .p_value;
        worst_exact = worst_exact.max((got - wilcoxon_enumerated(&pairs)).abs());
    }
    if worst_exact > 1e-9 {
        failures.push(format!(
            "exact p-values deviate from enumeration by {worst_exact:e}"
        ));
    }

    // normal approximation against the exact null at n = 20
    let mut worst_approx: f64 = 0.0;
    for _ in 0..20 {
        let shift = rng.uniform(0.0, 0.5);
        let a: Vec<f64> = (0..10).map(|_| rng.next_f64()).collect();
        let b: Vec<f64> = (0..10).map(|_| rng.next_f64() + shift).collect();
        let exact = mann_whitney_u_with(&a, &b, Some(TestMethod::Exact))
            .unwrap()
            .p_value;
        let approx = mann_whitney_u_with(&a, &b, Some(TestMethod::NormalApprox))
            .unwrap()
            .p_value;
        worst_approx = worst_approx.max((exact - approx).abs());

        let pairs: Vec<(f64, f64)> = (0..20)
            .map(|_| (rng.next_f64(), rng.next_f64() + shift))
            .collect();
        let exact = wilcoxon_signed_rank_with(&pairs, Some(TestMethod::Exact))
            .unwrap()
            .p_value;
        let approx = wilcoxon_signed_rank_with(&pairs, Some(TestMethod::NormalApprox))
            .unwrap()
            .p_value;
        worst_approx = worst_approx.max((exact - approx).abs());
    }
    if worst_approx > 0.01 {
        failures.push(format!(
            "normal approximation off by {worst_approx} at n = 20"
        ));
    }

    let mut worst_rho: f64 = 0.0;
    for trial in 0..50 {
        let n = 2 + trial % 15;
        let x: Vec<f64> = (0..n).map(|_| rng.below(6) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.normal()).collect();
        if x.iter().all(|v| *v == x[0]) {
            continue;
        }
        worst_rho = worst_rho.max((spearman_rho(&x, &y).unwrap() - spearman_brute(&x, &y)).abs());
    }
    if worst_rho > 1e-12 {
        failures.push(format!(
            "Spearman deviates from brute force by {worst_rho:e}"
        ));
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(30) {
        failures.push(format!("took {elapsed:?}"));
    }
    verdict(5, "evaluation oracles", elapsed, &failures);
}

// ---------------------------------------------------------- full suite

struct SuiteRun {
    results: Results,
    json: Vec<u8>,
    elapsed: Duration,
}

fn suite_run() -> SuiteRun {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let run = run_experiment(&paper_suite(), dir.path()).unwrap();
    let elapsed = start.elapsed();
    SuiteRun {
        results: run.results.unwrap(),
        json: fs::read(dir.path().join("results.json")).unwrap(),
        elapsed,
    }
}

fn first_run() -> &'static SuiteRun {
    static RUN: OnceLock<SuiteRun> = OnceLock::new();
    RUN.get_or_init(suite_run)
}

fn rho(results: &Results, family: ArtifactFamily, parameter: &str) -> Option<f64> {
    results
        .family(family)?
        .severity
        .iter()
        .find(|s| s.parameter == parameter)?
        .rho
}

#[test]
fn criterion_6_suite_reproduces_the_reported_trends() {
    let run = first_run();
    let r = &run.results;
    let mut failures = Vec::new();

    for (family, parameter) in [
        (ArtifactFamily::Blur, "sigma"),
        (ArtifactFamily::BiasField, "coefficients"),
    ] {
        let value = rho(r, family, parameter);
        println!("  {family} rho {value:?}");
        if !value.is_some_and(|v| v >= 0.8) {
            failures.push(format!("{family} severity rho {value:?} < 0.8"));
        }
    }

    if r.extended.len() != ArtifactFamily::EXTENDED.len() {
        failures.push(format!("{} extended families evaluated", r.extended.len()));
    }
    for f in &r.extended {
        let p = f.wilcoxon.map(|t| t.p_value);
        if !p.is_some_and(|p| p < 0.01) || f.mean_artifact_score <= f.mean_id_score {
            failures.push(format!(
                "{}: p {p:?}, mean {} vs clean {}",
                f.family, f.mean_artifact_score, f.mean_id_score
            ));
        }
    }

    let canonical = r
        .curve(&r.primary_ensemble)
        .map(|c| c.curve.auprc)
        .unwrap_or(f64::NAN);
    println!("  canonical AUPRC {canonical:.4}");
    for row in &r.latent_sweep {
        let single = row.circle_auprc_abs_error.unwrap_or(f64::NAN);
        println!("  {} abs-error AUPRC {single:.4}", row.model);
        if !(canonical >= single + 0.05) {
            failures.push(format!(
                "canonical {canonical:.4} not 0.05 above {} ({single:.4})",
                row.model
            ));
        }
    }

    if r.latent_sweep.len() != 4 || r.epoch_study.is_empty() || r.metric_auprc.is_empty() {
        failures.push("incomplete latent sweep, epoch study or metric table".into());
    }
    if run.elapsed > Duration::from_secs(300) {
        failures.push(format!("took {:?}", run.elapsed));
    }
    verdict(6, "paper-suite trends", run.elapsed, &failures);
}

#[test]
fn criterion_7_results_are_byte_identical_across_runs() {
    let first = first_run();
    let second = suite_run();
    let mut failures = Vec::new();
    if first.json != second.json {
        let at = first
            .json
            .iter()
            .zip(&second.json)
            .position(|(a, b)| a != b);
        failures.push(format!(
            "results.json differs ({} vs {} bytes, first difference at {at:?})",
            first.json.len(),
            second.json.len()
        ));
    }
    verdict(
        7,
        "byte-identical results",
        first.elapsed + second.elapsed,
        &failures,
    );
}
