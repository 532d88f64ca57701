//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any failure.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shadowfreq_core::chromaticity::minimize_entropy;
use shadowfreq_core::losses::{
    log_cosh, loss_align, loss_brightness_ch, loss_ff, loss_frequency, loss_mse_weighted, loss_perceptual,
    loss_smooth, loss_vd, overall_loss, LossReport, ALIGN, BRIGHTNESS_CH, FREQUENCY,
};
use shadowfreq_core::mask::DEFAULT_CUT;
use shadowfreq_core::metrics::{mask_from_threshold, ssim};
use shadowfreq_core::spectrum::dft2_plane;
use shadowfreq_core::synthetic::{
    axial_gap, planckian_scene, planted_chroma_points, random_image, smooth_shadow_pair,
};
use shadowfreq_core::wadm::{conv2d, deformable_conv, wadm_forward_traced};
use shadowfreq_core::wavelet::subband_similarity;
use shadowfreq_core::{
    compute_soft_mask, evaluate_pair, haar_dwt2, haar_idwt2, illumination_compensate, region_stats,
    shadowfree_chromaticity, BinaryMask, ColorSpace, ConvKernel, FeatureMap, Image, LossWeights, OffsetField,
    PyramidGradientExtractor, RmseSpace, SoftMask, WadmParams,
};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(elapsed: Duration, budget_s: f64) -> bool {
    elapsed.as_secs_f64() < budget_s
}

fn wavelet_reconstruction() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let h = 2 * rng.random_range(1..=64);
        let w = 2 * rng.random_range(1..=64);
        let c = if rng.random_bool(0.5) { 1 } else { 3 };
        let x = random_image(i, h, w, c, -1.0, 1.0);
        let y = haar_idwt2(&haar_dwt2(&x).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let err = x
            .data()
            .iter()
            .zip(y.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
    }
    let t = start.elapsed();
    check(
        worst < 1e-12 && within_budget(t, 10.0),
        format!(
            "max |idwt(dwt(x)) - x| = {worst:.2e} over 1000 images in {:.2}s",
            t.as_secs_f64()
        ),
    )
}

/// `sum x(m, n) exp(-2 pi i (um/M + vn/N))`, evaluated term by term.
fn naive_dft(x: &[f64], rows: usize, cols: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(rows * cols);
    for u in 0..rows {
        for v in 0..cols {
            let (mut re, mut im) = (0.0, 0.0);
            for m in 0..rows {
                for n in 0..cols {
                    let phase = -TAU * ((u * m) as f64 / rows as f64 + (v * n) as f64 / cols as f64);
                    re += x[m * cols + n] * phase.cos();
                    im += x[m * cols + n] * phase.sin();
                }
            }
            out.push((re, im));
        }
    }
    out
}

fn dft_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_rel, mut worst_parseval): (f64, f64) = (0.0, 0.0);
    for rows in 1..=32 {
        for cols in 1..=32 {
            let x: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = dft2_plane(&x, rows, cols);
            let naive = naive_dft(&x, rows, cols);
            let scale = naive
                .iter()
                .map(|(a, b)| a.hypot(*b))
                .fold(0.0, f64::max)
                .max(1e-300);
            for (z, (re, im)) in fast.values().iter().zip(&naive) {
                worst_rel = worst_rel.max((z.re - re).hypot(z.im - im) / scale);
            }
            let time_energy: f64 = x.iter().map(|v| v * v).sum();
            let freq_energy: f64 =
                fast.values().iter().map(|z| z.norm_sqr()).sum::<f64>() / (rows * cols) as f64;
            worst_parseval = worst_parseval.max((time_energy - freq_energy).abs() / time_energy);
        }
    }
    check(
        worst_rel < 1e-9 && worst_parseval < 1e-9,
        format!("max relative error {worst_rel:.2e}, Parseval {worst_parseval:.2e} on all sizes up to 32x32"),
    )
}

fn plane_image(rows: usize, cols: usize, data: Vec<f64>) -> Image {
    Image::new(rows, cols, 1, ColorSpace::Linear, data).expect("valid plane")
}

fn focal_frequency() -> Verdict {
    let real = plane_image(1, 2, vec![1.0, 1.0]);
    let fake = plane_image(1, 2, vec![1.0, 0.0]);
    let worked = loss_ff(&real, &fake, 1.0).map_err(|e| e.to_string())?.value;

    let a = random_image(30, 6, 10, 1, -1.0, 1.0);
    let b = random_image(31, 6, 10, 1, -1.0, 1.0);
    let fa = naive_dft(a.data(), 6, 10);
    let fb = naive_dft(b.data(), 6, 10);
    let mse = fa
        .iter()
        .zip(&fb)
        .map(|((ar, ai), (br, bi))| (ar - br).powi(2) + (ai - bi).powi(2))
        .sum::<f64>()
        / 60.0;
    let unweighted = loss_ff(&a, &b, 0.0).map_err(|e| e.to_string())?.value;
    check(
        (worked - 1.0).abs() < 1e-12 && (unweighted - mse).abs() < 1e-12 * mse.max(1.0),
        format!(
            "[1,1] vs [1,0] gives {worked}; alpha=0 vs spectral MSE differs by {:.2e}",
            (unweighted - mse).abs()
        ),
    )
}

fn identity_suite() -> Verdict {
    let run = || -> shadowfreq_core::Result<Vec<(&'static str, f64)>> {
        let x = smooth_shadow_pair(40, 32, 32).free;
        let sb = haar_dwt2(&x)?;
        let map = illumination_compensate(&shadowfree_chromaticity(&x)?, &x, None)?;
        let mask = compute_soft_mask(&smooth_shadow_pair(41, 32, 32).shadow, &x)?;
        let stats = region_stats(&x, &mask, DEFAULT_CUT)?;
        // The mask of an identical pair over a flat image.
        let flat = Image::from_fn(32, 32, 3, ColorSpace::Srgb, |_, _, k| 0.2 + 0.3 * k as f64)?;
        let no_shadow = compute_soft_mask(&flat, &flat)?;
        Ok(vec![
            ("L_VD", loss_vd(&sb, &sb, 1.0)?.value),
            ("L_FF", loss_ff(&x, &x, 1.0)?.value),
            ("L_frequency", loss_frequency(&x, &x, 0.5, 0.5, 1.0, 1.0)?.value),
            ("L_brightness-ch", loss_brightness_ch(&x, &map)?.value),
            (
                "L_perceptual",
                loss_perceptual(&x, &x, &PyramidGradientExtractor)?.value,
            ),
            ("L_MSE-w", loss_mse_weighted(&mask, &mask)?.value),
            ("L_smooth", loss_smooth(&no_shadow, &flat)?.value),
            ("L_Align", loss_align(&stats, &stats)?.value),
        ])
    };
    let values = run().map_err(|e| e.to_string())?;
    let nonzero: Vec<String> = values
        .iter()
        .filter(|(_, v)| *v != 0.0)
        .map(|(n, v)| format!("{n}={v:e}"))
        .collect();
    let lc = log_cosh(1.0);
    check(
        nonzero.is_empty() && (lc - 0.433781).abs() <= 1e-6,
        if nonzero.is_empty() {
            format!("all 8 losses are 0 on identical inputs; ln cosh 1 = {lc:.7}")
        } else {
            format!("nonzero: {}; ln cosh 1 = {lc:.7}", nonzero.join(", "))
        },
    )
}

fn subband_ordering() -> Verdict {
    let mut hits = 0;
    for seed in 0..10 {
        let p = smooth_shadow_pair(seed, 64, 64);
        let s = subband_similarity(&p.free, &p.shadow).map_err(|e| e.to_string())?;
        let [a, _, v, d] = s.as_array();
        if v > a && d > a {
            hits += 1;
        }
    }
    check(
        hits >= 9,
        format!("psnr_v > psnr_a and psnr_d > psnr_a in {hits}/10 pairs"),
    )
}

fn entropy_recovery() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let illuminant = rng.random_range(0.0..PI);
        let points = planted_chroma_points(seed, 10_000, illuminant);
        let sweep = minimize_entropy(&points).map_err(|e| e.to_string())?;
        worst = worst.max(axial_gap(sweep.theta_star, illuminant + FRAC_PI_2).to_degrees());
    }
    let t = start.elapsed();
    check(
        worst <= 2.0 && within_budget(t, 30.0),
        format!(
            "worst gap {worst:.2} deg over 20 planted sets in {:.2}s",
            t.as_secs_f64()
        ),
    )
}

fn random_map(rng: &mut ChaCha8Rng, b: usize, c: usize, h: usize, w: usize) -> FeatureMap {
    let data = (0..b * c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
    FeatureMap::new(b, c, h, w, data).expect("valid map")
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn deformable_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut zero_worst, mut shift_worst): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let (b, ci, co) = (
            rng.random_range(1..=2),
            rng.random_range(1..=3),
            rng.random_range(1..=3),
        );
        let (h, w) = (rng.random_range(6..=16), rng.random_range(6..=16));
        let x = random_map(&mut rng, b, ci, h, w);
        let k = ConvKernel::random(&mut rng, co, ci, 3, 3, 1.0).map_err(|e| e.to_string())?;
        let zero = OffsetField::zeros(b, k.taps(), h, w);
        let d = deformable_conv(&x, &zero, &k).map_err(|e| e.to_string())?;
        let c = conv2d(&x, &k).map_err(|e| e.to_string())?;
        zero_worst = zero_worst.max(max_diff(d.data(), c.data()));

        let (dy, dx) = (rng.random_range(-2i64..=2), rng.random_range(-2i64..=2));
        let shifted_offsets =
            OffsetField::uniform(b, k.taps(), h, w, dy as f64, dx as f64).map_err(|e| e.to_string())?;
        let ds = deformable_conv(&x, &shifted_offsets, &k).map_err(|e| e.to_string())?;
        let xs = FeatureMap::from_fn(b, ci, h, w, |bb, cc, i, j| {
            let (si, sj) = (i as i64 + dy, j as i64 + dx);
            if (0..h as i64).contains(&si) && (0..w as i64).contains(&sj) {
                x.get(bb, cc, si as usize, sj as usize)
            } else {
                0.0
            }
        })
        .map_err(|e| e.to_string())?;
        let cs = conv2d(&xs, &k).map_err(|e| e.to_string())?;
        let (my, mx) = (1 + dy.unsigned_abs() as usize, 1 + dx.unsigned_abs() as usize);
        for bb in 0..b {
            for o in 0..co {
                for i in my..h.saturating_sub(my) {
                    for j in mx..w.saturating_sub(mx) {
                        shift_worst = shift_worst.max((ds.get(bb, o, i, j) - cs.get(bb, o, i, j)).abs());
                    }
                }
            }
        }
    }
    check(
        zero_worst < 1e-12 && shift_worst < 1e-12,
        format!("zero offsets {zero_worst:.2e}, integer shifts {shift_worst:.2e} over 100 draws"),
    )
}

fn wadm_shape_contract() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (c, c_out) = (3, 8);
    let params = WadmParams::seeded(8, c, c_out).map_err(|e| e.to_string())?;
    let mut failures = Vec::new();
    let mut runs = 0;
    for h in (8..=128).step_by(2) {
        for w in (8..=128).step_by(2) {
            let b = 1 + (h + w) % 2;
            let x = random_map(&mut rng, b, c, h, w);
            let t = wadm_forward_traced(&x, &params).map_err(|e| e.to_string())?;
            let shape_ok = t.output.shape() == [b, c_out, h / 2, w / 2];
            let finite = t.output.data().iter().all(|v| v.is_finite());
            let contraction = t
                .gated
                .data()
                .iter()
                .zip(t.features.data())
                .all(|(g, f)| g.abs() <= f.abs());
            if !(shape_ok && finite && contraction) {
                failures.push(format!("{h}x{w}"));
            }
            runs += 1;
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{runs} even sizes from 8 to 128: shapes, finiteness and gating contraction hold")
        } else {
            format!("failed at {}", failures.join(", "))
        },
    )
}

fn metrics_consistency() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for seed in 0..10 {
        let smooth = smooth_shadow_pair(seed, 48, 48);
        let scene = planckian_scene(seed, 48, 48);
        for (shadow, free) in [(smooth.shadow, smooth.free), (scene.shadow, scene.free)] {
            let mask = mask_from_threshold(&shadow, &free, 30.0).map_err(|e| e.to_string())?;
            let m = evaluate_pair(&shadow, &free, &mask, RmseSpace::Rgb).map_err(|e| e.to_string())?;
            let part = |rmse: Option<f64>, n: usize| rmse.map_or(0.0, |r| r * r * n as f64);
            let total = m.rmse_all * m.rmse_all * m.count_all as f64;
            let parts = part(m.rmse_s, m.count_s) + part(m.rmse_ns, m.count_ns);
            worst = worst.max((total - parts).abs() / total.max(f64::MIN_POSITIVE));
            pairs += 1;
        }
    }
    let truth = Image::from_fn(12, 12, 3, ColorSpace::Srgb, |r, c, _| {
        ((r + c) % 7) as f64 * 20.0 / 255.0
    })
    .map_err(|e| e.to_string())?;
    let offset = truth.map(|v| (v * 255.0 + 25.5) / 255.0);
    let everywhere = BinaryMask::new(12, 12, vec![true; 144]).map_err(|e| e.to_string())?;
    let psnr = evaluate_pair(&offset, &truth, &everywhere, RmseSpace::Rgb)
        .map_err(|e| e.to_string())?
        .psnr_all;
    let x = smooth_shadow_pair(3, 32, 32).free;
    let self_ssim = ssim(&x, &x).map_err(|e| e.to_string())?;
    check(
        worst < 1e-6 && (psnr - 20.0).abs() < 1e-9 && self_ssim == 1.0,
        format!(
            "MSE additivity {worst:.2e} over {pairs} pairs; offset-25.5 PSNR {psnr:.12} dB; SSIM(x,x) = {self_ssim}"
        ),
    )
}

fn soft_mask_example() -> Verdict {
    let free =
        Image::new(2, 2, 3, ColorSpace::Srgb, [0.9, 0.5, 0.5, 0.5].repeat(3)).map_err(|e| e.to_string())?;
    let shadow = Image::new(2, 2, 3, ColorSpace::Srgb, vec![0.5; 12]).map_err(|e| e.to_string())?;
    let m: SoftMask = compute_soft_mask(&shadow, &free).map_err(|e| e.to_string())?;
    check(m.m1() == [1.0, -1.0, -1.0, -1.0], format!("m1 = {:?}", m.m1()))
}

fn unit(name: &str) -> LossReport {
    LossReport {
        name: name.into(),
        value: 1.0,
        components: Default::default(),
        parameters: Default::default(),
        absent: Vec::new(),
    }
}

fn overall_weighting() -> Verdict {
    let parts = [unit(BRIGHTNESS_CH), unit(FREQUENCY), unit(ALIGN)];
    let v = overall_loss(&parts, &LossWeights::default())
        .map_err(|e| e.to_string())?
        .value;
    let expected = 1.1 * 1.0 + 0.3 * 1.0 + 0.01 * 1.0;
    check(
        v == expected && (v - 1.41).abs() <= 2.0 * f64::EPSILON,
        format!("overall = {v} (1.1 + 0.3 + 0.01 = {expected})"),
    )
}

fn shadowfreq(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_shadowfreq"))
        .current_dir(dir)
        .env_remove("SHADOWFREQ_CONFIG")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    shadowfreq(
        d,
        &[
            "--out", "corpus", "synth", "--seed", "11", "--count", "6", "--size", "64",
        ],
    )?;
    let runs: Vec<(&str, Vec<&str>)> = vec![
        (
            "loss",
            vec![
                "--json",
                "--out",
                "o",
                "loss",
                "corpus/aistd/shadow/pair_001.png",
                "corpus/aistd/shadow_free/pair_001.png",
            ],
        ),
        (
            "eval (manifest)",
            vec!["--json", "--out", "o", "eval", "corpus/manifest.json"],
        ),
        ("eval (srd)", vec!["--json", "--out", "o", "eval", "corpus/srd"]),
    ];
    let mut differing = Vec::new();
    for (name, args) in &runs {
        let first = shadowfreq(d, args)?;
        let second = shadowfreq(d, args)?;
        if first != second || first.is_empty() {
            differing.push(*name);
        }
    }
    check(
        differing.is_empty(),
        if differing.is_empty() {
            "loss and eval JSON byte-identical across two runs".into()
        } else {
            format!("outputs differ: {}", differing.join(", "))
        },
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("wavelet perfect reconstruction", wavelet_reconstruction),
        ("DFT oracle equivalence", dft_oracle),
        ("focal frequency exactness", focal_frequency),
        ("loss identity suite", identity_suite),
        ("subband ordering", subband_ordering),
        ("entropy minimization", entropy_recovery),
        ("deformable convolution equivalence", deformable_equivalence),
        ("WADM shape contract", wadm_shape_contract),
        ("metrics consistency", metrics_consistency),
        ("soft mask worked example", soft_mask_example),
        ("overall loss weighting", overall_weighting),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = run();
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
