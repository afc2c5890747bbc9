//! End-to-end acceptance criteria. Runs without the libtest harness so each
//! criterion always prints its own PASS/FAIL line.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use auv_core::dataset::score_volumes;
use auv_core::duo::{
    check_gradients, duo_total_loss, random_case, seg_loss_baseline, standardize_noise, DuoConfig,
    NoiseEstimate, DEFAULT_FD_STEP, DEFAULT_GRAD_TOLERANCE,
};
use auv_core::filtering::{filter_global, filter_per_class, ClassCombine, Strategy};
use auv_core::spectrum::{
    auv_batch, auv_values, covariance_eigenvalues_oracle, energy_distribution, semantic_scale,
    singular_values, AuvRecord, ScaleConfig, SingularSpectrum,
};
use auv_core::synth::{generate, SynthSpec};
use auv_core::tensor::ClassFeatureMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> ClassFeatureMatrix<f64> {
    ClassFeatureMatrix::from_rows(0, rows, cols, data).expect("valid matrix")
}

fn scale_of(m: &ClassFeatureMatrix<f64>, eps: f64) -> f64 {
    let s = singular_values(m).expect("svd");
    semantic_scale(&energy_distribution(&s, eps).expect("energy"))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        q[i * n + i] = 1.0;
    }
    for _ in 0..n {
        let v = gaussian(rng, n);
        let vv: f64 = v.iter().map(|x| x * x).sum();
        for r in 0..n {
            let dot: f64 = (0..n).map(|k| q[r * n + k] * v[k]).sum();
            for k in 0..n {
                q[r * n + k] -= 2.0 * dot * v[k] / vv;
            }
        }
    }
    q
}

fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for l in 0..k {
            let x = a[i * k + l];
            for j in 0..m {
                out[i * m + j] += x * b[l * m + j];
            }
        }
    }
    out
}

fn max_spectrum_gap(a: &SingularSpectrum<f64>, b: &SingularSpectrum<f64>) -> f64 {
    let top = a.values()[0].max(b.values()[0]).max(f64::MIN_POSITIVE);
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs() / top)
        .fold(0.0, f64::max)
}

fn svd_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let (rows, cols) = if trial == 0 {
            (32, 1024)
        } else {
            (rng.random_range(2..=32), rng.random_range(2..=1024))
        };
        let m = matrix(rows, cols, gaussian(&mut rng, rows * cols)).center_rows();
        let probs = energy_distribution(&singular_values(&m).map_err(|e| e.to_string())?, 0.0)
            .map_err(|e| e.to_string())?;
        let lambda = covariance_eigenvalues_oracle(&m).map_err(|e| e.to_string())?;
        let total: f64 = lambda.iter().map(|l| l.max(0.0)).sum();
        for (j, l) in lambda.iter().enumerate() {
            let expected = l.max(0.0) / total;
            let got = probs.probs().get(j).copied().unwrap_or(0.0);
            worst = worst.max((got - expected).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-8, || format!("max deviation {worst:.2e} > 1e-8"))?;
    ensure(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!("100 matrices up to 32x1024, max |dp| {worst:.2e}, {secs:.2} s"))
}

fn invariances() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let trials = 200;
    let (mut exact_bits, mut scale0, mut scale_eps, mut orth, mut perm) = (0usize, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut range_ok = true;
    for _ in 0..trials {
        let rows = rng.random_range(2..=12);
        let cols = rng.random_range(2..=48);
        let z = gaussian(&mut rng, rows * cols);
        let base = matrix(rows, cols, z.clone());

        let k = rng.random_range(-12..=12);
        let pow2 = 2f64.powi(k) * if rng.random_bool(0.5) { -1.0 } else { 1.0 };
        let c = rng.random_range(0.1..10.0) * if rng.random_bool(0.5) { -1.0 } else { 1.0 };
        let s0 = scale_of(&base, 0.0);
        let s_eps = scale_of(&base, 1e-12);
        let scaled = |f: f64| matrix(rows, cols, z.iter().map(|x| f * x).collect());
        if scale_of(&scaled(pow2), 0.0).to_bits() == s0.to_bits() {
            exact_bits += 1;
        }
        scale0 = scale0.max((scale_of(&scaled(c), 0.0) - s0).abs());
        scale_eps = scale_eps.max((scale_of(&scaled(c), 1e-12) - s_eps).abs());

        let left = random_orthogonal(&mut rng, rows);
        let right = random_orthogonal(&mut rng, cols);
        let rotated = matmul(&matmul(&left, &z, rows, rows, cols), &right, rows, cols, cols);
        let sv = singular_values(&base).map_err(|e| e.to_string())?;
        orth = orth.max(max_spectrum_gap(&sv, &singular_values(&matrix(rows, cols, rotated)).map_err(|e| e.to_string())?));

        let mut rp: Vec<usize> = (0..rows).collect();
        let mut cp: Vec<usize> = (0..cols).collect();
        rp.shuffle(&mut rng);
        cp.shuffle(&mut rng);
        let zr = &z;
        let permuted = rp.iter().flat_map(|&r| cp.iter().map(move |&q| zr[r * cols + q])).collect();
        perm = perm.max(max_spectrum_gap(&sv, &singular_values(&matrix(rows, cols, permuted)).map_err(|e| e.to_string())?));

        range_ok &= (0.0..=1.0).contains(&s0) && (0.0..=1.0).contains(&s_eps);
    }
    ensure(exact_bits == trials, || format!("power-of-two scaling bitwise in {exact_bits}/{trials}"))?;
    ensure(scale0 <= 1e-12, || format!("eps=0 scale invariance off by {scale0:.2e}"))?;
    ensure(scale_eps <= 1e-6, || format!("eps=1e-12 scale invariance off by {scale_eps:.2e}"))?;
    ensure(orth <= 1e-8, || format!("orthogonal invariance off by {orth:.2e}"))?;
    ensure(perm <= 1e-8, || format!("permutation invariance off by {perm:.2e}"))?;
    ensure(range_ok, || "scale left [0, 1]".into())?;
    Ok(format!(
        "{trials} trials each; eps=0 bitwise (2^k) {exact_bits}/{trials}, max {scale0:.1e}; eps=1e-12 {scale_eps:.1e}; orth {orth:.1e}; perm {perm:.1e}"
    ))
}

fn auv_normalization() -> Outcome {
    let e = std::f64::consts::E;
    let got = auv_values(&[e.powi(-2), e.powi(-1), 1.0], 1e-12).map_err(|e| e.to_string())?;
    for (g, want) in got.iter().zip([1.0, 0.5, 0.0]) {
        ensure((g - want).abs() <= 1e-12, || format!("AUV {g} vs {want}"))?;
    }
    let flat = auv_values(&[0.37; 9], 1e-12).map_err(|e| e.to_string())?;
    ensure(flat.iter().all(|&a| a == 0.0), || format!("degenerate batch gave {flat:?}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(2..40);
        let scales: Vec<f64> = (0..n).map(|_| rng.random_range(1e-6..1.0)).collect();
        let c = 10f64.powf(rng.random_range(-3.0..3.0));
        let a = auv_values(&scales, 1e-12).map_err(|e| e.to_string())?;
        let b = auv_values(&scales.iter().map(|s| s * c).collect::<Vec<_>>(), 1e-12).map_err(|e| e.to_string())?;
        worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
    }
    ensure(worst <= 1e-12, || format!("rescaling changed AUV by {worst:.2e}"))?;
    Ok(format!("(e^-2, e^-1, 1) -> (1, 0.5, 0); flat batch -> 0; rescaling max {worst:.1e} over 200 batches"))
}

/// Brute-force inverse empirical CDF: smallest observed value with coverage >= p.
fn oracle_threshold(values: &[f64], p: f64) -> f64 {
    let n = values.len() as f64;
    values
        .iter()
        .copied()
        .filter(|&a| values.iter().filter(|&&v| v <= a).count() as f64 / n >= p)
        .fold(f64::INFINITY, f64::min)
}

fn quantile_grid() -> Vec<f64> {
    let mut ps: Vec<f64> = (1..=8u32)
        .flat_map(|n| (1..=n).map(move |k| k as f64 / n as f64))
        .chain([0.01, 0.3, 0.55, 0.95, 0.99])
        .collect();
    ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ps.dedup();
    ps
}

const GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

fn check_batch(auvs: &[f64], ids: &[String], ps: &[f64]) -> Result<(), String> {
    let n = auvs.len();
    let global: Vec<AuvRecord> = auvs
        .iter()
        .zip(ids)
        .map(|(&a, id)| AuvRecord {
            sample_id: id.clone(),
            per_class_scale: BTreeMap::new(),
            sample_scale: 0.0,
            auv: a,
        })
        .collect();
    // single-class records whose scales normalise to the same ordering
    let scales: Vec<f64> = auvs.iter().map(|a| (-a).exp()).collect();
    let norm = auv_values(&scales, 1e-12).map_err(|e| e.to_string())?;
    let single: Vec<AuvRecord> = scales
        .iter()
        .zip(&norm)
        .zip(ids)
        .map(|((&s, &a), id)| AuvRecord {
            sample_id: id.clone(),
            per_class_scale: BTreeMap::from([(1, s)]),
            sample_scale: s,
            auv: a,
        })
        .collect();

    let mut previous: Option<BTreeSet<&str>> = None;
    for &p in ps {
        let m = filter_global(&global, p, Strategy::GlobalRaw).map_err(|e| e.to_string())?;
        let t = oracle_threshold(auvs, p);
        let kept = m.retained_ids();
        let want: BTreeSet<&str> = auvs
            .iter()
            .zip(ids)
            .filter(|(a, _)| **a <= t)
            .map(|(_, id)| id.as_str())
            .collect();
        ensure(kept == want, || format!("{auvs:?} p={p}: kept {kept:?}, oracle {want:?}"))?;
        // p is a float; k/n can land one ulp above the rational value
        let bound = (p * n as f64 - 1e-9).ceil() as usize;
        ensure(kept.len() >= bound, || format!("{auvs:?} p={p}: {} < ceil", kept.len()))?;
        if let Some(prev) = &previous {
            ensure(prev.is_subset(&want), || format!("{auvs:?} p={p}: not monotone"))?;
        }
        let g = filter_global(&single, p, Strategy::GlobalNormalized).map_err(|e| e.to_string())?;
        let c = filter_per_class(&single, p, &[1], 1e-12, ClassCombine::All, Strategy::PerClassNormalized)
            .map_err(|e| e.to_string())?;
        ensure(g.retained_ids() == c.retained_ids(), || {
            format!("{auvs:?} p={p}: global/per-class paths disagree")
        })?;
        previous = Some(want);
    }
    Ok(())
}

/// Visits digit strings of length `n` over the grid; with `sorted_only`,
/// only non-decreasing ones (one per multiset).
fn for_each_batch(n: usize, sorted_only: bool, mut f: impl FnMut(&[usize]) -> Result<(), String>) -> Result<usize, String> {
    let mut digits = vec![0usize; n];
    let mut count = 0;
    loop {
        if !sorted_only || digits.windows(2).all(|w| w[0] >= w[1]) {
            f(&digits)?;
            count += 1;
        }
        let mut i = 0;
        while i < n && digits[i] == GRID.len() - 1 {
            digits[i] = 0;
            i += 1;
        }
        if i == n {
            return Ok(count);
        }
        digits[i] += 1;
    }
}

/// Every ordered batch up to size 6, and every multiset of size 7 and 8 in
/// two orders. The filter only sees values, so order matters only through
/// the sample ids, which the smaller sizes cover exhaustively.
fn filtering_exhaustive() -> Outcome {
    let ps = quantile_grid();
    let ids: Vec<String> = (0..8).map(|i| format!("s{i}")).collect();
    let start = Instant::now();
    let (mut ordered, mut multisets) = (0usize, 0usize);
    for n in 1..=6 {
        ordered += for_each_batch(n, false, |d| {
            let auvs: Vec<f64> = d.iter().map(|&k| GRID[k]).collect();
            check_batch(&auvs, &ids[..n], &ps)
        })?;
    }
    for n in 7..=8 {
        multisets += for_each_batch(n, true, |d| {
            let mut auvs: Vec<f64> = d.iter().map(|&k| GRID[k]).collect();
            check_batch(&auvs, &ids[..n], &ps)?;
            auvs.reverse();
            check_batch(&auvs, &ids[..n], &ps)
        })?;
    }
    Ok(format!(
        "{ordered} ordered batches (n <= 6) + {multisets} multisets (n = 7, 8) x {} quantiles vs enumeration oracle, {:.1} s",
        ps.len(),
        start.elapsed().as_secs_f64()
    ))
}

fn duo_gradients() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let case = random_case(seed, 2, 2, 4);
        let r = check_gradients(&case, DEFAULT_FD_STEP, DEFAULT_GRAD_TOLERANCE).map_err(|e| e.to_string())?;
        worst = worst.max(r.max_rel());
        ensure(r.passed, || format!("seed {seed}: max rel err {:.2e}", r.max_rel()))?;
    }
    for seed in 0..10 {
        let case = random_case(100 + seed, 3, 2, 4);
        let cfg = DuoConfig { alpha: 0.0, ..case.config };
        let b = &case.batch;
        let total = duo_total_loss(b, &NoiseEstimate::zeros(3), &case.scales, &cfg)
            .map_err(|e| e.to_string())?
            .total;
        let base = seg_loss_baseline(b.probs(), b.labels(), b.shape(), cfg.beta, cfg.smooth, cfg.clamp)
            .map_err(|e| e.to_string())?;
        ensure(total.to_bits() == base.to_bits(), || format!("reduction {total} vs {base}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut moment: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(2..64);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let est = standardize_noise(&raw);
        let mean = est.values().iter().sum::<f64>() / n as f64;
        let var = est.values().iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n as f64;
        moment = moment.max(mean.abs()).max((var - 1.0).abs());
    }
    ensure(moment <= 1e-9, || format!("moments off by {moment:.2e}"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "10 seeds max rel err {worst:.2e}; reduction bitwise; moments {moment:.1e}; {secs:.2} s"
    ))
}

fn synthetic_recovery() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let (mut recall_sum, mut precision_sum) = (0.0, 0.0);
    let mut per_seed = Vec::new();
    for seed in 1..=10u64 {
        let spec = SynthSpec { seed, ..SynthSpec::default() };
        let (recall, precision) = pool.install(|| -> Result<(f64, f64), String> {
            let samples = generate(&spec).map_err(|e| e.to_string())?;
            let volumes: Vec<_> = samples.iter().map(|s| s.volume.clone()).collect();
            let scales = score_volumes(&volumes, &ScaleConfig::default()).map_err(|e| e.to_string())?;
            let records = auv_batch(&scales, None, 1e-12).map_err(|e| e.to_string())?;
            let m = filter_global(&records, 0.95, Strategy::GlobalRaw).map_err(|e| e.to_string())?;
            let dropped = m.dropped_ids();
            let noisy: BTreeSet<&str> = samples
                .iter()
                .filter(|s| s.is_noisy)
                .map(|s| s.volume.sample_id())
                .collect();
            let hits = dropped.intersection(&noisy).count() as f64;
            Ok((hits / noisy.len() as f64, hits / dropped.len().max(1) as f64))
        })?;
        per_seed.push(format!("{recall:.2}/{precision:.2}"));
        recall_sum += recall;
        precision_sum += precision;
    }
    let secs = start.elapsed().as_secs_f64();
    let (recall, precision) = (recall_sum / 10.0, precision_sum / 10.0);
    ensure(recall >= 0.9, || format!("mean recall {recall:.3}"))?;
    ensure(precision >= 0.8, || format!("mean precision {precision:.3}"))?;
    ensure(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "mean recall {recall:.3}, precision {precision:.3} over 10 seeds (recall/precision {}), {secs:.1} s single-threaded",
        per_seed.join(" ")
    ))
}

fn run_auv(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_auv"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("auv {args:?} failed: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let data = root.join("data");
    let data_s = data.to_str().unwrap();
    run_auv(&["synth", "--out", data_s, "--n", "60", "--frac-noisy", "0.1", "--seed", "3"])?;
    let mut outputs: Vec<(String, Vec<Vec<u8>>)> = Vec::new();
    for workers in ["1", "4", "8"] {
        for rerun in 0..2 {
            let tag = format!("w{workers}_{rerun}");
            let records = root.join(format!("{tag}.jsonl"));
            let stats = root.join(format!("{tag}.stats.json"));
            run_auv(&[
                "compute-auv", "--input", data_s, "--output", records.to_str().unwrap(),
                "--save-stats", stats.to_str().unwrap(), "--workers", workers,
            ])?;
            let mut files = vec![read(&records)?, read(&stats)?];
            for strategy in ["global-raw", "per-class-normalized"] {
                let manifest = root.join(format!("{tag}_{strategy}.jsonl"));
                run_auv(&[
                    "filter", "--records", records.to_str().unwrap(), "--output",
                    manifest.to_str().unwrap(), "--strategy", strategy, "--workers", workers,
                ])?;
                files.push(read(&manifest)?);
            }
            outputs.push((tag, files));
        }
    }
    let (first_tag, first) = &outputs[0];
    for (tag, files) in &outputs[1..] {
        ensure(files == first, || format!("{tag} differs from {first_tag}"))?;
    }
    Ok(format!(
        "compute-auv + filter byte-identical over {} runs (workers 1/4/8, two reruns each)",
        outputs.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("svd-covariance-oracle", svd_oracle),
        ("entropy-scale-invariances", invariances),
        ("auv-normalization", auv_normalization),
        ("filtering-exhaustive", filtering_exhaustive),
        ("duo-gradients", duo_gradients),
        ("synthetic-recovery", synthetic_recovery),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
