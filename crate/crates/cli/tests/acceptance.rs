//! End-to-end acceptance checks. Each test prints one PASS/FAIL line; run
//! with `--nocapture` to see them.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ringbearing::calibration::{fit_horizontal, fit_horizontal_depth_scaled, fit_vertical, HorizontalSample, VerticalSample};
use ringbearing::estimation::{estimate_from_features, CalibrationModel};
use ringbearing::filtering::{gaussian_filter, median_filter};
use ringbearing::imaging::ImageRgb;
use ringbearing::segmentation::{connected_components, ColorMask};
use serde_json::Value;
use tempfile::TempDir;

fn report(criterion: u32, name: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion} [{name}]: {verdict} ({detail})");
}

fn ringbearing(args: &[&str]) -> (String, Duration) {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_ringbearing"))
        .args(args)
        .output()
        .expect("spawn ringbearing");
    let elapsed = start.elapsed();
    assert!(
        out.status.success(),
        "ringbearing {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    (String::from_utf8(out.stdout).unwrap(), elapsed)
}

fn json(text: &str) -> Value {
    serde_json::from_str(text.trim()).expect("JSON on stdout")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// The noiseless validity grid, its analytic calibration and a calibration
/// on pipeline-measured features.
struct CleanGrid {
    _tmp: TempDir,
    dir: PathBuf,
    measured_model: PathBuf,
    analytic_a_vert: f64,
    measured_a_vert: f64,
    calibration_time: Duration,
}

fn clean_grid() -> &'static CleanGrid {
    static GRID: OnceLock<CleanGrid> = OnceLock::new();
    GRID.get_or_init(|| {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("grid");
        let manifest = dir.join("manifest.csv");
        let analytic_model = tmp.path().join("analytic.json");
        let measured_model = tmp.path().join("measured.json");

        let (_, t_gen) = ringbearing(&["generate", "--out-dir", path_str(&dir)]);
        let (out, t_cal) = ringbearing(&["calibrate", path_str(&manifest), "--out", path_str(&analytic_model)]);
        let analytic_a_vert = json(&out)["a_vert"].as_f64().unwrap();
        let (out, _) = ringbearing(&[
            "calibrate",
            path_str(&manifest),
            "--measure",
            "--out",
            path_str(&measured_model),
        ]);
        let measured_a_vert = json(&out)["a_vert"].as_f64().unwrap();
        CleanGrid {
            _tmp: tmp,
            dir,
            measured_model,
            analytic_a_vert,
            measured_a_vert,
            calibration_time: t_gen + t_cal,
        }
    })
}

fn eval(dir: &Path, model: &Path) -> (Value, Duration) {
    let csv = dir.join("eval.csv");
    let (out, elapsed) = ringbearing(&[
        "eval",
        path_str(dir),
        "--model",
        path_str(model),
        "--csv",
        path_str(&csv),
    ]);
    (json(&out), elapsed)
}

fn clean_eval() -> &'static (Value, Duration) {
    static EVAL: OnceLock<(Value, Duration)> = OnceLock::new();
    EVAL.get_or_init(|| {
        let grid = clean_grid();
        eval(&grid.dir, &grid.measured_model)
    })
}

#[test]
fn criterion_1_vertical_constant() {
    let grid = clean_grid();
    let rel = (grid.analytic_a_vert - 3500.0).abs() / 3500.0;
    let pass = rel <= 0.02 && grid.calibration_time < Duration::from_secs(30);
    report(
        1,
        "a_vert from noiseless dataset",
        pass,
        format!(
            "a_vert = {:.4}, rel err {:.2e}, {:.2?}; on measured L a_vert = {:.1} ({:+.2}%)",
            grid.analytic_a_vert,
            rel,
            grid.calibration_time,
            grid.measured_a_vert,
            100.0 * (grid.measured_a_vert - 3500.0) / 3500.0
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_range_error() {
    let (summary, elapsed) = clean_eval();
    let mean = summary["mean_range_err_pct"].as_f64().unwrap();
    let pass = mean <= 1.7 && *elapsed < Duration::from_secs(120);
    report(
        2,
        "mean range error, noiseless grid",
        pass,
        format!(
            "{mean:.3}% over {} frames (max {:.3}%), {elapsed:.2?}",
            summary["evaluated"],
            summary["max_range_err_pct"].as_f64().unwrap()
        ),
    );
    assert_eq!(summary["evaluated"], 132);
    assert!(pass);
}

#[test]
fn criterion_3_bearing_error() {
    let (summary, _) = clean_eval();
    let mean = summary["mean_bearing_err_deg"].as_f64().unwrap();
    let pass = mean <= 1.0;
    report(
        3,
        "mean bearing error, noiseless grid",
        pass,
        format!(
            "{mean:.4}° (max {:.4}°, {:.3}% of span)",
            summary["max_bearing_err_deg"].as_f64().unwrap(),
            summary["mean_bearing_err_pct_span"].as_f64().unwrap()
        ),
    );
    assert_eq!(summary["evaluated"], 132);
    assert!(pass);
}

fn random_image(rng: &mut impl Rng, w: usize, h: usize) -> ImageRgb {
    let data = (0..w * h * 3).map(|_| rng.random()).collect();
    ImageRgb::new(w, h, data).unwrap()
}

fn clamp(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

fn brute_median(img: &ImageRgb, window: usize) -> ImageRgb {
    let r = (window / 2) as isize;
    let (w, h) = (img.width(), img.height());
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let mut px = [0u8; 3];
            for (c, v) in px.iter_mut().enumerate() {
                let mut vals = Vec::new();
                for dy in -r..=r {
                    for dx in -r..=r {
                        vals.push(img.pixel(clamp(x as isize + dx, w), clamp(y as isize + dy, h))[c]);
                    }
                }
                vals.sort_unstable();
                *v = vals[vals.len() / 2];
            }
            out.set_pixel(x, y, px);
        }
    }
    out
}

fn dense_gaussian(img: &ImageRgb, window: usize, sigma: f64) -> Vec<f64> {
    let r = (window / 2) as isize;
    let (w, h) = (img.width(), img.height());
    let mut kernel = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            kernel.push(((dx * dx + dy * dy) as f64 / (-2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = kernel.iter().sum();
    let mut out = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                let mut k = kernel.iter();
                for dy in -r..=r {
                    for dx in -r..=r {
                        let v = img.pixel(clamp(x as isize + dx, w), clamp(y as isize + dy, h))[c];
                        acc += k.next().unwrap() * f64::from(v);
                    }
                }
                out.push(acc / total);
            }
        }
    }
    out
}

#[test]
fn criterion_4_filter_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut median_mismatches = 0;
    let mut gaussian_worst = 0.0f64;
    for _ in 0..200 {
        let img = random_image(&mut rng, 9, 9);
        for window in [3, 5] {
            if median_filter(&img, window).unwrap() != brute_median(&img, window) {
                median_mismatches += 1;
            }
        }
        for (window, sigma) in [(3, 0.8), (5, 1.2)] {
            let fast = gaussian_filter(&img, window, sigma).unwrap();
            let dense = dense_gaussian(&img, window, sigma);
            for (&a, &b) in fast.data().iter().zip(&dense) {
                gaussian_worst = gaussian_worst.max((f64::from(a) - b).abs());
            }
        }
    }
    let pass = median_mismatches == 0 && gaussian_worst <= 1.0;
    report(
        4,
        "filters vs brute force",
        pass,
        format!("median mismatches {median_mismatches}/400, gaussian worst |diff| {gaussian_worst:.3}"),
    );
    assert!(pass);
}

/// (count, sum x, sum y) per 8-connected component, by breadth-first fill.
fn flood_fill(mask: &ColorMask) -> Vec<(u64, u64, u64)> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for start in 0..w * h {
        if !mask.bits()[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let (mut n, mut sx, mut sy) = (0u64, 0u64, 0u64);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            n += 1;
            sx += x as u64;
            sy += y as u64;
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask.bits()[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        out.push((n, sx, sy));
    }
    out
}

fn rectangle_matches(x0: usize, y0: usize, rw: usize, rh: usize) -> bool {
    let mut mask = ColorMask::empty(40, 40);
    for y in y0..y0 + rh {
        for x in x0..x0 + rw {
            mask.set(x, y, true);
        }
    }
    let blobs = connected_components(&mask);
    let (w, h) = (rw as f64, rh as f64);
    let b = &blobs[0];
    blobs.len() == 1
        && b.m00 == w * h
        && b.centroid.x == x0 as f64 + (w - 1.0) / 2.0
        && b.centroid.y == y0 as f64 + (h - 1.0) / 2.0
        && b.mu20 == h * w * (w * w - 1.0) / 12.0
        && b.mu02 == w * h * (h * h - 1.0) / 12.0
        && b.mu11 == 0.0
}

#[test]
fn criterion_5_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for trial in 0..200 {
        let density = 0.2 + 0.5 * (trial as f64 / 200.0);
        let bits = (0..32 * 32).map(|_| rng.random_bool(density)).collect();
        let mask = ColorMask::new(32, 32, bits).unwrap();
        let mut expected = flood_fill(&mask);
        let blobs = connected_components(&mask);
        let mut got: Vec<(u64, u64, u64)> =
            blobs.iter().map(|b| (b.m00 as u64, b.m10 as u64, b.m01 as u64)).collect();
        expected.sort_unstable();
        got.sort_unstable();
        let centroids_exact = blobs
            .iter()
            .all(|b| b.centroid.x == b.m10 / b.m00 && b.centroid.y == b.m01 / b.m00);
        let counts_exact = blobs.iter().all(|b| b.m00 == b.pixel_count as f64);
        if got != expected || !centroids_exact || !counts_exact {
            mismatches += 1;
        }
    }

    let mut point = ColorMask::empty(16, 16);
    point.set(11, 4, true);
    let p = &connected_components(&point)[0];
    let point_ok = p.m00 == 1.0
        && (p.centroid.x, p.centroid.y) == (11.0, 4.0)
        && (p.mu20, p.mu02, p.mu11) == (0.0, 0.0, 0.0);
    let rects_ok = (0..50).all(|_| {
        let (rw, rh) = (rng.random_range(1..15), rng.random_range(1..15));
        rectangle_matches(rng.random_range(0..25), rng.random_range(0..25), rw, rh)
    });

    let pass = mismatches == 0 && point_ok && rects_ok;
    report(
        5,
        "moments vs flood fill",
        pass,
        format!("random mask mismatches {mismatches}/200, point {point_ok}, rectangles {rects_ok}"),
    );
    assert!(pass);
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn criterion_6_fits() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_exact = 0.0f64;
    let mut worst_permuted = 0.0f64;
    let mut worst_scaled = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(2..40);
        let a = rng.random_range(1000.0..6000.0);
        let k = rng.random_range(0.01..0.2);
        let exact_v: Vec<VerticalSample> = (0..n)
            .map(|_| {
                let d_v = rng.random_range(28.0..72.0);
                VerticalSample { d_v, separation_px: a / d_v }
            })
            .collect();
        let exact_h: Vec<HorizontalSample> = (0..n)
            .map(|_| {
                let px = rng.random_range(-300.0..300.0);
                HorizontalSample { d_h_cm: k * px, d_h_px: px, d_v: None }
            })
            .collect();
        let exact_hd: Vec<HorizontalSample> = exact_h
            .iter()
            .map(|s| {
                let d_v = rng.random_range(28.0..72.0);
                HorizontalSample { d_h_cm: k * d_v * s.d_h_px, d_v: Some(d_v), ..*s }
            })
            .collect();
        worst_exact = worst_exact
            .max(rel(fit_vertical(&exact_v).unwrap().0, a))
            .max(rel(fit_horizontal(&exact_h).unwrap().0, k))
            .max(rel(fit_horizontal_depth_scaled(&exact_hd).unwrap().0, k));

        let mut noisy_v: Vec<VerticalSample> = exact_v
            .iter()
            .map(|s| VerticalSample { d_v: s.d_v * rng.random_range(0.95..1.05), ..*s })
            .collect();
        let mut noisy_h: Vec<HorizontalSample> = exact_h
            .iter()
            .map(|s| HorizontalSample { d_h_cm: s.d_h_cm + rng.random_range(-1.0..1.0), ..*s })
            .collect();
        let base_v = fit_vertical(&noisy_v).unwrap().0;
        let base_h = fit_horizontal(&noisy_h).unwrap().0;

        let scale = rng.random_range(0.1..10.0);
        let scaled_v: Vec<VerticalSample> =
            noisy_v.iter().map(|s| VerticalSample { d_v: s.d_v * scale, ..*s }).collect();
        let scaled_h: Vec<HorizontalSample> =
            noisy_h.iter().map(|s| HorizontalSample { d_h_cm: s.d_h_cm * scale, ..*s }).collect();
        worst_scaled = worst_scaled
            .max(rel(fit_vertical(&scaled_v).unwrap().0, base_v * scale))
            .max(rel(fit_horizontal(&scaled_h).unwrap().0, base_h * scale));

        noisy_v.shuffle(&mut rng);
        noisy_h.shuffle(&mut rng);
        worst_permuted = worst_permuted
            .max(rel(fit_vertical(&noisy_v).unwrap().0, base_v))
            .max(rel(fit_horizontal(&noisy_h).unwrap().0, base_h));
    }
    let pass = worst_exact <= 1e-9 && worst_permuted <= 1e-9 && worst_scaled <= 1e-9;
    report(
        6,
        "least-squares fits",
        pass,
        format!("worst rel err: exact {worst_exact:.1e}, permuted {worst_permuted:.1e}, scaled {worst_scaled:.1e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_7_geometry() {
    let model = CalibrationModel::new(3500.0, Some(1.0 / 700.0), true, 800, 480).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_pythagoras = 0.0f64;
    let mut worst_projection = 0.0f64;
    let mut sign_errors = 0;
    for _ in 0..1000 {
        let d_v: f64 = rng.random_range(28.0..=72.0);
        let half_span = d_v * 25f64.to_radians().tan();
        let d_h: f64 = rng.random_range(-half_span..=half_span);
        let px = d_h / (model.k_horiz.unwrap() * d_v);
        let est = estimate_from_features(model.a_vert / d_v, px, &model).unwrap();
        worst_pythagoras = worst_pythagoras.max(rel(est.d * est.d, est.d_v * est.d_v + est.d_h * est.d_h));
        worst_projection = worst_projection.max(rel(est.d * est.theta.to_radians().cos(), est.d_v));
        if est.theta.signum() != est.d_h.signum() || est.d_h.signum() != d_h.signum() {
            sign_errors += 1;
        }
    }
    let pass = worst_pythagoras <= 1e-9 && worst_projection <= 1e-9 && sign_errors == 0;
    report(
        7,
        "range/bearing identities",
        pass,
        format!(
            "worst rel err d² {worst_pythagoras:.1e}, d·cosθ {worst_projection:.1e}, sign errors {sign_errors}/1000"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_noise_sweep() {
    let grid = clean_grid();
    let tmp = tempfile::tempdir().unwrap();
    let mut means = Vec::new();
    let mut failures = Vec::new();
    for sigma in ["2", "4", "8"] {
        let dir = tmp.path().join(format!("noise{sigma}"));
        ringbearing(&["generate", "--out-dir", path_str(&dir), "--noise", sigma, "--seed", "1"]);
        let (summary, _) = eval(&dir, &grid.measured_model);
        means.push(summary["mean_range_err_pct"].as_f64().unwrap());
        failures.push(summary["detection_failures"].as_u64().unwrap());
    }
    let monotone = means.windows(2).all(|p| p[0] <= p[1]);
    let pass = failures[0] == 0 && failures[1] == 0 && monotone;
    report(
        8,
        "noise sweep σ = 2, 4, 8",
        pass,
        format!("mean range error {means:.4?} %, detection failures {failures:?}"),
    );
    assert!(pass);
}
