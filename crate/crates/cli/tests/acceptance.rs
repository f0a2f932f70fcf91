//! End-to-end acceptance gate. Each criterion prints one PASS/FAIL line; the
//! test fails if any criterion does.

use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spoofwatch_core::calibration::{calibrate, CalibrationConfig};
use spoofwatch_core::detector::{
    fit_joint_kernels, mark_market_orders, monitor, wasserstein2, BivariateNormal, BivariateSkewNormal, MarkConfig,
    MonitorConfig, MonitorPoint,
};
use spoofwatch_core::lob::replay;
use spoofwatch_core::optimizer::{
    expected_cost, optimal_spoof_at_depth, round_trip_optimal, round_trip_revenue, spoofing_margin, taker_only,
    DepthTail, Regime, SpoofParams,
};
use spoofwatch_core::synth::{random_episodes, reference_model, simulate, SimConfig};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, started: Instant, detail: String) -> Verdict {
    let took = started.elapsed();
    check(took <= limit, format!("{detail}; {:.1}s of {}s", took.as_secs_f64(), limit.as_secs()))
}

fn random_params(rng: &mut ChaCha8Rng, ibar_hi: f64) -> SpoofParams {
    SpoofParams {
        ibar: rng.random_range(0.01..ibar_hi),
        rho: rng.random_range(0.1..5.0),
        a: rng.random_range(10.0..1000.0),
        mu_plus: rng.random_range(0.1..5.0),
        tick: 1.0,
        price: 0.0,
        depths: vec![DepthTail {
            w: rng.random_range(0.01..1.0),
            q: rng.random_range(0.001..0.5),
            nu: rng.random_range(0.0..1.0),
        }],
    }
}

/// Violation of the no-spoofing inequality, written out from its statement.
fn ns_violated(p: &SpoofParams) -> bool {
    let d = p.depths[0];
    2.0 * p.rho * p.mu_plus * (1.0 - p.ibar) * p.ibar * d.w > d.q * p.rho + d.nu
}

fn criterion_1() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_gap, mut worst_residual) = (f64::NEG_INFINITY, 0.0f64);
    let mut failures = 0;
    for _ in 0..1000 {
        let p = random_params(&mut rng, 0.99);
        let s = optimal_spoof_at_depth(&p, 0).map_err(|e| e.to_string())?;
        let grid_min =
            (0..=10_000).map(|j| expected_cost(&p, 0, j as f64 * p.a / 1000.0).unwrap()).fold(f64::INFINITY, f64::min);
        let gap = (s.expected_cost - grid_min) / grid_min.abs();
        worst_gap = worst_gap.max(gap);
        let d = p.depths[0];
        let bracket =
            2.0 * p.rho * d.w * p.mu_plus * (1.0 - p.ibar) / p.ibar * s.i_spoof.powi(2) - (d.q * p.rho + d.nu);
        let lhs = p.ibar / s.i_spoof;
        let residual = (lhs - 1.0 - (1.0 - p.ibar) * d.w / d.q * bracket.max(0.0)).abs() / lhs;
        worst_residual = worst_residual.max(residual);
        if gap > 1e-8 || residual > 1e-10 {
            failures += 1;
        }
    }
    within(
        Duration::from_secs(60),
        started,
        format!("{failures} failures, worst relative excess {worst_gap:.2e}, worst residual {worst_residual:.2e}"),
    )
    .and_then(|d| check(failures == 0, d.clone()))
}

fn criterion_2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut exact_bad, mut one_way_bad, mut admitted) = (0, 0, 0);
    for _ in 0..1000 {
        let p = random_params(&mut rng, 0.99);
        let s = optimal_spoof_at_depth(&p, 0).map_err(|e| e.to_string())?;
        let spoofs = s.v_spoof > 0.0;
        admitted += spoofs as usize;
        if p.ibar <= 0.5 {
            exact_bad += (spoofs != ns_violated(&p)) as usize;
        } else if !ns_violated(&p) && spoofs {
            one_way_bad += 1;
        }
    }
    check(
        exact_bad == 0 && one_way_bad == 0,
        format!("{exact_bad} exceptions below 1/2, {one_way_bad} above; {admitted}/1000 draws spoof"),
    )
}

fn criterion_3() -> Verdict {
    let p = SpoofParams {
        ibar: 0.5,
        rho: 2.0,
        a: 100.0,
        mu_plus: 3.0,
        tick: 1.0,
        price: 0.0,
        depths: vec![DepthTail { w: 0.5, q: 0.05, nu: 0.05 }],
    };
    let s = optimal_spoof_at_depth(&p, 0).map_err(|e| e.to_string())?;
    // the fixed point reduces to 60 i^3 + 0.5 i - 1 = 0 at these values
    let cubic = |i: f64| 60.0 * i * i * i + 0.5 * i - 1.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if cubic(m) > 0.0 {
            hi = m;
        } else {
            lo = m;
        }
    }
    let oracle = 0.5 * (lo + hi);
    let ratio = s.v_spoof / p.a;
    check(
        (s.i_spoof - 0.24457).abs() <= 1e-4 && (ratio - 4.178).abs() <= 1e-3 && (s.i_spoof - oracle).abs() < 1e-10,
        format!("i_spoof {:.6} (oracle {oracle:.6}), v/a {ratio:.5}", s.i_spoof),
    )
}

fn criterion_4() -> Verdict {
    let started = Instant::now();
    let mut bad = Vec::new();
    let grid = |lo: f64, hi: f64, n: usize| (0..n).map(move |j| lo + (hi - lo) * j as f64 / (n - 1) as f64);
    let ibars: Vec<f64> = grid(0.01, 0.99, 99).collect();
    let base = DepthTail { w: 0.3, q: 0.05, nu: 0.05 };

    // margin of the no-spoofing inequality along each parameter
    for &ibar in &ibars {
        let m = |rho: f64, mu: f64, d: DepthTail| spoofing_margin(ibar, rho, mu, d);
        let inc = |xs: Vec<f64>| xs.windows(2).all(|w| w[1] > w[0]);
        let dec = |xs: Vec<f64>| xs.windows(2).all(|w| w[1] < w[0]);
        if !inc(grid(0.1, 6.0, 200).map(|mu| m(2.0, mu, base)).collect()) {
            bad.push(format!("margin not increasing in mu at {ibar}"));
        }
        if !inc(grid(0.1, 10.0, 200).map(|rho| m(rho, 3.0, base)).collect()) {
            bad.push(format!("margin not increasing in rho at {ibar}"));
        }
        if !inc(grid(0.01, 1.0, 200).map(|w| m(2.0, 3.0, DepthTail { w, ..base })).collect()) {
            bad.push(format!("margin not increasing in w at {ibar}"));
        }
        // tail mass c spread flat over y in k..10 at k = 1
        if !dec(grid(1e-4, 0.05, 200).map(|c| m(2.0, 3.0, DepthTail::flat(0.3, 1, c, 10))).collect()) {
            bad.push(format!("margin not decreasing in tail mass at {ibar}"));
        }
    }

    // spoofed-imbalance curves
    let curve = |mu: f64, d: DepthTail| -> Vec<f64> {
        ibars
            .iter()
            .map(|&ibar| {
                let p = SpoofParams { ibar, rho: 2.0, a: 100.0, mu_plus: mu, tick: 1.0, price: 0.0, depths: vec![d] };
                optimal_spoof_at_depth(&p, 0).unwrap().i_spoof
            })
            .collect()
    };
    let below = |lhs: &[f64], rhs: &[f64]| lhs.iter().zip(rhs).all(|(a, b)| a <= b);
    let reference = curve(3.0, base);
    if !below(&reference, &ibars) {
        bad.push("curve above the diagonal".into());
    }
    let sweeps: [(&str, Vec<Vec<f64>>, bool); 4] = [
        ("w", grid(0.05, 1.0, 40).map(|w| curve(3.0, DepthTail { w, ..base })).collect(), true),
        ("mu", grid(0.5, 6.0, 40).map(|mu| curve(mu, base)).collect(), true),
        ("Q", grid(0.005, 0.5, 40).map(|q| curve(3.0, DepthTail { q, ..base })).collect(), false),
        ("nu", grid(0.0, 1.0, 40).map(|nu| curve(3.0, DepthTail { nu, ..base })).collect(), false),
    ];
    for (name, curves, deepens) in &sweeps {
        for pair in curves.windows(2) {
            let ok = if *deepens { below(&pair[1], &pair[0]) } else { below(&pair[0], &pair[1]) };
            if !ok {
                bad.push(format!("curves not ordered along {name}"));
                break;
            }
        }
        if curves.iter().any(|c| !below(c, &ibars)) {
            bad.push(format!("a {name} curve leaves the diagonal"));
        }
    }
    within(Duration::from_secs(60), started, format!("{} violations {:?}", bad.len(), bad.first()))
        .and_then(|d| check(bad.is_empty(), d.clone()))
}

fn brute_force_w2(a: &[f64], b: &[f64]) -> f64 {
    fn go(k: usize, used: &mut [bool], acc: f64, a: &[f64], b: &[f64], best: &mut f64) {
        if k == a.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                go(k + 1, used, acc + (a[k] - b[j]).powi(2), a, b, best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(0, &mut vec![false; b.len()], 0.0, a, b, &mut best);
    (best / a.len() as f64).sqrt()
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for _ in 0..500 {
        let n = rng.random_range(1..=6);
        // multiples of 1/8 keep every partial sum exact in binary floating point
        let mut draw = |n: usize| (0..n).map(|_| rng.random_range(-80i32..=80) as f64 / 8.0).collect::<Vec<_>>();
        let (a, b) = (draw(n), draw(n));
        if wasserstein2(&a, &b).unwrap() != brute_force_w2(&a, &b) {
            mismatches += 1;
        }
    }
    let mut axiom_worst = 0.0f64;
    for _ in 0..500 {
        let mut draw = || {
            let n = rng.random_range(1..=30);
            (0..n).map(|_| rng.random_range(-5.0..5.0)).collect::<Vec<f64>>()
        };
        let (a, b, c) = (draw(), draw(), draw());
        let d = |x: &[f64], y: &[f64]| wasserstein2(x, y).unwrap();
        axiom_worst =
            axiom_worst.max((d(&a, &b) - d(&b, &a)).abs()).max(d(&a, &a)).max(d(&a, &b) - d(&a, &c) - d(&c, &b));
    }
    check(
        mismatches == 0 && axiom_worst <= 1e-12,
        format!("{mismatches}/500 exact mismatches, worst axiom defect {axiom_worst:.1e}"),
    )
}

fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Joint density on a fine grid in x at fixed y, normalized by the trapezoid
/// rule; returns the sup gap to `closed` and the closed form's mass defect.
fn slice_check(joint: impl Fn(f64) -> f64, closed: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let n = 200_000;
    let h = (hi - lo) / n as f64;
    let xs: Vec<f64> = (0..=n).map(|j| lo + j as f64 * h).collect();
    let trap = |v: &[f64]| h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[n]));
    let joint_vals: Vec<f64> = xs.iter().map(|&x| joint(x)).collect();
    let closed_vals: Vec<f64> = xs.iter().map(|&x| closed(x)).collect();
    let mass = trap(&joint_vals);
    let sup = joint_vals.iter().zip(&closed_vals).map(|(j, c)| (j / mass - c).abs()).fold(0.0, f64::max);
    (sup, (trap(&closed_vals) - 1.0).abs())
}

fn criterion_6() -> Verdict {
    let normals = [
        BivariateNormal { mu: [0.45, 0.5], sigma: [0.08, 0.06], r: 0.6 },
        BivariateNormal { mu: [0.3, 0.7], sigma: [0.1, 0.05], r: -0.4 },
    ];
    let skews = [
        BivariateSkewNormal { alpha: [-3.0, 1.5], xi: [0.5, 0.5], omega: [[0.01, 0.004], [0.004, 0.0064]] },
        BivariateSkewNormal { alpha: [2.0, -4.0], xi: [0.4, 0.55], omega: [[0.0049, -0.002], [-0.002, 0.0036]] },
        BivariateSkewNormal { alpha: [0.5, 6.0], xi: [0.5, 0.5], omega: [[0.0025, 0.0], [0.0, 0.0025]] },
    ];
    let (mut sup, mut mass) = (0.0f64, 0.0f64);
    for k in &normals {
        for y in [0.35, 0.5, 0.62] {
            let (s, _) = slice_check(|x| k.log_pdf(x, y).exp(), |x| k.conditional_pdf(y, x), -1.0, 2.0);
            sup = sup.max(s);
        }
    }
    for k in &skews {
        for y in [0.35, 0.5, 0.62] {
            let (s, m) = slice_check(|x| k.log_pdf(x, y).exp(), |x| k.conditional_pdf(y, x), -1.0, 2.0);
            sup = sup.max(s);
            mass = mass.max(m);
        }
    }

    // alpha = 0 gives the Gaussian conditional; a diagonal core with alpha_2 = 0
    // gives the skew-normal marginal
    let mut reduction = 0.0f64;
    for k in &skews {
        let flat = BivariateSkewNormal { alpha: [0.0, 0.0], ..*k };
        let (s1, s2) = (k.omega[0][0].sqrt(), k.omega[1][1].sqrt());
        let r = k.omega[0][1] / (s1 * s2);
        let gauss = BivariateNormal { mu: k.xi, sigma: [s1, s2], r };
        let split =
            BivariateSkewNormal { alpha: [k.alpha[0], 0.0], omega: [[k.omega[0][0], 0.0], [0.0, k.omega[1][1]]], ..*k };
        for y in [0.35, 0.5, 0.62] {
            for j in 0..=200 {
                let x = -0.5 + 2.0 * j as f64 / 200.0;
                let (m, s) = (k.xi[0] + s1 / s2 * r * (y - k.xi[1]), s1 * (1.0 - r * r).sqrt());
                let gauss_oracle = norm_pdf((x - m) / s) / s;
                let z = (x - k.xi[0]) / s1;
                let sn_oracle = 2.0 * norm_pdf(z) * norm_cdf(k.alpha[0] * z) / s1;
                let rel = |got: f64, want: f64| (got - want).abs() / want.max(1e-300);
                reduction = reduction
                    .max(rel(flat.conditional_pdf(y, x), gauss_oracle))
                    .max(rel(gauss.conditional_pdf(y, x), gauss_oracle))
                    .max(rel(split.conditional_pdf(y, x), sn_oracle));
            }
        }
        let indep = BivariateNormal { r: 0.0, ..gauss };
        for x in [0.1, 0.4, 0.5, 0.9] {
            let oracle = norm_pdf((x - k.xi[0]) / s1) / s1;
            reduction = reduction.max((indep.conditional_pdf(0.3, x) - oracle).abs() / oracle);
        }
    }
    check(
        sup <= 1e-6 && mass <= 1e-6 && reduction <= 1e-12,
        format!("sup gap {sup:.1e}, mass defect {mass:.1e}, worst reduction {reduction:.1e}"),
    )
}

fn criterion_7() -> Verdict {
    let started = Instant::now();
    let truth = reference_model();
    let sim = simulate(&SimConfig { periods: 100_000, seed: 1, ..Default::default() }).map_err(|e| e.to_string())?;
    let r = replay(&sim.events, 6).map_err(|e| e.to_string())?;
    let cfg = CalibrationConfig { candidate_frequencies: vec![0.5, 1.0, 2.0, 3.0], ..Default::default() };
    let fit = calibrate(&r, &cfg).map_err(|e| e.to_string())?;
    let levels = fit.weights.depth().max(truth.depth()) + 1;
    let weight = |w: &[f64], k: usize| w.get(k).copied().unwrap_or(0.0);
    let l1: f64 =
        (0..levels).map(|k| (weight(fit.weights.as_slice(), k) - weight(truth.weights().as_slice(), k)).abs()).sum();
    let tv = fit.dp_plus.total_variation(truth.dp_plus());
    let passed = fit.gof.iter().filter(|b| b.p_value >= 0.05).count();
    within(
        Duration::from_secs(600),
        started,
        format!(
            "f={}s N={} w L1 {l1:.4}, dp+ TV {tv:.4}, GoF {passed}/{}",
            fit.frequency_seconds,
            fit.depth,
            fit.gof.len()
        ),
    )
    .and_then(|d| check(l1 <= 0.1 && tv <= 0.05 && passed >= 18 && fit.gof.len() == 20, d.clone()))
}

/// Mann-Whitney estimate of P(score of a positive > score of a negative).
fn auc(pos: &[f64], neg: &[f64]) -> f64 {
    let wins: f64 = pos
        .iter()
        .map(|p| {
            neg.iter()
                .map(|n| {
                    if p > n {
                        1.0
                    } else if p == n {
                        0.5
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
        })
        .sum();
    wins / (pos.len() * neg.len()) as f64
}

fn criterion_8() -> Verdict {
    let started = Instant::now();
    let (periods, length) = (6000usize, 300usize);
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    let (mut flagged_in, mut total_in, mut flagged_out, mut total_out, mut flagged_no_spoof) = (0, 0, 0, 0, 0);
    for seed in 0..20u64 {
        let train_cfg = SimConfig { periods: 3000, seed: 1000 + seed, ..Default::default() };
        let model = train_cfg.model.clone();
        let train = simulate(&train_cfg).map_err(|e| e.to_string())?;
        let train_marks = mark_market_orders(&replay(&train.events, 6).unwrap(), &model, &MarkConfig::default())
            .map_err(|e| e.to_string())?;
        let fit = fit_joint_kernels(&train_marks.marks).map_err(|e| e.to_string())?;

        let episodes = random_episodes(periods, 0.1, length, &[1, 2], 200, seed);
        let cfg = SimConfig { periods, seed, episodes: episodes.clone(), ..Default::default() };
        let test = simulate(&cfg).map_err(|e| e.to_string())?;
        let marks = mark_market_orders(&replay(&test.events, 6).unwrap(), &model, &MarkConfig::default())
            .map_err(|e| e.to_string())?;
        let points = monitor(&marks.marks, &fit, &model, &MonitorConfig { seed, ..Default::default() })
            .map_err(|e| e.to_string())?;

        let f = cfg.period_nanos();
        let score = |from: usize, to: usize| {
            let inside: Vec<&MonitorPoint> =
                points.iter().filter(|p| p.t >= from as i64 * f && p.t < to as i64 * f).collect();
            (!inside.is_empty())
                .then(|| inside.iter().map(|p| p.d_legit - p.d_spoof).sum::<f64>() / inside.len() as f64)
        };
        for e in &episodes {
            pos.extend(score(e.start, e.end));
        }
        for tile in (0..periods).step_by(length) {
            if episodes.iter().all(|e| tile + length <= e.start || tile >= e.end) {
                neg.extend(score(tile, tile + length));
            }
        }
        for p in &points {
            if test.labels.in_episode(p.t) {
                total_in += 1;
                flagged_in += p.flagged as usize;
            } else {
                total_out += 1;
                flagged_out += p.flagged as usize;
            }
            flagged_no_spoof += (p.flagged && p.no_spoof_region) as usize;
        }
    }
    let (rate_in, rate_out) = (flagged_in as f64 / total_in as f64, flagged_out as f64 / total_out as f64);
    let a = auc(&pos, &neg);
    within(
        Duration::from_secs(600),
        started,
        format!(
            "flag rate in {rate_in:.3} vs out {rate_out:.4}, AUC {a:.3} on {}+{} segments, {flagged_no_spoof} flags in no-spoof region",
            pos.len(),
            neg.len()
        ),
    )
    .and_then(|d| check(rate_in > rate_out && a >= 0.8 && flagged_no_spoof == 0, d.clone()))
}

/// Maximal runs of equal regimes along the imbalance grid.
fn runs(regimes: &[Regime]) -> Vec<Regime> {
    let mut out: Vec<Regime> = Vec::new();
    for &r in regimes {
        if out.last() != Some(&r) {
            out.push(r);
        }
    }
    out
}

fn criterion_9() -> Verdict {
    let ibars: Vec<f64> = (1..1000).map(|j| j as f64 / 1000.0).collect();
    let a = 100.0;
    // (mu, spread, k, w, tail mass per tick)
    let panels = [
        ("a", 3.0, 0.0, 1usize, 0.1, 0.001),
        ("b", 3.0, 0.0, 1, 0.1, 0.002),
        ("c", 4.0, 0.0, 1, 0.1, 0.001),
        ("d", 3.0, 2.0, 1, 0.1, 0.001),
        ("e", 3.0, 0.0, 1, 0.4, 0.001),
        ("f", 3.0, 0.0, 4, 0.1, 0.001),
    ];
    let mut problems = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut spoof_span = std::collections::BTreeMap::new();
    let mut sequences = std::collections::BTreeMap::new();
    for &(name, mu, spread, k, w, c) in &panels {
        let tail = DepthTail::flat(w, k, c, 10);
        let sols: Vec<_> = ibars.iter().map(|&i| round_trip_optimal(i, a, mu, spread, k, w, tail.q)).collect();
        let regimes: Vec<Regime> = sols.iter().map(|s| s.regime).collect();
        let r = runs(&regimes);
        let distinct: std::collections::BTreeSet<_> = r.iter().map(|x| format!("{x:?}")).collect();
        if distinct.len() != r.len() {
            problems.push(format!("({name}) regimes are not contiguous: {r:?}"));
        }
        seen.extend(distinct);
        for (s, &ibar) in sols.iter().zip(&ibars) {
            let i_spoof = spoofwatch_core::imbalance::spoofed_imbalance(ibar, a, w, s.v_star);
            if s.h_star > 0.0 && i_spoof > 0.5 - spread / mu + 1e-12 {
                problems.push(format!("({name}) buys at ibar {ibar} with i_spoof {i_spoof}"));
            }
            // b / (a + b) with b = a ibar / (1 - ibar) only returns ibar up to rounding
            if i_spoof > ibar * (1.0 + 1e-12) || s.revenue < 0.0 {
                problems.push(format!("({name}) inconsistent solution at {ibar}"));
            }
        }
        let spoof: Vec<f64> =
            ibars.iter().zip(&regimes).filter(|(_, r)| **r == Regime::Spoof).map(|(i, _)| *i).collect();
        let span = spoof.first().zip(spoof.last()).map(|(lo, hi)| (*lo, *hi));
        spoof_span.insert(name, span);
        sequences.insert(name, r);
    }
    let span = |n: &str| spoof_span[n];
    if sequences["a"] != [Regime::PureTaker, Regime::Spoof, Regime::PureMaker] {
        problems.push(format!("panel (a) runs {:?}", sequences["a"]));
    }
    if span("d").is_some() {
        problems.push("spoofing despite a prohibitive spread".into());
    }
    let base = span("a").ok_or("no spoofing in panel (a)")?;
    for wider in ["c", "e"] {
        match span(wider) {
            Some((lo, hi)) if lo <= base.0 && hi >= base.1 => {}
            other => problems.push(format!("({wider}) spoof region {other:?} does not contain (a) {base:?}")),
        }
    }
    match span("b") {
        Some((lo, hi)) if lo >= base.0 && hi <= base.1 => {}
        None => {}
        other => problems.push(format!("(b) spoof region {other:?} not inside (a) {base:?}")),
    }
    if seen.len() != 4 {
        problems.push(format!("only {} regimes appear", seen.len()));
    }

    // taker-only threshold: positive gain exactly when ibar < 1/2 - spread/mu
    let mut threshold_bad = 0;
    for &(mu, spread) in &[(4.0, 0.0), (4.0, 1.0), (2.0, 0.5), (8.0, 1.0)] {
        let limit: f64 = 0.5 - spread / mu;
        for j in 1..=1000 {
            let ibar = j as f64 / 1024.0;
            let (h, r) = taker_only(ibar, a, mu, spread);
            let expect = ibar < limit;
            let revenue = |h: f64| round_trip_revenue(ibar, a, mu, spread, 1, 0.1, 0.0, h, 0.0);
            // the reported buy is the best one and earns what it claims
            let optimal = revenue((h - 0.01).max(0.0)) <= r && revenue(h + 0.01) <= r;
            if (h > 0.0) != expect || (r > 0.0) != expect || !optimal || (revenue(h) - r).abs() > 1e-12 * r.max(1.0) {
                threshold_bad += 1;
            }
            if ibar == limit && r != 0.0 {
                threshold_bad += 1;
            }
        }
    }
    check(
        problems.is_empty() && threshold_bad == 0,
        format!(
            "{} structural problems {:?}; spoof spans {:?}; threshold exceptions {threshold_bad}/4000; {:?}",
            problems.len(),
            problems.first(),
            spoof_span,
            sequences
        ),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_spoofwatch"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(())
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn criterion_10() -> Verdict {
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = work.path();
    let steps: [(&str, Vec<&str>); 6] = [
        (
            "simulate",
            vec![
                "simulate",
                "--seed",
                "3",
                "--simulate.periods",
                "3000",
                "--simulate.episodes",
                "[{start = 1200, end = 1500, depths = [1, 2], volume = 200}]",
            ],
        ),
        ("reconstruct", vec!["reconstruct", "--events", "../simulate/events.csv"]),
        (
            "calibrate",
            vec![
                "calibrate",
                "--events",
                "../simulate/events.csv",
                "--replay_depth",
                "6",
                "--calibrate.candidate_frequencies",
                "[0.5, 1.0, 2.0]",
            ],
        ),
        ("optimize", vec!["optimize", "--model", "../calibrate/model.json", "--optimize.curve_points", "49"]),
        (
            "gof",
            vec![
                "gof",
                "--model",
                "../calibrate/model.json",
                "--events",
                "../simulate/events.csv",
                "--replay_depth",
                "6",
            ],
        ),
        (
            "monitor",
            vec![
                "monitor",
                "--model",
                "../calibrate/model.json",
                "--events",
                "../simulate/events.csv",
                "--replay_depth",
                "6",
                "--seed",
                "3",
            ],
        ),
    ];
    let mut differing = Vec::new();
    let mut files = 0;
    for (name, args) in &steps {
        let mut trees = Vec::new();
        for run in ["first", "second"] {
            // both runs write next to each other so relative inputs resolve the same way
            let out = dir.join(run).join(name);
            std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
            let mut full = args.clone();
            full.extend(["--out", "."]);
            run_cli(&out, &full)?;
            trees.push(read_tree(&out));
        }
        files += trees[0].len();
        if trees[0].is_empty() || trees[0] != trees[1] {
            differing.push(*name);
        }
    }
    check(differing.is_empty(), format!("{files} files across 6 subcommands; differing: {differing:?}"))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("optimizer matches grid oracle", criterion_1),
        ("existence boundary", criterion_2),
        ("worked example", criterion_3),
        ("comparative statics", criterion_4),
        ("transport correctness", criterion_5),
        ("conditional kernels", criterion_6),
        ("calibration closure", criterion_7),
        ("detection power", criterion_8),
        ("round-trip regimes", criterion_9),
        ("pipeline determinism", criterion_10),
    ];
    let verdicts: Vec<Verdict> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria.iter().map(|(_, f)| s.spawn(f)).collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err("panicked".to_string()))).collect()
    });
    // written straight to stderr so the lines show without --nocapture
    let mut err = std::io::stderr().lock();
    // the harness may have left its "test acceptance ... " prefix unterminated
    writeln!(err).unwrap();
    let mut failed = Vec::new();
    for (i, ((name, _), v)) in criteria.iter().zip(&verdicts).enumerate() {
        let (tag, detail) = match v {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed.push(i + 1);
                ("FAIL", d)
            }
        };
        writeln!(err, "criterion {:>2} {tag} {name}: {detail}", i + 1).unwrap();
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
