use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use spoofwatch_core::calibration::{self, chi_square_gof, BucketGof, JointSamples};
use spoofwatch_core::detector::{self, MarketOrderMark};
use spoofwatch_core::imbalance::MarketModel;
use spoofwatch_core::lob::{self, Replay, Side, NANOS_PER_SECOND};
use spoofwatch_core::optimizer::{
    admits_spoofing, optimal_spoof_at_depth, optimal_spoof_multi, round_trip_optimal, MultiConfig, SpoofParams,
};
use spoofwatch_core::synth;

use crate::config::{ConfigError, RunConfig};
use crate::output::{f, write_json, write_text, Table};

const GOF_LEVEL: f64 = 0.05;

fn required<'a>(path: &'a Option<std::path::PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| ConfigError(format!("paths.{what} is required for this command")).into())
}

fn load_events(path: &Path, tick_size: f64) -> Result<Vec<lob::OrderEvent>> {
    let file = File::open(path).with_context(|| format!("opening events {}", path.display()))?;
    let events =
        lob::read_events_csv(BufReader::new(file), tick_size).with_context(|| format!("parsing {}", path.display()))?;
    tracing::info!(path = %path.display(), events = events.len(), "loaded events");
    Ok(events)
}

fn load_replay(path: &Path, cfg: &RunConfig) -> Result<Replay> {
    let events = load_events(path, cfg.tick_size)?;
    lob::replay(&events, cfg.replay_depth).with_context(|| format!("replaying {}", path.display()))
}

fn load_model(cfg: &RunConfig) -> Result<MarketModel> {
    let path = required(&cfg.paths.model, "model")?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    MarketModel::from_json(&text).with_context(|| format!("parsing model {}", path.display()))
}

fn side_code(side: Side) -> &'static str {
    match side {
        Side::Bid => "B",
        Side::Ask => "S",
    }
}

fn opt_i64(x: Option<i64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn reconstruct(cfg: &RunConfig) -> Result<()> {
    let events_path = required(&cfg.paths.events, "events")?;
    let events = load_events(events_path, cfg.tick_size)?;
    let replay = lob::replay(&events, cfg.replay_depth).context("replaying events")?;
    let out = cfg.out_dir();
    let tl = &replay.timeline;
    let depth = tl.depth();

    let mut header = vec!["t".to_string(), "best_bid".into(), "best_ask".into()];
    header.extend((0..=depth).map(|k| format!("bid_{k}")));
    header.extend((0..=depth).map(|k| format!("ask_{k}")));
    let mut book = Table::with_header(header);
    for (i, &t) in tl.times().iter().enumerate() {
        let (bb, ba) = tl.best_quotes(i);
        let (bid, ask) = tl.state_levels(i);
        let mut row = vec![t.to_string(), opt_i64(bb), opt_i64(ba)];
        row.extend(bid.iter().chain(ask).map(|v| f(*v)));
        book.row(row);
    }
    book.write(&out, "book.csv")?;

    let mut orders = Table::new(&["t", "side", "volume", "aggressor", "fills", "best_bid", "best_ask", "mid"]);
    for mo in &replay.market_orders {
        let snap = mo.pre_trade.as_ref();
        orders.row(vec![
            mo.timestamp.to_string(),
            side_code(mo.side).into(),
            mo.volume.to_string(),
            mo.aggressor.map(|a| a.0.to_string()).unwrap_or_default(),
            mo.fills.len().to_string(),
            opt_i64(snap.map(|s| s.best_bid)),
            opt_i64(snap.map(|s| s.best_ask)),
            snap.map(|s| f(s.mid() * cfg.tick_size)).unwrap_or_default(),
        ]);
    }
    orders.write(&out, "market_orders.csv")?;

    #[derive(Serialize)]
    struct Summary<'a> {
        instrument: &'a str,
        tick_size: f64,
        depth: usize,
        events: usize,
        states: usize,
        market_orders: usize,
        start: Option<i64>,
        end: Option<i64>,
        open_orders: usize,
        best_bid: Option<i64>,
        best_ask: Option<i64>,
    }
    write_json(
        &out,
        "summary.json",
        &Summary {
            instrument: &cfg.instrument,
            tick_size: cfg.tick_size,
            depth,
            events: events.len(),
            states: tl.len(),
            market_orders: replay.market_orders.len(),
            start: tl.start(),
            end: tl.end(),
            open_orders: replay.book.open_orders().count(),
            best_bid: replay.book.best_bid(),
            best_ask: replay.book.best_ask(),
        },
    )
}

fn gof_table(rows: &[BucketGof]) -> Table {
    let mut t = Table::new(&["bucket", "i_bar", "i_lo", "i_hi", "n", "statistic", "dof", "p_value", "sparse", "pass"]);
    for b in rows {
        t.row(vec![
            b.bucket.to_string(),
            f(b.i_bar),
            f(b.i_lo),
            f(b.i_hi),
            b.n.to_string(),
            f(b.statistic),
            b.dof.to_string(),
            f(b.p_value),
            b.sparse.to_string(),
            (b.p_value >= GOF_LEVEL).to_string(),
        ]);
    }
    t
}

pub fn calibrate(cfg: &RunConfig) -> Result<()> {
    let replay = load_replay(required(&cfg.paths.events, "events")?, cfg)?;
    let result = calibration::calibrate(&replay, &cfg.calibrate).context("calibrating")?;
    let model = result.model().context("assembling the calibrated model")?;
    tracing::info!(frequency = result.frequency_seconds, depth = result.depth, "calibrated");
    let out = cfg.out_dir();
    write_json(&out, "calibration.json", &result)?;
    write_text(&out, "model.json", &(model.to_json() + "\n"))?;
    gof_table(&result.gof).write(&out, "gof.csv")?;
    let mut scan = Table::new(&["frequency", "variance"]);
    for &(freq, var) in &result.frequency_scan {
        scan.row(vec![f(freq), f(var)]);
    }
    scan.write(&out, "frequency_scan.csv")
}

fn spoof_params(cfg: &RunConfig, ibar: f64) -> Result<SpoofParams> {
    let o = &cfg.optimize;
    let p = match &o.depths {
        Some(depths) => {
            let mu_plus =
                o.mu_plus.ok_or_else(|| ConfigError("optimize.mu_plus is required with explicit depths".into()))?;
            SpoofParams {
                ibar,
                rho: o.rho,
                a: o.a,
                mu_plus,
                tick: cfg.tick_size,
                price: o.price,
                depths: depths.clone(),
            }
        }
        None => SpoofParams::from_model(&load_model(cfg)?, ibar, o.rho, o.a, o.price)?,
    };
    p.validate()?;
    Ok(p)
}

pub fn optimize(cfg: &RunConfig) -> Result<()> {
    let o = &cfg.optimize;
    let p = spoof_params(cfg, o.ibar).context("building the spoofing problem")?;
    let out = cfg.out_dir();
    let verdict = admits_spoofing(&p);

    let mut table = Table::new(&[
        "k",
        "w",
        "q",
        "nu",
        "margin",
        "admits",
        "v_spoof",
        "v_over_a",
        "i_spoof",
        "expected_cost",
        "cost_delta",
        "capped",
    ]);
    for (k, (d, v)) in p.depths.iter().zip(&verdict.depths).enumerate() {
        let s = optimal_spoof_at_depth(&p, k)?;
        table.row(vec![
            k.to_string(),
            f(d.w),
            f(d.q),
            f(d.nu),
            f(v.margin),
            v.admits.to_string(),
            f(s.v_spoof),
            f(s.v_spoof / p.a),
            f(s.i_spoof),
            f(s.expected_cost),
            f(s.cost_delta(&p)),
            s.capped.to_string(),
        ]);
    }
    table.write(&out, "optimize.csv")?;

    #[derive(Serialize)]
    struct Multi<'a> {
        params: &'a SpoofParams,
        delayed_cost: f64,
        verdict: &'a spoofwatch_core::optimizer::SpoofingVerdict,
        solution: spoofwatch_core::optimizer::MultiSolution,
    }
    let solution = optimal_spoof_multi(&p, &MultiConfig::default());
    write_json(&out, "multi.json", &Multi { params: &p, delayed_cost: p.delayed_cost(), verdict: &verdict, solution })?;

    // imbalance grid strictly inside (0, 1)
    let n = o.curve_points.max(1);
    let grid: Vec<f64> = (1..=n).map(|j| j as f64 / (n + 1) as f64).collect();
    let depths = p.depths.len();
    let mut cond_header = vec!["ibar".to_string()];
    cond_header.extend((0..depths).map(|k| format!("margin_{k}")));
    let mut spoof_header = vec!["ibar".to_string()];
    spoof_header.extend((0..depths).map(|k| format!("i_spoof_{k}")));
    spoof_header.extend((0..depths).map(|k| format!("v_over_a_{k}")));
    spoof_header.push("i_spoof_multi".into());
    let (mut cond, mut spoof) = (Table::with_header(cond_header), Table::with_header(spoof_header));
    let mut rt = Table::new(&["ibar", "k", "h_star", "v_star", "revenue", "regime"]);
    for &ibar in &grid {
        let q = SpoofParams { ibar, ..p.clone() };
        let v = admits_spoofing(&q);
        cond.row(std::iter::once(f(ibar)).chain(v.depths.iter().map(|d| f(d.margin))).collect());
        let sols = (0..depths).map(|k| optimal_spoof_at_depth(&q, k)).collect::<Result<Vec<_>, _>>()?;
        let mut row = vec![f(ibar)];
        row.extend(sols.iter().map(|s| f(s.i_spoof)));
        row.extend(sols.iter().map(|s| f(s.v_spoof / q.a)));
        row.push(f(optimal_spoof_multi(&q, &MultiConfig::default()).i_spoof));
        spoof.row(row);
        for (k, d) in q.depths.iter().enumerate() {
            let r = round_trip_optimal(ibar, q.a, q.mu_plus, o.spread, k, d.w, d.q);
            let regime = serde_json::to_value(r.regime)?.as_str().unwrap_or_default().to_string();
            rt.row(vec![f(ibar), k.to_string(), f(r.h_star), f(r.v_star), f(r.revenue), regime]);
        }
    }
    cond.write(&out, "condition_curves.csv")?;
    spoof.write(&out, "spoof_curves.csv")?;
    rt.write(&out, "round_trip.csv")
}

fn marks_table(marks: &[MarketOrderMark]) -> Table {
    let mut t = Table::new(&["t", "side", "i_minus", "i_plus", "a_t", "b_t", "rho_t", "i_spoof"]);
    for m in marks {
        t.row(vec![
            m.t.to_string(),
            side_code(m.side).into(),
            f(m.i_minus),
            f(m.i_plus),
            f(m.a_t),
            f(m.b_t),
            f(m.rho_t),
            f(m.i_spoof),
        ]);
    }
    t
}

pub fn monitor(cfg: &RunConfig) -> Result<()> {
    let model = load_model(cfg)?;
    let events_path = required(&cfg.paths.events, "events")?;
    let test = load_replay(events_path, cfg)?;
    let test_marks = detector::mark_market_orders(&test, &model, &cfg.marks).context("marking market orders")?;
    let train_marks = match &cfg.paths.train_events {
        Some(p) => {
            let train = load_replay(p, cfg)?;
            detector::mark_market_orders(&train, &model, &cfg.marks).context("marking training market orders")?
        }
        None => test_marks.clone(),
    };
    let fit = detector::fit_joint_kernels(&train_marks.marks).context("fitting the joint kernels")?;
    let points = detector::monitor(&test_marks.marks, &fit, &model, &cfg.monitor).context("running the monitor")?;
    let summary = detector::summarize(&points);
    tracing::info!(points = summary.points, flagged = summary.flagged, "monitor done");

    let out = cfg.out_dir();
    marks_table(&test_marks.marks).write(&out, "marks.csv")?;
    write_json(&out, "fit.json", &fit)?;
    let mut t = Table::new(&["t", "d_legit", "d_spoof", "no_spoof_region", "flagged"]);
    for p in &points {
        t.row(vec![p.t.to_string(), f(p.d_legit), f(p.d_spoof), p.no_spoof_region.to_string(), p.flagged.to_string()]);
    }
    t.write(&out, "monitor.csv")?;

    #[derive(Serialize)]
    struct Summary<'a> {
        instrument: &'a str,
        marks: usize,
        training_marks: usize,
        window_underflow: usize,
        empty_book: usize,
        #[serde(flatten)]
        monitor: detector::MonitorSummary,
    }
    write_json(
        &out,
        "summary.json",
        &Summary {
            instrument: &cfg.instrument,
            marks: test_marks.marks.len(),
            training_marks: train_marks.marks.len(),
            window_underflow: test_marks.window_underflow,
            empty_book: test_marks.empty_book,
            monitor: summary,
        },
    )
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    let mut sim = cfg.simulate.clone();
    if cfg.paths.model.is_some() {
        sim.model = load_model(cfg)?;
    }
    let output = synth::simulate(&sim).context("simulating")?;
    tracing::info!(events = output.events.len(), periods = sim.periods, "simulated");
    let out = cfg.out_dir();
    let mut csv = Vec::new();
    lob::write_events_csv(&mut csv, &output.events, sim.tick_size).context("encoding events")?;
    write_text(&out, "events.csv", std::str::from_utf8(&csv).context("event encoding")?)?;
    write_json(&out, "labels.json", &output.labels)?;

    let mut t = Table::new(&["period", "t", "best_bid", "best_ask", "imbalance", "x", "y", "in_episode"]);
    let period = sim.period_nanos();
    for (j, (&i, &(x, y))) in output.imbalances.iter().zip(&output.moves).enumerate() {
        let start = &output.boundaries[j];
        let t0 = j as i64 * period;
        t.row(vec![
            j.to_string(),
            t0.to_string(),
            start.best_bid.to_string(),
            start.best_ask.to_string(),
            f(i),
            x.to_string(),
            y.to_string(),
            output.labels.in_episode(t0 + period / 2).to_string(),
        ]);
    }
    t.write(&out, "periods.csv")
}

pub fn gof(cfg: &RunConfig) -> Result<()> {
    let model = load_model(cfg)?;
    let replay = load_replay(required(&cfg.paths.events, "events")?, cfg)?;
    let g = &cfg.gof;
    if !(g.frequency > 0.0) {
        return Err(ConfigError(format!("gof.frequency must be positive, got {}", g.frequency)).into());
    }
    let f_nanos = (g.frequency * NANOS_PER_SECOND).round() as i64;
    let samples = JointSamples::from_timeline(&replay.timeline, f_nanos, model.depth(), model.dp_plus().max_move());
    let imb = samples.imbalances(model.weights().as_slice());
    let rows = chi_square_gof(model.dp_plus(), samples.price_changes(), &imb, g.buckets).context("goodness of fit")?;
    let out = cfg.out_dir();
    gof_table(&rows).write(&out, "gof.csv")?;

    #[derive(Serialize)]
    struct Summary {
        frequency: f64,
        samples: usize,
        buckets: usize,
        passed: usize,
        level: f64,
    }
    write_json(
        &out,
        "gof_summary.json",
        &Summary {
            frequency: g.frequency,
            samples: samples.len(),
            buckets: rows.len(),
            passed: rows.iter().filter(|b| b.p_value >= GOF_LEVEL).count(),
            level: GOF_LEVEL,
        },
    )
}
