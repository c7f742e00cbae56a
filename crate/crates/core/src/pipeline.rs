//! Scenario runners behind `homsim run`.
//!
//! Each run writes into its output directory:
//!
//! * `config.toml`: the fully resolved configuration,
//! * `<scenario>.csv`: the data (canonical output),
//! * `<scenario>.json`: fitted and derived numbers,
//! * `<scenario>.svg`: a plot of data and fit,
//!
//! plus scenario-specific extras, and returns a one-line summary.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::budget::{
    background_contribution, compose, entanglement_time, spectral_impurity_contribution, visibility,
    DISTINGUISHABLE_BOUND,
};
use crate::config::{EmitterSel, RunConfig, Scenario};
use crate::error::{Error, Result};
use crate::fitting::{
    fit_g2_window, fit_lorentzian, fit_lorentzian_window, lorentzian, FitConstraints, FitResult, G2Model,
};
use crate::mc::{simulate_hbt, simulate_hbt_histogram, simulate_hom, simulate_hom_histogram, simulate_ple, HomExpectation, Polarization};
use crate::model::{default_tau_grid, dip_fwhm, interference_feature_width, with_uncorrelated_background, BaselineWindow, WidthConvention};
use crate::plot::{Figure, Series, Style, PALETTE};
use crate::stark::{simulate_tuning_scan, tune_to_resonance, ScanSetup};
use crate::tcspc::CorrelationHistogram;
use crate::units::{to_mhz, to_ns, NS};

#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario: Scenario,
    /// One line such as `g2_par(0) = 0.35 ± 0.02`.
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
    pub results: serde_json::Value,
}

struct Writer {
    dir: PathBuf,
    artifacts: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    fn bytes(&mut self, name: &str, data: &[u8]) -> Result<()> {
        let p = self.dir.join(name);
        fs::write(&p, data).map_err(|e| Error::io(&p, e))?;
        self.artifacts.push(p);
        Ok(())
    }

    fn json(&mut self, name: &str, v: &serde_json::Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.bytes(name, s.as_bytes())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        let data = w.into_inner().map_err(|e| Error::io(self.dir.join(name), e.into_error()))?;
        self.bytes(name, &data)
    }

    fn svg(&mut self, name: &str, fig: &Figure) -> Result<()> {
        self.bytes(name, fig.to_svg().as_bytes())
    }
}

/// Validates `cfg` and runs its scenario, writing outputs to `out_dir`.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunReport> {
    cfg.validate()?;
    let mut w = Writer::new(out_dir)?;
    // Where the outputs go is not part of the run, so reruns into another
    // directory stay byte-identical.
    let cfg = &RunConfig {
        output_dir: None,
        ..cfg.clone()
    };
    w.bytes("config.toml", cfg.to_toml_string()?.as_bytes())?;
    let settings = cfg.to_json_value();
    let (summary, results) = match cfg.scenario {
        Scenario::Ple => run_ple(cfg, &settings, &mut w)?,
        Scenario::TuningScan => run_tuning(cfg, &settings, &mut w)?,
        Scenario::Hom => run_hom(cfg, &settings, &mut w)?,
        Scenario::Autocorr => run_autocorr(cfg, &settings, &mut w)?,
        Scenario::Budget => run_budget(cfg, &mut w)?,
        Scenario::Rate => run_rate(cfg, &mut w)?,
    };
    Ok(RunReport {
        scenario: cfg.scenario,
        summary,
        artifacts: w.artifacts,
        results,
    })
}

fn num(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(x.to_string())
    }
}

fn f(x: f64) -> String {
    format!("{x:.9}")
}

fn run_ple(cfg: &RunConfig, settings: &serde_json::Value, w: &mut Writer) -> Result<(String, serde_json::Value)> {
    let which = cfg.ple.as_ref().map(|p| p.emitter).unwrap_or_default();
    let em = cfg.emitter(which)?;
    let ps = cfg.ple_settings()?;
    let spec = simulate_ple(&em, &cfg.ple_scan()?, &ps, cfg.seed()?)?;
    let fit = fit_lorentzian(&spec, None)?;
    let curve: Vec<f64> = spec.freqs.iter().map(|&x| lorentzian(x, &fit.params)).collect();
    w.csv(
        "ple.csv",
        &["freq_mhz", "counts", "fit"],
        spec.freqs
            .iter()
            .zip(&spec.counts)
            .zip(&curve)
            .map(|((x, c), y)| vec![f(to_mhz(*x)), c.to_string(), f(*y)]),
    )?;
    let fwhm = fit.get("fwhm").unwrap_or(f64::NAN);
    let fwhm_sigma = fit.sigma("fwhm").unwrap_or(f64::NAN);
    let results = json!({
        "scenario": "ple",
        "fwhm_mhz": num(to_mhz(fwhm)),
        "fwhm_sigma_mhz": num(to_mhz(fwhm_sigma)),
        "center_mhz": num(to_mhz(fit.get("center").unwrap_or(f64::NAN))),
        "true_fwhm_mhz": to_mhz(em.sd_fwhm),
        "acquisition_time_s": spec.acquisition_time,
        "fit": fit.to_json(settings),
    });
    w.json("ple.json", &results)?;
    let mut fig = Figure::new("PLE spectrum", "laser detuning (MHz)", "counts per point");
    let xs: Vec<f64> = spec.freqs.iter().map(|x| to_mhz(*x)).collect();
    fig.add(Series::new(
        "data",
        xs.clone(),
        spec.counts.iter().map(|c| *c as f64).collect(),
        Style::Points,
        PALETTE[0],
    ).with_errors(spec.counts.iter().map(|c| (*c as f64).sqrt()).collect()));
    fig.add(Series::new("Lorentzian fit", xs, curve, Style::Line, PALETTE[1]));
    w.svg("ple.svg", &fig)?;
    Ok((
        format!("ple fwhm = {:.1} ± {:.1} MHz", to_mhz(fwhm), to_mhz(fwhm_sigma)),
        results,
    ))
}

fn run_tuning(cfg: &RunConfig, settings: &serde_json::Value, w: &mut Writer) -> Result<(String, serde_json::Value)> {
    let resp = cfg.stark_response()?;
    let stark = cfg.stark.as_ref().expect("validated");
    let nv1 = cfg.emitter(EmitterSel::Nv1)?;
    let nv2 = cfg.emitter(EmitterSel::Nv2)?;
    let setup = ScanSetup {
        nv1,
        nv2,
        line: stark.line,
        scan: cfg.ple_scan()?,
        settings: cfg.ple_settings()?,
    };
    let scan = simulate_tuning_scan(&resp, &setup, &stark.voltages, cfg.seed()?)?;
    let tuning = tune_to_resonance(&resp, (nv1.f_ex, nv1.f_ey), nv2.f_ex, stark.line)?;

    // Fit the NV1 line wherever it is well clear of NV2.
    let clearance = 4.0 * (nv1.sd_fwhm + nv2.sd_fwhm);
    let mut per_voltage = Vec::new();
    for (i, &v) in scan.voltages.iter().enumerate() {
        let f1 = scan.nv1_freqs[i];
        let fitted = if (f1 - scan.nv2_freq).abs() > clearance {
            let half = 0.5 * clearance;
            fit_lorentzian_window(&scan.spectra[i], f1 - half, f1 + half, None).ok()
        } else {
            None
        };
        per_voltage.push(json!({
            "voltage_v": v,
            "nv1_center_mhz": to_mhz(f1),
            "fitted_center_mhz": fitted.as_ref().and_then(|r| r.get("center")).map(|x| num(to_mhz(x))),
            "fitted_fwhm_mhz": fitted.as_ref().and_then(|r| r.get("fwhm")).map(|x| num(to_mhz(x))),
        }));
    }
    let mut rows = Vec::new();
    for (i, v) in scan.voltages.iter().enumerate() {
        let s = &scan.spectra[i];
        for (x, c) in s.freqs.iter().zip(&s.counts) {
            rows.push(vec![f(*v), f(to_mhz(*x)), c.to_string()]);
        }
    }
    w.csv("tuning-scan.csv", &["voltage_v", "freq_mhz", "counts"], rows)?;
    let results = json!({
        "scenario": "tuning-scan",
        "v_opt_v": tuning.v_opt,
        "residual_mhz": to_mhz(tuning.residual),
        "clipped": tuning.clipped,
        "initial_detuning_mhz": to_mhz(nv1.f_ex - nv2.f_ex),
        "crossing_voltage_v": scan.crossing_voltage(),
        "spectra": per_voltage,
        "display_offset_cps": scan.display_offset,
        "settings": settings,
        "settings_hash": crate::fitting::settings_hash(settings),
    });
    w.json("tuning-scan.json", &results)?;
    let mut fig = Figure::new("Stark tuning scan (offset per voltage)", "laser detuning (MHz)", "counts/s + offset");
    for (i, s) in scan.spectra.iter().enumerate() {
        fig.add(Series::new(
            format!("{:+.1} V", scan.voltages[i]),
            s.freqs.iter().map(|x| to_mhz(*x)).collect(),
            s.counts
                .iter()
                .map(|c| *c as f64 / s.dwell + i as f64 * scan.display_offset)
                .collect(),
            Style::Line,
            PALETTE[i % PALETTE.len()],
        ));
    }
    w.svg("tuning-scan.svg", &fig)?;
    Ok((
        format!(
            "tuning V_opt = {:.2} V, residual {:.1} MHz{}",
            tuning.v_opt,
            to_mhz(tuning.residual),
            if tuning.clipped { " (clipped at range limit)" } else { "" }
        ),
        results,
    ))
}

/// Half-depth width of the fitted dip with a first-order uncertainty from
/// numerical derivatives of the width with respect to the free parameters.
fn fitted_width(model: &G2Model, fit: &FitResult, baseline: BaselineWindow) -> (f64, f64) {
    let Ok(w0) = model.dip_fwhm(fit, baseline) else {
        return (f64::NAN, f64::NAN);
    };
    let mut grad = vec![0.0; fit.params.len()];
    #[allow(clippy::needless_range_loop)]
    for k in 0..fit.params.len() {
        if fit.fixed[k] || !fit.sigmas[k].is_finite() {
            continue;
        }
        let h = 1e-4 * fit.params[k].abs().max(fit.sigmas[k]).max(1e-12);
        let mut up = fit.clone();
        up.params[k] += h;
        let mut dn = fit.clone();
        dn.params[k] -= h;
        match (model.dip_fwhm(&up, baseline), model.dip_fwhm(&dn, baseline)) {
            (Ok(a), Ok(b)) => grad[k] = (a - b) / (2.0 * h),
            _ => return (w0, f64::NAN),
        }
    }
    (w0, fit.propagate(&grad))
}

struct G2Outputs<'a> {
    name: &'a str,
    title: &'a str,
    label: &'a str,
    hist: &'a CorrelationHistogram,
    shown: &'a CorrelationHistogram,
    model: G2Model,
    fit: &'a FitResult,
    expected: &'a dyn Fn(f64) -> f64,
    dashed: Option<(f64, String)>,
}

fn write_g2(o: G2Outputs, w: &mut Writer) -> Result<()> {
    let mut raw = Vec::new();
    o.hist.write_csv(&mut raw)?;
    w.bytes(&format!("{}_histogram.csv", o.name), &raw)?;
    let centers = o.shown.bin_centers();
    let fitted = o.model.curve(o.fit, &centers);
    w.csv(
        &format!("{}.csv", o.name),
        &["tau_ns", "counts", "g2", "g2_err", "fit", "expected"],
        centers.iter().enumerate().map(|(i, t)| {
            vec![
                f(to_ns(*t)),
                o.shown.counts[i].to_string(),
                f(o.shown.g2[i]),
                o.shown.g2_err[i].map(f).unwrap_or_default(),
                f(fitted[i]),
                f((o.expected)(*t)),
            ]
        }),
    )?;
    let window = 60.0;
    let keep: Vec<usize> = (0..centers.len()).filter(|&i| to_ns(centers[i]).abs() <= window).collect();
    let mut fig = Figure::new(o.title, "τ (ns)", "g⁽²⁾(τ)");
    fig.x_range = Some((-window, window));
    let xs: Vec<f64> = keep.iter().map(|&i| to_ns(centers[i])).collect();
    fig.add(
        Series::new(
            "data",
            xs.clone(),
            keep.iter().map(|&i| o.shown.g2[i]).collect(),
            Style::Points,
            PALETTE[0],
        )
        .with_errors(keep.iter().map(|&i| o.shown.g2_err[i].unwrap_or(0.0)).collect()),
    );
    let fine: Vec<f64> = default_tau_grid().into_iter().filter(|t| to_ns(*t).abs() <= window).collect();
    let fx: Vec<f64> = fine.iter().map(|t| to_ns(*t)).collect();
    fig.add(Series::new(o.label, fx.clone(), o.model.curve(o.fit, &fine), Style::Line, PALETTE[1]));
    fig.add(Series::new(
        "model expectation",
        fx,
        fine.iter().map(|t| (o.expected)(*t)).collect(),
        Style::Dashed,
        PALETTE[2],
    ));
    if let Some(h) = o.dashed {
        fig.hlines.push(h);
    }
    w.svg(&format!("{}.svg", o.name), &fig)
}

fn run_hom(cfg: &RunConfig, settings: &serde_json::Value, w: &mut Writer) -> Result<(String, serde_json::Value)> {
    let h = cfg.hom.as_ref().expect("validated");
    let (pair, [d1, d2], setup) = cfg.hom_setup()?;
    let corr = cfg.correlator()?;
    let seed = cfg.seed()?;
    let duration = cfg.duration()?;
    let pol = h.polarization;
    let hist = simulate_hom_histogram(&pair, &d1, &d2, &setup, duration, seed, pol, &corr, h.batch_s)?;
    if h.save_clicks {
        let clicks = simulate_hom(&pair, &d1, &d2, &setup, duration.min(h.batch_s), seed, pol)?;
        let mut buf = Vec::new();
        clicks.write_csv(&mut buf)?;
        w.bytes("clicks.csv", &buf)?;
    }
    let shown = hist.rebin(cfg.fit_rebin())?;
    let model = G2Model::cross_for(&pair, h.width_convention)?;
    let fit = fit_g2_window(&shown, model, &FitConstraints::none(), Some(h.analysis.fit_window()))?;
    let (g0, g0_sigma) = model.at_zero(&fit);
    let baseline = h.analysis.baseline();
    let (width, width_sigma) = fitted_width(&model, &fit, baseline);

    let expect = HomExpectation::new(&pair, &d1, &d2, &setup, pol)?;
    let taus = default_tau_grid();
    let ev: Vec<f64> = taus.iter().map(|&t| expect.g2(t)).collect();
    let expected_width = dip_fwhm(&taus, &ev, baseline).unwrap_or(f64::NAN);
    let tag = match pol {
        Polarization::Parallel => "g2_par(0)",
        Polarization::Perpendicular => "g2_perp(0)",
    };
    let results = json!({
        "scenario": "hom",
        "polarization": pol,
        "g2_0": num(g0),
        "g2_0_sigma": num(g0_sigma),
        "dip_fwhm_ns": num(to_ns(width)),
        "dip_fwhm_sigma_ns": num(to_ns(width_sigma)),
        "expected_g2_0": expect.g2(0.0),
        "expected_dip_fwhm_ns": num(to_ns(expected_width)),
        "feature_width_ns": {
            "include-radiative": to_ns(interference_feature_width(&pair, WidthConvention::IncludeRadiative)?),
            "dephasing-only": to_ns(interference_feature_width(&pair, WidthConvention::DephasingOnly)?),
        },
        "signal_fraction": expect.rho,
        "histogram": hist.header(Some(seed)),
        "fit_rebin": cfg.fit_rebin(),
        "fit": fit.to_json(settings),
    });
    w.json("hom.json", &results)?;
    write_g2(
        G2Outputs {
            name: "hom",
            title: &format!("Two-photon interference, {pol:?} polarisation"),
            label: "fit",
            hist: &hist,
            shown: &shown,
            model,
            fit: &fit,
            expected: &|t| expect.g2(t),
            dashed: Some((0.5, "distinguishable limit".into())),
        },
        w,
    )?;
    Ok((
        format!(
            "{tag} = {g0:.3} ± {g0_sigma:.3}, dip FWHM = {:.2} ± {:.2} ns",
            to_ns(width),
            to_ns(width_sigma)
        ),
        results,
    ))
}

fn run_autocorr(cfg: &RunConfig, settings: &serde_json::Value, w: &mut Writer) -> Result<(String, serde_json::Value)> {
    let a = cfg.autocorr.as_ref().expect("validated");
    let (em, dy, setup) = cfg.hbt_setup()?;
    let corr = cfg.correlator()?;
    let seed = cfg.seed()?;
    let duration = cfg.duration()?;
    let hist = simulate_hbt_histogram(&em, &dy, &setup, duration, seed, &corr, a.batch_s)?;
    if a.save_clicks {
        let clicks = simulate_hbt(&em, &dy, &setup, duration.min(a.batch_s), seed)?;
        let mut buf = Vec::new();
        clicks.write_csv(&mut buf)?;
        w.bytes("clicks.csv", &buf)?;
    }
    let shown = hist.rebin(cfg.fit_rebin())?;
    let model = G2Model::Auto;
    let fit = fit_g2_window(&shown, model, &FitConstraints::none(), Some(a.analysis.fit_window()))?;
    let (g0, g0_sigma) = model.at_zero(&fit);
    let baseline = a.analysis.baseline();
    let (width, width_sigma) = fitted_width(&model, &fit, baseline);

    let shape = dy.autocorr_params()?;
    let det = setup.detectors[0];
    let signal = a.signal_cps_per_port;
    let rho = signal / (signal + det.noise_rate());
    let expected = |t: f64| with_uncorrelated_background(shape.eval(t), rho, rho);
    let taus = default_tau_grid();
    let ev: Vec<f64> = taus.iter().map(|&t| expected(t)).collect();
    let expected_width = dip_fwhm(&taus, &ev, baseline).unwrap_or(f64::NAN);
    let results = json!({
        "scenario": "autocorr",
        "emitter": a.emitter,
        "g2_0": num(g0),
        "g2_0_sigma": num(g0_sigma),
        "dip_fwhm_ns": num(to_ns(width)),
        "dip_fwhm_sigma_ns": num(to_ns(width_sigma)),
        "expected_g2_0": expected(0.0),
        "expected_dip_fwhm_ns": num(to_ns(expected_width)),
        "dynamics_autocorr": {"a": shape.a, "tau1_ns": shape.tau1 / NS, "tau2_ns": shape.tau2 / NS},
        "histogram": hist.header(Some(seed)),
        "fit_rebin": cfg.fit_rebin(),
        "fit": fit.to_json(settings),
    });
    w.json("autocorr.json", &results)?;
    write_g2(
        G2Outputs {
            name: "autocorr",
            title: "Sideband autocorrelation",
            label: "fit",
            hist: &hist,
            shown: &shown,
            model,
            fit: &fit,
            expected: &expected,
            dashed: Some((0.5, "single-emitter bound".into())),
        },
        w,
    )?;
    Ok((
        format!(
            "g2(0) = {g0:.3} ± {g0_sigma:.3}, dip FWHM = {:.2} ± {:.2} ns",
            to_ns(width),
            to_ns(width_sigma)
        ),
        results,
    ))
}

fn run_budget(cfg: &RunConfig, w: &mut Writer) -> Result<(String, serde_json::Value)> {
    let b = cfg.noise_budget()?;
    let sec = cfg.budget.as_ref().expect("validated");
    let total = compose(&b);
    let mut running = b.baseline;
    let mut rows = vec![vec!["baseline".to_string(), String::new(), f(running)]];
    for c in &b.contributions {
        running += c.delta_g2;
        rows.push(vec![c.label.clone(), f(c.delta_g2), f(running)]);
    }
    w.csv("budget.csv", &["term", "delta_g2", "cumulative"], rows)?;

    let derived = match sec.derived {
        Some(d) => {
            let bg = background_contribution(d.total_cps, d.noise_cps)?;
            let imp = spectral_impurity_contribution(d.spin_purity, d.impurity_mode)?;
            json!({
                "background": bg,
                "spectral_impurity": imp,
                "polarization": d.polarization_delta,
                "total": b.baseline + bg + imp + d.polarization_delta,
            })
        }
        None => serde_json::Value::Null,
    };
    let vis = match cfg.measured()? {
        Some((perp, par)) => {
            let v = visibility(perp, par)?;
            json!({"value": v.value, "sigma": v.sigma})
        }
        None => serde_json::Value::Null,
    };
    let results = json!({
        "scenario": "budget",
        "total": total,
        "exceeds_distinguishable_bound": total > DISTINGUISHABLE_BOUND,
        "entries": b.contributions,
        "baseline": b.baseline,
        "derived": derived,
        "visibility": vis,
        "table": b.table(),
    });
    w.json("budget.json", &results)?;

    let mut fig = Figure::new("g⁽²⁾∥(0) noise budget (cumulative)", "term", "g⁽²⁾∥(0)");
    let xs: Vec<f64> = (0..=b.contributions.len()).map(|i| i as f64).collect();
    let mut acc = b.baseline;
    let mut ys = vec![acc];
    for c in &b.contributions {
        acc += c.delta_g2;
        ys.push(acc);
    }
    fig.add(Series::new("cumulative total (0 = baseline, then each term)", xs, ys, Style::Bars, PALETTE[0]));
    fig.hlines.push((DISTINGUISHABLE_BOUND, "distinguishable".into()));
    fig.y_range = Some((0.0, (total.max(DISTINGUISHABLE_BOUND) * 1.15).max(0.1)));
    w.svg("budget.svg", &fig)?;
    let mut summary = format!("g2_par(0) budget total = {total:.2}");
    if let Some(v) = vis.as_object() {
        summary.push_str(&format!(
            ", visibility = {:.2} ± {:.2}",
            v["value"].as_f64().unwrap_or(f64::NAN),
            v["sigma"].as_f64().unwrap_or(f64::NAN)
        ));
    }
    Ok((summary, results))
}

fn run_rate(cfg: &RunConfig, w: &mut Writer) -> Result<(String, serde_json::Value)> {
    let rc = cfg.rate_config()?;
    let t = entanglement_time(&rc)?;
    let factors: Vec<f64> = (0..=24).map(|k| 10f64.powf(-1.0 + k as f64 / 12.0)).collect();
    let mut rows = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &k in &factors {
        let mut c = rc;
        c.collection_efficiency = (rc.collection_efficiency * k).min(1.0);
        let tk = entanglement_time(&c)?;
        rows.push(vec![f(c.collection_efficiency), f(tk)]);
        xs.push(c.collection_efficiency.log10());
        ys.push(tk.log10());
    }
    w.csv("rate.csv", &["collection_efficiency", "entanglement_time_s"], rows)?;
    let results = json!({
        "scenario": "rate",
        "entanglement_time_s": num(t),
        "success_probability": rc.success_probability(),
        "config": rc,
    });
    w.json("rate.json", &results)?;
    let mut fig = Figure::new(
        "Mean time per entangled pair",
        "log10 collection efficiency",
        "log10 time (s)",
    );
    fig.add(Series::new("", xs, ys, Style::Line, PALETTE[0]));
    if t.is_finite() {
        fig.add(Series::new(
            format!("configured: {t:.1} s"),
            vec![rc.collection_efficiency.log10()],
            vec![t.log10()],
            Style::Points,
            PALETTE[1],
        ));
    }
    w.svg("rate.svg", &fig)?;
    Ok((format!("entanglement time = {t:.1} s"), results))
}
