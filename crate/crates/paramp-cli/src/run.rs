//! Executes jobs into tables with a fixed column order.

use paramp::collapse::{evaluate, Estimator, Phenomenology};
use paramp::dynamics::BathSpec;
use paramp::interferometer::{
    correlations_before_h2, interference_pattern, phase_grid, run, run_full, DetectorMeans,
    ExperimentConfig, Method, Visibility,
};
use paramp::lossmodel::{fit_from_reduced, high_gain_limit, Channel};
use paramp::Result;
use rayon::prelude::*;

use crate::job::{FitMesh, Job};

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

fn f(x: f64) -> String {
    format!("{x}")
}

fn v(x: Visibility) -> String {
    x.to_string()
}

fn means_cols(m: &DetectorMeans) -> [String; 4] {
    [f(m.n_as), f(m.n_ai), f(m.n_bs), f(m.n_bi)]
}

fn with_kappa(config: &ExperimentConfig, k: f64) -> ExperimentConfig {
    let mut c = config.clone();
    c.kappa_up = k;
    c.kappa_low = k;
    c
}

pub fn execute(job: &Job) -> Result<Table> {
    match job {
        Job::SweepKappa { config, kappas } => sweep_kappa(config, kappas),
        Job::CollapseSweep { spec, kappas } => {
            let results: Vec<_> = kappas
                .par_iter()
                .map(|&k| evaluate(spec, k))
                .collect::<Result<_>>()?;
            let eta = if spec.pdf.is_some() {
                "pdf".to_string()
            } else {
                f(spec.eta)
            };
            let phen = match spec.phenomenology {
                Phenomenology::Number => "number",
                Phenomenology::Coherent => "coherent",
            };
            let est = match (spec.phenomenology, spec.estimator) {
                (Phenomenology::Number, _) => "exact",
                (_, Estimator::Quadrature) => "quadrature",
                (_, Estimator::MonteCarlo) => "monte_carlo",
            };
            let opt = |x: Option<f64>| x.map(f).unwrap_or_default();
            let rows = results
                .iter()
                .map(|r| {
                    let se = r.stderr;
                    let mut row = vec![
                        f(r.kappa),
                        eta.clone(),
                        phen.into(),
                        est.into(),
                        v(r.v_s),
                        v(r.v_i),
                    ];
                    row.extend(means_cols(&r.means));
                    row.push(opt(r.v_s_se));
                    row.push(opt(r.v_i_se));
                    row.extend([
                        opt(se.map(|s| s.n_as)),
                        opt(se.map(|s| s.n_ai)),
                        opt(se.map(|s| s.n_bs)),
                        opt(se.map(|s| s.n_bi)),
                    ]);
                    row.push(f(r.collapse_probability));
                    row
                })
                .collect();
            Ok(Table {
                header: vec![
                    "kappa",
                    "eta",
                    "phenomenology",
                    "estimator",
                    "V_s",
                    "V_i",
                    "n_As",
                    "n_Ai",
                    "n_Bs",
                    "n_Bi",
                    "V_s_se",
                    "V_i_se",
                    "n_As_se",
                    "n_Ai_se",
                    "n_Bs_se",
                    "n_Bi_se",
                    "collapse_probability",
                ],
                rows,
            })
        }
        Job::Pattern { config, points } => {
            let pts = interference_pattern(config, &phase_grid(*points))?;
            let rows = pts
                .iter()
                .map(|p| {
                    let mut row = vec![f(p.delta_theta)];
                    row.extend(means_cols(&p.means));
                    row.push(f(p.means.total_signal()));
                    row.push(f(p.means.total_idler()));
                    row.push(f(p.tail));
                    row
                })
                .collect();
            Ok(Table {
                header: vec![
                    "delta_theta",
                    "n_As",
                    "n_Ai",
                    "n_Bs",
                    "n_Bi",
                    "total_signal",
                    "total_idler",
                    "tail",
                ],
                rows,
            })
        }
        Job::Correlations { config } => {
            let c = correlations_before_h2(config)?;
            let mut rows = Vec::new();
            for (panel, dist) in [
                ("signal_arms", &c.signal_arms),
                ("upper_pair", &c.upper_pair),
                ("idler_arms", &c.idler_arms),
            ] {
                for (occ, p) in dist.entries() {
                    if p > 0.0 {
                        rows.push(vec![
                            panel.to_string(),
                            occ[0].to_string(),
                            occ[1].to_string(),
                            f(p),
                        ]);
                    }
                }
            }
            Ok(Table {
                header: vec!["panel", "n_first", "n_second", "probability"],
                rows,
            })
        }
        Job::FitF {
            config,
            kappas,
            mesh,
        } => fit_table(config, kappas, mesh.as_ref()),
        Job::CompareReduced { config, kappas } => {
            let full_method = if config.bath.is_some_and(|b| b.gamma > 0.0) {
                Method::FullLindblad
            } else {
                Method::FullPure
            };
            let rows: Vec<Vec<String>> = kappas
                .par_iter()
                .map(|&k| {
                    let c = with_kappa(config, k);
                    let (_, full) = run_full(&c.clone().with_method(full_method))?;
                    let red = run(&c.with_method(Method::Reduced))?;
                    let diff = |a: Visibility, b: Visibility| match (a.value(), b.value()) {
                        (Some(x), Some(y)) => f((x - y).abs()),
                        _ => "undefined".into(),
                    };
                    let mut row = vec![f(k), v(full.v_s), v(red.v_s), v(full.v_i), v(red.v_i)];
                    row.push(diff(full.v_s, red.v_s));
                    row.push(diff(full.v_i, red.v_i));
                    for (a, b) in means_cols(&full.means)
                        .into_iter()
                        .zip(means_cols(&red.means))
                    {
                        row.push(a);
                        row.push(b);
                    }
                    row.push(f(full.tail));
                    row.push(f(red.tail));
                    Ok(row)
                })
                .collect::<Result<_>>()?;
            Ok(Table {
                header: vec![
                    "kappa",
                    "V_s_full",
                    "V_s_reduced",
                    "V_i_full",
                    "V_i_reduced",
                    "abs_diff_V_s",
                    "abs_diff_V_i",
                    "n_As_full",
                    "n_As_reduced",
                    "n_Ai_full",
                    "n_Ai_reduced",
                    "n_Bs_full",
                    "n_Bs_reduced",
                    "n_Bi_full",
                    "n_Bi_reduced",
                    "tail_full",
                    "tail_reduced",
                ],
                rows,
            })
        }
    }
}

fn sweep_kappa(config: &ExperimentConfig, kappas: &[f64]) -> Result<Table> {
    let results: Vec<_> = kappas
        .par_iter()
        .map(|&k| run(&with_kappa(config, k)))
        .collect::<Result<_>>()?;
    let rows = kappas
        .iter()
        .zip(&results)
        .map(|(&k, r)| {
            let mut row = vec![f(k), v(r.v_s), v(r.v_i)];
            row.extend(means_cols(&r.means));
            row.push(r.method.to_string());
            row.push(f(r.tail));
            row
        })
        .collect();
    Ok(Table {
        header: vec![
            "kappa", "V_s", "V_i", "n_As", "n_Ai", "n_Bs", "n_Bi", "method", "tail",
        ],
        rows,
    })
}

fn fit_table(config: &ExperimentConfig, kappas: &[f64], mesh: Option<&FitMesh>) -> Result<Table> {
    let bath = config.bath.expect("fit jobs carry a bath");
    let points: Vec<ExperimentConfig> = match mesh {
        None => vec![config.clone()],
        Some(m) => {
            let mut v = Vec::new();
            for &g in &m.gamma_dt_grid {
                for &t in &m.temperature_grid {
                    let mut c = config.clone();
                    c.durations.twpa = g / bath.gamma;
                    c.bath = Some(paramp::interferometer::Bath {
                        gamma: bath.gamma,
                        temperature: t,
                    });
                    v.push(c);
                }
            }
            v
        }
    };
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|c| {
            let b = c.bath.expect("fit jobs carry a bath");
            let (fit, _) = fit_from_reduced(c, kappas)?;
            let n_th = BathSpec::new(b.gamma, b.temperature, c.omega_signal)?.n_th;
            let mut row = vec![
                f(b.gamma * c.durations.twpa),
                f(b.gamma * c.durations.total()),
                f(b.temperature),
                f(n_th),
            ];
            for ch in Channel::ALL {
                row.push(f(fit.f(ch)));
            }
            for ch in Channel::ALL {
                row.push(f(fit.channel(ch).residual));
            }
            row.push(fit.accepted().to_string());
            match high_gain_limit(&fit) {
                Ok((vs, vi)) => {
                    row.push(v(vs));
                    row.push(v(vi));
                }
                Err(_) => {
                    row.push("rejected".into());
                    row.push("rejected".into());
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(Table {
        header: vec![
            "gamma_dt_twpa",
            "gamma_dt_tot",
            "temperature",
            "n_th",
            "f_As",
            "f_Ai",
            "f_Bs",
            "f_Bi",
            "residual_As",
            "residual_Ai",
            "residual_Bs",
            "residual_Bi",
            "accepted",
            "V_s_high_gain",
            "V_i_high_gain",
        ],
        rows,
    })
}
