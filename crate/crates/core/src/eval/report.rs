//! CSV and plain-text renderings of the diagnostics.

use std::fmt::Write as _;
use std::io::Write;

use crate::atlas::Atlas;
use crate::error::Result;
use crate::eval::bursting::BurstingAnalysis;
use crate::eval::period::Periodicity;
use crate::eval::smoothness::SmoothnessReport;
use crate::eval::sweep::MseSweepResult;
use crate::linalg::sq_dist;
use crate::neuralnet::io::format_f64;

fn opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_else(|| "nan".into())
}

pub fn write_sweep_csv<W: Write>(r: &MseSweepResult, mut w: W) -> Result<()> {
    writeln!(w, "n_charts,latent_dim,trial,seed,params,mse,error")?;
    for row in &r.rows {
        let err = row.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            row.n_charts,
            row.latent_dim,
            row.trial,
            row.seed,
            row.params,
            opt(row.mse),
            err
        )?;
    }
    Ok(())
}

pub fn sweep_summary(r: &MseSweepResult) -> String {
    let mut s = String::from("charts  dim  trials  failed  median_mse\n");
    for (k, d) in r.cells() {
        let rows: Vec<_> = r.rows.iter().filter(|x| x.n_charts == k && x.latent_dim == d).collect();
        let failed = rows.iter().filter(|x| x.mse.is_none()).count();
        let _ = writeln!(
            s,
            "{k:>6}  {d:>3}  {:>6}  {failed:>6}  {}",
            rows.len(),
            r.median(k, d).map(|m| format!("{m:.4e}")).unwrap_or_else(|| "-".into())
        );
    }
    s
}

/// Per-chart reconstruction error on the chart's own members, then the global
/// error with every point reconstructed by its interior chart.
pub fn write_chart_mse_csv<W: Write>(atlas: &Atlas, mut w: W) -> Result<()> {
    writeln!(w, "chart,interior,members,mse,max_error")?;
    for c in &atlas.charts {
        writeln!(
            w,
            "{},{},{},{},{}",
            c.id,
            c.domain.interior.len(),
            c.members().len(),
            format_f64(c.reconstruction_mse),
            format_f64(c.max_reconstruction_error)
        )?;
    }
    let mut worst = 0.0f64;
    for c in &atlas.charts {
        let xs = atlas.points().select_rows(&c.domain.interior);
        let r = c.autoencoder.reconstruct_batch(&xs)?;
        for (a, b) in r.iter_rows().zip(xs.iter_rows()) {
            worst = worst.max(sq_dist(a, b).sqrt());
        }
    }
    writeln!(
        w,
        "global,{},{},{},{}",
        atlas.len(),
        atlas.len(),
        format_f64(atlas.reconstruction_mse()?),
        format_f64(worst)
    )?;
    Ok(())
}

pub fn write_smoothness_csv<W: Write>(r: &SmoothnessReport, mut w: W) -> Result<()> {
    writeln!(w, "step,from,to,first,second,first_ratio,second_ratio")?;
    for j in &r.jumps {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            j.step,
            j.from,
            j.to,
            format_f64(j.first),
            opt(j.second),
            format_f64(j.first_ratio),
            opt(j.second_ratio)
        )?;
    }
    Ok(())
}

pub fn smoothness_summary(r: &SmoothnessReport) -> String {
    if r.jumps.is_empty() {
        return "no chart transitions\n".into();
    }
    format!(
        "transitions: {}\nwithin-chart median |dx|: {:.4e}\nwithin-chart median |d2x|: {:.4e}\nmax first-difference ratio: {:.3}\nmax second-difference ratio: {:.3}\n",
        r.jumps.len(),
        r.median_first,
        r.median_second,
        r.max_first_ratio().unwrap_or(f64::NAN),
        r.max_second_ratio().unwrap_or(f64::NAN)
    )
}

pub fn periodicity_summary(name: &str, p: &Periodicity) -> String {
    match p {
        Periodicity::Periodic(e) => format!(
            "{name}: periodic, period {:.6} ± {:.6} ({:.3} samples, recurrence {:.2e} of rms)\n",
            e.period, e.uncertainty, e.period_steps, e.relative_distance
        ),
        Periodicity::Aperiodic {
            best_lag_steps,
            relative_distance,
        } => format!(
            "{name}: aperiodic (closest recurrence {relative_distance:.2e} of rms at {best_lag_steps:.3} samples)\n"
        ),
        Periodicity::Constant => format!("{name}: constant\n"),
    }
}

pub fn write_bursting_csv<W: Write>(a: &BurstingAnalysis, dt: f64, mut w: W) -> Result<()> {
    writeln!(w, "burst,departure_time,arrival_time,upward,quadrant,symbol,dwell_before")?;
    for (i, e) in a.events.iter().enumerate() {
        let dwell = if i == 0 { None } else { a.dwell_times.get(i - 1).copied() };
        writeln!(
            w,
            "{i},{},{},{},{},{},{}",
            format_f64(e.departure as f64 * dt),
            format_f64(e.arrival as f64 * dt),
            u8::from(e.upward),
            e.quadrant,
            e.symbol,
            opt(dwell)
        )?;
    }
    Ok(())
}

pub fn bursting_summary(a: &BurstingAnalysis) -> String {
    let mut s = format!("verdict: {}\nbursts: {}\n", a.verdict.label(), a.events.len());
    if let Some(c) = &a.cycle {
        let _ = writeln!(s, "cycle: {c:?}");
    }
    if !a.dwell_times.is_empty() {
        let mean = a.dwell_times.iter().sum::<f64>() / a.dwell_times.len() as f64;
        let _ = writeln!(s, "mean dwell time: {mean:.4}");
    }
    s
}
