use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::RunRow;
use super::PipelineError;

/// Column order of the results CSV.
pub const CSV_COLUMNS: [&str; 13] = [
    "snr_unified_db",
    "channel",
    "coder",
    "decoder",
    "block_size",
    "ber",
    "bleu1",
    "bleu2",
    "bleu3",
    "bleu4",
    "rate",
    "num_bits",
    "seed",
];

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub snr_unified_db: f64,
    pub channel: String,
    pub coder: String,
    pub decoder: String,
    pub block_size: usize,
    pub ber: f64,
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub rate: f64,
    pub num_bits: usize,
    pub seed: u64,
}

impl From<&RunRow> for CsvRow {
    fn from(r: &RunRow) -> Self {
        Self {
            snr_unified_db: r.snr_unified_db,
            channel: r.channel.clone(),
            coder: r.coder.clone(),
            decoder: r.decoder.clone(),
            block_size: r.block_size,
            ber: r.ber,
            bleu1: r.bleu[0],
            bleu2: r.bleu[1],
            bleu3: r.bleu[2],
            bleu4: r.bleu[3],
            rate: r.rate,
            num_bits: r.num_bits,
            seed: r.seed,
        }
    }
}

pub fn write_csv(rows: &[CsvRow], w: impl Write) -> Result<(), PipelineError> {
    let mut out = csv::Writer::from_writer(w);
    if rows.is_empty() {
        out.write_record(CSV_COLUMNS)?;
    }
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv(r: impl Read) -> Result<Vec<CsvRow>, PipelineError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(PipelineError::Spec(format!("unexpected CSV header {header:?}")));
    }
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

/// Line plot of `metric` (`ber`, `bleu1` .. `bleu4`) against SNR, one line
/// per `(coder, decoder, block_size)` with the median over seeds. Output is
/// a pure function of the rows.
pub fn plot_svg(rows: &[CsvRow], metric: &str) -> Result<String, PipelineError> {
    let value = |r: &CsvRow| -> Result<f64, PipelineError> {
        Ok(match metric {
            "ber" => r.ber,
            "bleu1" => r.bleu1,
            "bleu2" => r.bleu2,
            "bleu3" => r.bleu3,
            "bleu4" => r.bleu4,
            _ => return Err(PipelineError::Spec(format!("cannot plot {metric:?}"))),
        })
    };
    let mut series: BTreeMap<String, BTreeMap<i64, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        let v = value(r)?;
        if !v.is_finite() || !r.snr_unified_db.is_finite() {
            continue;
        }
        let key = format!("{} {} b{}", r.coder, r.decoder, r.block_size);
        // Milli-dB keys keep the points ordered and mergeable.
        let x = (r.snr_unified_db * 1000.0).round() as i64;
        series.entry(key).or_default().entry(x).or_default().push(v);
    }
    let lines: Vec<(String, Vec<(f64, f64)>)> = series
        .into_iter()
        .map(|(k, pts)| {
            let pts = pts.into_iter().map(|(x, vs)| (x as f64 / 1000.0, super::run::median(&vs))).collect();
            (k, pts)
        })
        .collect();
    let xs = lines.iter().flat_map(|(_, p)| p.iter().map(|q| q.0));
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (x0, x1) = if x0.is_finite() { (x0, x1.max(x0 + 1.0)) } else { (0.0, 1.0) };
    let y1 = if metric == "ber" {
        lines
            .iter()
            .flat_map(|(_, p)| p.iter().map(|q| q.1))
            .fold(0.0_f64, f64::max)
            .max(1e-6)
    } else {
        1.0
    };

    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (640, 420)).into_drawing_area();
        let err = |e: &dyn std::fmt::Display| PipelineError::Plot(e.to_string());
        root.fill(&WHITE).map_err(|e| err(&e))?;
        let mut chart = ChartBuilder::on(&root)
            .margin(20)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .caption(format!("{metric} vs SNR_unified"), ("sans-serif", 18))
            .build_cartesian_2d(x0..x1, 0.0..y1 * 1.05)
            .map_err(|e| err(&e))?;
        chart
            .configure_mesh()
            .x_desc("SNR_unified (dB)")
            .y_desc(metric)
            .draw()
            .map_err(|e| err(&e))?;
        for (i, (name, pts)) in lines.iter().enumerate() {
            let color = Palette99::pick(i).to_rgba();
            chart
                .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
                .map_err(|e| err(&e))?
                .label(name.clone())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(|e| err(&e))?;
        root.present().map_err(|e| err(&e))?;
    }
    Ok(svg)
}

/// Writes `results.csv`, `ber.svg` and `bleu4.svg` into `dir`.
pub fn write_report(rows: &[RunRow], dir: impl AsRef<Path>) -> Result<(), PipelineError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let csv_rows: Vec<CsvRow> = rows.iter().map(CsvRow::from).collect();
    write_csv(&csv_rows, fs::File::create(dir.join("results.csv"))?)?;
    for metric in ["ber", "bleu4"] {
        fs::write(dir.join(format!("{metric}.svg")), plot_svg(&csv_rows, metric)?)?;
    }
    Ok(())
}
