//! Convergence curve: cumulative share of traces converged by each round.

use planverify::eval::{percent, ConvergenceStats};
use plotters::prelude::*;

use crate::{CliError, CliResult};

const SIZE: (u32, u32) = (640, 400);

/// `(round, cumulative percent)` for every round, percent rounded to one decimal.
pub fn curve_points(stats: &ConvergenceStats) -> Vec<(u32, f64)> {
    stats
        .cumulative
        .iter()
        .enumerate()
        .map(|(i, r)| (i as u32 + 1, percent(*r).parse::<f64>().expect("percent renders a decimal")))
        .collect()
}

pub fn convergence_svg(stats: &ConvergenceStats) -> CliResult<String> {
    let points = curve_points(stats);
    let rounds = points.len().max(1) as u32;
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        draw(&root, &points, rounds).map_err(|e| CliError::Fatal(format!("cannot render plot: {e}")))?;
        root.present().map_err(|e| CliError::Fatal(format!("cannot render plot: {e}")))?;
    }
    Ok(svg)
}

fn draw<DB: DrawingBackend>(
    root: &DrawingArea<DB, plotters::coord::Shift>,
    points: &[(u32, f64)],
    rounds: u32,
) -> Result<(), DrawingAreaErrorKind<DB::ErrorType>> {
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(root)
        .caption("Traces converged by round (cumulative %)", ("sans-serif", 18))
        .margin(16)
        .x_label_area_size(36)
        .y_label_area_size(44)
        .build_cartesian_2d(0u32..rounds + 1, 0f64..105f64)?;
    chart
        .configure_mesh()
        .x_desc("round")
        .y_desc("% converged")
        .x_labels(rounds as usize + 2)
        .disable_x_mesh()
        .draw()?;
    let blue = RGBColor(0x1f, 0x77, 0xb4);
    chart.draw_series(LineSeries::new(points.iter().map(|&(x, y)| (x, y)), blue.stroke_width(2)))?;
    chart.draw_series(points.iter().map(|&(x, y)| Circle::new((x, y), 4, blue.filled())))?;
    chart.draw_series(
        points.iter().map(|&(x, y)| Text::new(format!("{y:.1}%"), (x, (y - 7.0).max(1.0)), ("sans-serif", 12))),
    )?;
    Ok(())
}
