//! The figures written by `compare`.

use fairaa::{DataMatrix, GroupLabels};

use crate::commands::ComparisonReport;
use crate::svg::{self, Marker, Series};

fn xy(m: &DataMatrix, i: usize) -> (f64, f64) {
    let row = m.row(i);
    (row[0], row.get(1).copied().unwrap_or(0.0))
}

fn group_series(points: &DataMatrix, labels: &GroupLabels, names: &[String]) -> Vec<Series> {
    (0..labels.groups())
        .map(|g| Series {
            name: names.get(g).cloned().unwrap_or_else(|| g.to_string()),
            points: labels.members(g).into_iter().map(|i| xy(points, i)).collect(),
            color: svg::color(g),
            marker: Marker::Circle,
            size: 2.5,
        })
        .collect()
}

/// Data colored by group with archetype positions of selected models.
pub fn data_with_archetypes(
    x: &DataMatrix,
    labels: &GroupLabels,
    names: &[String],
    overlays: &[(f64, DataMatrix)],
) -> String {
    let mut series = group_series(x, labels, names);
    let styles = [(Marker::Diamond, "#000000"), (Marker::Cross, "#7f7f7f")];
    for ((lambda, archetypes), (marker, color)) in overlays.iter().zip(styles) {
        series.push(Series {
            name: format!("archetypes λ={lambda}"),
            points: (0..archetypes.rows()).map(|i| xy(archetypes, i)).collect(),
            color,
            marker,
            size: 7.0,
        });
    }
    svg::scatter("Data and archetypes", "feature 0", "feature 1", &series)
}

/// First two columns of `S`, colored by group.
pub fn projection(s: &DataMatrix, labels: &GroupLabels, names: &[String], lambda: f64) -> String {
    svg::scatter(
        &format!("Projection, λ={lambda}"),
        "s0",
        "s1",
        &group_series(s, labels, names),
    )
}

fn categories(report: &ComparisonReport) -> Vec<String> {
    report.entries.iter().map(|e| e.lambda.to_string()).collect()
}

/// EV, MMD² and LS accuracy over the grid.
pub fn metric_lines(report: &ComparisonReport) -> String {
    let pick = |f: fn(&fairaa::MetricsReport) -> f64| {
        report
            .entries
            .iter()
            .map(|e| e.metrics.as_ref().map_or(f64::NAN, f))
            .collect::<Vec<_>>()
    };
    svg::line_chart(
        "Metrics by λ",
        "λ",
        "value",
        &categories(report),
        &[
            ("explained variance".into(), pick(|m| m.explained_variance)),
            ("MMD²".into(), pick(|m| m.mmd2)),
            ("LS accuracy".into(), pick(|m| m.ls_accuracy)),
        ],
    )
}

/// EV and LS drops against the baseline.
pub fn delta_bars(report: &ComparisonReport) -> String {
    let pick = |f: fn(&crate::commands::Delta) -> f64| {
        report
            .entries
            .iter()
            .map(|e| report.delta(e.lambda).map_or(f64::NAN, f))
            .collect::<Vec<_>>()
    };
    svg::bar_chart(
        "Change from λ=0",
        "λ",
        "drop",
        &categories(report),
        &[
            ("EV drop".into(), pick(|d| d.ev_drop)),
            ("LS drop".into(), pick(|d| d.ls_drop)),
        ],
    )
}
