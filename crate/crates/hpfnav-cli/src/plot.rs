//! Plot kinds over trajectory logs and solved fields.

use crate::svg::{line_chart, Series, SvgDoc, PALETTE};
use hpfnav_core::io::FieldHeader;
use hpfnav_core::sim::TrajectoryLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    XyzVsT,
    RadialSpeed,
    Orientation,
    Controls,
    InterDistance,
    HeatmapPath,
    Xy,
    Yz,
}

impl PlotKind {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "xyz_vs_t" => PlotKind::XyzVsT,
            "radial_speed" => PlotKind::RadialSpeed,
            "orientation" => PlotKind::Orientation,
            "controls" => PlotKind::Controls,
            "inter_distance" => PlotKind::InterDistance,
            "heatmap_path" => PlotKind::HeatmapPath,
            "xy" => PlotKind::Xy,
            "yz" => PlotKind::Yz,
            _ => return None,
        })
    }

    pub const NAMES: &'static [&'static str] = &[
        "xyz_vs_t",
        "radial_speed",
        "orientation",
        "controls",
        "inter_distance",
        "heatmap_path",
        "xy",
        "yz",
    ];
}

pub fn plot_log(kind: PlotKind, log: &TrajectoryLog) -> String {
    let t: Vec<f64> = log.rows.iter().map(|r| r.t).collect();
    let series_of = |label: &str, idx: usize, values: Vec<f64>| Series {
        label: label.to_string(),
        points: t.iter().copied().zip(values).collect(),
        color: PALETTE[idx % PALETTE.len()],
        dashed: false,
    };
    match kind {
        PlotKind::XyzVsT => {
            let s = vec![
                series_of("x", 0, log.rows.iter().map(|r| r.p[0]).collect()),
                series_of("y", 1, log.rows.iter().map(|r| r.p[1]).collect()),
                series_of("z", 2, log.rows.iter().map(|r| r.p[2]).collect()),
            ];
            line_chart("position components", "t [s]", "length", &s)
        }
        PlotKind::RadialSpeed => {
            let s = vec![series_of(
                "v",
                0,
                log.rows.iter().map(|r| r.lambda[0]).collect(),
            )];
            line_chart("radial speed", "t [s]", "v", &s)
        }
        PlotKind::Orientation => {
            let s = vec![
                series_of("angle 1", 0, log.rows.iter().map(|r| r.lambda[1]).collect()),
                series_of("angle 2", 1, log.rows.iter().map(|r| r.lambda[2]).collect()),
            ];
            line_chart("orientation angles", "t [s]", "rad", &s)
        }
        PlotKind::Controls => {
            let s: Vec<Series> = (0..log.control_dim)
                .map(|i| {
                    series_of(
                        &format!("u{}", i + 1),
                        i,
                        log.rows.iter().map(|r| r.u[i]).collect(),
                    )
                })
                .collect();
            line_chart("control signals", "t [s]", "u", &s)
        }
        PlotKind::Xy => {
            let s = vec![Series {
                label: "path".into(),
                points: log.rows.iter().map(|r| (r.p[0], r.p[1])).collect(),
                color: PALETTE[0],
                dashed: false,
            }];
            line_chart("x-y projection", "x", "y", &s)
        }
        PlotKind::Yz => {
            let s = vec![Series {
                label: "path".into(),
                points: log.rows.iter().map(|r| (r.p[1], r.p[2])).collect(),
                color: PALETTE[0],
                dashed: false,
            }];
            line_chart("y-z projection", "y", "z", &s)
        }
        PlotKind::InterDistance | PlotKind::HeatmapPath => {
            unreachable!("handled by dedicated entry points")
        }
    }
}

/// Inter-vehicle distance series (t, distance).
pub fn plot_inter_distance(series: &[(f64, f64)]) -> String {
    let s = vec![Series {
        label: "distance".into(),
        points: series.to_vec(),
        color: PALETTE[0],
        dashed: false,
    }];
    line_chart("inter-vehicle distance", "t [s]", "length", &s)
}

/// A named path overlaid on a field heatmap; dashed styling distinguishes
/// kinematic from dynamic trajectories.
pub struct OverlayPath {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

/// Grayscale potential heatmap with overlaid paths, in world coordinates.
pub fn plot_heatmap(header: &FieldHeader, values: &[f64], paths: &[OverlayPath]) -> String {
    let (nx, ny) = (header.shape[0], header.shape.get(1).copied().unwrap_or(1));
    let h = header.spacing;
    let cell_px = (720.0 / nx as f64).min(720.0 / ny as f64).min(20.0);
    let (mt, ml) = (30.0, 30.0);
    let w = ml + nx as f64 * cell_px + 20.0;
    let hh = mt + ny as f64 * cell_px + 40.0;
    let mut doc = SvgDoc::new(w, hh);
    doc.rect(0.0, 0.0, w, hh, "#ffffff");
    doc.text(
        ml,
        18.0,
        12.0,
        &format!(
            "{} field  {}x{}  residual {:.2e}",
            header.variant, nx, ny, header.residual
        ),
    );
    for j in 0..ny {
        for i in 0..nx {
            let v = values[j * nx + i].clamp(0.0, 1.0);
            let shade = (v * 255.0).round() as u8;
            let color = format!("#{shade:02x}{shade:02x}{shade:02x}");
            doc.rect(
                ml + i as f64 * cell_px,
                mt + j as f64 * cell_px,
                cell_px,
                cell_px,
                &color,
            );
        }
    }
    // World position (x, y) to pixel: world x spans nx * spacing.
    let to_px = |x: f64, y: f64| (ml + x / h * cell_px, mt + y / h * cell_px);
    for (i, path) in paths.iter().enumerate() {
        let pts: Vec<(f64, f64)> = path.points.iter().map(|&(x, y)| to_px(x, y)).collect();
        let color = PALETTE[(i + 1) % PALETTE.len()];
        doc.polyline(&pts, color, 2.0, path.dashed);
        doc.text(
            ml,
            mt + ny as f64 * cell_px + 16.0 + 13.0 * i as f64,
            11.0,
            &format!("{} ({})", path.label, if path.dashed { "dotted" } else { "solid" }),
        );
    }
    doc.finish()
}
